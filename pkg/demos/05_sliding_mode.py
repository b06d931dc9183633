"""
Sample-and-hold sliding mode on a double integrator
===================================================

The switching law u = -k sgn(x1 + x2) drives the state onto the surface
x1 + x2 = 0 and then chatters along it towards the origin.  The chattering
band shrinks with the sampling time.
"""

import numpy as np

from nsstab import (SamplingSchedule, make_smc_demo, simulate, smc,
                    verify_practical_stability)
from nsstab.controllers import smc_demo_params

plant = make_smc_demo()
ctrl = smc(smc_demo_params(plant, k=1.5), plant)

for delta in (0.01, 0.001):
    log = simulate(plant, ctrl, [1.0, 1.0], SamplingSchedule(delta, 20.0))
    X = log.state_array()
    chi = X[:, 0] + X[:, 1]
    t = np.asarray(log.times)
    reach = t[np.argmax(np.abs(chi) <= 10 * delta)]
    v = verify_practical_stability(log, R=2.0, r=0.1, T_entry=20.0)
    print(f"delta={delta}: surface reached at t={reach:.3f}, "
          f"late |chi| <= {np.abs(chi[t > 10]).max():.2e}, final |x| = {log.norms()[-1]:.2e}, "
          f"passed={v.passed}")
