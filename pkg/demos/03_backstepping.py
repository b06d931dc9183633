"""
Nonsmooth backstepping on two dynamic extensions
================================================

The marginal-function CLF of a kinematic system is lifted to its dynamic
extension by adding the squared error between the actuator state and the
kinematic feedback, minimized jointly over the family parameter.  The
resulting closed-form torque law is evaluated at the minimizing parameter
and clamped to the control box.
"""

import numpy as np

from nsstab import (SamplingSchedule, backstepping_artstein, backstepping_endi,
                    make_artstein_dyn, make_endi, simulate, verify_practical_stability)
from nsstab.clf import artstein_context, composite_minimize, endi_context
from nsstab.controllers import backstep_decay

# Three-wheel robot with dynamic actuators.
ctx = endi_context(K=1.0)
xe0 = np.array([-1.0, 0.5, 0.01, 0.05, 0.075])
value, theta = composite_minimize(ctx, xe0)
print(f"V_c(x0) = {value:.4f} at theta* = {theta[0]:.4f}")
print(f"decay expression at x0: {backstep_decay(ctx, xe0, theta):.4f}")

# The decay expression is negative throughout a ball around the origin.
rng = np.random.default_rng(0)
S = []
for _ in range(50):
    d = rng.normal(size=5)
    xe = 2 * rng.uniform() ** 0.2 * d / np.linalg.norm(d)
    S.append(backstep_decay(ctx, xe))
print(f"S < 0 at {np.sum(np.array(S) < 0)}/50 random states, max S = {max(S):.3g}")

endi = make_endi()
log = simulate(endi, backstepping_endi(ctx, endi), xe0, SamplingSchedule(0.005, 10.0),
               ctx.value_field())
v = verify_practical_stability(log, R=2.0, r=0.1, T_entry=10.0)
saturated = sum("saturated" in f for f in log.flags)
print(f"ENDI: final |x| {log.norms()[-1]:.4f}, entered B_0.1 at {v.entered_at}, "
      f"saturated on {saturated}/{len(log)} steps")

# Artstein's circle with an integrator in front of the input.
actx = artstein_context(K=1.0)
art = make_artstein_dyn()
log = simulate(art, backstepping_artstein(actx, art), [1.0, 0.0, 0.5],
               SamplingSchedule(0.005, 40.0), actx.value_field())
v = verify_practical_stability(log, R=2.0, r=0.2, T_entry=40.0)
print(f"Artstein: final |x| {log.norms()[-1]:.4f}, entered B_0.2 at {v.entered_at}, "
      f"passed={v.passed}")
