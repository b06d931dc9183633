"""
Generalized derivatives of nonsmooth functions
==============================================

A tour of the calculus primitives on small scalar examples: lower
directional derivatives, the Moreau envelope (inf-convolution), proximal
and limiting subgradients, and the finite "disassembled" subdifferential of
a marginal function.
"""

import numpy as np

from nsstab import (ScalarField, check_prox_inequality, check_semiconcavity,
                    disassembled_subdifferential, inf_convolution, ldgd,
                    limiting_subdifferential_1d)
from nsstab.clf import artstein_family, ni_family

# The absolute value has a one-sided slope of 1 in either direction at 0.
absf = ScalarField(1, lambda X: np.abs(X[:, 0]), label="|x|")
print("D_{+1}|x| at 0 :", ldgd(absf, [0.0], [1.0]))
print("D_{-1}|x| at 0 :", ldgd(absf, [0.0], [-1.0]))

# The Moreau envelope smooths |x| into a Huber function.  Far from the
# kink the minimizer sits alpha^2 closer to the origin and the proximal
# subgradient is the sign of x.
for x in (2.0, 0.5, 0.005):
    v, y, _ = inf_convolution(absf, [x], 0.1, 1e-12)
    print(f"x={x:6.3f}  envelope={v:.6f}  y={y[0]:.6f}  zeta={(x - y[0]) / 0.01:.4f}")

# A concave kink at x = 1: slope 2 from the left, 0 from the right.
kink = ScalarField(1, lambda X: np.where(X[:, 0] < 1, X[:, 0] ** 2, (X[:, 0] - 1) ** 2 + 1))
lim = limiting_subdifferential_1d(kink, 1.0, 0.1)
print("limiting subgradients at the kink:", sorted(round(float(v[0]), 6) for v in lim))
print("Clarke hull:", lim.clarke_hull())

# The proximal inequality fails for every candidate slope: the slope drops
# across the kink, so no parabola touches the graph from below there.
grid = np.linspace(-3, 5, 41)
print("proximal candidates accepted:",
      sum(check_prox_inequality(kink, [1.0], [z], 10.0, 0.1) for z in grid), "of", grid.size)

# Semiconcavity: concave kinks are fine, convex kinks are not.
print("-|x|^2 semiconcave (C=0):",
      check_semiconcavity(ScalarField(2, lambda X: -np.sum(X**2, 1)), [[-1, 1]] * 2, 0.0).passed)
print("|x| semiconcave (C=100):", check_semiconcavity(absf, [[-1, 1]], 100.0, 10_000).passed)

# Marginal functions V(x) = min_theta F(x; theta) expose a finite set of
# gradients dF/dx(x; theta*) over the minimizing parameters.
print("NI family at (1,0,0):", disassembled_subdifferential(ni_family(), [1.0, 0, 0]).as_array())
pole = disassembled_subdifferential(artstein_family(), [0.0, 1.0]).as_array()
print(f"Artstein family at (0,1): {len(pole)} gradients, first coordinate spans "
      f"[{pole[:, 0].min():.3f}, {pole[:, 0].max():.3f}], second is {pole[0, 1]:.3f}")
