"""Control Lyapunov functions and backstepping constructions.

Contents
--------
* ``v1_ni``, ``v2_ni``: nonsmooth CLFs of the nonholonomic integrator.
* ``ni_family``: a marginal-function CLF ``min_theta F(x; theta)`` for it,
  together with the Sontag-type feedback ``sontag_kappa_ni``.
* ``artstein_v`` / ``artstein_family``: CLF of the kinematic Artstein
  circle and its marginal representation.
* Backstepped composites ``V_c = min_theta {F + |eta - kappa|^2 / 2}`` for
  the dynamic extensions, with the explicit control laws
  ``kappa_c_endi`` and ``kappa_c_artstein``.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .calculus import MarginalFamily, ScalarField
from .errors import ConfigError, GuardedDomainError
from .systems import artstein_g, ni_G

TWO_PI = 2.0 * np.pi


def _rows(X, n):
    return np.atleast_2d(np.asarray(X, dtype=float)).reshape(-1, n)


def v1_ni(x):
    x = np.asarray(x, dtype=float)
    rho = np.hypot(x[..., 0], x[..., 1])
    a3 = np.abs(x[..., 2])
    return rho**2 + 2 * x[..., 2] ** 2 - 2 * a3 * rho


def v2_ni(x):
    x = np.asarray(x, dtype=float)
    a3 = np.abs(x[..., 2])
    return (x[..., 0] ** 2 + x[..., 1] ** 2 + 2 * x[..., 2] ** 2
            + a3 * (10 - 2 * (np.abs(x[..., 0]) + np.abs(x[..., 1]))))


# --- nonholonomic integrator family -------------------------------------

def _ni_den(X, TH):
    th = TH[:, 0]
    return X[:, 0] * np.cos(th) + X[:, 1] * np.sin(th) + np.sqrt(np.abs(X[:, 2]))


def _ni_guard_den(X, TH):
    # the fraction vanishes identically on x3 = 0, so no guard is needed there
    return np.where(X[:, 2] == 0, np.inf, _ni_den(X, TH))


def _ni_F(X, TH):
    x1, x2 = X[:, 0], X[:, 1]
    a3 = np.abs(X[:, 2])
    den = _ni_den(X, TH)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        frac = a3 * a3 * a3 / (den * den)
    zero = a3 == 0
    if zero.any():
        frac = np.where(zero, 0.0, frac)
    x1s, x2s = x1 * x1, x2 * x2
    return x1s * x1s + x2s * x2s + frac


def _ni_dFdx(X, TH):
    X, TH = _rows(X, 3), _rows(TH, 1)
    th = TH[:, 0]
    x3 = X[:, 2]
    a3 = np.abs(x3)
    den = _ni_den(X, TH)
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(a3 == 0, 0.0, 2 * a3**3 / den**3)
        d3 = np.where(a3 == 0, 0.0,
                      3 * x3 * a3 / den**2 - np.sign(x3) * a3**2.5 / den**3)
    return np.stack([4 * X[:, 0] ** 3 - c * np.cos(th),
                     4 * X[:, 1] ** 3 - c * np.sin(th),
                     d3], axis=-1)


def ni_family(singular_guard=1e-6, theta_accuracy=1e-12):
    """``F(x; theta) = x1^4 + x2^4 + |x3|^3 / (x1 cos + x2 sin + sqrt|x3|)^2``."""
    return MarginalFamily(3, [[0.0, TWO_PI]], _ni_F, _ni_dFdx, singular_guard,
                          _ni_guard_den, theta_accuracy, label="ni_family", periodic=True)


def ni_family_closed_form(x):
    """Closed-form marginal value: the denominator is maximized in |.| at
    ``theta = atan2(x2, x1)``."""
    x = np.asarray(x, dtype=float)
    rho = np.hypot(x[..., 0], x[..., 1])
    a3 = np.abs(x[..., 2])
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(a3 == 0, 0.0, a3**3 / (rho + np.sqrt(a3)) ** 2)
    return x[..., 0] ** 4 + x[..., 1] ** 4 + frac


def _ni_composite_F(XE, TH, guard=0.0):
    """``F + |eta - kappa|^2 / 2`` on ``(x, eta)`` rows, sharing subexpressions.

    This sits in the innermost loop of the backstepping CLF, hence the
    hand-expanded powers.  Rows with ``|den| < guard`` (and ``x3 != 0``)
    get ``inf``.
    """
    x1, x2, x3 = XE[:, 0], XE[:, 1], XE[:, 2]
    th = TH[:, 0]
    c, s = np.cos(th), np.sin(th)
    a3 = np.abs(x3)
    sa = np.sqrt(a3)
    den = x1 * c + x2 * s + sa
    x1s, x2s = x1 * x1, x2 * x2
    with np.errstate(all="ignore"):
        inv = 1.0 / den
        inv2 = inv * inv
        a3sq = a3 * a3
        frac = a3sq * a3 * inv2
        q = 2.0 * frac * inv
        d3 = inv2 * (3.0 * x3 * a3 - np.copysign(a3sq * sa, x3) * inv)
        e1 = XE[:, 3] - (x2 * d3 - 4.0 * x1s * x1 + q * c)
        e2 = XE[:, 4] - (q * s - 4.0 * x2s * x2 - x1 * d3)
        out = x1s * x1s + x2s * x2s + frac + 0.5 * (e1 * e1 + e2 * e2)
    zero = a3 == 0
    if zero.any():
        e1 = XE[:, 3] + 4.0 * x1s * x1
        e2 = XE[:, 4] + 4.0 * x2s * x2
        out = np.where(zero, x1s * x1s + x2s * x2s + 0.5 * (e1 * e1 + e2 * e2), out)
    if guard > 0:
        bad = (np.abs(den) < guard) & ~zero
        if bad.any():
            out = np.where(bad, np.inf, out)
    return out


def _ni_kappa(X, TH):
    """Sontag-type feedback ``-(<zeta, g1>, <zeta, g2>)``, batched."""
    X = _rows(X, 3)
    Z = _ni_dFdx(X, TH)
    return -np.stack([Z[:, 0] - X[:, 1] * Z[:, 2], Z[:, 1] + X[:, 0] * Z[:, 2]], axis=-1)


# --- Artstein's circle ---------------------------------------------------

def artstein_v(v):
    v = np.asarray(v, dtype=float)
    return np.sqrt(3 * v[..., 0] ** 2 + 4 * v[..., 1] ** 2) - np.abs(v[..., 0])


def _art_r(X):
    return np.sqrt(3 * X[:, 0] ** 2 + 4 * X[:, 1] ** 2)


def _art_F(X, TH):
    return _art_r(X) + X[:, 0] * (TH[:, 0] / np.pi - 1.0)


def _art_dFdx(X, TH, guard=1e-12):
    X, TH = _rows(X, 2), _rows(TH, 1)
    r = _art_r(X)
    safe = np.where(r > guard, r, 1.0)
    dr = np.where((r > guard)[:, None],
                  np.stack([3 * X[:, 0] / safe, 4 * X[:, 1] / safe], axis=-1), 0.0)
    return dr + np.stack([TH[:, 0] / np.pi - 1.0, np.zeros(len(X))], axis=-1)


def artstein_family(theta_accuracy=1e-12):
    """``F(v; theta) = sqrt(3 x1^2 + 4 x2^2) + x1 (theta / pi - 1)``, theta in [0, 2 pi].

    Its minimum over theta is exactly ``artstein_v``: the concave part
    ``-|x1|`` is a minimum of linear functions, while the convex norm term
    is kept whole (it is smooth away from the origin).
    """
    return MarginalFamily(2, [[0.0, TWO_PI]], _art_F, _art_dFdx, 0.0, None,
                          theta_accuracy, label="artstein_family")


def artstein_affine_family(theta_accuracy=1e-12):
    """The fully affine two-parameter family
    ``sqrt3 x1 cos t1 + 2 x2 sin t1 + x1 (t2 / pi - 1)`` on ``[0, 2 pi]^2``.

    Kept for comparison only: its minimum over the parameters is
    ``-(sqrt(3 x1^2 + 4 x2^2) + |x1|)``, which is negative definite, so it
    is not a representation of ``artstein_v``.
    """
    s3 = np.sqrt(3.0)

    def F(X, TH):
        return (s3 * X[:, 0] * np.cos(TH[:, 0]) + 2 * X[:, 1] * np.sin(TH[:, 0])
                + X[:, 0] * (TH[:, 1] / np.pi - 1.0))

    def dF(X, TH):
        X, TH = _rows(X, 2), _rows(TH, 2)
        return np.stack([s3 * np.cos(TH[:, 0]) + TH[:, 1] / np.pi - 1.0,
                         2 * np.sin(TH[:, 0])], axis=-1)

    return MarginalFamily(2, [[0.0, TWO_PI], [0.0, TWO_PI]], F, dF, 0.0, None,
                          theta_accuracy, label="artstein_affine_family")


def _art_kappa(X, TH):
    X = _rows(X, 2)
    Z = _art_dFdx(X, TH)
    return -np.sum(Z * artstein_g(X), axis=-1)[:, None]


# --- backstepping --------------------------------------------------------

def _jacobian_fd(kappa, X, TH, step):
    """Central-difference Jacobian of ``kappa`` in x at frozen theta: (k, m, n)."""
    k, n = X.shape
    cols = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = step
        cols.append((kappa(X + e, TH) - kappa(X - e, TH)) / (2 * step))
    return np.stack(cols, axis=-1)


@dataclass
class BacksteppingContext:
    """Data of a backstepped composite ``min_theta {F + |e - kappa|^2 / 2}``.

    ``kappa(X, TH)`` is the virtual feedback of the base family, ``G(X)``
    the input matrix of the kinematic subsystem, shape ``(k, n, m)``.
    """

    base_family: MarginalFamily
    kappa: Callable
    G: Callable
    m: int
    K: float = 1.0
    fused_F: Optional[Callable] = None
    theta_tol: float = 1e-6
    fd_step: float = 1e-5
    simplified: bool = False
    label: str = ""
    _composite: Optional[MarginalFamily] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.K > 0:
            raise ValueError("gain K must be positive")
        if not 1e-8 <= self.fd_step <= 1e-3:
            raise ValueError("fd_step must lie in [1e-8, 1e-3]")

    @property
    def n(self):
        return self.base_family.dim

    def split(self, XE):
        XE = _rows(XE, self.n + self.m)
        return XE[:, : self.n], XE[:, self.n:]

    def kappa_jacobian(self, X, TH):
        return _jacobian_fd(self.kappa, _rows(X, self.n), _rows(TH, self.base_family.theta_dim),
                            self.fd_step)

    def composite(self):
        """The composite marginal family on the extended state."""
        if self._composite is None:
            base, n = self.base_family, self.n

            def F(XE, TH):
                if self.fused_F is not None:
                    return self.fused_F(XE, TH)
                X, E = XE[:, :n], XE[:, n:]
                with np.errstate(all="ignore"):
                    return base.F(X, TH) + 0.5 * np.sum((E - self.kappa(X, TH)) ** 2, axis=1)

            def dF(XE, TH):
                X, E = self.split(XE)
                TH = _rows(TH, base.theta_dim)
                z = E - self.kappa(X, TH)
                J = self.kappa_jacobian(X, TH)
                dx = base.dFdx(X, TH) - np.einsum("kmn,km->kn", J, z)
                return np.concatenate([dx, z], axis=1)

            den = None
            if base.denominator is not None:
                def den(XE, TH):
                    return base.denominator(XE[:, :n], TH)

            self._composite = MarginalFamily(n + self.m, base.theta_box, F, dF,
                                             base.singular_guard, den, base.theta_accuracy,
                                             base.grid_points, label=self.label,
                                             guarded_by_F=self.fused_F is not None,
                                             periodic=base.periodic)
        return self._composite

    def value_field(self):
        return self.composite().field()


def endi_context(K=1.0, theta_tol=1e-6, fd_step=1e-5, singular_guard=1e-6, simplified=False):
    def fused(XE, TH):
        return _ni_composite_F(XE, TH, singular_guard)
    return BacksteppingContext(ni_family(singular_guard), _ni_kappa, ni_G, 2, K, fused, theta_tol, fd_step, simplified, "vc_endi")


def artstein_context(K=1.0, theta_tol=1e-6, fd_step=1e-5, simplified=False):
    def G(X):
        return artstein_g(_rows(X, 2))[:, :, None]
    return BacksteppingContext(artstein_family(), _art_kappa, G, 1, K, None, theta_tol,
                               fd_step, simplified, "vc_artstein")


def sontag_kappa_ni(ctx, x, theta):
    """``kappa(x; theta) = -(<zeta, g1>, <zeta, g2>)`` with ``zeta = dF/dx``."""
    x = _rows(x, 3)
    th = _rows(theta, 1)
    if not ctx.base_family.admissible(x, th)[0]:
        raise GuardedDomainError(f"theta={th[0, 0]} is guarded at x={x[0]}")
    return _ni_kappa(x, th)[0]


def kappa_artstein(ctx, v, theta):
    """``kappa(v; theta) = -<zeta(v; theta), g(v)>``."""
    return float(_art_kappa(_rows(v, 2), _rows(theta, 1))[0, 0])


def composite_minimize(ctx, xe):
    """``(V_c, theta_c*)`` at the extended state ``xe``."""
    TH, vals = ctx.composite().minimize_theta(_rows(xe, ctx.n + ctx.m))
    return float(vals[0]), TH[0]


def vc_endi(ctx, x, eta):
    return composite_minimize(ctx, np.concatenate([np.ravel(x), np.ravel(eta)]))


def vc_artstein(ctx, v, w):
    return composite_minimize(ctx, np.concatenate([np.ravel(v), np.ravel(w)]))


def backstep_terms(ctx, xe, theta):
    """Pieces of the composite decay expression at a frozen ``theta``.

    Returns a dict with ``zeta``, ``G``, ``kappa``, ``z``, ``J`` (Jacobian of
    kappa in x) and ``eta`` for the single state ``xe``.
    """
    X, E = ctx.split(xe)
    TH = _rows(theta, ctx.base_family.theta_dim)
    if not ctx.base_family.admissible(X, TH)[0]:
        raise GuardedDomainError(f"theta={TH[0]} is guarded at x={X[0]}")
    kap = ctx.kappa(X, TH)[0]
    return {
        "zeta": ctx.base_family.dFdx(X, TH)[0],
        "G": ctx.G(X)[0],
        "kappa": kap,
        "z": E[0] - kap,
        "J": ctx.kappa_jacobian(X, TH)[0],
        "eta": E[0],
    }


def backstep_control(ctx, xe, theta):
    """``u = J G eta - G^T zeta - K z`` (only ``-K z`` in simplified mode)."""
    t = backstep_terms(ctx, xe, theta)
    if ctx.simplified:
        return -ctx.K * t["z"]
    return t["J"] @ (t["G"] @ t["eta"]) - t["G"].T @ t["zeta"] - ctx.K * t["z"]


def s_value(ctx, xe, theta, u):
    """Decay expression ``<zeta_c, f>`` expanded term by term.

    ``<zeta, G z> + <zeta, G kappa> - <J^T z, G eta> + <z, u>``
    """
    t = backstep_terms(ctx, xe, theta)
    zeta, G, z, J, eta = t["zeta"], t["G"], t["z"], t["J"], t["eta"]
    return float(zeta @ (G @ z) + zeta @ (G @ t["kappa"]) - (J.T @ z) @ (G @ eta)
                 + z @ np.ravel(u))


def kappa_c_endi(ctx, x, eta, theta=None):
    """Backstepping torque law for the dynamic nonholonomic integrator."""
    xe = np.concatenate([np.ravel(x), np.ravel(eta)])
    if theta is None:
        theta = composite_minimize(ctx, xe)[1]
    return backstep_control(ctx, xe, theta)


def kappa_c_artstein(ctx, v, w, theta=None):
    """Backstepping law ``u = w <grad kappa, g> - <zeta, g> - K z`` for Artstein's circle."""
    xe = np.concatenate([np.ravel(v), np.ravel(w)])
    if theta is None:
        theta = composite_minimize(ctx, xe)[1]
    return float(backstep_control(ctx, xe, theta)[0])


CLF_LABELS = ("v1_ni", "v2_ni", "ni_family", "artstein_v", "artstein_family",
              "vc_endi", "vc_artstein")


def get_clf(label):
    """A :class:`ScalarField` by label."""
    if label == "v1_ni":
        return ScalarField(3, v1_ni, label=label)
    if label == "v2_ni":
        return ScalarField(3, v2_ni, label=label)
    if label == "ni_family":
        return ni_family().field()
    if label == "artstein_v":
        return ScalarField(2, artstein_v, label=label)
    if label == "artstein_family":
        return artstein_family().field()
    if label == "vc_endi":
        return endi_context().value_field()
    if label == "vc_artstein":
        return artstein_context().value_field()
    raise ConfigError(f"unknown CLF {label!r}; choose from {list(CLF_LABELS)}")


def get_family(label):
    """A :class:`MarginalFamily` by label (for decay and subdifferential checks)."""
    if label == "ni_family":
        return ni_family()
    if label == "artstein_family":
        return artstein_family()
    if label == "vc_endi":
        return endi_context().composite()
    if label == "vc_artstein":
        return artstein_context().composite()
    return None
