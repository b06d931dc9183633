"""Numerical nonsmooth calculus.

Directional generalized derivatives, inf-convolution and the subgradients
it produces, disassembled subdifferentials of marginal functions, and the
sampling checks (semiconcavity, proximal inequality, decay conditions,
local homogeneity of difference quotients) used to certify Lyapunov
functions numerically.

Scalar fields are batched: ``fn`` maps ``(k, n)`` points to ``(k,)``
values.  All sampling checks take an explicit ``seed``.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import boxopt
from .errors import EvaluationError, GuardedDomainError

DEFAULT_SEED = 42
DEFAULT_MU_MAX = 1e-2
DEFAULT_LEVELS = 16


@dataclass
class ScalarField:
    """A real function of a state, evaluated on batches of points."""

    dim: int
    fn: Callable
    grad: Optional[Callable] = None
    label: str = ""

    def batch(self, X):
        X = np.asarray(X, dtype=float).reshape(-1, self.dim)
        return np.asarray(self.fn(X), dtype=float).reshape(len(X))

    def __call__(self, x):
        return float(self.batch(np.asarray(x, dtype=float).reshape(1, self.dim))[0])

    def gradient(self, x):
        if self.grad is None:
            raise AttributeError(f"field {self.label!r} has no analytic gradient")
        x = np.asarray(x, dtype=float).reshape(1, self.dim)
        return np.asarray(self.grad(x), dtype=float).reshape(self.dim)

    @classmethod
    def pointwise(cls, fn, dim, grad=None, label=""):
        """Wrap a function of a single point."""
        def batched(X):
            return np.array([fn(x) for x in X], dtype=float)
        g = None
        if grad is not None:
            def g(X):
                return np.array([grad(x) for x in X], dtype=float)
        return cls(dim, batched, g, label)


@dataclass
class MarginalFamily:
    """``V(x) = min over theta in theta_box of F(x; theta)``.

    ``F`` and ``dFdx`` are batched over rows: ``F(X, TH)`` with ``X`` of
    shape ``(k, dim)`` and ``TH`` of shape ``(k, p)``.  When ``denominator``
    is given, parameters with ``|denominator(X, TH)| < singular_guard``
    are excluded from every search.  ``guarded_by_F`` declares that ``F``
    already returns ``inf`` on guarded parameters, which skips the
    separate denominator evaluation.  A ``periodic`` family (period = box
    width, one parameter) is refined up to one coarse spacing past either
    end of the box, so that minimizers next to the seam are reachable from
    whichever endpoint wins the coarse tie; parameters are reported
    wrapped back into the box.
    """

    dim: int
    theta_box: np.ndarray
    F: Callable
    dFdx: Callable
    singular_guard: float = 0.0
    denominator: Optional[Callable] = None
    theta_accuracy: float = 1e-12
    grid_points: Optional[int] = None
    label: str = ""
    guarded_by_F: bool = False
    periodic: bool = False

    def __post_init__(self):
        self.theta_box = np.atleast_2d(np.asarray(self.theta_box, dtype=float))

    @property
    def theta_dim(self):
        return self.theta_box.shape[0]

    def admissible(self, X, TH):
        if self.denominator is None or self.singular_guard <= 0:
            return np.ones(len(X), dtype=bool)
        return np.abs(self.denominator(X, TH)) >= self.singular_guard

    def guarded_F(self, X, TH):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        TH = np.atleast_2d(np.asarray(TH, dtype=float))
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            v = np.asarray(self.F(X, TH), dtype=float)
        ok = np.isfinite(v)
        if not self.guarded_by_F:
            ok &= self.admissible(X, TH)
        return np.where(ok, v, np.inf)

    @property
    def pad(self):
        return 1 if self.periodic else 0

    def wrap(self, TH):
        if not self.periodic:
            return TH
        lo = self.theta_box[:, 0]
        return lo + np.mod(TH - lo, self.theta_box[:, 1] - lo)

    def minimize_theta(self, X, accuracy=None):
        """Per-row minimizers and minimal values of ``F(x; .)``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        acc = self.theta_accuracy if accuracy is None else accuracy
        box = np.broadcast_to(self.theta_box, (len(X),) + self.theta_box.shape)
        TH, vals, _ = boxopt.minimize_many(
            lambda idx, T: self.guarded_F(X[idx], T), box, accuracy=acc,
            grid_points=self.grid_points, pad=self.pad)
        if not np.all(np.isfinite(vals)):
            bad = X[~np.isfinite(vals)][0]
            raise GuardedDomainError(f"no admissible parameter at x={bad}")
        return self.wrap(TH), vals

    def values(self, X):
        return self.minimize_theta(X)[1]

    def value(self, x):
        return float(self.values(np.asarray(x, dtype=float).reshape(1, -1))[0])

    def gradient_x(self, x, theta):
        x = np.asarray(x, dtype=float).reshape(1, self.dim)
        th = np.asarray(theta, dtype=float).reshape(1, self.theta_dim)
        return np.asarray(self.dFdx(x, th), dtype=float).reshape(self.dim)

    def field(self):
        return ScalarField(self.dim, self.values, None, self.label)


@dataclass
class SubgradientSet:
    """A finite set of subgradients, deduplicated at ``tolerance``."""

    kind: str
    vectors: list
    tolerance: float = 1e-6

    KINDS = ("proximal", "limiting", "clarke_extreme", "disassembled")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown subdifferential kind {self.kind!r}")
        kept = []
        for v in self.vectors:
            v = np.atleast_1d(np.asarray(v, dtype=float))
            if all(np.linalg.norm(v - w) > self.tolerance for w in kept):
                kept.append(v)
        self.vectors = kept

    def __len__(self):
        return len(self.vectors)

    def __iter__(self):
        return iter(self.vectors)

    def as_array(self):
        return np.array(self.vectors)

    def distance(self, v):
        """Euclidean distance from ``v`` to the nearest member."""
        v = np.atleast_1d(np.asarray(v, dtype=float))
        return min(np.linalg.norm(v - w) for w in self.vectors)

    def clarke_hull(self):
        """Interval hull ``(lo, hi)``; defined for one-dimensional sets only."""
        A = self.as_array()
        if A.ndim != 2 or A.shape[1] != 1:
            raise ValueError("Clarke hull is implemented in dimension one only")
        return float(A.min()), float(A.max())


def _check_finite(values, what, mus=None):
    bad = ~np.isfinite(values)
    if np.any(bad):
        where = "" if mus is None else f" at mu={mus[np.argmax(bad)]:.3e}"
        raise EvaluationError(f"non-finite value of {what}{where}")


def mu_grid(mu_max=DEFAULT_MU_MAX, levels=DEFAULT_LEVELS):
    return mu_max * 2.0 ** -np.arange(levels + 1)


def ldgd_batch(V, x, dirs, mu_max=DEFAULT_MU_MAX, levels=DEFAULT_LEVELS):
    """Lower directional derivative of ``V`` at ``x`` along each row of ``dirs``."""
    x = np.asarray(x, dtype=float).reshape(V.dim)
    dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
    mus = mu_grid(mu_max, levels)
    v0 = V(x)
    _check_finite(np.array([v0]), "V at the base point")
    pts = x + mus[None, :, None] * dirs[:, None, :]
    vals = V.batch(pts.reshape(-1, V.dim)).reshape(len(dirs), len(mus))
    if not np.all(np.isfinite(vals)):
        col = np.flatnonzero(~np.isfinite(vals).all(axis=0))
        raise EvaluationError(f"non-finite value of V at mu={mus[col[0]]:.3e}")
    return np.min((vals - v0) / mus[None, :], axis=1)


def ldgd(V, x, dir, mu_max=DEFAULT_MU_MAX, levels=DEFAULT_LEVELS):
    """Lower directional generalized derivative, liminf surrogate.

    The minimum of the difference quotient over ``mu_k = mu_max 2^-k``,
    ``k = 0..levels``.
    """
    if not mu_max > 0:
        raise ValueError("mu_max must be positive")
    d = np.asarray(dir, dtype=float).reshape(1, V.dim)
    if not np.all(np.isfinite(d)):
        raise ValueError("direction must be finite")
    return float(ldgd_batch(V, x, d, mu_max, levels)[0])


def inf_convolution(V, x, alpha, tol=1e-10, margin=0.1, max_evals=None):
    """Inf-convolution ``V_alpha(x)`` and a minimizer ``y_alpha(x)``.

    The search box is the cube of half-width
    ``alpha * sqrt(2 max(V(x), tol)) + margin`` around ``x``; for
    nonnegative ``V`` no minimizer lies farther away.

    Returns ``(value, minimizer, met)`` where ``met`` reports whether the
    optimizer met ``tol``.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    x = np.asarray(x, dtype=float).reshape(V.dim)
    vx = V(x)
    _check_finite(np.array([vx]), "V at the base point")
    radius = alpha * np.sqrt(2.0 * max(vx, tol)) + margin
    if radius <= 0:
        return vx, x.copy(), True
    c = 1.0 / (2.0 * alpha**2)

    def objective(Y):
        return V.batch(Y) + c * np.sum((Y - x) ** 2, axis=1)

    box = np.stack([x - radius, x + radius], axis=1)
    res = boxopt.minimize(boxopt.BoxProblem(objective, box, tol, max_evals,
                                            vectorized=True, x0=x))
    if res.value > vx:
        # the centre is a grid point, so this only guards against budget cuts
        return vx, x.copy(), res.accuracy_met
    return res.value, res.x, res.accuracy_met


def proximal_subgradient(V, x, alpha, tol=1e-10, margin=0.1):
    """``(x - y_alpha(x)) / alpha**2``, a proximal subgradient of V at ``y_alpha``."""
    x = np.asarray(x, dtype=float).reshape(V.dim)
    _, y, _ = inf_convolution(V, x, alpha, tol, margin)
    return (x - y) / alpha**2


def disassembled_subdifferential(MF, x, theta_tol=1e-6, tolerance=1e-6):
    """Gradients ``dF/dx(x; theta)`` over (numerically) all minimizing theta."""
    x = np.asarray(x, dtype=float).reshape(MF.dim)
    X1 = x[None, :]
    problem = boxopt.BoxProblem(lambda TH: MF.guarded_F(np.repeat(X1, len(TH), 0), TH),
                                MF.theta_box, MF.theta_accuracy, vectorized=True,
                                grid_points=MF.grid_points)
    thetas = [MF.wrap(t) for t in boxopt.argmin_clusters(problem, theta_tol, pad=MF.pad)]
    if not thetas:
        raise GuardedDomainError(f"no admissible parameter at x={x}")
    TH = np.array(thetas)
    if not np.all(np.isfinite(MF.guarded_F(np.repeat(X1, len(TH), 0), TH))):
        raise GuardedDomainError(f"no admissible parameter at x={x}")
    G = np.asarray(MF.dFdx(np.repeat(X1, len(TH), 0), TH), dtype=float)
    return SubgradientSet("disassembled", list(G), tolerance)


@dataclass
class SemiconcavityReport:
    C: float
    n_pairs: int
    violations: list = field(default_factory=list)

    @property
    def passed(self):
        return not self.violations


def _multiscale_offsets(rng, n, half_width):
    """Offsets inside a box of the given half-widths at log-spread scales."""
    d = len(half_width)
    u = rng.uniform(-1.0, 1.0, size=(n, d))
    scale = np.where(rng.random(n) < 0.5, 1.0, 10.0 ** rng.uniform(-6.0, 0.0, n))
    return u * scale[:, None] * half_width


def check_semiconcavity(V, box, C, n_pairs=10_000, seed=DEFAULT_SEED):
    """Sample midpoint inequality ``V(x)+V(y)-2V((x+y)/2) <= C |x-y|^2``.

    Pairs are built as ``m +- h`` with midpoints and half-separations drawn
    at uniformly and logarithmically spread scales, so that violations
    concentrated near kinks are found with a modest sample.
    """
    box = np.atleast_2d(np.asarray(box, dtype=float))
    rng = np.random.default_rng(seed)
    centre = box.mean(axis=1)
    half = (box[:, 1] - box[:, 0]) / 2.0
    m = centre + _multiscale_offsets(rng, n_pairs, half)
    h = _multiscale_offsets(rng, n_pairs, half)
    # shrink separations so both ends stay inside the box
    room = np.min(np.where(np.abs(h) > 0,
                           (half - np.abs(m - centre)) / np.maximum(np.abs(h), 1e-300),
                           np.inf), axis=1)
    h *= np.clip(room, 0.0, 1.0)[:, None]
    x, y = m + h, m - h
    lhs = V.batch(x) + V.batch(y) - 2.0 * V.batch(m)
    excess = lhs - C * np.sum((x - y) ** 2, axis=1)
    report = SemiconcavityReport(C, n_pairs)
    for i in np.flatnonzero(excess > 1e-12):
        report.violations.append((x[i].copy(), y[i].copy(), float(excess[i])))
    return report


def _ball_samples(rng, x, r, n):
    d = len(x)
    g = rng.standard_normal((n, d))
    g /= np.maximum(np.linalg.norm(g, axis=1, keepdims=True), 1e-300)
    radial = np.where(rng.random(n) < 0.5, rng.random(n) ** (1.0 / d),
                      10.0 ** rng.uniform(-6.0, 0.0, n))
    return x + r * radial[:, None] * g


def check_prox_inequality(V, x, zeta, sigma, r, n_samples=2000, seed=DEFAULT_SEED):
    """Whether ``V(y) >= V(x) + <zeta, y-x> - sigma |y-x|^2`` on sampled ``y`` in ``B_r(x)``."""
    if not r > 0 or sigma < 0:
        raise ValueError("need r > 0 and sigma >= 0")
    x = np.asarray(x, dtype=float).reshape(V.dim)
    zeta = np.asarray(zeta, dtype=float).reshape(V.dim)
    rng = np.random.default_rng(seed)
    Y = _ball_samples(rng, x, r, n_samples)
    D = Y - x
    rhs = V(x) + D @ zeta - sigma * np.sum(D**2, axis=1)
    # relative slack for roundoff only
    return bool(np.all(V.batch(Y) >= rhs - 1e-12 * max(1.0, abs(V(x)))))


def limiting_subdifferential_1d(V, x, h=0.1, depth=20, tail=6, tolerance=1e-3):
    """Cluster points of derivatives along ``x +- h 2^-k``, ``k = 0..depth``.

    Derivatives are central differences with a step far below the
    distance to ``x``.  The last ``tail`` samples of each approach
    sequence are clustered; each cluster is represented by its sample
    closest to ``x``.
    """
    if V.dim != 1:
        raise ValueError("limiting_subdifferential_1d needs a scalar argument")
    x = float(np.asarray(x, dtype=float).ravel()[0])
    s = h * 2.0 ** -np.arange(depth + 1)
    reps = []
    for side in (-1.0, 1.0):
        p = x + side * s
        e = s * 1e-2
        d = (V.batch((p + e)[:, None]) - V.batch((p - e)[:, None])) / (2.0 * e)
        _check_finite(d, "derivative samples")
        for val in d[::-1][:tail]:
            if all(abs(val - w) > tolerance for w in reps):
                reps.append(val)
    return SubgradientSet("limiting", [[v] for v in reps], tolerance)


@dataclass
class DecayReport:
    points: np.ndarray
    margins: np.ndarray
    controls: Optional[np.ndarray] = None

    @property
    def holds(self):
        return self.margins < 0


def check_decay_ldgd(V, sys, x_samples, u_accuracy=1e-6, mu_max=DEFAULT_MU_MAX,
                     levels=DEFAULT_LEVELS, u_grid_points=None):
    """Per-sample ``min over U of ldgd(V, x, f(x, u))``.

    ``u_grid_points`` sets the coarse control grid per axis; a small value
    pays off when every evaluation of ``V`` is itself a minimization.
    """
    X = np.atleast_2d(np.asarray(x_samples, dtype=float))
    margins, controls = [], []
    for x in X:
        def objective(U, x=x):
            return ldgd_batch(V, x, sys.f(np.broadcast_to(x, (len(U), sys.n)), U),
                              mu_max, levels)
        res = boxopt.minimize(boxopt.BoxProblem(objective, sys.control_box, u_accuracy,
                                                vectorized=True, grid_points=u_grid_points))
        margins.append(res.value)
        controls.append(res.x)
    return DecayReport(X, np.array(margins), np.array(controls))


def check_decay_disassembled(MF, sys, x_samples, u_accuracy=1e-6, theta_tol=1e-6):
    """Per-sample ``min over zeta in the disassembled set, u in U of <zeta, f(x,u)>``."""
    X = np.atleast_2d(np.asarray(x_samples, dtype=float))
    margins, controls = [], []
    for x in X:
        Z = disassembled_subdifferential(MF, x, theta_tol).as_array()

        def objective(U, x=x, Z=Z):
            Fx = sys.f(np.broadcast_to(x, (len(U), sys.n)), U)
            return np.min(Fx @ Z.T, axis=1)
        res = boxopt.minimize(boxopt.BoxProblem(objective, sys.control_box, u_accuracy,
                                                vectorized=True))
        margins.append(res.value)
        controls.append(res.x)
    return DecayReport(X, np.array(margins), np.array(controls))


def verify_hom(V, x, dir, nu, mu, points=50):
    """Local homogeneity: quotients on ``(0, mu]`` stay within ``nu`` of the LDGD."""
    if not mu > 0:
        raise ValueError("mu must be positive")
    x = np.asarray(x, dtype=float).reshape(V.dim)
    d = np.asarray(dir, dtype=float).reshape(V.dim)
    D = ldgd(V, x, d, mu, 20)
    mus = mu * np.arange(1, points + 1) / points
    q = (V.batch(x + mus[:, None] * d) - V(x)) / mus
    return bool(np.all(np.abs(q - D) <= nu))
