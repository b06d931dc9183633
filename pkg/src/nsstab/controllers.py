"""Static feedback laws for sample-and-hold stabilization.

Every law is a :class:`Controller`: a stateless map from a state to a held
control inside the system's control box, plus a list of per-call flags
(optimizer accuracy misses, saturation, guard fallbacks) that the
simulator writes into the trajectory log.
"""

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import boxopt
from .calculus import (DEFAULT_LEVELS, DEFAULT_MU_MAX, ScalarField, check_semiconcavity,
                       inf_convolution, ldgd_batch)
from .clf import backstep_control, backstep_terms, composite_minimize
from .errors import GuardedDomainError
from .simulation import rk4_flow

SATURATED = "saturated"
GUARD_FALLBACK = "guard_fallback"


@dataclass
class Controller:
    label: str
    system: object
    law: Callable
    params: dict = field(default_factory=dict)
    accuracy: Optional[float] = None
    warnings: list = field(default_factory=list)

    def evaluate(self, x):
        """``(u, flags)`` at state ``x``."""
        u, flags = self.law(np.asarray(x, dtype=float))
        return np.asarray(u, dtype=float).reshape(self.system.m), list(flags)

    def compute(self, x):
        return self.evaluate(x)[0]

    __call__ = compute


@dataclass
class DiniAimingParams:
    r: float
    sigma: Callable = None

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("neighbourhood radius r must be positive")


@dataclass
class SmcParams:
    chi: ScalarField
    kappa_cont: Callable
    s: Callable
    on_surface_tol: float = 1e-9

    def __post_init__(self):
        if not self.on_surface_tol > 0:
            raise ValueError("on_surface_tol must be positive")


def _u_problem(objective, sys, accuracy, box=None):
    return boxopt.BoxProblem(objective, sys.control_box if box is None else box,
                             accuracy, vectorized=True)


def _flag_if(res, flag):
    return [] if res.accuracy_met else [flag]


def _origin_control(sys, accuracy):
    """Control minimizing the speed |f(0, u)| at the origin."""
    zero = np.zeros(sys.n)
    res = boxopt.minimize(_u_problem(
        lambda U: np.linalg.norm(sys.f(np.broadcast_to(zero, (len(U), sys.n)), U), axis=1),
        sys, accuracy))
    return res.x


def steepest_descent(V, sys, accuracy=1e-6, mu_max=DEFAULT_MU_MAX, levels=DEFAULT_LEVELS,
                     check_box=None, check_C=None, seed=42):
    """``u = argmin over U of the lower directional derivative of V along f(x, u)``.

    If ``check_box`` and ``check_C`` are given, semiconcavity of ``V`` is
    sampled there first; a failure is a warning, kept in
    ``controller.warnings``.
    """
    notes = []
    if check_box is not None and check_C is not None:
        rep = check_semiconcavity(V, check_box, check_C, seed=seed)
        if not rep.passed:
            msg = (f"{V.label or 'V'} fails the semiconcavity sample with C={check_C}: "
                   f"{len(rep.violations)} violating pairs")
            warnings.warn(msg)
            notes.append(msg)
    u0 = _origin_control(sys, accuracy)

    def law(x):
        if np.linalg.norm(x) < 1e-12:
            return u0, []

        def obj(U):
            return ldgd_batch(V, x, sys.f(np.broadcast_to(x, (len(U), sys.n)), U),
                              mu_max, levels)
        res = boxopt.minimize(_u_problem(obj, sys, accuracy))
        return res.x, _flag_if(res, "u_" + boxopt.ACCURACY_NOT_MET)

    return Controller("steepest", sys, law, {"mu_max": mu_max, "levels": levels},
                      accuracy, notes)


def default_sigma(sys):
    u_max = float(np.max(np.abs(sys.control_box)))
    return lambda rho: min(rho, u_max)


def dini_aiming(V, sys, p: DiniAimingParams, accuracy=1e-6):
    """Two-step Dini aiming.

    1. ``theta* = argmin of V over the closed ball B_r(x)``.
    2. ``u = argmin of <x - theta*, f(x, u)> / |x - theta*|`` over the
       controls with ``|u| <= sigma(|x| + r)``.
    """
    sigma = p.sigma if p.sigma is not None else default_sigma(sys)
    r = p.r
    lo, hi = sys.control_box[:, 0], sys.control_box[:, 1]

    def law(x):
        flags = []

        def in_ball(S):
            vals = V.batch(S)
            return np.where(np.linalg.norm(S - x, axis=1) <= r, vals, np.inf)
        box = np.stack([x - r, x + r], axis=1)
        res = boxopt.minimize(boxopt.BoxProblem(in_ball, box, accuracy, vectorized=True, x0=x))
        flags += _flag_if(res, "aim_" + boxopt.ACCURACY_NOT_MET)
        d = x - res.x
        nd = np.linalg.norm(d)
        if nd < 1e-12:
            return np.clip(np.zeros(sys.m), lo, hi), flags
        bound = float(sigma(np.linalg.norm(x) + r))
        ubox = np.stack([np.maximum(lo, -bound), np.minimum(hi, bound)], axis=1)

        def obj(U):
            vals = sys.f(np.broadcast_to(x, (len(U), sys.n)), U) @ d / nd
            return np.where(np.linalg.norm(U, axis=1) <= bound * (1 + 1e-12), vals, np.inf)
        ures = boxopt.minimize(_u_problem(obj, sys, accuracy, ubox))
        flags += _flag_if(ures, "u_" + boxopt.ACCURACY_NOT_MET)
        return ures.x, flags

    return Controller("dini", sys, law, {"r": r, "sigma": sigma}, accuracy)


def optimization_based(V, sys, delta, accuracy=1e-6, substeps=10):
    """``u = argmin over U of V(phi(delta, x, u))`` for the held-input flow ``phi``."""
    if not delta > 0:
        raise ValueError("delta must be positive")

    def law(x):
        def obj(U):
            X = np.broadcast_to(x, (len(U), sys.n)).copy()
            with np.errstate(all="ignore"):
                Y = rk4_flow(sys, X, U, delta, substeps)
                vals = V.batch(Y)
            bad = ~np.all(np.isfinite(Y), axis=1)
            return np.where(bad, np.inf, vals)
        res = boxopt.minimize(_u_problem(obj, sys, accuracy))
        return res.x, _flag_if(res, "u_" + boxopt.ACCURACY_NOT_MET)

    return Controller("optim", sys, law, {"delta": delta, "substeps": substeps}, accuracy)


def infc_based(V, sys, alpha, eps, gamma, margin=0.1):
    """Inf-convolution feedback.

    ``y`` minimizes ``V(y) + |y - x|^2 / (2 alpha^2)`` to accuracy ``eps``;
    with ``zeta = (x - y) / alpha^2`` the control minimizes
    ``<zeta, f(y, u)>`` over the control box to accuracy ``gamma``.  The
    vector field is evaluated at ``y``, not at ``x``.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")

    def law(x):
        flags = []
        _, y, met = inf_convolution(V, x, alpha, eps, margin)
        if not met:
            flags.append("eps_" + boxopt.ACCURACY_NOT_MET)
        zeta = (x - y) / alpha**2

        def obj(U):
            return sys.f(np.broadcast_to(y, (len(U), sys.n)), U) @ zeta
        res = boxopt.minimize(_u_problem(obj, sys, gamma))
        flags += _flag_if(res, "gamma_" + boxopt.ACCURACY_NOT_MET)
        return res.x, flags

    return Controller("infc", sys, law, {"alpha": alpha, "eps": eps, "gamma": gamma},
                      min(eps, gamma))


def _backstepping(ctx, sys, label):
    n = ctx.n
    lo, hi = sys.control_box[:, 0], sys.control_box[:, 1]

    def law(xe):
        flags = []
        try:
            _, theta = composite_minimize(ctx, xe)
            u = backstep_control(ctx, xe, theta)
        except GuardedDomainError:
            # no admissible theta: fall back to damping the actuator state
            u = -ctx.K * xe[n:]
            flags.append(GUARD_FALLBACK)
        uc = np.clip(u, lo, hi)
        if np.any(uc != u):
            flags.append(SATURATED)
        return uc, flags

    return Controller(label, sys, law, {"K": ctx.K, "simplified": ctx.simplified})


def backstepping_endi(ctx, sys):
    """Backstepping law on the dynamic nonholonomic integrator, clamped to U."""
    return _backstepping(ctx, sys, "bks_endi")


def backstepping_artstein(ctx, sys):
    """Backstepping law on the dynamic Artstein circle, clamped to U."""
    return _backstepping(ctx, sys, "bks_artstein")


def smc(p: SmcParams, sys):
    """``u = kappa_cont(x) + s(x) sgn(chi(x))`` with ``sgn = 0`` inside the surface band."""
    lo, hi = sys.control_box[:, 0], sys.control_box[:, 1]

    def law(x):
        c = p.chi(x)
        sgn = 0.0 if abs(c) <= p.on_surface_tol else np.sign(c)
        u = np.atleast_1d(p.kappa_cont(x) + p.s(x) * sgn).astype(float)
        uc = np.clip(u, lo, hi)
        return uc, ([SATURATED] if np.any(uc != u) else [])

    return Controller("smc", sys, law, {"on_surface_tol": p.on_surface_tol})


def smc_demo_params(sys, k=1.5, on_surface_tol=1e-9):
    """Switching law ``u = -k sgn(x1 + x2)`` for the double-integrator demo."""
    return SmcParams(sys.extras["chi"], lambda x: np.zeros(sys.m),
                     lambda x: -k * np.ones(sys.m), on_surface_tol)


def backstep_decay(ctx, xe, theta=None):
    """``S(x, z; theta) = <zeta, G kappa> - K |z|^2`` at the backstepping control."""
    if theta is None:
        theta = composite_minimize(ctx, xe)[1]
    t = backstep_terms(ctx, xe, theta)
    return float(t["zeta"] @ (t["G"] @ t["kappa"]) - ctx.K * t["z"] @ t["z"])


CONTROLLER_LABELS = ("steepest", "dini", "optim", "infc", "bks_endi", "bks_artstein", "smc")

_DEFAULTS = {
    "steepest": {"accuracy": 1e-6, "mu_max": DEFAULT_MU_MAX, "levels": DEFAULT_LEVELS},
    "dini": {"r": 0.05, "accuracy": 1e-6},
    "optim": {"delta": None, "accuracy": 1e-6, "substeps": 10},
    "infc": {"alpha": 0.1, "eps": 1e-8, "gamma": 1e-8, "margin": 0.1},
    "bks_endi": {"K": 1.0, "theta_tol": 1e-6, "simplified": False},
    "bks_artstein": {"K": 1.0, "theta_tol": 1e-6, "simplified": False},
    "smc": {"k": 1.5, "on_surface_tol": 1e-9},
}


def build_controller(label, sys, clf=None, params=None, delta=None):
    """Construct a controller from its label and a parameter dict.

    ``clf`` is the :class:`ScalarField` used by the CLF-based laws; the
    backstepping and sliding-mode laws carry their own.  ``delta`` (the
    sampling time) is the default prediction horizon of ``"optim"``.
    """
    from .clf import artstein_context, endi_context
    from .errors import ConfigError

    if label not in _DEFAULTS:
        raise ConfigError(f"unknown controller {label!r}; choose from {list(CONTROLLER_LABELS)}")
    unknown = set(params or {}) - set(_DEFAULTS[label])
    if unknown:
        raise ConfigError(f"unknown parameters for {label!r}: {sorted(unknown)}")
    p = dict(_DEFAULTS[label], **(params or {}))
    needs_clf = label in ("steepest", "dini", "optim", "infc")
    if needs_clf:
        if clf is None:
            raise ConfigError(f"controller {label!r} needs a CLF")
        if clf.dim != sys.n:
            raise ConfigError(f"CLF {clf.label!r} has dimension {clf.dim}, system has {sys.n}")
    try:
        if label == "steepest":
            return steepest_descent(clf, sys, p["accuracy"], p["mu_max"], p["levels"])
        if label == "dini":
            return dini_aiming(clf, sys, DiniAimingParams(p["r"]), p["accuracy"])
        if label == "optim":
            horizon = p["delta"] if p["delta"] is not None else delta
            return optimization_based(clf, sys, horizon, p["accuracy"], p["substeps"])
        if label == "infc":
            return infc_based(clf, sys, p["alpha"], p["eps"], p["gamma"], p["margin"])
        if label == "bks_endi":
            if sys.label != "endi":
                raise ConfigError("bks_endi runs on the endi system")
            return backstepping_endi(endi_context(p["K"], p["theta_tol"],
                                                  simplified=p["simplified"]), sys)
        if label == "bks_artstein":
            if sys.label != "artstein":
                raise ConfigError("bks_artstein runs on the artstein system")
            return backstepping_artstein(artstein_context(p["K"], p["theta_tol"],
                                                          simplified=p["simplified"]), sys)
        if "chi" not in sys.extras:
            raise ConfigError("smc needs a system with a sliding surface")
        return smc(smc_demo_params(sys, p["k"], p["on_surface_tol"]), sys)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad parameters for {label!r}: {exc}") from exc
