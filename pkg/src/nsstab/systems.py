"""Benchmark control systems.

Vector fields are batched over leading axes: ``f(X, U)`` with ``X`` of
shape ``(..., n)`` and ``U`` of shape ``(..., m)``.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .calculus import ScalarField
from .errors import ConfigError


@dataclass(frozen=True)
class ControlSystem:
    n: int
    m: int
    f: Callable
    control_box: np.ndarray
    label: str
    extras: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        box = np.atleast_2d(np.asarray(self.control_box, dtype=float))
        if box.shape != (self.m, 2) or np.any(box[:, 0] > box[:, 1]):
            raise ValueError("control_box must be an (m, 2) array with lo <= hi")
        box.setflags(write=False)
        object.__setattr__(self, "control_box", box)

    def __call__(self, x, u):
        return self.f(np.asarray(x, dtype=float), np.asarray(u, dtype=float))

    def clamp(self, u):
        return np.clip(u, self.control_box[:, 0], self.control_box[:, 1])

    def with_control_box(self, box):
        return ControlSystem(self.n, self.m, self.f, box, self.label, self.extras)


def _box(m, bound):
    return np.tile([-bound, bound], (m, 1)).astype(float)


def ni_g1(X):
    X = np.asarray(X, dtype=float)
    one, zero = np.ones_like(X[..., 0]), np.zeros_like(X[..., 0])
    return np.stack([one, zero, -X[..., 1]], axis=-1)


def ni_g2(X):
    X = np.asarray(X, dtype=float)
    one, zero = np.ones_like(X[..., 0]), np.zeros_like(X[..., 0])
    return np.stack([zero, one, X[..., 0]], axis=-1)


def ni_G(X):
    """Input matrix ``[g1 g2]`` of shape ``(..., 3, 2)``."""
    return np.stack([ni_g1(X), ni_g2(X)], axis=-1)


def _ni_f(X, U):
    X, U = np.asarray(X, dtype=float), np.asarray(U, dtype=float)
    u1, u2 = U[..., 0], U[..., 1]
    return np.stack([u1, u2, -X[..., 1] * u1 + X[..., 0] * u2], axis=-1)


def make_ni(bound=1.0):
    """Nonholonomic integrator ``x' = g1(x) u1 + g2(x) u2``."""
    return ControlSystem(3, 2, _ni_f, _box(2, bound), "ni",
                         {"g1": ni_g1, "g2": ni_g2, "G": ni_G})


def _endi_f(X, U):
    X, U = np.asarray(X, dtype=float), np.asarray(U, dtype=float)
    x1, x2, e1, e2 = X[..., 0], X[..., 1], X[..., 3], X[..., 4]
    U = np.broadcast_to(U, X.shape[:-1] + (2,))
    return np.stack([e1, e2, -x2 * e1 + x1 * e2, U[..., 0], U[..., 1]], axis=-1)


def make_endi(bound=3.0):
    """Nonholonomic integrator with integrators in front of both inputs.

    State ``(x1, x2, x3, eta1, eta2)``; torques ``u`` drive ``eta`` and the
    kinematic part is the NI field ``x' = G(x) eta``, so that
    ``x3' = -x2 eta1 + x1 eta2``.
    """
    return ControlSystem(5, 2, _endi_f, _box(2, bound), "endi", {"G": ni_G})


def artstein_g(V):
    """Input field of the kinematic subsystem ``v' = g(v) w``."""
    V = np.asarray(V, dtype=float)
    x1, x2 = V[..., 0], V[..., 1]
    return np.stack([-x1**2 + x2**2, -2.0 * x1 * x2], axis=-1)


def _artstein_f(X, U):
    X, U = np.asarray(X, dtype=float), np.asarray(U, dtype=float)
    g = artstein_g(X[..., :2])
    w = X[..., 2]
    u = np.broadcast_to(U, X.shape[:-1] + (1,))[..., 0]
    return np.stack([g[..., 0] * w, g[..., 1] * w, u], axis=-1)


def make_artstein_dyn(bound=3.0):
    """Artstein's circles with an integrator in front of the input."""
    return ControlSystem(3, 1, _artstein_f, _box(1, bound), "artstein", {"g": artstein_g})


def _di_f(X, U):
    X, U = np.asarray(X, dtype=float), np.asarray(U, dtype=float)
    u = np.broadcast_to(U, X.shape[:-1] + (1,))[..., 0]
    return np.stack([X[..., 1], u], axis=-1)


def smc_surface():
    """Sliding surface ``chi(x) = x2 + x1`` of the double-integrator demo."""
    return ScalarField(2, lambda X: X[:, 1] + X[:, 0],
                       lambda X: np.ones_like(X), "chi")


def make_smc_demo(bound=2.0):
    """Double integrator ``x1' = x2, x2' = u`` with a linear sliding surface."""
    return ControlSystem(2, 1, _di_f, _box(1, bound), "smc_demo", {"chi": smc_surface()})


SYSTEMS = {
    "ni": make_ni,
    "endi": make_endi,
    "artstein": make_artstein_dyn,
    "smc_demo": make_smc_demo,
}


def get_system(label, bound=None):
    try:
        factory = SYSTEMS[label]
    except KeyError:
        raise ConfigError(f"unknown system {label!r}; choose from {sorted(SYSTEMS)}")
    return factory() if bound is None else factory(bound)
