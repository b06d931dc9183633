"""Sample-and-hold closed-loop simulation and the practical-stability verifier.

The controller is consulted once per sampling instant ``k delta`` and its
output is held over ``[k delta, (k+1) delta]`` while the flow is advanced
with fixed-step classical Runge-Kutta.
"""

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import BlowUpError

BLOWUP = "blowup"
BLOWUP_NORM = 1e6


@dataclass(frozen=True)
class SamplingSchedule:
    delta: float
    T: float
    substeps: int = 10

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not self.T >= self.delta:
            raise ValueError("horizon T must be at least delta")
        if int(self.substeps) != self.substeps or self.substeps < 1:
            raise ValueError("substeps must be an integer >= 1")

    @property
    def steps(self):
        """Number of held intervals, ``ceil(T / delta)``."""
        return int(math.ceil(self.T / self.delta - 1e-9))


@dataclass
class TrajectoryLog:
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    controls: list = field(default_factory=list)
    clf_values: list = field(default_factory=list)
    flags: list = field(default_factory=list)
    blowup_time: Optional[float] = None

    def __len__(self):
        return len(self.times)

    @property
    def blew_up(self):
        return self.blowup_time is not None

    def append(self, t, x, u, v, flags):
        self.times.append(float(t))
        self.states.append(np.array(x, dtype=float))
        self.controls.append(np.array(u, dtype=float))
        self.clf_values.append(float(v))
        self.flags.append(list(flags))

    def state_array(self):
        return np.array(self.states)

    def norms(self):
        return np.linalg.norm(self.state_array(), axis=1)

    def header(self):
        n, m = len(self.states[0]), len(self.controls[0])
        return (["t"] + [f"x{i + 1}" for i in range(n)] + [f"u{j + 1}" for j in range(m)]
                + ["V", "flag"])

    def to_csv(self, path):
        """One row per sampling instant; floats are written with 17 significant digits."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header())
            for t, x, u, v, fl in zip(self.times, self.states, self.controls,
                                      self.clf_values, self.flags):
                w.writerow([_fmt(t)] + [_fmt(a) for a in x] + [_fmt(a) for a in u]
                           + [_fmt(v), ";".join(fl)])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        head = rows[0]
        n = sum(h.startswith("x") for h in head)
        m = sum(h.startswith("u") for h in head)
        log = cls()
        for r in rows[1:]:
            vals = [float(a) for a in r[:-1]]
            fl = [f for f in r[-1].split(";") if f]
            log.append(vals[0], vals[1:1 + n], vals[1 + n:1 + n + m], vals[-1], fl)
            if BLOWUP in fl:
                log.blowup_time = vals[0]
        return log


def _fmt(v):
    return format(float(v), ".17g")


def _rk4(sys, x, u, h):
    k1 = sys.f(x, u)
    k2 = sys.f(x + 0.5 * h * k1, u)
    k3 = sys.f(x + 0.5 * h * k2, u)
    k4 = sys.f(x + h * k3, u)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_step(sys, x, u, h, t=None):
    """One classical RK4 step of ``x' = f(x, u)`` with ``u`` held.

    Works on a single state or a batch ``(k, n)``.  A non-finite result
    raises :class:`BlowUpError` carrying ``t`` (the step's start time).
    """
    if not h > 0:
        raise ValueError("step size must be positive")
    x = np.asarray(x, dtype=float)
    with np.errstate(all="ignore"):
        y = _rk4(sys, x, np.asarray(u, dtype=float), h)
    if not np.all(np.isfinite(y)):
        raise BlowUpError("non-finite state in RK4 step", t)
    return y


def rk4_flow(sys, x, u, delta, substeps=10):
    """Held-input flow over ``delta`` with ``substeps`` RK4 steps; no blow-up checks."""
    h = delta / substeps
    for _ in range(substeps):
        x = _rk4(sys, x, u, h)
    return x


def _blown(x):
    return not np.all(np.isfinite(x)) or np.linalg.norm(x) > BLOWUP_NORM


def simulate(sys, ctrl, x0, sched: SamplingSchedule, clf=None):
    """Sample-and-hold closed loop from ``x0``.

    The log holds the ``steps + 1`` instants ``0, delta, ..., steps * delta``;
    the control on the last row is the one the controller would apply next.
    A non-finite state or ``|x| > 1e6`` ends the run: that row carries the
    ``"blowup"`` flag and the held control that produced it.  ``clf`` is only
    observed, never fed back.
    """
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (sys.n,) or not np.all(np.isfinite(x)):
        raise ValueError(f"x0 must be a finite vector of length {sys.n}")
    log = TrajectoryLog()
    h = sched.delta / sched.substeps

    def clf_value(x):
        if clf is None:
            return float("nan")
        with np.errstate(all="ignore"):
            return float(clf(x))

    for k in range(sched.steps + 1):
        t = k * sched.delta
        u, flags = ctrl.evaluate(x)
        log.append(t, x, u, clf_value(x), flags)
        if k == sched.steps:
            break
        with np.errstate(all="ignore"):
            for _ in range(sched.substeps):
                x = _rk4(sys, x, u, h)
        if _blown(x):
            log.append((k + 1) * sched.delta, x, u, clf_value(x), [BLOWUP])
            log.blowup_time = (k + 1) * sched.delta
            break
    return log


@dataclass(frozen=True)
class Verdict:
    entered_at: Optional[float]
    stayed: bool
    bounded: bool
    passed: bool


def verify_practical_stability(log: TrajectoryLog, R, r, T_entry):
    """Check that the logged run enters ``B_r`` by ``T_entry`` and stays there.

    ``bounded``: every logged norm is finite and at most ``10 R``.
    ``entered_at``: first instant with ``|x| <= r``, or ``None`` if that
    happens only after ``T_entry`` (or never).
    ``stayed``: ``|x| <= r`` at every instant from ``T_entry`` on (from the
    last instant when the log is shorter than ``T_entry``).
    """
    if len(log) == 0:
        raise ValueError("empty trajectory log")
    if not R > r > 0:
        raise ValueError("need R > r > 0")
    norms = log.norms()
    times = np.asarray(log.times)
    if not norms[0] <= R:
        raise ValueError("log does not start in B_R")
    bounded = bool(np.all(np.isfinite(norms)) and norms.max() <= 10 * R) and not log.blew_up
    inside = norms <= r
    first = np.flatnonzero(inside & (times <= T_entry + 1e-12))
    entered_at = float(times[first[0]]) if first.size else None
    tail = times >= min(T_entry, times[-1]) - 1e-12
    stayed = bool(np.all(inside[tail]))
    return Verdict(entered_at, stayed, bounded,
                   bool(bounded and entered_at is not None and stayed))
