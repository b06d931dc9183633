"""Deterministic box-constrained minimization with an explicit accuracy knob.

The search is a coarse uniform grid sweep followed by local stencil
refinement around the incumbent.  Everything is deterministic: ties are
broken towards the lexicographically smallest point, and moves are made
only on strict improvement, so tightening ``accuracy`` continues the same
search path and can never return a worse value.

The engine is batched: many independent problems sharing an objective
signature can be solved together, which is what makes marginal functions
(a minimization over a parameter per state) cheap enough to nest inside
other searches.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

ACCURACY_NOT_MET = "accuracy_not_met"


def default_max_evals(dim):
    return 10**4 if dim == 1 else 10**5


def default_grid_points(dim):
    return {1: 129, 2: 33, 3: 9}.get(dim, 5 if dim == 4 else 3)


def _stencil_reach(dim):
    # points per side along each axis; the step shrinks by the same factor
    return 16 if dim == 1 else 4


@dataclass
class BoxProblem:
    """A minimization problem over an axis-aligned box.

    Parameters
    ----------
    objective : callable
        Maps a point of shape ``(d,)`` to a float, or, when ``vectorized``
        is true, an array of points ``(k, d)`` to values ``(k,)``.
        Non-finite values are treated as ``+inf`` (rejected points).
    box : array_like
        ``(d, 2)`` array of ``[lo, hi]`` rows.
    accuracy : float
        Target accuracy in objective value.
    max_evals : int, optional
        Evaluation budget; defaults to 1e4 in one dimension, 1e5 otherwise.
    grid_points : int, optional
        Points per axis of the coarse sweep.
    x0 : array_like, optional
        Extra starting candidate evaluated alongside the coarse grid.
    """

    objective: Callable
    box: np.ndarray
    accuracy: float = 1e-6
    max_evals: Optional[int] = None
    vectorized: bool = False
    grid_points: Optional[int] = None
    x0: Optional[np.ndarray] = None

    def __post_init__(self):
        self.box = np.atleast_2d(np.asarray(self.box, dtype=float))
        if self.box.shape[1] != 2:
            raise ValueError("box must have shape (d, 2)")
        if np.any(self.box[:, 0] > self.box[:, 1]):
            raise ValueError("box requires lo <= hi in every coordinate")
        if not self.accuracy > 0:
            raise ValueError("accuracy must be positive")
        if self.max_evals is None:
            self.max_evals = default_max_evals(self.dim)
        if self.grid_points is None:
            self.grid_points = default_grid_points(self.dim)
        if self.grid_points < 2:
            raise ValueError("grid_points must be at least 2")

    @property
    def dim(self):
        return self.box.shape[0]

    def batch_objective(self):
        f = self.objective
        if self.vectorized:
            return lambda X: np.asarray(f(X), dtype=float).reshape(len(X))
        return lambda X: np.array([f(x) for x in X], dtype=float)


@dataclass
class BoxResult:
    x: np.ndarray
    value: float
    evals: int
    accuracy_met: bool
    h_final: float
    flags: list = field(default_factory=list)

    def __iter__(self):
        # unpacks as (argmin_est, value, evals)
        return iter((self.x, self.value, self.evals))


def _clean(v):
    v = np.asarray(v, dtype=float)
    return np.where(np.isfinite(v), v, np.inf)


def _grid(dim, points):
    axis = np.linspace(0.0, 1.0, points)
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _stencil(dim, reach):
    steps = [k for k in range(-reach, reach + 1) if k != 0]
    E = []
    for i in range(dim):
        for k in steps:
            e = np.zeros(dim)
            e[i] = k
            E.append(e)
    return np.array(E)


def _pick(values, points):
    """Row-wise argmin with lexicographic tie-breaking on the points."""
    # values (P, C), points (P, C, d)
    keys = [points[..., j] for j in range(points.shape[-1] - 1, -1, -1)]
    order = np.lexsort(keys + [values], axis=-1)
    return order[:, 0]


class _Engine:
    """Batched grid + stencil search in normalized coordinates t in [0,1]^d."""

    def __init__(self, evaluate, lo, hi, accuracy, max_evals, grid_points, pad=0):
        # evaluate(idx, X) -> values, idx: problem index per row of X.  With
        # pad > 0 the refinement may leave [lo, hi] by pad coarse spacings.
        self.evaluate = evaluate
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        ext = pad * (hi - lo) / (grid_points - 1)
        self.lo = lo - ext
        self.width = hi + ext - self.lo
        self.pad = int(pad)
        self.P, self.d = self.lo.shape
        self.accuracy = float(accuracy)
        self.max_evals = int(max_evals)
        self.grid_points = int(grid_points)
        self.evals = np.zeros(self.P, dtype=np.int64)

    def to_real(self, idx, t):
        return self.lo[idx] + t * self.width[idx]

    def _eval(self, idx, t):
        if len(idx) == 0:
            return np.empty(0)
        v = _clean(self.evaluate(idx, self.to_real(idx, t)))
        np.add.at(self.evals, idx, 1)
        return v

    @property
    def h0(self):
        return 1.0 / (self.grid_points - 1 + 2 * self.pad)

    def coarse(self, hints=None):
        """Evaluate the coarse grid for every problem; return (t_grid, values)."""
        T = (self.pad + _grid(self.d, self.grid_points) * (self.grid_points - 1)) * self.h0
        N = len(T)
        idx = np.repeat(np.arange(self.P), N)
        tt = np.tile(T, (self.P, 1))
        vals = self._eval(idx, tt).reshape(self.P, N)
        pts = np.broadcast_to(T, (self.P, N, self.d))
        if hints is not None:
            th = np.clip((np.asarray(hints, float) - self.lo)
                         / np.where(self.width > 0, self.width, 1.0), 0.0, 1.0)
            hv = self._eval(np.arange(self.P), th)
            vals = np.concatenate([vals, hv[:, None]], axis=1)
            pts = np.concatenate([pts, th[:, None, :]], axis=1)
        return T, pts, vals

    def refine(self, t0, f0, h0):
        reach = _stencil_reach(self.d)
        shrink = float(reach)
        E = _stencil(self.d, reach)
        h_acc = min(h0, np.sqrt(self.accuracy))
        t = np.array(t0, dtype=float)
        f = np.array(f0, dtype=float)
        h = np.full(self.P, float(h0))
        level_start = f.copy()
        met = np.zeros(self.P, dtype=bool)
        active = np.ones(self.P, dtype=bool)
        while active.any():
            A = np.flatnonzero(active)
            cand = np.clip(t[A, None, :] + h[A, None, None] * E[None], 0.0, 1.0)
            C = cand.shape[1]
            idx = np.repeat(A, C)
            vals = self._eval(idx, cand.reshape(-1, self.d)).reshape(len(A), C)
            # clipped duplicates of the incumbent never count as moves
            same = np.all(cand == t[A, None, :], axis=-1)
            vals = np.where(same, np.inf, vals)
            j = _pick(vals, cand)
            best = vals[np.arange(len(A)), j]
            better = best < f[A]
            moved = A[better]
            t[moved] = cand[better, j[better]]
            f[moved] = best[better]
            # in one dimension an interior stencil minimum already brackets
            # the minimizer, so the level can end without a confirming round
            edge = np.abs(E[j, :]).max(axis=1) >= reach
            keep_level = better & (edge | (self.d > 1))
            stay = A[~keep_level]
            gain = np.where(np.isinf(f[stay]), 0.0, level_start[stay] - f[stay])
            done = (h[stay] <= h_acc) & (gain < self.accuracy / 10.0)
            met[stay[done]] = True
            active[stay[done]] = False
            cont = stay[~done]
            h[cont] /= shrink
            level_start[cont] = f[cont]
            tiny = cont[h[cont] < 1e-15]
            active[tiny] = False
            met[tiny] = True
            over = np.flatnonzero(active & (self.evals >= self.max_evals))
            active[over] = False
        return t, f, h, met


def _box_arrays(box, P):
    lo = np.broadcast_to(box[:, 0], (P, box.shape[0])).copy()
    hi = np.broadcast_to(box[:, 1], (P, box.shape[0])).copy()
    return lo, hi


def minimize(p: BoxProblem) -> BoxResult:
    """Minimize ``p.objective`` over ``p.box``.

    Returns a :class:`BoxResult` that also unpacks as
    ``(argmin_est, value, evals)``.  When the evaluation budget runs out
    before the stopping rule fires, ``accuracy_met`` is false and the
    ``accuracy_not_met`` flag is set.
    """
    batch = p.batch_objective()
    lo, hi = _box_arrays(p.box, 1)
    eng = _Engine(lambda idx, X: batch(X), lo, hi, p.accuracy, p.max_evals, p.grid_points)
    hints = None if p.x0 is None else np.asarray(p.x0, float)[None, :]
    _, pts, vals = eng.coarse(hints)
    j = _pick(vals, pts)[0]
    t, f, h, met = eng.refine(pts[0, j][None], vals[0, j : j + 1], 1.0 / (p.grid_points - 1))
    x = eng.to_real(np.array([0]), t)[0]
    flags = [] if met[0] else [ACCURACY_NOT_MET]
    return BoxResult(x, float(f[0]), int(eng.evals[0]), bool(met[0]),
                     float(h[0]), flags)


def minimize_many(objective, box, accuracy=1e-6, max_evals=None,
                  grid_points=None, hints=None, pad=0):
    """Solve many independent problems over per-problem boxes at once.

    Parameters
    ----------
    objective : callable
        ``objective(idx, X)`` returns the values of problem ``idx[i]`` at
        point ``X[i]``.
    box : array_like
        ``(P, d, 2)`` per-problem boxes, or ``(d, 2)`` shared by ``P``
        problems if ``hints`` fixes ``P``.
    pad : int
        The coarse grid covers ``box``; refinement may move up to ``pad``
        coarse spacings beyond it (used for periodic parameters).

    Returns
    -------
    x : ndarray (P, d)
    values : ndarray (P,)
    met : ndarray of bool (P,)
    """
    box = np.asarray(box, dtype=float)
    if box.ndim == 2:
        if hints is None:
            raise ValueError("shared box needs hints to fix the batch size")
        box = np.broadcast_to(box, (len(hints),) + box.shape)
    P, d = box.shape[:2]
    lo, hi = box[..., 0].copy(), box[..., 1].copy()
    if max_evals is None:
        max_evals = default_max_evals(d)
    if grid_points is None:
        grid_points = default_grid_points(d)
    eng = _Engine(objective, lo, hi, accuracy, max_evals, grid_points, pad)
    _, pts, vals = eng.coarse(hints)
    j = _pick(vals, pts)
    rows = np.arange(P)
    t, f, h, met = eng.refine(pts[rows, j], vals[rows, j], eng.h0)
    return eng.to_real(rows, t), f, met


def _grid_local_minima(vals, points, dim):
    """Indices of coarse-grid points no larger than any axis neighbour."""
    V = vals.reshape((points,) * dim)
    ok = np.isfinite(V)
    for ax in range(dim):
        fwd = np.full_like(V, np.inf)
        bwd = np.full_like(V, np.inf)
        sl = [slice(None)] * dim
        sr = [slice(None)] * dim
        sl[ax] = slice(0, -1)
        sr[ax] = slice(1, None)
        fwd[tuple(sl)] = V[tuple(sr)]
        bwd[tuple(sr)] = V[tuple(sl)]
        ok &= (V <= fwd) & (V <= bwd)
    return np.flatnonzero(ok.ravel())


def argmin_clusters(p: BoxProblem, cluster_tol: float, max_starts: int = 1024, pad: int = 0):
    """All refined local minimizers within ``cluster_tol`` of the best value.

    Every local minimum of the coarse grid (at most ``max_starts`` of them,
    best first) is refined independently.  Survivors are deduplicated by
    spatial distance ``10 * h_final`` (capped at half the coarse spacing so
    that distinct coarse points are never merged).  A constant objective
    therefore returns the whole coarse grid.
    """
    batch = p.batch_objective()
    d, g = p.dim, p.grid_points
    lo, hi = _box_arrays(p.box, 1)
    eng = _Engine(lambda idx, X: batch(X), lo, hi, p.accuracy, p.max_evals, g, pad)
    T, _, vals = eng.coarse()
    vals = vals[0]
    starts = _grid_local_minima(vals, g, d)
    if len(starts) == 0:
        return []
    order = np.lexsort([T[starts, j] for j in range(d - 1, -1, -1)] + [vals[starts]])
    starts = starts[order][:max_starts]
    S = len(starts)
    width = p.box[:, 1] - p.box[:, 0]
    budget = max(p.max_evals, eng.evals[0])
    sub = _Engine(lambda idx, X: batch(X), np.repeat(lo, S, 0), np.repeat(hi, S, 0),
                  p.accuracy, budget, g, pad)
    t, f, h, _ = sub.refine(T[starts], vals[starts], sub.h0)
    X = sub.lo[0] + t * sub.width[0]
    best = np.min(f)
    keep = np.flatnonzero(f <= best + cluster_tol)
    keep = keep[np.lexsort([X[keep, j] for j in range(d - 1, -1, -1)] + [f[keep]])]
    step = float(np.max(h[keep])) * float(np.max(width))
    radius = min(10.0 * step, 0.5 * float(np.max(width)) / (g - 1))
    out = []
    for k in keep:
        if all(np.linalg.norm(X[k] - X[m]) > radius for m in out):
            out.append(k)
    out.sort(key=lambda k: tuple(X[k]))
    return [X[k] for k in out]
