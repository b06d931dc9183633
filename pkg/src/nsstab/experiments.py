"""Experiment configuration, the accuracy sweep and the benchmark matrix.

Configs are single JSON documents.  Every field is optional; omitted
fields take the defaults below, which reproduce the three-wheel robot
accuracy sweep (ENDI, inf-convolution feedback on the backstepped CLF).
"""

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .clf import CLF_LABELS, get_clf
from .controllers import CONTROLLER_LABELS, build_controller
from .errors import ConfigError
from .simulation import SamplingSchedule, TrajectoryLog, simulate, verify_practical_stability
from .systems import SYSTEMS, get_system

CASE_X0 = (-1.0, 0.5, 0.01, 0.05, 0.075)
CASE_ACCURACIES = (1e-2, 1e-3, 1e-4, 1e-6, 1e-8)
SEED_ENV = "NSSTAB_SEED"


@dataclass
class BenchCell:
    name: str
    system: str
    controller: str
    x0: list
    delta: float
    T: float
    R: float
    r: float
    T_entry: float
    clf: Optional[str] = None
    params: dict = field(default_factory=dict)
    control_bound: Optional[float] = None
    substeps: int = 10


def default_bench():
    """The shipped benchmark matrix with its frozen verification thresholds.

    The inf-convolution cell settles into a chattering cycle of radius
    about 0.115 (alpha = 0.1, bang-bang controls held for 0.01), hence its
    wider target ball.
    """
    ni = dict(system="ni", x0=[0.5, 0.5, 0.5], delta=0.01, R=1.0)
    return [
        BenchCell("ni_steepest_v1", controller="steepest", clf="v1_ni", T=10.0, r=0.1,
                  T_entry=10.0, **ni),
        BenchCell("ni_dini_v1", controller="dini", clf="v1_ni", T=30.0, r=0.1, T_entry=30.0,
                  **ni),
        BenchCell("ni_optim_v1", controller="optim", clf="v1_ni", T=10.0, r=0.1, T_entry=10.0,
                  **ni),
        BenchCell("ni_infc_family", controller="infc", clf="ni_family",
                  params={"eps": 1e-6, "gamma": 1e-6}, T=6.0, r=0.15, T_entry=6.0, **ni),
        BenchCell("endi_bks", "endi", "bks_endi", list(CASE_X0), 0.005, 20.0, 2.0, 0.1, 20.0),
        BenchCell("artstein_bks", "artstein", "bks_artstein", [1.0, 0.0, 0.5], 0.005, 40.0,
                  2.0, 0.2, 40.0),
        BenchCell("smc_demo", "smc_demo", "smc", [1.0, 1.0], 0.001, 20.0, 2.0, 0.1, 20.0),
    ]


@dataclass
class ExperimentConfig:
    system: str = "endi"
    controller: str = "infc"
    clf: str = "vc_endi"
    controller_params: dict = field(default_factory=dict)
    x0: list = field(default_factory=lambda: list(CASE_X0))
    delta: float = 0.005
    T: float = 4.0
    substeps: int = 10
    alpha: float = 0.1
    control_bound: float = 3.0
    accuracies: list = field(default_factory=lambda: list(CASE_ACCURACIES))
    seed: int = 42
    out: str = "nsstab_out"
    bench: list = field(default_factory=default_bench)

    def validate(self):
        if self.system not in SYSTEMS:
            raise ConfigError(f"unknown system {self.system!r}")
        if self.controller not in CONTROLLER_LABELS:
            raise ConfigError(f"unknown controller {self.controller!r}")
        if self.clf not in CLF_LABELS:
            raise ConfigError(f"unknown CLF {self.clf!r}")
        if not self.accuracies or any(not (a > 0) for a in self.accuracies):
            raise ConfigError("accuracies must be a non-empty list of positive numbers")
        n = get_system(self.system).n
        if len(self.x0) != n:
            raise ConfigError(f"x0 has length {len(self.x0)}, system {self.system!r} has n={n}")
        try:
            SamplingSchedule(self.delta, self.T, self.substeps)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        for cell in self.bench:
            _validate_cell(cell)
        return self


def _validate_cell(cell):
    if cell.system not in SYSTEMS:
        raise ConfigError(f"bench cell {cell.name!r}: unknown system {cell.system!r}")
    if cell.controller not in CONTROLLER_LABELS:
        raise ConfigError(f"bench cell {cell.name!r}: unknown controller {cell.controller!r}")
    if cell.clf is not None and cell.clf not in CLF_LABELS:
        raise ConfigError(f"bench cell {cell.name!r}: unknown CLF {cell.clf!r}")
    if len(cell.x0) != get_system(cell.system).n:
        raise ConfigError(f"bench cell {cell.name!r}: x0 dimension mismatch")
    if not cell.R > cell.r > 0:
        raise ConfigError(f"bench cell {cell.name!r}: need R > r > 0")
    try:
        SamplingSchedule(cell.delta, cell.T, cell.substeps)
    except ValueError as exc:
        raise ConfigError(f"bench cell {cell.name!r}: {exc}") from exc


def load_config(path=None, overrides=None):
    """Read a JSON config, fill defaults, apply ``NSSTAB_SEED`` and validate."""
    data = {}
    if path is not None:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    data.update(overrides or {})
    known = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    if "bench" in data:
        try:
            data["bench"] = [c if isinstance(c, BenchCell) else BenchCell(**c)
                             for c in data["bench"]]
        except TypeError as exc:
            raise ConfigError(f"bad bench cell: {exc}") from exc
    try:
        cfg = ExperimentConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            cfg.seed = int(env)
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}") from exc
    return cfg.validate()


def accuracy_tag(a):
    return f"{a:.0e}"


def _fmt(v):
    return format(float(v), ".17g")


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) if isinstance(v, float) else v for v in r])


def _case_cell(args):
    cfg, a, out = args
    sys = get_system(cfg.system, cfg.control_bound)
    clf = get_clf(cfg.clf)
    params = dict(cfg.controller_params)
    if cfg.controller == "infc":
        params.update(alpha=cfg.alpha, eps=a, gamma=a)
    else:
        params.setdefault("accuracy", a)
    ctrl = build_controller(cfg.controller, sys, clf, params, cfg.delta)
    start = time.perf_counter()
    log = simulate(sys, ctrl, cfg.x0, SamplingSchedule(cfg.delta, cfg.T, cfg.substeps), clf)
    wall = time.perf_counter() - start
    log.to_csv(os.path.join(out, f"traj_eps{accuracy_tag(a)}.csv"))
    V = np.asarray(log.clf_values)
    final_v = float(V[-1])
    unstable = log.blew_up or not np.isfinite(final_v) or final_v > float(V[0])
    return {"accuracy": float(a), "final_norm": float(log.norms()[-1]),
            "min_V": float(np.nanmin(V)), "initial_V": float(V[0]), "final_V": final_v,
            "blowup": bool(log.blew_up), "unstable": bool(unstable), "steps": len(log) - 1,
            "wall_time": wall}


CASE_COLUMNS = ("accuracy", "final_norm", "min_V", "initial_V", "final_V", "blowup",
                "unstable", "steps")


def _pool_map(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def run_case_study(cfg: ExperimentConfig, out=None, jobs=1):
    """Accuracy sweep: one closed-loop run per accuracy ``a`` with ``eps = gamma = a``.

    Writes ``traj_eps{a}.csv`` per cell and ``case_summary.csv``; returns
    the summary rows (which also carry the wall time, kept out of the CSV
    so that reruns are byte-identical).
    """
    out = out or cfg.out
    os.makedirs(out, exist_ok=True)
    rows = _pool_map(_case_cell, [(cfg, a, out) for a in cfg.accuracies], jobs)
    _write_rows(os.path.join(out, "case_summary.csv"), CASE_COLUMNS,
                [[r[c] for c in CASE_COLUMNS] for r in rows])
    return rows


def _bench_cell(args):
    cell, out = args
    sys = get_system(cell.system, cell.control_bound)
    clf = get_clf(cell.clf) if cell.clf is not None else None
    ctrl = build_controller(cell.controller, sys, clf, cell.params, cell.delta)
    start = time.perf_counter()
    log = simulate(sys, ctrl, cell.x0, SamplingSchedule(cell.delta, cell.T, cell.substeps), clf)
    wall = time.perf_counter() - start
    log.to_csv(os.path.join(out, f"bench_{cell.name}.csv"))
    v = verify_practical_stability(log, cell.R, cell.r, cell.T_entry)
    return {"name": cell.name, "system": cell.system, "controller": cell.controller,
            "clf": cell.clf or "", "final_norm": float(log.norms()[-1]),
            "entered_at": "" if v.entered_at is None else float(v.entered_at),
            "stayed": v.stayed, "bounded": v.bounded, "passed": v.passed,
            "blowup": log.blew_up, "wall_time": wall}


BENCH_COLUMNS = ("name", "system", "controller", "clf", "final_norm", "entered_at", "stayed",
                 "bounded", "passed", "blowup")


def run_benchmarks(cfg: ExperimentConfig, out=None, jobs=1):
    """Simulate and verify every cell of ``cfg.bench``; writes ``bench_summary.csv``."""
    out = out or cfg.out
    os.makedirs(out, exist_ok=True)
    rows = _pool_map(_bench_cell, [(c, out) for c in cfg.bench], jobs)
    _write_rows(os.path.join(out, "bench_summary.csv"), BENCH_COLUMNS,
                [[r[c] for c in BENCH_COLUMNS] for r in rows])
    return rows


def config_to_json(cfg):
    return json.dumps(asdict(cfg), indent=2)


def read_log(path):
    return TrajectoryLog.from_csv(path)
