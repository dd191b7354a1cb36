"""Batch front end: configuration parsing, scenario setup, simulation and
convergence-study runs, CSV/JSON artifact emission.

Everything is deterministic: no random sources, plain-text inputs, CSV
outputs with a stable documented schema.
"""

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .basis import make_basis, _gauss_legendre_unit, lagrange_eval
from .errors import ConfigurationError, NumericalError
from .kernels import Kernels
from .limiter import SubcellLimiter
from .mesh import build_grid
from .metrics import AccessLedger, TASKS, single_touch_audit
from .pde import AdvectionSystem, EulerSystem
from .scheduler import Driver, TimeControl

SCENARIOS = ("uniform", "smooth-density-wave", "gaussian-advect", "sod",
             "speed-spike")

GAUSSIAN_SIGMA = 0.25
ADVECTION_VELOCITY = (1.0, 0.5, 0.25)

METRIC_COLUMNS = (["step", "T", "dt_old", "dt_new", "dt_adm", "reruns",
                   "troubled", "q_reads_per_cell", "bus_reads", "bus_writes",
                   "wall_time"]
                  + [f"{t}_{kind}" for t in TASKS for kind in ("reads", "writes")])


@dataclass
class RunConfig:
    scenario: str = "smooth-density-wave"
    d: int = 2
    L: int = 1
    p: int = 3
    mode: str = "fused"
    traversal: str = "lexicographic"
    c_dt: float = 0.99
    cfl: float = 0.9
    averaging: str = "strict"
    steps: int = 10
    final_time: float = None
    limiter: bool = False
    parallel: bool = False
    forced_dt: float = None
    spike_step: int = 5
    spike_factor: float = 3.0
    inject_rerun: bool = False
    trace: bool = False
    out: str = "out"

    _COERCE = {
        "d": int, "L": int, "p": int, "steps": int, "spike_step": int,
        "c_dt": float, "cfl": float, "final_time": float, "forced_dt": float,
        "spike_factor": float,
        "limiter": lambda v: v.lower() in ("1", "true", "yes", "on"),
        "parallel": lambda v: v.lower() in ("1", "true", "yes", "on"),
        "inject_rerun": lambda v: v.lower() in ("1", "true", "yes", "on"),
        "trace": lambda v: v.lower() in ("1", "true", "yes", "on"),
    }

    @classmethod
    def from_file(cls, path):
        cfg = cls()
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            cfg.set(key, value)
        return cfg

    def set(self, key, value):
        if not hasattr(self, key) or key.startswith("_"):
            raise ConfigurationError(f"unknown configuration key {key!r}")
        coerce = self._COERCE.get(key, str)
        setattr(self, key, coerce(value) if isinstance(value, str) else value)

    def validate(self):
        if self.scenario not in SCENARIOS:
            raise ConfigurationError(
                f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        if not 0 <= self.p <= 9:
            raise ConfigurationError(f"order p must be in [0, 9], got {self.p}")
        if self.d not in (2, 3):
            raise ConfigurationError(f"dimension must be 2 or 3, got {self.d}")


# ---------------------------------------------------------------------------
# scenarios


def gaussian_profile(x):
    """Smooth periodic bump on the unit cube."""
    return np.exp(-np.sum(np.sin(np.pi * (x - 0.5)) ** 2, axis=-1)
                  / (2.0 * GAUSSIAN_SIGMA ** 2))


def scenario(scenario_id, d):
    """Initial-condition evaluator plus its PDE system and boundary kind.

    Returns (system, init(x) -> states, boundary).
    """
    if scenario_id == "uniform":
        system = EulerSystem(d)

        def init(x):
            Q = np.zeros(x.shape[:-1] + (system.m,))
            Q[..., 0] = 1.0
            Q[..., -1] = 2.5
            return Q

        return system, init, "periodic"

    if scenario_id in ("smooth-density-wave", "speed-spike"):
        system = EulerSystem(d)

        def init(x):
            rho = 1.0 + 0.2 * np.sin(2.0 * np.pi * np.sum(x, axis=-1))
            Q = np.zeros(x.shape[:-1] + (system.m,))
            Q[..., 0] = rho
            for a in range(d):
                Q[..., 1 + a] = 0.5 * rho
            Q[..., -1] = 1.0 / 0.4 + 0.5 * rho * d * 0.25
            return Q

        return system, init, "periodic"

    if scenario_id == "gaussian-advect":
        system = AdvectionSystem(d, ADVECTION_VELOCITY[:d],
                                 profile=gaussian_profile)
        return system, lambda x: gaussian_profile(x)[..., None], "periodic"

    if scenario_id == "sod":
        system = EulerSystem(d)

        def init(x):
            Q = np.zeros(x.shape[:-1] + (system.m,))
            left = x[..., 0] < 0.5
            Q[..., 0] = np.where(left, 1.0, 0.125)
            Q[..., -1] = np.where(left, 1.0, 0.1) / 0.4
            return Q

        return system, init, "outflow"

    raise ConfigurationError(f"unknown scenario {scenario_id!r}")


def initialise(grid, basis, init):
    """Sample the initial condition at every cell's collocation nodes."""
    for cell in grid.cells:
        pts = [(cell.multi_index[a] + basis.nodes) * grid.h
               for a in range(grid.d)]
        x = np.stack(np.meshgrid(*pts, indexing="ij"), axis=-1)
        cell.Q[...] = init(x)


def setup_run(config):
    """Build grid, kernels, ledger and driver for one configuration."""
    config.validate()
    system, init, boundary = scenario(config.scenario, config.d)
    basis = make_basis(config.p)
    storage = "spacetime" if config.mode == "straightforward" else "hull"
    grid = build_grid(config.d, config.L, config.p, system.m,
                      boundary=boundary, storage=storage)
    initialise(grid, basis, init)
    ledger = AccessLedger(config.mode, config.d, config.p, system.m,
                          trace_enabled=config.trace)
    kernels = Kernels(system, basis, grid, ledger, cfl=config.cfl)
    tc = TimeControl(c_dt=config.c_dt, averaging=config.averaging,
                     forced_dt=config.forced_dt)
    limiter = SubcellLimiter(system, basis, grid, cfl=config.cfl) \
        if config.limiter else None
    spike = config.spike_step if config.scenario == "speed-spike" else None
    driver = Driver(grid, kernels, tc, config.mode,
                    traversal=config.traversal, parallel=config.parallel,
                    inject_rerun=config.inject_rerun, spike_step=spike,
                    spike_factor=config.spike_factor, limiter=limiter)
    return grid, basis, system, ledger, driver


# ---------------------------------------------------------------------------
# artifacts


def write_metrics_csv(path, records):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=METRIC_COLUMNS, extrasaction="ignore")
        writer.writeheader()
        for rec in records:
            writer.writerow({c: rec.get(c, 0) for c in METRIC_COLUMNS})


def write_solution_csv(path, grid):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        n_values = grid.cells[0].Q.size
        writer.writerow(["cell"] + [f"v{i}" for i in range(n_values)])
        for cell in grid.cells:
            writer.writerow([cell.index] +
                            [repr(v) for v in cell.Q.ravel().tolist()])


def write_trace_csv(path, trace):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sweep", "task", "entity_kind", "entity_id", "step"])
        for ev in trace:
            writer.writerow([ev.sweep, ev.task, ev.entity[0], ev.entity[1],
                             ev.step])


def run_simulation(config):
    """Execute one configured run and write its artifacts; returns the
    output directory path."""
    grid, basis, system, ledger, driver = setup_run(config)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    if config.final_time is not None:
        driver.run(final_time=config.final_time)
    else:
        driver.run(steps=config.steps)
    write_metrics_csv(out / "metrics.csv", driver.step_records)
    write_solution_csv(out / "solution_final.csv", grid)
    if config.trace:
        write_trace_csv(out / "trace.csv", ledger.trace)
    audit = single_touch_audit(ledger, grid.n_cells, driver.step_count)
    manifest = {
        "config": {k: v for k, v in asdict(config).items()},
        "steps": driver.step_count,
        "sweeps": driver.sweep_count,
        "reruns": driver.rerun_count,
        "c_rerun_measured": 1.0 + driver.rerun_count / max(1, driver.step_count),
        "q_reads_per_cell_step": audit["amortised"],
        "persistent_doubles": grid.persistent_doubles(),
        "final_time": driver.tc.T,
    }
    (out / "run.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return out


# ---------------------------------------------------------------------------
# convergence study


def l2_error(grid, basis, system, T, oversample=6):
    """Grid-wide L2 distance to the exact solution, via oversampled
    Gauss quadrature of the nodal expansion."""
    if system.exact_solution is None:
        raise ConfigurationError("scenario provides no exact solution")
    xs, ws = _gauss_legendre_unit(oversample)
    E = lagrange_eval(basis.nodes, xs)
    d = grid.d
    W = np.ones((oversample,) * d)
    for a in range(d):
        W = W * ws.reshape([oversample if b == a else 1 for b in range(d)])
    err2 = 0.0
    for cell in grid.cells:
        U = cell.Q
        for axis in range(d):
            U = np.moveaxis(np.tensordot(E, U, axes=(1, axis)), 0, axis)
        pts = [(cell.multi_index[a] + xs) * grid.h for a in range(d)]
        x = np.stack(np.meshgrid(*pts, indexing="ij"), axis=-1)
        err2 += np.sum(W[..., None] * (U - system.exact_solution(x, T)) ** 2) \
            * grid.h ** d
    return math.sqrt(err2)


def convergence_study(config, levels, final_time=0.05):
    """Run the configured scenario over a sequence of depths and return
    rows (L, h, error, order); order is vs the previous level."""
    rows = []
    prev_err = None
    for L in levels:
        cfg = RunConfig(**{**asdict(config), "L": L,
                           "mode": "straightforward", "steps": 0,
                           "final_time": final_time, "trace": False})
        grid, basis, system, ledger, driver = setup_run(cfg)
        driver.run(final_time=final_time)
        err = l2_error(grid, basis, system, final_time)
        order = math.log(prev_err / err) / math.log(3.0) \
            if prev_err is not None and err > 0 else float("nan")
        rows.append({"L": L, "h": grid.h, "error": err, "order": order})
        prev_err = err
    return rows


def write_convergence_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["L", "h", "error", "order"])
        writer.writeheader()
        writer.writerows(rows)


# ---------------------------------------------------------------------------
# entry point


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="aderdg",
        description="predictor-corrector hyperbolic solver with swappable "
                    "time-stepping schedulers and exact access accounting")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one simulation")
    run.add_argument("--config", help="key = value configuration file")
    run.add_argument("--scenario", choices=SCENARIOS)
    run.add_argument("--mode",
                     choices=("straightforward", "shifted", "fused"))
    run.add_argument("--steps", type=int)
    run.add_argument("--final-time", type=float, dest="final_time")
    run.add_argument("--out")
    run.add_argument("--force-dt", type=float, dest="forced_dt")
    run.add_argument("--parallel", action="store_true", default=None)
    run.add_argument("--limiter", action="store_true", default=None)
    run.add_argument("--trace", action="store_true", default=None)
    run.add_argument("--d", type=int)
    run.add_argument("--L", type=int)
    run.add_argument("--p", type=int)
    run.add_argument("--traversal", choices=("lexicographic", "peano"))

    conv = sub.add_parser("convergence", help="grid-refinement study")
    conv.add_argument("--config", help="key = value configuration file")
    conv.add_argument("--scenario", choices=SCENARIOS,
                      default="gaussian-advect")
    conv.add_argument("--p", type=int, default=2)
    conv.add_argument("--d", type=int, default=2)
    conv.add_argument("--levels", default="1,2,3",
                      help="comma-separated depths")
    conv.add_argument("--final-time", type=float, default=0.05,
                      dest="final_time")
    conv.add_argument("--out", default="out")
    return parser


def _config_from_args(args):
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    for key in ("scenario", "mode", "steps", "final_time", "out", "forced_dt",
                "parallel", "limiter", "trace", "d", "L", "p", "traversal"):
        value = getattr(args, key, None)
        if value is not None:
            cfg.set(key, value)
    return cfg


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
        if args.command == "run":
            out = run_simulation(cfg)
            print(f"wrote artifacts to {out}")
        else:
            levels = [int(v) for v in str(args.levels).split(",")]
            rows = convergence_study(cfg, levels, final_time=args.final_time)
            out = Path(cfg.out)
            out.mkdir(parents=True, exist_ok=True)
            write_convergence_csv(out / "convergence.csv", rows)
            for row in rows:
                print(f"L={row['L']} h={row['h']:.5f} "
                      f"error={row['error']:.6e} order={row['order']:.3f}")
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
