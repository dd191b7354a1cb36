"""Exact memory-access accounting and the closed-form cost models.

Three independent counter families live here:

* per-task logical double traffic (the "in"/"out" volumes of each kernel
  invocation),
* a bus model counting which coefficient blocks actually cross the memory
  interface per realisation step, under the assumption that any single
  task completes in cache,
* a per-step counter of how often each cell's solution block Q_h is
  fetched (the single-touch witness).

The analysis helpers turn a finished ledger plus task trace into the
numbers the drivers are supposed to reproduce: persistent footprint,
traffic per cell per step, rerun bounds, and concurrency profiles.
"""

import threading
from collections import Counter, defaultdict
from fractions import Fraction
from typing import NamedTuple, Optional

from .errors import ConfigurationError, SchedulingOrderError

TASKS = ("predict", "extrapolate", "solveRiemann", "integrateVolume",
         "integrateFace", "update", "calcTimeStep")

#: tasks belonging to the prediction block of a sweep; they are attributed
#: to the step being predicted, everything else to the step being completed
STP_TASKS = frozenset({"predict", "extrapolate", "integrateVolume"})

#: phase mapping for the concurrency profile; integrateVolume is omitted
#: because it migrates between the corrector and prediction blocks
#: depending on the driver mode
PHASE_OF_TASK = {
    "predict": "STP",
    "extrapolate": "STP",
    "solveRiemann": "Riemann",
    "integrateFace": "Corrector",
    "update": "Corrector",
    "calcTimeStep": "Corrector",
}

MODES = ("straightforward", "shifted", "fused")


def logical_task_volumes(task, d, p, m):
    """(reads, writes) in doubles for one invocation of a kernel task."""
    n = p + 1
    block = m * n ** d
    st = m * n ** (d + 1)
    table = {
        "predict": (block, (d + 1) * st),
        "extrapolate": ((d + 1) * st, 4 * d * block),
        "solveRiemann": (4 * block, 2 * block),
        "integrateVolume": (d * st, block),
        "integrateFace": (2 * d * block, block),
        "update": (block, block),
        "calcTimeStep": (block, 1),
    }
    return table[task]


def _bus_profile(mode, d):
    """Coefficient blocks (read, written) per task invocation under the
    cache model of the traffic bounds.  Units: blocks of m(p+1)^d
    doubles.  The per-mode splits sum to the displayed totals:
    straightforward (18d+4), fused (16d+3) plus (4d+2) per rerun pass."""
    if mode == "straightforward":
        return {
            "predict": (1, 1),
            "extrapolate": (0, 4 * d),
            "solveRiemann": (8, 4),
            "integrateVolume": (0, 0),
            "integrateFace": (2 * d, 0),
            "update": (1, 1),
            "calcTimeStep": (0, 0),
        }
    if mode == "shifted":
        return {
            "predict": (1, 0),
            "extrapolate": (0, 4 * d),
            "solveRiemann": (8, 4),
            "integrateVolume": (0, 1),
            "integrateFace": (2 * d + 1, 0),
            "update": (1, 1),
            "calcTimeStep": (0, 0),
        }
    if mode == "fused":
        return {
            "predict": (0, 0),
            "extrapolate": (0, 4 * d),
            "solveRiemann": (8, 4),
            "integrateVolume": (0, 1),
            "integrateFace": (1, 0),
            "update": (0, 1),
            "calcTimeStep": (0, 0),
        }
    raise ConfigurationError(f"unknown scheduler mode {mode!r}")


class TraceEvent(NamedTuple):
    sweep: int
    task: str
    entity: tuple  # ("cell", i) or ("face", i)
    step: int


class AccessLedger:
    """Contention-safe accumulator fed by the kernel recording layer.

    The driver sets the sweep context (begin_sweep); every record() call
    books the logical volumes, the bus-model blocks and — for predict and
    update — the Q_h fetch counter, all attributed to a realisation step.
    """

    def __init__(self, mode, d, p, m, trace_enabled=True):
        if mode not in MODES:
            raise ConfigurationError(f"unknown scheduler mode {mode!r}")
        self.mode = mode
        self.d, self.p, self.m = d, p, m
        self.block = m * (p + 1) ** d
        self.task_invocations = Counter()
        self.task_reads = Counter()
        self.task_writes = Counter()
        self.bus_reads_by_step = Counter()
        self.bus_writes_by_step = Counter()
        self.q_reads_by_step = Counter()
        self.trace = []
        self.trace_enabled = trace_enabled
        self.enabled = True
        self._profile = _bus_profile(mode, d)
        self._sweep = -1
        self._completing = 0
        self._predicting = 0
        self._rerun_pass = False
        self._lock: Optional[threading.Lock] = None

    def enable_thread_safety(self):
        self._lock = threading.Lock()

    def begin_sweep(self, sweep, completing_step, predicting_step, rerun_pass=False):
        self._sweep = sweep
        self._completing = completing_step
        self._predicting = predicting_step
        self._rerun_pass = rerun_pass

    def record(self, task, entity):
        if not self.enabled:
            return
        if self._lock is not None:
            with self._lock:
                self._record(task, entity)
        else:
            self._record(task, entity)

    def _record(self, task, entity):
        step = self._predicting if task in STP_TASKS else self._completing
        r, w = logical_task_volumes(task, self.d, self.p, self.m)
        self.task_invocations[task] += 1
        self.task_reads[task] += r
        self.task_writes[task] += w
        br, bw = self._profile[task]
        if self._rerun_pass and task == "predict":
            br = 1  # Q_h must be refetched for a repeated prediction pass
        self.bus_reads_by_step[step] += br * self.block
        self.bus_writes_by_step[step] += bw * self.block
        if task == "update":
            self.q_reads_by_step[step] += 1
        elif task == "predict" and (self.mode != "fused" or self._rerun_pass):
            self.q_reads_by_step[step] += 1
        if self.trace_enabled:
            self.trace.append(TraceEvent(self._sweep, task, entity, step))

    # -- summaries -------------------------------------------------------

    def step_traffic(self, step):
        """(reads, writes) doubles attributed to one realisation step."""
        return self.bus_reads_by_step[step], self.bus_writes_by_step[step]

    def total_traffic(self, first_step, last_step):
        reads = sum(self.bus_reads_by_step[s] for s in range(first_step, last_step + 1))
        writes = sum(self.bus_writes_by_step[s] for s in range(first_step, last_step + 1))
        return reads + writes


# ---------------------------------------------------------------------------
# closed-form models


def persistent_footprint(mode, d, p, m):
    """Persistent doubles per cell for a given driver mode.

    The hull-based drivers keep Q_h, D_h and the six face hull blocks; the
    three-sweep driver keeps the full space-time polynomial instead of
    D_h.  Face blocks are halved between the two adjacent cells, so per
    cell the 2d face sides contribute 6d blocks.
    """
    n = p + 1
    block = m * n ** d
    if mode in ("fused", "shifted"):
        return (2 + 6 * d) * block
    if mode == "straightforward":
        return (d + 1) * m * n ** (d + 1) + (1 + 6 * d) * block
    raise ConfigurationError(f"unknown scheduler mode {mode!r}")


def footprint_ratio(d, p):
    """Exact rational fused/straightforward persistent-footprint ratio."""
    if d not in (2, 3):
        raise ConfigurationError(f"dimension must be 2 or 3, got {d}")
    if not 0 <= p <= 9:
        raise ConfigurationError(f"order p must be in [0, 9], got {p}")
    return Fraction(2 + 6 * d, (d + 1) * (p + 1) + 1 + 6 * d)


def traffic_model(mode, d, p, m, c_rerun=1.0):
    """Expected doubles over the bus per cell per realisation step."""
    if not 1.0 <= c_rerun <= 2.0:
        raise ConfigurationError(f"c_rerun must be in [1, 2], got {c_rerun}")
    block = m * (p + 1) ** d
    if mode == "straightforward":
        return (18 * d + 4) * block
    if mode == "fused":
        return ((4 * d + 2) * c_rerun + 12 * d + 1) * block
    if mode == "shifted":
        # like the three-sweep model plus one extra round trip of the
        # persistent D_h block (not asserted against any closed form)
        return (18 * d + 5) * block
    raise ConfigurationError(f"unknown scheduler mode {mode!r}")


def rerun_upper_bound(t_3steps, t_stp, t_fused, c_dt):
    """Largest average rerun factor for which the fused driver still wins:
    1 + (T_3steps * C_dt - T_fused) / T_stp."""
    if not (0 < t_stp < t_3steps and t_fused > 0):
        raise ConfigurationError("need 0 < T_stp < T_3steps and T_fused > 0")
    return 1.0 + (t_3steps * c_dt - t_fused) / t_stp


# ---------------------------------------------------------------------------
# ledger / trace analytics


def single_touch_audit(ledger, n_cells, steps):
    """Amortised Q_h fetches per cell per realisation step.

    steps is the number of realised steps; the degenerate priming pass
    (step 0) is excluded.
    """
    per_step = {s: ledger.q_reads_by_step[s] / n_cells for s in range(1, steps + 1)}
    total = sum(ledger.q_reads_by_step[s] for s in range(1, steps + 1))
    return {
        "per_step": per_step,
        "amortised": total / (n_cells * steps),
        "total_q_reads": total,
    }


def traffic_audit(ledger, n_cells, steps, c_rerun=1.0):
    """Measured vs modelled bus doubles, per step and amortised.

    Exact integer agreement is expected on periodic grids with the
    matching rerun count folded into c_rerun.
    """
    model = traffic_model(ledger.mode, ledger.d, ledger.p, ledger.m, c_rerun)
    per_step = {}
    total = 0
    for s in range(1, steps + 1):
        r, w = ledger.step_traffic(s)
        per_step[s] = r + w
        total += r + w
    return {
        "per_step": per_step,
        "measured_per_cell_step": total / (n_cells * steps),
        "model_per_cell_step": model,
        "total": total,
    }


def validate_trace(trace, grid):
    """Enforce the scheduling partial order on a finished task trace.

    For every realised step: each cell's prediction precedes the Riemann
    solve of all its faces, each face's Riemann solve precedes the face
    integration of both adjacent cells, and per cell the corrector runs
    integrateFace -> update -> calcTimeStep.  The degenerate step 0 of
    the pipelined drivers is exempt.  Raises on the first violation and
    returns the number of constraints checked.
    """
    position = {}
    for i, ev in enumerate(trace):
        key = (ev.task, ev.entity, ev.step)
        if key not in position:
            position[key] = i
    checked = 0

    def pos(task, entity, step):
        return position.get((task, entity, step))

    for i, ev in enumerate(trace):
        if ev.step == 0:
            continue
        if ev.task == "solveRiemann":
            face = grid.faces[ev.entity[1]]
            for cell_idx in face.cells:
                if cell_idx is None:
                    continue
                j = pos("predict", ("cell", cell_idx), ev.step)
                if j is None or j > i:
                    raise SchedulingOrderError(
                        f"face {face.index} solved at step {ev.step} before "
                        f"cell {cell_idx} predicted")
                checked += 1
        elif ev.task == "integrateFace":
            cell_idx = ev.entity[1]
            for face_index, _side in grid.cell_faces[cell_idx]:
                j = pos("solveRiemann", ("face", face_index), ev.step)
                if j is None or j > i:
                    raise SchedulingOrderError(
                        f"cell {cell_idx} integrated face {face_index} at step "
                        f"{ev.step} before its Riemann solve")
                checked += 1
            j = pos("update", ev.entity, ev.step)
            if j is not None and j < i:
                raise SchedulingOrderError(
                    f"cell {cell_idx} updated before face integration, step {ev.step}")
            checked += 1
        elif ev.task == "calcTimeStep":
            j = pos("update", ev.entity, ev.step)
            if j is None or j > i:
                raise SchedulingOrderError(
                    f"cell {ev.entity[1]} measured its admissible step before "
                    f"updating, step {ev.step}")
            checked += 1
    return checked


def concurrency_profile(trace):
    """Phase-transition counts, per sweep and per realisation step.

    Phase-pure sweeps (the three-sweep driver) show zero intra-sweep
    transitions and two per step; the shifted driver shows two per sweep;
    the fused driver interleaves prediction and Riemann work, so its
    per-sweep count is at least the number of cells.
    """
    sweep_phases = defaultdict(list)
    step_phases = defaultdict(list)
    for ev in trace:
        phase = PHASE_OF_TASK.get(ev.task)
        if phase is None:
            continue
        sweep_phases[ev.sweep].append(phase)
        step_phases[ev.step].append(phase)

    def transitions(seq):
        return sum(1 for a, b in zip(seq, seq[1:]) if a != b)

    return {
        "per_sweep": {s: transitions(v) for s, v in sorted(sweep_phases.items())},
        "per_step": {s: transitions(v) for s, v in sorted(step_phases.items())},
    }
