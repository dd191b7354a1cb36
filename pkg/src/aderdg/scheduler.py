"""Time-stepping drivers.

Three ways to realise the same predictor-corrector step:

* straightforward: three homogeneous grid sweeps per step (prediction
  sweep, Riemann sweep, corrector sweep),
* shifted: one sweep per step that completes the Riemann solves and the
  corrector of the previous prediction, then immediately predicts the
  next step; N steps take N+1 sweeps,
* fused: like shifted but cell-local — every cell claims and solves its
  untouched faces, runs its corrector, and predicts the next step before
  the traversal moves on.  The prediction step size is an optimistic
  guess; when the freshly measured admissible step undercuts it, one
  extra prediction pass reruns with a safe value (never more than one
  per realisation step).

All drivers share the kernel suite bit for bit, so their trajectories
are identical whenever they use the same step-size sequence.
"""

import threading
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import ConfigurationError, NumericalError, PredictorFailureError
from .kernels import SpaceTimePolynomial
from .mesh import traversal_order

DEFAULT_C_DT = 0.99


class TimeControl:
    """Bookkeeping for the three step sizes.

    dt_old is the size already baked into in-flight predictions (what the
    next corrector must use); dt_new is the optimistic size for the next
    predictions; dt_adm is the most recent admissible minimum over cells.
    A forced_dt pins everything for mode-equivalence experiments.
    """

    def __init__(self, c_dt=DEFAULT_C_DT, averaging="strict", forced_dt=None):
        if not 0.0 < c_dt <= 1.0:
            raise ConfigurationError(f"c_dt must be in (0, 1], got {c_dt}")
        if averaging not in ("strict", "creeping"):
            raise ConfigurationError(f"unknown averaging mode {averaging!r}")
        self.c_dt = c_dt
        self.averaging = averaging
        self.forced_dt = forced_dt
        self.T = 0.0
        self.dt_old = 0.0
        self.dt_new = 0.0
        self.dt_adm = np.inf

    def seed(self, dt_adm):
        """Initialise from the admissible step of the initial data."""
        self.dt_adm = dt_adm
        self.dt_new = self.forced_dt if self.forced_dt is not None else self.c_dt * dt_adm

    def next_dt(self):
        if self.forced_dt is not None:
            return self.forced_dt
        base = self.c_dt * self.dt_adm
        if self.averaging == "creeping":
            return 0.5 * (self.dt_old + base)
        return base

    def reset_for_rerun(self):
        if self.forced_dt is None:
            value = self.c_dt * self.dt_adm
            self.dt_old = value
            self.dt_new = value


def update_time_step_sizes(tc):
    """Roll the step sizes over a completed sweep: dt_old takes the value
    just used for predictions, dt_new creeps (or jumps) towards the
    admissible size.  Returns the new dt_new."""
    if not np.isfinite(tc.dt_adm) or tc.dt_adm <= 0.0:
        raise NumericalError(f"admissible step degenerated to {tc.dt_adm}")
    tc.dt_old = tc.dt_new
    tc.dt_new = tc.next_dt()
    return tc.dt_new


class Driver:
    """One driver instance owns a grid, a kernel suite and a TimeControl;
    step() advances exactly one realisation step in the configured mode."""

    def __init__(self, grid, kernels, time_control, mode,
                 traversal="lexicographic", parallel=False, n_workers=4,
                 inject_rerun=False, spike_step=None, spike_factor=3.0,
                 limiter=None):
        if mode not in ("straightforward", "shifted", "fused"):
            raise ConfigurationError(f"unknown scheduler mode {mode!r}")
        if parallel and mode == "shifted":
            raise ConfigurationError("the shifted driver is sequential only")
        if limiter is not None and mode != "straightforward":
            raise ConfigurationError(
                "subcell limiting is supported in straightforward mode only")
        self.grid = grid
        self.kernels = kernels
        self.tc = time_control
        self.mode = mode
        if isinstance(traversal, np.ndarray):
            self.order = traversal  # explicit permutation (testing hook)
        else:
            self.order = traversal_order(grid, traversal)
        self.parallel = parallel
        self.n_workers = n_workers
        self.inject_rerun = inject_rerun
        self.spike_step = spike_step
        self.spike_factor = spike_factor
        self.limiter = limiter
        self.sweep_count = 0
        self.step_count = 0
        self.rerun_count = 0
        self.reruns_by_step = Counter()
        self.troubled_by_step = Counter()
        self.step_records = []
        self._primed = False
        self._last_stp_sweep = -1
        self._pool = None
        if parallel:
            grid.enable_parallel_claims()
            if kernels.ledger is not None:
                kernels.ledger.enable_thread_safety()
            self._pool = ThreadPoolExecutor(max_workers=n_workers)
        self._seed_time_control()

    # -- shared plumbing -------------------------------------------------

    def _seed_time_control(self):
        """Untraced pass over the initial data to find the first admissible
        step; the ledger only sees real scheduled work."""
        ledger = self.kernels.ledger
        was_enabled = ledger.enabled if ledger is not None else None
        if ledger is not None:
            ledger.enabled = False
        try:
            adm = np.inf
            for ci in self.order:
                value = self.kernels.calc_time_step(self.grid.cells[ci])
                if value is None:
                    raise NumericalError(
                        f"initial data inadmissible in cell {ci}")
                adm = min(adm, value)
        finally:
            if ledger is not None:
                ledger.enabled = was_enabled
        if not np.isfinite(adm) or adm <= 0.0:
            raise NumericalError(f"no admissible initial step (got {adm})")
        self.tc.seed(adm)

    def _begin_sweep(self, completing, predicting, rerun_pass=False):
        sweep = self.sweep_count
        self.sweep_count += 1
        self.kernels.sweep = sweep
        if self.kernels.ledger is not None:
            self.kernels.ledger.begin_sweep(sweep, completing, predicting,
                                            rerun_pass=rerun_pass)
        return sweep

    def _apply_spike(self, cell):
        """Scale the velocity field while holding pressure, so the signal
        speed jumps and the optimistic step guess fails once."""
        system = self.kernels.system
        if system.name != "euler":
            raise ConfigurationError("the speed spike is defined for Euler runs")
        Q = cell.Q
        d = self.grid.d
        rho = Q[..., 0]
        p = system.pressure(Q)
        j = Q[..., 1:1 + d] * self.spike_factor
        Q[..., 1:1 + d] = j
        Q[..., -1] = p / 0.4 + 0.5 * np.sum(j * j, axis=-1) / rho

    def _for_cells(self, fn):
        """Run fn(cell_index) over the traversal, threaded when enabled."""
        if self._pool is None:
            for ci in self.order:
                fn(int(ci))
        else:
            list(self._pool.map(fn, [int(ci) for ci in self.order]))

    # -- public API ------------------------------------------------------

    def step(self):
        """Advance one realisation step; returns the step index (1-based)."""
        t0 = time.perf_counter()
        before = self._ledger_snapshot()
        if self.mode == "straightforward":
            self._step_straightforward()
        elif self.mode == "shifted":
            if not self._primed:
                self._sweep_shifted(0)
                self._primed = True
            self._sweep_shifted(self.step_count + 1)
        else:
            if not self._primed:
                self._sweep_fused(0)
                self._primed = True
            self._sweep_fused(self.step_count + 1)
        self.step_count += 1
        self._record_step(time.perf_counter() - t0, before)
        return self.step_count

    def run(self, steps=None, final_time=None):
        """Advance a fixed number of steps, or (straightforward mode only)
        integrate exactly to final_time by clamping the last step."""
        if (steps is None) == (final_time is None):
            raise ConfigurationError("specify exactly one of steps / final_time")
        if steps is not None:
            for _ in range(steps):
                self.step()
            return self.step_count
        if self.mode != "straightforward":
            raise ConfigurationError(
                "final-time integration requires the straightforward driver "
                "(the pipelined modes realise steps one sweep late)")
        while self.tc.T < final_time - 1e-14:
            self.tc.dt_new = min(self.tc.dt_new, final_time - self.tc.T)
            self.step()
        return self.step_count

    # -- straightforward: three sweeps per step --------------------------

    def _step_straightforward(self):
        g = self.grid
        k = self.kernels
        step = self.step_count + 1
        dt = self.tc.dt_new

        stp_sweep = self._begin_sweep(step, step)
        g.begin_sweep()

        def do_predict(ci):
            cell = g.cells[ci]
            try:
                stp = k.predict(cell, dt)
            except PredictorFailureError:
                if self.limiter is None:
                    raise
                # degenerate time-constant prediction; the corrector's
                # detection will hand this cell to the limiter
                stp = k.predict(cell, 0.0)
                cell.troubled = True
            k.extrapolate(cell, stp)

        self._for_cells(do_predict)
        g.end_sweep()

        riemann_sweep = self._begin_sweep(step, step)
        g.begin_sweep()

        def do_riemann(ci):
            for face_index, _side in g.cell_faces[ci]:
                face = g.faces[face_index]
                if g.claim_first_touch(face):
                    k.solve_riemann(face, dt, required_extrap_sweep=stp_sweep)

        self._for_cells(do_riemann)
        g.end_sweep()

        self._begin_sweep(step, step)
        g.begin_sweep()
        adm_values = {}
        adm_lock = threading.Lock() if self.parallel else None

        def do_corrector(ci):
            cell = g.cells[ci]
            stp = SpaceTimePolynomial(cell.stp_q, cell.stp_f, g.h, dt)
            scratch = np.empty_like(cell.Q)
            k.integrate_volume(cell, stp, dt, out=scratch)
            k.integrate_face(cell, scratch, dt,
                             required_solved_sweep=riemann_sweep)
            k.update(cell, scratch)
            if self.spike_step is not None and step == self.spike_step:
                self._apply_spike(cell)
            if self.limiter is not None:
                cell.troubled = bool(cell.troubled) or \
                    self.limiter.detect_troubled(cell)
            value = k.calc_time_step(cell)
            if value is None:
                if self.limiter is None:
                    raise NumericalError(
                        f"inadmissible state in cell {ci} at step {step}")
                cell.troubled = True
                value = np.inf
            if adm_lock is not None:
                with adm_lock:
                    adm_values[ci] = value
            else:
                adm_values[ci] = value

        self._for_cells(do_corrector)
        g.end_sweep()

        if self.limiter is not None:
            troubled = [g.cells[int(ci)] for ci in self.order
                        if g.cells[int(ci)].troubled]
            if troubled:
                self.troubled_by_step[step] = len(troubled)
                self.limiter.apply(troubled, dt)
                for cell in troubled:
                    value = self.kernels.calc_time_step(cell)
                    adm_values[cell.index] = value if value is not None else np.inf

        self.tc.T += dt
        self.tc.dt_adm = min(adm_values.values())
        update_time_step_sizes(self.tc)

    # -- shifted: one sweep completes a step and predicts the next -------

    def _sweep_shifted(self, step):
        g = self.grid
        k = self.kernels
        tc = self.tc
        dt_old = tc.dt_old
        priming = step == 0
        self._begin_sweep(step, step + 1)
        g.begin_sweep()
        sweep = self.kernels.sweep

        # Riemann block
        for ci in self.order:
            for face_index, _side in g.cell_faces[int(ci)]:
                face = g.faces[face_index]
                if g.claim_first_touch(face):
                    k.solve_riemann(face, dt_old,
                                    required_extrap_sweep=self._last_stp_sweep
                                    if not priming else None,
                                    allow_unpopulated=priming)

        # Corrector block
        adm = np.inf
        for ci in self.order:
            cell = g.cells[int(ci)]
            k.integrate_face(cell, cell.D, dt_old, required_solved_sweep=sweep)
            k.update(cell, cell.D)
            if self.spike_step is not None and step == self.spike_step:
                self._apply_spike(cell)
            value = k.calc_time_step(cell)
            if value is None:
                raise NumericalError(
                    f"inadmissible state in cell {ci} at step {step}")
            adm = min(adm, value)

        if not priming:
            tc.T += dt_old
        tc.dt_adm = adm
        if not priming:
            tc.dt_new = tc.next_dt()
        # else: keep the seeded dt_new (same admissible minimum)

        # Prediction block for the next step
        for ci in self.order:
            cell = g.cells[int(ci)]
            stp = k.predict(cell, tc.dt_new)
            k.extrapolate(cell, stp)
            k.integrate_volume(cell, stp, tc.dt_new)
        g.end_sweep()
        self._last_stp_sweep = sweep
        tc.dt_old = tc.dt_new

    # -- fused: cell-local single-touch sweep with optimistic stepping ---

    def _maybe_rerun(self, step):
        """Rerun the prediction pass when the optimistic guess was wrong.
        Called at the start of every non-priming fused sweep."""
        tc = self.tc
        if not (self.inject_rerun or tc.dt_adm < tc.dt_old):
            return
        if self.reruns_by_step[step]:
            raise NumericalError(
                f"second rerun requested within realisation step {step}")
        self.rerun_count += 1
        self.reruns_by_step[step] += 1
        tc.reset_for_rerun()
        g = self.grid
        k = self.kernels
        self._begin_sweep(step - 1, step, rerun_pass=True)
        for ci in self.order:
            cell = g.cells[int(ci)]
            stp = k.predict(cell, tc.dt_old)
            k.extrapolate(cell, stp)
            k.integrate_volume(cell, stp, tc.dt_old)
        self._last_stp_sweep = self.kernels.sweep
        if tc.forced_dt is None and tc.dt_adm < tc.dt_old:
            raise NumericalError("rerun failed to restore admissibility")

    def _sweep_fused(self, step):
        g = self.grid
        k = self.kernels
        tc = self.tc
        priming = step == 0
        if not priming:
            self._maybe_rerun(step)
        dt_old = tc.dt_old
        dt_new = tc.dt_new
        self._begin_sweep(step, step + 1)
        g.begin_sweep()
        sweep = self.kernels.sweep
        required_extrap = None if priming else self._last_stp_sweep

        adm_box = [np.inf]
        adm_lock = threading.Lock() if self.parallel else None
        face_events = {f.index: threading.Event() for f in g.faces} \
            if self.parallel else None

        def do_cell(ci):
            cell = g.cells[ci]
            for face_index, _side in g.cell_faces[ci]:
                face = g.faces[face_index]
                if g.claim_first_touch(face):
                    k.solve_riemann(face, dt_old,
                                    required_extrap_sweep=required_extrap,
                                    allow_unpopulated=priming)
                    if face_events is not None:
                        face_events[face_index].set()
                elif face_events is not None:
                    face_events[face_index].wait()
            k.integrate_face(cell, cell.D, dt_old, required_solved_sweep=sweep)
            k.update(cell, cell.D)
            if self.spike_step is not None and step == self.spike_step:
                self._apply_spike(cell)
            value = k.calc_time_step(cell)
            if value is None:
                raise NumericalError(
                    f"inadmissible state in cell {ci} at step {step}")
            if adm_lock is not None:
                with adm_lock:
                    adm_box[0] = min(adm_box[0], value)
            else:
                adm_box[0] = min(adm_box[0], value)
            stp = k.predict(cell, dt_new)
            k.extrapolate(cell, stp)
            k.integrate_volume(cell, stp, dt_new)

        self._for_cells(do_cell)
        g.end_sweep()
        self._last_stp_sweep = sweep

        if not priming:
            tc.T += dt_old
        tc.dt_adm = adm_box[0]
        update_time_step_sizes(tc)

    # -- per-step metrics ------------------------------------------------

    def _ledger_snapshot(self):
        ledger = self.kernels.ledger
        if ledger is None:
            return None
        return (Counter(ledger.task_reads), Counter(ledger.task_writes))

    def _record_step(self, wall_time, before):
        tc = self.tc
        rec = {
            "step": self.step_count,
            "T": tc.T,
            "dt_old": tc.dt_old,
            "dt_new": tc.dt_new,
            "dt_adm": tc.dt_adm,
            "reruns": self.reruns_by_step[self.step_count],
            "troubled": self.troubled_by_step[self.step_count],
            "wall_time": wall_time,
        }
        ledger = self.kernels.ledger
        if ledger is not None and before is not None:
            reads0, writes0 = before
            for task in ledger.task_reads.keys() | reads0.keys():
                rec[f"{task}_reads"] = ledger.task_reads[task] - reads0[task]
                rec[f"{task}_writes"] = ledger.task_writes[task] - writes0[task]
            n = self.grid.n_cells
            rec["q_reads_per_cell"] = ledger.q_reads_by_step[self.step_count] / n
            rec["bus_reads"] = ledger.bus_reads_by_step[self.step_count]
            rec["bus_writes"] = ledger.bus_writes_by_step[self.step_count]
        self.step_records.append(rec)
