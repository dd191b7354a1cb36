"""The seven element-local tasks of the predictor-corrector scheme.

predict / extrapolate / solveRiemann / integrateVolume / integrateFace /
update / calcTimeStep, each operating on a single cell or face and
reporting its exact double traffic to the access ledger.  All operators
are quadrature-free: they are tensor contractions with the 1-D
collocation matrices, applied axis by axis.

Array layouts (component axis always last):

* cell coefficients Q_h, D_h: (p+1)^d x m
* space-time polynomial: spatial axes, then time, then components
* face hull blocks: perpendicular spatial axes, time, components
"""

import numpy as np

from .basis import apply_matrix
from .errors import PredictorFailureError, SchedulingOrderError

DEFAULT_CFL = 0.9


class SpaceTimePolynomial:
    """Transient predictor output for one cell: the collocated space-time
    solution and its flux, plus the step geometry they were built with."""

    __slots__ = ("q", "f", "h", "dt")

    def __init__(self, q, f, h, dt):
        self.q = q
        self.f = f
        self.h = h
        self.dt = dt


class Kernels:
    """Kernel suite bound to one grid, PDE system and basis.

    Every public method performs exactly one task invocation and books it
    on the ledger (when one is attached).  The driver keeps ``sweep``
    current; faces remember which sweep extrapolated and solved them so
    stale data is caught as a scheduling error rather than silent reuse.
    """

    def __init__(self, system, basis, grid, ledger=None, cfl=DEFAULT_CFL):
        self.system = system
        self.basis = basis
        self.grid = grid
        self.ledger = ledger
        self.cfl = cfl
        self.sweep = 0
        w = basis.weights
        # volume operator: K[i, j] = diff[j, i] * w[j] / w[i], the
        # integration-by-parts transpose of the differentiation matrix
        self.kvol = (basis.diff.T * w[None, :]) / w[:, None]
        # face lifting profiles: trace vector over the mass weights
        self.lift_low = basis.left / w
        self.lift_high = basis.right / w
        self.picard_cap = max(1, 2 * basis.n)

    def _record(self, task, entity):
        if self.ledger is not None:
            self.ledger.record(task, entity)

    # -- prediction block ----------------------------------------------

    def predict(self, cell, dt):
        """Solve the cell-local space-time fixed point for step size dt.

        Picard iteration on the integral form: the value at time node i is
        the initial state minus the time integral of the flux divergence up
        to that node.  dt = 0 reproduces the time-replicated initial state
        exactly; non-finite intermediates abort with the cell index.
        """
        b = self.basis
        d = self.grid.d
        h = self.grid.h
        Q = cell.Q
        if not np.all(np.isfinite(Q)):
            raise PredictorFailureError(cell.index)
        Qb = Q[..., None, :]
        q = np.repeat(Qb, b.n, axis=-2)
        tol = 1e-10 * (1.0 + np.max(np.abs(Q)))
        scale = dt / h
        for _ in range(self.picard_cap):
            F = self.system.flux(q)
            div = apply_matrix(b.diff, F[0], axis=0)
            for a in range(1, d):
                div += apply_matrix(b.diff, F[a], axis=a)
            q_new = Qb - scale * apply_matrix(b.integ, div, axis=d)
            delta = np.max(np.abs(q_new - q))
            q = q_new
            if not np.isfinite(delta):
                raise PredictorFailureError(cell.index)
            if delta <= tol:
                break
        f = self.system.flux(q)
        if not np.all(np.isfinite(f)):
            raise PredictorFailureError(cell.index)
        if cell.stp_q is not None:
            cell.stp_q[...] = q
            cell.stp_f[...] = f
        self._record("predict", ("cell", cell.index))
        return SpaceTimePolynomial(q, f, h, dt)

    def extrapolate(self, cell, stp):
        """Write the cell's traces onto the hulls of its 2d faces.

        Own side only, except at outflow boundary faces where the ghost
        side receives the same trace (zero-gradient condition).
        """
        g = self.grid
        for axis in range(g.d):
            for side_local, vec in ((0, self.basis.left), (1, self.basis.right)):
                face_index, side = g.cell_faces[cell.index][2 * axis + side_local]
                face = g.faces[face_index]
                qtr = np.tensordot(vec, stp.q, axes=(0, axis))
                ftr = np.tensordot(vec, stp.f[axis], axes=(0, axis))
                face.q[side][...] = qtr
                face.fn[side][...] = ftr
                face.extrap_sweep[side] = self.sweep
                other = 1 - side
                if face.cells[other] is None:
                    face.q[other][...] = qtr
                    face.fn[other][...] = ftr
                    face.extrap_sweep[other] = self.sweep
        self._record("extrapolate", ("cell", cell.index))

    def integrate_volume(self, cell, stp, dt, out=None):
        """Seed D_h with the space-time volume integral of the predicted
        flux against the test-function gradients (quadrature-free)."""
        b = self.basis
        d = self.grid.d
        fbar = np.tensordot(stp.f, b.weights, axes=(d + 1, 0))
        D = apply_matrix(self.kvol, fbar[0], axis=0)
        for a in range(1, d):
            D += apply_matrix(self.kvol, fbar[a], axis=a)
        D *= dt / self.grid.h
        target = cell.D if out is None else out
        target[...] = D
        self._record("integrateVolume", ("cell", cell.index))
        return target

    # -- Riemann block --------------------------------------------------

    def solve_riemann(self, face, dt_old=None, required_extrap_sweep=None,
                      allow_unpopulated=False):
        """Rusanov flux at every space-time node of a face hull.

        F* = ((F.n)- + (F.n)+)/2 - alpha/2 (Q+ - Q-), with one scalar
        alpha per face: the largest signal speed over both traces.  Both
        sides store the result signed for their own outward normal.  On a
        never-populated hull (degenerate priming pass only) the result is
        zero.  dt_old is accepted for driver-signature uniformity; the
        result is per unit time and the corrector applies the step size.
        """
        if face.extrap_sweep[0] < 0 or face.extrap_sweep[1] < 0:
            if not allow_unpopulated:
                raise SchedulingOrderError(
                    f"face {face.index} solved with unpopulated hull")
            face.fstar[0].fill(0.0)
            face.fstar[1].fill(0.0)
        else:
            if required_extrap_sweep is not None and (
                    face.extrap_sweep[0] != required_extrap_sweep
                    or face.extrap_sweep[1] != required_extrap_sweep):
                raise SchedulingOrderError(
                    f"face {face.index} hull is stale: extrapolated in sweeps "
                    f"{face.extrap_sweep}, required {required_extrap_sweep}")
            qm, qp = face.q
            fm, fp = face.fn
            alpha = max(np.max(self.system.max_signal_speed(qm, face.axis)),
                        np.max(self.system.max_signal_speed(qp, face.axis)))
            fstar = 0.5 * (fm + fp) - 0.5 * alpha * (qp - qm)
            face.fstar[0][...] = fstar
            face.fstar[1][...] = -fstar
        face.solved_sweep = self.sweep
        self._record("solveRiemann", ("face", face.index))

    # -- corrector block ------------------------------------------------

    def integrate_face(self, cell, D, dt, required_solved_sweep):
        """Accumulate the 2d signed face integrals of F* into D.

        Fixed face order (axis ascending, low before high) so all driver
        modes produce bitwise-identical accumulation.
        """
        g = self.grid
        b = self.basis
        scale = dt / g.h
        for axis in range(g.d):
            for side_local, lift in ((0, self.lift_low), (1, self.lift_high)):
                face_index, side = g.cell_faces[cell.index][2 * axis + side_local]
                face = g.faces[face_index]
                if face.solved_sweep != required_solved_sweep:
                    raise SchedulingOrderError(
                        f"cell {cell.index} consumed face {face.index} solved "
                        f"in sweep {face.solved_sweep}, required "
                        f"{required_solved_sweep}")
                fbar = np.tensordot(face.fstar[side], b.weights, axes=(g.d - 1, 0))
                shape = [1] * (g.d + 1)
                shape[axis] = b.n
                D -= scale * lift.reshape(shape) * np.expand_dims(fbar, axis)
        self._record("integrateFace", ("cell", cell.index))
        return D

    def update(self, cell, D):
        """Commit the step: Q_h += D_h (rollback snapshot refreshed first
        when the limiter is enabled)."""
        if cell.prev_Q is not None:
            cell.prev_Q[...] = cell.Q
        cell.Q += D
        self._record("update", ("cell", cell.index))

    def calc_time_step(self, cell):
        """Admissible step size CFL*h / (d*(2p+1)*lambda_max), or None as
        the troubled signal when any node is inadmissible."""
        Q = cell.Q
        self._record("calcTimeStep", ("cell", cell.index))
        if not self.system.is_admissible(Q):
            return None
        lam = 0.0
        for axis in range(self.grid.d):
            lam = max(lam, float(np.max(self.system.max_signal_speed(Q, axis))))
        if lam <= 0.0:
            return np.inf
        p = self.basis.p
        return self.cfl * self.grid.h / (self.grid.d * (2 * p + 1) * lam)
