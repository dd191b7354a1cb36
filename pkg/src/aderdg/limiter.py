"""A-posteriori subcell finite-volume limiting.

A cell whose freshly updated polynomial is unphysical (or violates a
relaxed discrete maximum principle against its neighbourhood) is rolled
back to the previous step and re-advanced as a patch of (2p+1)^d
first-order Godunov volumes with Rusanov fluxes.  Neighbour cells act as
a read-only coupling halo.  Afterwards the patch is lifted back to the
nodal polynomial by a mean-preserving least-squares fit.

The Godunov update in here doubles as the standalone first-order solver:
at p = 0 with its identity predictor the full predictor-corrector
pipeline degenerates to exactly this scheme.
"""

import math

import numpy as np

from .basis import lagrange_eval
from .errors import NumericalError

DMP_ABS = 1e-3
DMP_REL = 1e-2


def subcell_average_matrix(basis):
    """P[s, i] = average of Lagrange polynomial i over subcell s of the
    unit interval split into 2p+1 equal parts (exact)."""
    ns = 2 * basis.p + 1
    P = np.empty((ns, basis.n))
    for s in range(ns):
        pts = (s + basis.nodes) / ns
        P[s, :] = basis.weights @ lagrange_eval(basis.nodes, pts)
    return P


def _apply_axis(mat, arr, axis):
    return np.moveaxis(np.tensordot(mat, arr, axes=(1, axis)), 0, axis)


def rusanov_fv_step(states, h_sub, dt, system, halo="periodic", cfl=0.9):
    """One first-order Godunov step on a block of subcell averages.

    states: (...,) * d + (m,) array of cell averages, modified out of
    place (the updated block is returned).  halo is either "periodic" or
    a sequence of (low_slab, high_slab) pairs per axis, each slab shaped
    like a one-layer boundary slice of the block.  Raises when dt exceeds
    the dimension-summed CFL bound.
    """
    d = states.ndim - 1
    lam = 0.0
    for axis in range(d):
        lam = max(lam, float(np.max(system.max_signal_speed(states, axis))))
    if lam > 0.0 and dt > cfl * h_sub / (d * lam) * (1.0 + 1e-12):
        raise NumericalError(
            f"finite-volume step {dt} exceeds the admissible "
            f"{cfl * h_sub / (d * lam)}; take a smaller step")

    out = states.copy()
    for axis in range(d):
        if halo == "periodic":
            ext = np.concatenate(
                [np.take(states, [-1], axis=axis), states,
                 np.take(states, [0], axis=axis)], axis=axis)
        else:
            low, high = halo[axis]
            ext = np.concatenate(
                [np.expand_dims(low, axis) if low.ndim < states.ndim else low,
                 states,
                 np.expand_dims(high, axis) if high.ndim < states.ndim else high],
                axis=axis)
        n_ext = ext.shape[axis]
        left = np.take(ext, range(0, n_ext - 1), axis=axis)
        right = np.take(ext, range(1, n_ext), axis=axis)
        fl = system.flux(left)[axis]
        fr = system.flux(right)[axis]
        alpha = np.maximum(system.max_signal_speed(left, axis),
                           system.max_signal_speed(right, axis))[..., None]
        fstar = 0.5 * (fl + fr) - 0.5 * alpha * (right - left)
        n_if = fstar.shape[axis]
        flux_low = np.take(fstar, range(0, n_if - 1), axis=axis)
        flux_high = np.take(fstar, range(1, n_if), axis=axis)
        out -= (dt / h_sub) * (flux_high - flux_low)
    return out


class SubcellLimiter:
    """Detection, rollback, patch evolution and reconstruction for one
    grid; created by the driver when limiting is requested."""

    def __init__(self, system, basis, grid, cfl=0.9):
        self.system = system
        self.basis = basis
        self.grid = grid
        self.cfl = cfl
        self.ns = 2 * basis.p + 1
        self.h_sub = grid.h / self.ns
        self.P = subcell_average_matrix(basis)
        # least-squares lift per axis; P has full column rank
        self.R = np.linalg.solve(self.P.T @ self.P, self.P.T)
        # tensor-product nodal mean weights
        w = basis.weights
        W = np.ones((basis.n,) * grid.d)
        for a in range(grid.d):
            W = W * w.reshape([basis.n if b == a else 1 for b in range(grid.d)])
        self.mean_weights = W[..., None]
        centers = (np.arange(self.ns) + 0.5) / self.ns
        self._nearest_node = np.argmin(
            np.abs(centers[:, None] - basis.nodes[None, :]), axis=1)
        grid.enable_limiter()

    # -- projections -----------------------------------------------------

    def project_to_patch(self, Q):
        """Exact subcell averages of the nodal polynomial, (2p+1)^d x m."""
        patch = Q
        for axis in range(self.grid.d):
            patch = _apply_axis(self.P, patch, axis)
        return patch

    def reconstruct(self, patch):
        """Lift subcell averages back to nodal coefficients.

        Per-axis least squares followed by an additive constant so the
        cell mean is preserved exactly.  Returns (candidate, admissible).
        """
        Q = patch
        for axis in range(self.grid.d):
            Q = _apply_axis(self.R, Q, axis)
        patch_mean = patch.mean(axis=tuple(range(self.grid.d)))
        poly_mean = np.sum(self.mean_weights * Q, axis=tuple(range(self.grid.d)))
        Q = Q + (patch_mean - poly_mean)
        ok = self.system.is_admissible(Q) and \
            self.system.is_admissible(self.project_to_patch(Q))
        return Q, ok

    # -- detection -------------------------------------------------------

    def detect_troubled(self, cell):
        """Physical admissibility of nodes and subcell projections, plus a
        relaxed discrete maximum principle against the previous step of
        the cell and its face neighbours."""
        Q = cell.Q
        if not self.system.is_admissible(Q):
            return True
        patch = self.project_to_patch(Q)
        if not self.system.is_admissible(patch):
            return True
        spatial = tuple(range(self.grid.d))
        lo = np.min(cell.prev_Q, axis=spatial)
        hi = np.max(cell.prev_Q, axis=spatial)
        for nb in self.grid.cell_neighbors(cell.index):
            if nb is None:
                continue
            prev = self.grid.cells[nb].prev_Q
            lo = np.minimum(lo, np.min(prev, axis=spatial))
            hi = np.maximum(hi, np.max(prev, axis=spatial))
        delta = DMP_ABS + DMP_REL * (hi - lo)
        cand_lo = np.minimum(np.min(Q, axis=spatial), np.min(patch, axis=spatial))
        cand_hi = np.maximum(np.max(Q, axis=spatial), np.max(patch, axis=spatial))
        return bool(np.any(cand_lo < lo - delta) or np.any(cand_hi > hi + delta))

    # -- the limiting pass -----------------------------------------------

    def _start_patch(self, Q):
        """Admissible subcell representation of a nodal state: the exact
        projection when it is physical, else nearest-node samples (which
        inherit the nodal admissibility)."""
        patch = Q
        for axis in range(self.grid.d):
            patch = _apply_axis(self.P, patch, axis)
        if self.system.is_admissible(patch):
            return patch
        sampled = Q
        for axis in range(self.grid.d):
            sampled = np.take(sampled, self._nearest_node, axis=axis)
        return sampled

    def _halo(self, cell):
        """One-layer coupling slabs from the neighbours' previous-step
        subcell states (zero-gradient copy of the own edge at boundaries)."""
        patch_old = self._start_patch(cell.prev_Q)
        halo = []
        for axis in range(self.grid.d):
            slabs = []
            for side_local in (0, 1):
                nb = self.grid.cell_neighbors(cell.index)[2 * axis + side_local]
                if nb is None:
                    layer = np.take(patch_old, [0 if side_local == 0 else -1],
                                    axis=axis)
                else:
                    nb_patch = self._start_patch(self.grid.cells[nb].prev_Q)
                    layer = np.take(nb_patch, [-1 if side_local == 0 else 0],
                                    axis=axis)
                slabs.append(layer)
            halo.append(tuple(slabs))
        return patch_old, halo

    def apply(self, troubled_cells, dt):
        """Re-advance every troubled cell by dt with subcell FV substeps,
        then reconstruct.  Cells that come back clean drop their patch."""
        d = self.grid.d
        for cell in troubled_cells:
            patch, halo = self._halo(cell)
            remaining = dt
            while remaining > 1e-15 * dt:
                lam = 0.0
                for axis in range(d):
                    lam = max(lam, float(np.max(
                        self.system.max_signal_speed(patch, axis))))
                dt_sub = remaining if lam <= 0.0 else min(
                    remaining, self.cfl * self.h_sub / (d * lam))
                patch = rusanov_fv_step(patch, self.h_sub, dt_sub, self.system,
                                        halo=halo, cfl=self.cfl)
                if not self.system.is_admissible(patch):
                    raise NumericalError(
                        f"subcell update left cell {cell.index} inadmissible")
                remaining -= dt_sub
            candidate, ok = self.reconstruct(patch)
            if ok:
                cell.Q[...] = candidate
                cell.troubled = False
                cell.fv_patch = None
            else:
                # keep the raw subcell means: sample them at the nodes
                # (piecewise-constant lift always inherits admissibility)
                idx = np.minimum((self.basis.nodes * self.ns).astype(int),
                                 self.ns - 1)
                sampled = patch
                for axis in range(d):
                    sampled = np.take(sampled, idx, axis=axis)
                cell.Q[...] = sampled
                cell.fv_patch = patch
        return troubled_cells
