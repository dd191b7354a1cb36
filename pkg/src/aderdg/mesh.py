"""Uniform-depth tripartition grid over the unit hypercube.

The grid is the 3^(dL) Cartesian mesh produced by cutting every cell into
three parts per axis L times.  Faces are shared records: under periodic
boundaries every face is interior (with wrap-around neighbours), so a grid
of N cells owns exactly d*N faces.  Each face carries the persistent
space-time hull of its two sides: the extrapolated solution trace, the
extrapolated normal flux, and the Riemann result, one block per side.
"""

import threading

import numpy as np

from .errors import ConfigurationError, ResourceBudgetError, SchedulingOrderError

DEFAULT_BUDGET_BYTES = 2 << 30

#: storage layouts: "hull" keeps Q_h, D_h and the face hulls persistent
#: (shifted/fused drivers); "spacetime" keeps Q_h, the full space-time
#: polynomial and the face hulls (three-sweep driver, no persistent D_h).
STORAGE_LAYOUTS = ("hull", "spacetime")

MINUS, PLUS = 0, 1


class Cell:
    __slots__ = ("index", "multi_index", "Q", "D", "stp_q", "stp_f",
                 "prev_Q", "troubled", "fv_patch")

    def __init__(self, index, multi_index):
        self.index = index
        self.multi_index = multi_index
        self.Q = None
        self.D = None
        self.stp_q = None
        self.stp_f = None
        self.prev_Q = None
        self.troubled = False
        self.fv_patch = None


class Face:
    __slots__ = ("index", "axis", "cells", "q", "fn", "fstar",
                 "touched", "solved_sweep", "extrap_sweep")

    def __init__(self, index, axis, minus_cell, plus_cell, block_shape):
        self.index = index
        self.axis = axis
        self.cells = (minus_cell, plus_cell)  # cell index or None (boundary)
        self.q = [np.zeros(block_shape), np.zeros(block_shape)]
        self.fn = [np.zeros(block_shape), np.zeros(block_shape)]
        self.fstar = [np.zeros(block_shape), np.zeros(block_shape)]
        self.touched = False
        self.solved_sweep = -1
        self.extrap_sweep = [-1, -1]

    @property
    def is_boundary(self):
        return self.cells[0] is None or self.cells[1] is None


class Grid:
    def __init__(self, d, L, p, m, boundary, storage, cells, faces, cell_faces):
        self.d = d
        self.L = L
        self.p = p
        self.m = m
        self.boundary = boundary
        self.storage = storage
        self.h = 3.0 ** (-L)
        self.cells = cells
        self.faces = faces
        self.cell_faces = cell_faces  # per cell: 2d (face_index, side) pairs
        self.in_sweep = False
        self._claim_lock = None
        self._limiter_enabled = False

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def cells_per_axis(self):
        return 3 ** self.L

    def node_block_shape(self):
        return (self.p + 1,) * self.d + (self.m,)

    def enable_limiter(self):
        """Allocate per-cell rollback copies (kept out of the pure-DG
        footprint audit)."""
        if not self._limiter_enabled:
            for c in self.cells:
                c.prev_Q = np.zeros_like(c.Q)
            self._limiter_enabled = True

    def enable_parallel_claims(self):
        self._claim_lock = threading.Lock()

    def begin_sweep(self):
        for f in self.faces:
            f.touched = False
        self.in_sweep = True

    def end_sweep(self):
        self.in_sweep = False

    def claim_first_touch(self, face):
        """Touch-first semantics: True exactly once per face per sweep."""
        if not self.in_sweep:
            raise SchedulingOrderError("claim_first_touch called outside a sweep")
        if self._claim_lock is not None:
            with self._claim_lock:
                if face.touched:
                    return False
                face.touched = True
                return True
        if face.touched:
            return False
        face.touched = True
        return True

    def persistent_doubles(self, include_limiter=False):
        """Exact count of allocated persistent doubles (the allocation
        registry behind the footprint audit)."""
        total = 0
        for c in self.cells:
            for arr in (c.Q, c.D, c.stp_q, c.stp_f):
                if arr is not None:
                    total += arr.size
            if include_limiter and c.prev_Q is not None:
                total += c.prev_Q.size
        for f in self.faces:
            for pair in (f.q, f.fn, f.fstar):
                total += pair[0].size + pair[1].size
        return total

    def cell_neighbors(self, cell_index):
        """Face-connected neighbour cell indices, None at outflow boundaries,
        in the cell's fixed face order (axis ascending, low then high)."""
        out = []
        for face_index, side in self.cell_faces[cell_index]:
            face = self.faces[face_index]
            out.append(face.cells[1 - side])
        return out


def estimate_persistent_doubles(d, L, p, m, boundary, storage):
    n = p + 1
    cells = 3 ** (d * L)
    per_axis = 3 ** L
    if boundary == "periodic":
        n_faces = d * cells
    else:
        n_faces = d * (per_axis + 1) * per_axis ** (d - 1)
    block = n ** d * m  # (p+1)^(d-1) spatial x (p+1) temporal nodes
    total = cells * n ** d * m  # Q_h
    if storage == "hull":
        total += cells * n ** d * m  # D_h
    else:
        total += cells * (d + 1) * m * n ** (d + 1)  # persistent space-time polynomial
    total += n_faces * 6 * block  # Q*+-, (F.n)+-, F*+- hull blocks
    return total


def build_grid(d, L, p, m, boundary="periodic", storage="hull",
               budget_bytes=DEFAULT_BUDGET_BYTES):
    """Construct the fully connected grid with zeroed payloads."""
    if d not in (2, 3):
        raise ConfigurationError(f"dimension must be 2 or 3, got {d}")
    if not 1 <= L <= 4:
        raise ConfigurationError(f"depth L must be in [1, 4], got {L}")
    if not 0 <= p <= 9:
        raise ConfigurationError(f"order p must be in [0, 9], got {p}")
    if boundary not in ("periodic", "outflow"):
        raise ConfigurationError(f"unknown boundary kind {boundary!r}")
    if storage not in STORAGE_LAYOUTS:
        raise ConfigurationError(f"unknown storage layout {storage!r}")

    requested = 8 * estimate_persistent_doubles(d, L, p, m, boundary, storage)
    if requested > budget_bytes:
        raise ResourceBudgetError(requested, budget_bytes)

    n = p + 1
    per_axis = 3 ** L
    shape = (per_axis,) * d
    n_cells = per_axis ** d

    cells = []
    for idx in range(n_cells):
        multi = np.unravel_index(idx, shape)
        cells.append(Cell(idx, tuple(int(v) for v in multi)))

    block_shape = (n,) * (d - 1) + (n, m)
    faces = []
    cell_faces = [[None] * (2 * d) for _ in range(n_cells)]

    def cell_at(multi):
        return int(np.ravel_multi_index(multi, shape))

    for axis in range(d):
        for idx in range(n_cells):
            multi = list(cells[idx].multi_index)
            i_a = multi[axis]
            # each cell creates its own low face in this axis (periodic: all;
            # outflow: the i_a = 0 face is a boundary record)
            if boundary == "periodic":
                lo = multi.copy()
                lo[axis] = (i_a - 1) % per_axis
                minus = cell_at(lo)
                face = Face(len(faces), axis, minus, idx, block_shape)
                faces.append(face)
                cell_faces[idx][2 * axis] = (face.index, PLUS)
                cell_faces[minus][2 * axis + 1] = (face.index, MINUS)
            else:
                if i_a == 0:
                    face = Face(len(faces), axis, None, idx, block_shape)
                    faces.append(face)
                    cell_faces[idx][2 * axis] = (face.index, PLUS)
                else:
                    lo = multi.copy()
                    lo[axis] = i_a - 1
                    minus = cell_at(lo)
                    face = Face(len(faces), axis, minus, idx, block_shape)
                    faces.append(face)
                    cell_faces[idx][2 * axis] = (face.index, PLUS)
                    cell_faces[minus][2 * axis + 1] = (face.index, MINUS)
                if i_a == per_axis - 1:
                    face = Face(len(faces), axis, idx, None, block_shape)
                    faces.append(face)
                    cell_faces[idx][2 * axis + 1] = (face.index, MINUS)

    grid = Grid(d, L, p, m, boundary, storage, cells, faces, cell_faces)
    node_shape = (n,) * d + (m,)
    for c in cells:
        c.Q = np.zeros(node_shape)
        if storage == "hull":
            c.D = np.zeros(node_shape)
        else:
            c.stp_q = np.zeros((n,) * d + (n, m))
            c.stp_f = np.zeros((d,) + (n,) * d + (n, m))
    return grid


def _peano_order(d, L):
    """Cell indices along the d-dimensional Peano curve of depth L.

    Digit construction: the curve parameter's base-3 digits are assigned to
    the axes round-robin (coarsest level first); a coordinate digit is
    mirrored whenever the parity of all preceding digits belonging to other
    axes is odd.  Consecutive cells are face-connected.
    """
    per_axis = 3 ** L
    shape = (per_axis,) * d
    total = per_axis ** d
    order = np.empty(total, dtype=np.int64)
    n_digits = d * L
    for t in range(total):
        digits = []
        v = t
        for _ in range(n_digits):
            digits.append(v % 3)
            v //= 3
        digits.reverse()  # most significant first
        coords = [0] * d
        other_parity = [0] * d  # parity of digits seen on other axes
        for i, digit in enumerate(digits):
            axis = i % d
            c = 2 - digit if other_parity[axis] % 2 else digit
            coords[axis] = coords[axis] * 3 + c
            for b in range(d):
                if b != axis:
                    other_parity[b] += digit
        order[t] = np.ravel_multi_index(coords, shape)
    return order


def traversal_order(grid, kind):
    """A permutation of cell indices: 'lexicographic' (row-major) or 'peano'
    (space-filling curve; consecutive cells share a face)."""
    if kind == "lexicographic":
        return np.arange(grid.n_cells, dtype=np.int64)
    if kind == "peano":
        return _peano_order(grid.d, grid.L)
    raise ConfigurationError(f"unknown traversal kind {kind!r}")
