import numpy as np
import pytest

from aderdg.basis import lagrange_eval, make_basis
from aderdg.errors import PredictorFailureError, SchedulingOrderError
from aderdg.kernels import Kernels
from aderdg.mesh import MINUS, PLUS, build_grid
from aderdg.metrics import AccessLedger, logical_task_volumes
from aderdg.pde import AdvectionSystem, EulerSystem

from conftest import init_grid, node_coords, smooth_euler_state


def make_setup(d=2, p=2, system=None, L=1, storage="hull", ledger=None):
    if system is None:
        system = AdvectionSystem(d, (1.0, 0.5, 0.25)[:d])
    basis = make_basis(p)
    grid = build_grid(d, L, p, system.m, storage=storage)
    return grid, basis, Kernels(system, basis, grid, ledger)


def test_predict_zero_dt_is_time_replication():
    grid, basis, kernels = make_setup(d=2, p=3, system=EulerSystem(2))
    init_grid(grid, basis, smooth_euler_state)
    cell = grid.cells[4]
    stp = kernels.predict(cell, 0.0)
    for k in range(basis.n):
        assert np.array_equal(stp.q[..., k, :], cell.Q)
    assert np.array_equal(stp.f, kernels.system.flux(cell.Q)[
        (slice(None),) + (slice(None),) * 2 + (None, slice(None))]
        .repeat(basis.n, axis=-2))


def test_predict_exact_for_polynomial_advection():
    # linear advection of polynomial data stays polynomial in space-time,
    # so the collocated fixed point must be the shifted profile exactly
    d, p = 2, 3
    v = np.array([1.0, 0.5])

    def poly(x):
        return (x[..., 0] ** 2 + 0.5 * x[..., 1] ** 3
                - x[..., 0] * x[..., 1])[..., None]

    system = AdvectionSystem(d, v)
    grid, basis, kernels = make_setup(d=d, p=p, system=system)
    init_grid(grid, basis, poly)
    cell = grid.cells[4]
    dt = 0.02
    stp = kernels.predict(cell, dt)
    x = node_coords(grid, basis, cell)
    for k, t in enumerate(basis.nodes):
        want = poly(x - v * dt * t)
        assert np.allclose(stp.q[..., k, :], want, atol=1e-8)


def test_predict_rejects_nonfinite_state():
    grid, basis, kernels = make_setup()
    cell = grid.cells[0]
    cell.Q[...] = np.nan
    with pytest.raises(PredictorFailureError) as exc:
        kernels.predict(cell, 1e-3)
    assert exc.value.cell_index == cell.index


def test_extrapolate_writes_exact_traces():
    grid, basis, kernels = make_setup(d=2, p=2)
    init_grid(grid, basis, lambda x: np.cos(np.pi * x[..., :1]))
    cell = grid.cells[4]
    stp = kernels.predict(cell, 1e-3)
    kernels.extrapolate(cell, stp)
    for axis in range(2):
        for side_local, vec in ((0, basis.left), (1, basis.right)):
            fi, side = grid.cell_faces[cell.index][2 * axis + side_local]
            face = grid.faces[fi]
            assert np.allclose(face.q[side],
                               np.tensordot(vec, stp.q, axes=(0, axis)),
                               atol=1e-14)
            assert np.allclose(face.fn[side],
                               np.tensordot(vec, stp.f[axis], axes=(0, axis)),
                               atol=1e-14)
            assert face.extrap_sweep[side] == kernels.sweep


def test_outflow_ghost_side_mirrors_trace():
    system = EulerSystem(2)
    basis = make_basis(1)
    grid = build_grid(2, 1, 1, 4, boundary="outflow")
    kernels = Kernels(system, basis, grid, None)
    init_grid(grid, basis, smooth_euler_state)
    corner = next(c for c in grid.cells if c.multi_index == (0, 0))
    stp = kernels.predict(corner, 0.0)
    kernels.extrapolate(corner, stp)
    fi, side = grid.cell_faces[corner.index][0]  # x-low boundary face
    face = grid.faces[fi]
    assert face.is_boundary
    assert np.array_equal(face.q[0], face.q[1])
    assert np.array_equal(face.fn[0], face.fn[1])


def test_riemann_consistency_and_upwinding():
    grid, basis, kernels = make_setup(d=2, p=2)
    init_grid(grid, basis, lambda x: 1.0 + 0 * x[..., :1])
    for cell in grid.cells:
        kernels.extrapolate(cell, kernels.predict(cell, 0.0))
    face = grid.faces[0]
    kernels.solve_riemann(face)
    # identical traces: F* collapses to the common normal flux
    assert np.allclose(face.fstar[MINUS], face.fn[MINUS], atol=1e-14)
    assert np.array_equal(face.fstar[PLUS], -face.fstar[MINUS])
    # Rusanov with |a| = a picks the minus-side state exactly for
    # positive-velocity scalar advection
    face.q[MINUS][...] = 2.0
    face.q[PLUS][...] = 5.0
    face.fn[MINUS][...] = 2.0 * kernels.system.velocity[face.axis]
    face.fn[PLUS][...] = 5.0 * kernels.system.velocity[face.axis]
    kernels.solve_riemann(face)
    assert np.allclose(face.fstar[MINUS], face.fn[MINUS], atol=1e-13)


def test_riemann_rejects_stale_or_empty_hull():
    grid, basis, kernels = make_setup(d=2, p=1)
    face = grid.faces[0]
    with pytest.raises(SchedulingOrderError):
        kernels.solve_riemann(face)
    kernels.solve_riemann(face, allow_unpopulated=True)
    assert not face.fstar[0].any() and not face.fstar[1].any()
    init_grid(grid, basis, lambda x: 1.0 + 0 * x[..., :1])
    for cell in grid.cells:
        kernels.extrapolate(cell, kernels.predict(cell, 0.0))
    with pytest.raises(SchedulingOrderError):
        kernels.solve_riemann(face, required_extrap_sweep=7)


def _dense_volume_reference(kernels, stp, dt, n_fine=12):
    """Space-time volume integral of the predicted flux against the test
    gradients by dense Gauss quadrature of the collocation interpolant."""
    b = kernels.basis
    d = kernels.grid.d
    xf, wf = np.polynomial.legendre.leggauss(n_fine)
    xf = 0.5 * (xf + 1.0)
    wf = 0.5 * wf
    L = lagrange_eval(b.nodes, xf)          # interpolant values at xf
    dL = L @ b.diff                          # interpolant derivatives at xf
    n, m = b.n, stp.q.shape[-1]
    D = np.zeros((n,) * d + (m,))
    for a in range(d):
        # evaluate flux interpolant on the fine space-time tensor grid
        F = stp.f[a]
        for ax in range(d + 1):
            F = np.moveaxis(np.tensordot(L, F, axes=(1, ax)), 0, ax)
        # integrate against d(phi_i)/dx_a, cardinal in the other axes
        for idx in np.ndindex(*(n,) * d):
            phi = np.ones(())
            grids = []
            for ax in range(d):
                vals = dL[:, idx[ax]] if ax == a else L[:, idx[ax]]
                grids.append(vals * wf)
            grids.append(wf)  # plain time integral
            weight = np.ones((n_fine,) * (d + 1))
            for ax, g in enumerate(grids):
                shape = [1] * (d + 1)
                shape[ax] = n_fine
                weight = weight * g.reshape(shape)
            axes = list(range(d + 1))
            D[idx] += np.tensordot(weight, F, axes=(axes, axes))
    mass = np.ones(())
    for ax in range(d):
        shape = [1] * d + [1]
        shape[ax] = n
        mass = mass * b.weights.reshape(shape)
    return (dt / kernels.grid.h) * D / mass


def test_integrate_volume_matches_dense_quadrature():
    grid, basis, kernels = make_setup(d=2, p=3, system=EulerSystem(2))
    init_grid(grid, basis, smooth_euler_state)
    cell = grid.cells[4]
    dt = 5e-3
    stp = kernels.predict(cell, dt)
    out = np.zeros_like(cell.Q)
    kernels.integrate_volume(cell, stp, dt, out=out)
    ref = _dense_volume_reference(kernels, stp, dt)
    assert np.allclose(out, ref, atol=1e-10)


def test_constant_state_telescopes_to_zero_update():
    # one hand-driven step on uniform data: volume and face integrals
    # cancel exactly, so D vanishes to machine precision
    grid, basis, kernels = make_setup(d=2, p=2, system=EulerSystem(2))
    init_grid(grid, basis, lambda x: np.array([1.0, 0.3, -0.2, 2.5])
              + 0 * x[..., :1])
    dt = 1e-2
    stps = {c.index: kernels.predict(c, dt) for c in grid.cells}
    for c in grid.cells:
        kernels.extrapolate(c, stps[c.index])
    for f in grid.faces:
        kernels.solve_riemann(f)
    for c in grid.cells:
        kernels.integrate_volume(c, stps[c.index], dt)
        kernels.integrate_face(c, c.D, dt, required_solved_sweep=0)
        assert np.max(np.abs(c.D)) < 1e-14


def test_integrate_face_rejects_stale_flux():
    grid, basis, kernels = make_setup(d=2, p=1)
    cell = grid.cells[0]
    with pytest.raises(SchedulingOrderError):
        kernels.integrate_face(cell, np.zeros_like(cell.Q), 1e-3,
                               required_solved_sweep=3)


def test_update_commits_increment_and_snapshot():
    grid, basis, kernels = make_setup(d=2, p=2, system=EulerSystem(2))
    grid.enable_limiter()
    init_grid(grid, basis, smooth_euler_state)
    cell = grid.cells[0]
    before = cell.Q.copy()
    D = np.full_like(cell.Q, 0.125)
    kernels.update(cell, D)
    assert np.array_equal(cell.prev_Q, before)
    assert np.array_equal(cell.Q, before + D)


def test_calc_time_step_plugin_value():
    system = EulerSystem(3)
    basis = make_basis(3)
    grid = build_grid(3, 1, 3, 5)
    grid.h = 1.0 / 27.0  # exercise the formula at a finer spacing
    kernels = Kernels(system, basis, grid, None)
    init_grid(grid, basis, lambda x: np.array([1.0, 0.0, 0.0, 0.0, 2.5])
              + 0 * x[..., :1])
    cell = grid.cells[0]
    want = 0.9 * (1.0 / 27.0) / (3 * 7 * np.sqrt(1.4))
    assert kernels.calc_time_step(cell) == pytest.approx(want, rel=1e-14)
    cell.Q[..., 0] = -1.0
    assert kernels.calc_time_step(cell) is None


@pytest.mark.parametrize("d,p,m", [(2, 0, 1), (2, 2, 1), (2, 3, 4),
                                   (3, 2, 5), (3, 5, 1)])
def test_ledger_books_exact_task_volumes(d, p, m):
    system = (EulerSystem(d) if m == d + 2
              else AdvectionSystem(d, (1.0, 0.5, 0.25)[:d]))
    if m not in (1, d + 2):
        pytest.skip("no system with this component count")
    ledger = AccessLedger("straightforward", d, p, m, trace_enabled=False)
    basis = make_basis(p)
    grid = build_grid(d, 1, p, m, storage="spacetime")
    kernels = Kernels(system, basis, grid, ledger)
    init_grid(grid, basis, lambda x: np.ones(m) + 0 * x[..., :1])
    ledger.begin_sweep(0, 1, 1)
    cell = grid.cells[0]
    stp = kernels.predict(cell, 0.0)
    kernels.extrapolate(cell, stp)
    kernels.integrate_volume(cell, stp, 1e-3,
                             out=np.zeros_like(cell.Q))
    face = grid.faces[grid.cell_faces[cell.index][0][0]]
    kernels.solve_riemann(face, allow_unpopulated=True)
    kernels.update(cell, np.zeros_like(cell.Q))
    kernels.calc_time_step(cell)
    done = {"predict", "extrapolate", "integrateVolume", "solveRiemann",
            "update", "calcTimeStep"}
    for task in done:
        r, w = logical_task_volumes(task, d, p, m)
        assert ledger.task_invocations[task] == 1
        assert ledger.task_reads[task] == r
        assert ledger.task_writes[task] == w


def test_task_volume_table_spot_values():
    # d = 3, p = 3, m = 5: block = 320, space-time block = 1280 doubles
    assert logical_task_volumes("predict", 3, 3, 5) == (320, 4 * 1280)
    assert logical_task_volumes("extrapolate", 3, 3, 5) == (4 * 1280, 3840)
    assert logical_task_volumes("solveRiemann", 3, 3, 5) == (1280, 640)
    assert logical_task_volumes("integrateVolume", 3, 3, 5) == (3 * 1280, 320)
    assert logical_task_volumes("integrateFace", 3, 3, 5) == (1920, 320)
    assert logical_task_volumes("update", 3, 3, 5) == (320, 320)
    assert logical_task_volumes("calcTimeStep", 3, 3, 5) == (320, 1)
