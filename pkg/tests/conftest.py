"""Shared helpers for the test suite."""

import numpy as np

from aderdg.basis import make_basis
from aderdg.kernels import Kernels
from aderdg.mesh import build_grid
from aderdg.metrics import AccessLedger
from aderdg.pde import AdvectionSystem, EulerSystem
from aderdg.scheduler import Driver, TimeControl


def node_coords(grid, basis, cell):
    """Physical coordinates of a cell's collocation nodes, (...n, d)."""
    pts = [(cell.multi_index[a] + basis.nodes) * grid.h
           for a in range(grid.d)]
    return np.stack(np.meshgrid(*pts, indexing="ij"), axis=-1)


def init_grid(grid, basis, fn):
    for cell in grid.cells:
        cell.Q[...] = fn(node_coords(grid, basis, cell))


def gaussian_profile(x, sigma=0.25):
    return np.exp(-np.sum(np.sin(np.pi * (x - 0.5)) ** 2, axis=-1)
                  / (2.0 * sigma ** 2))


def smooth_euler_state(x):
    """Smooth density wave with uniform velocity 0.5 per axis, p = 1."""
    d = x.shape[-1]
    rho = 1.0 + 0.2 * np.sin(2.0 * np.pi * np.sum(x, axis=-1))
    Q = np.zeros(x.shape[:-1] + (d + 2,))
    Q[..., 0] = rho
    for a in range(d):
        Q[..., 1 + a] = 0.5 * rho
    Q[..., -1] = 1.0 / 0.4 + 0.5 * rho * d * 0.25
    return Q


def advection_run(mode, d=2, L=1, p=2, forced_dt=1e-3, steps=10,
                  velocity=(1.0, 0.5, 0.25), trace=True, **driver_kwargs):
    """Build and run a gaussian-bump advection case; returns
    (grid, driver, ledger)."""
    system = AdvectionSystem(d, velocity[:d], profile=gaussian_profile)
    basis = make_basis(p)
    storage = "spacetime" if mode == "straightforward" else "hull"
    grid = build_grid(d, L, p, 1, storage=storage)
    init_grid(grid, basis, lambda x: gaussian_profile(x)[..., None])
    ledger = AccessLedger(mode, d, p, 1, trace_enabled=trace)
    kernels = Kernels(system, basis, grid, ledger)
    driver = Driver(grid, kernels, TimeControl(forced_dt=forced_dt), mode,
                    **driver_kwargs)
    driver.run(steps=steps)
    return grid, driver, ledger


def euler_run(mode, d=2, L=1, p=2, forced_dt=None, steps=10, trace=True,
              c_dt=0.99, **driver_kwargs):
    """Build and run a smooth Euler density wave; returns
    (grid, driver, ledger)."""
    system = EulerSystem(d)
    basis = make_basis(p)
    storage = "spacetime" if mode == "straightforward" else "hull"
    grid = build_grid(d, L, p, system.m, storage=storage)
    init_grid(grid, basis, smooth_euler_state)
    ledger = AccessLedger(mode, d, p, system.m, trace_enabled=trace)
    kernels = Kernels(system, basis, grid, ledger)
    driver = Driver(grid, kernels,
                    TimeControl(c_dt=c_dt, forced_dt=forced_dt), mode,
                    **driver_kwargs)
    driver.run(steps=steps)
    return grid, driver, ledger


def gather(grid):
    """Stack all cell coefficient blocks into one array."""
    return np.stack([c.Q for c in grid.cells])
