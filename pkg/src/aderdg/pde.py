"""Hyperbolic systems: compressible Euler (m = d+2) and scalar advection.

State vectors are plain ndarrays with the component axis last, so every
operation broadcasts over arbitrary node layouts.  Euler ordering is
(rho, j_1..j_d, E) in nondimensional units.
"""

import numpy as np

from .errors import DomainError

GAMMA = 1.4
ADMISSIBILITY_EPS = 1e-12


class EulerSystem:
    """Compressible Euler equations in d space dimensions."""

    def __init__(self, dim):
        if dim not in (2, 3):
            raise DomainError(f"Euler system supports d in {{2, 3}}, got {dim}")
        self.d = dim
        self.m = dim + 2
        self.name = "euler"
        self.exact_solution = None

    def pressure(self, Q):
        Q = np.asarray(Q, dtype=float)
        rho = Q[..., 0]
        j = Q[..., 1:1 + self.d]
        E = Q[..., -1]
        return (GAMMA - 1.0) * (E - 0.5 * np.sum(j * j, axis=-1) / rho)

    def flux(self, Q):
        """Flux tensor with shape (d,) + Q.shape; row a is the flux in x_a."""
        Q = np.asarray(Q, dtype=float)
        rho = Q[..., 0]
        j = Q[..., 1:1 + self.d]
        E = Q[..., -1]
        p = self.pressure(Q)
        F = np.empty((self.d,) + Q.shape)
        for a in range(self.d):
            ja = j[..., a]
            F[a, ..., 0] = ja
            for b in range(self.d):
                F[a, ..., 1 + b] = ja * j[..., b] / rho
            F[a, ..., 1 + a] += p
            F[a, ..., -1] = ja * (E + p) / rho
        return F

    def max_signal_speed(self, Q, axis):
        """|u_axis| + c with c the acoustic speed, pointwise."""
        Q = np.asarray(Q, dtype=float)
        rho = Q[..., 0]
        u = Q[..., 1 + axis] / rho
        c = np.sqrt(GAMMA * self.pressure(Q) / rho)
        return np.abs(u) + c

    def is_admissible(self, Q):
        """True iff every state has rho > eps and p > eps (and is finite)."""
        Q = np.asarray(Q, dtype=float)
        if not np.all(np.isfinite(Q)):
            return False
        rho = Q[..., 0]
        if not np.all(rho > ADMISSIBILITY_EPS):
            return False
        return bool(np.all(self.pressure(Q) > ADMISSIBILITY_EPS))


class AdvectionSystem:
    """Scalar linear advection q_t + a . grad(q) = 0; analytic-solution oracle."""

    def __init__(self, dim, velocity, profile=None):
        self.d = dim
        self.m = 1
        self.name = "advection"
        self.velocity = np.asarray(velocity, dtype=float)
        if self.velocity.shape != (dim,):
            raise DomainError(f"velocity must have {dim} components")
        self.profile = profile  # callable q0(x) on the periodic unit cube

    def flux(self, Q):
        Q = np.asarray(Q, dtype=float)
        F = np.empty((self.d,) + Q.shape)
        for a in range(self.d):
            F[a] = self.velocity[a] * Q
        return F

    def max_signal_speed(self, Q, axis):
        Q = np.asarray(Q, dtype=float)
        return np.full(Q.shape[:-1], abs(self.velocity[axis]))

    def is_admissible(self, Q):
        return bool(np.all(np.isfinite(np.asarray(Q, dtype=float))))

    def exact_solution(self, x, t):
        """Exact state at points x (shape (..., d)) and time t: the shifted
        initial profile, periodic on the unit cube."""
        if self.profile is None:
            raise DomainError("advection system has no initial profile attached")
        shifted = np.mod(np.asarray(x, dtype=float) - t * self.velocity, 1.0)
        return self.profile(shifted)[..., None]


def euler_pressure(Q):
    """Pressure of a single Euler state; raises DomainError on rho <= 0."""
    Q = np.asarray(Q, dtype=float)
    if Q[0] <= 0.0:
        raise DomainError(f"non-positive density {Q[0]}")
    system = EulerSystem(Q.size - 2)
    return float(system.pressure(Q))


def euler_flux(Q):
    """Flux tensor of a single admissible Euler state (d x m)."""
    Q = np.asarray(Q, dtype=float)
    system = EulerSystem(Q.size - 2)
    if not system.is_admissible(Q):
        raise DomainError(f"inadmissible Euler state {Q}")
    return system.flux(Q)


def max_signal_speed(system, Q, axis):
    """Largest characteristic speed of a single state along one axis."""
    Q = np.asarray(Q, dtype=float)
    if not system.is_admissible(Q):
        raise DomainError(f"inadmissible state {Q}")
    return float(system.max_signal_speed(Q, axis))
