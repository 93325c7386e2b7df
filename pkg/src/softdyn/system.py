"""First-order assembly u' = F(u) = J u + (0; c) for the FEM model.

ForceModel stacks elastic, Rayleigh, contact, friction and gravity forces
and exposes F, its block Jacobian, and the remainder c. Fixed-vertex rows
are masked to zero; mass is applied explicitly (diagonal lumped M).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from . import contact as ct
from . import fem
from .fem import Material, MaterialParams, RayleighParams
from .meshes import TetMesh


@dataclass(frozen=True)
class SimState:
    """Positions q (absolute), velocities v, time t, optional previous state."""

    q: np.ndarray
    v: np.ndarray
    t: float = 0.0
    history: "SimState | None" = None

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))
        if self.q.shape != self.v.shape:
            raise ValueError("q and v dimensions differ")

    @property
    def u(self):
        return np.concatenate([self.q, self.v])

    @staticmethod
    def from_u(u, t=0.0, history=None):
        n = len(u) // 2
        return SimState(u[:n], u[n:], t, history)


class ForceModel:
    """Aggregate force model over a mesh; the system every stepper integrates."""

    def __init__(self, mesh: TetMesh, mat: MaterialParams,
                 rayleigh: RayleighParams = RayleighParams(),
                 gravity=(0.0, 0.0, 0.0), contact: ct.ContactConfig | None = None):
        self.mesh = mesh
        self.mat = mat
        self.rayleigh = rayleigh
        self.gravity = np.asarray(gravity, dtype=float)
        self.contact = contact
        self.ndof = mesh.num_dofs
        self.dim = 2 * self.ndof
        self.mass = fem.lumped_masses(mesh, mat.density)
        self.minv = 1.0 / self.mass
        self.free = mesh.free_dof_mask()
        self.q_rest = mesh.rest_positions.reshape(-1)
        self._k_linear = None
        if mat.model is Material.LINEAR:
            self._k_linear = fem.stiffness_matrix(mesh, mat, self.q_rest)

    # -- scalar/vector force pieces -------------------------------------

    def elastic_energy(self, q):
        return fem.elastic_energy(self.mesh, self.mat, q)

    def elastic_force(self, q):
        if self._k_linear is not None:
            return -(self._k_linear @ (q - self.q_rest))
        return fem.elastic_force(self.mesh, self.mat, q)

    def stiffness(self, q) -> sp.csr_matrix:
        """Elastic tangent stiffness (no contact terms), unmasked."""
        if self._k_linear is not None:
            return self._k_linear
        return fem.stiffness_matrix(self.mesh, self.mat, q)

    def damping(self, q) -> sp.csr_matrix:
        m = sp.diags(self.mass)
        return fem.rayleigh_damping(self.stiffness(q), m, self.rayleigh)

    def gravity_force(self):
        return self.mass * np.tile(self.gravity, self.mesh.num_vertices)

    def gravity_energy(self, q):
        """Gravitational potential, referenced to the rest configuration."""
        g = np.tile(self.gravity, self.mesh.num_vertices)
        return -float(np.dot(self.mass * g, q - self.q_rest)) / 1.0

    def _contact_set(self, q):
        if self.contact is None:
            return None
        return ct.active_set(self.mesh, self.contact, q)

    def total_force(self, q, v, cs=None):
        """f_tot = f_els + f_dmp + f_con + f_ext (unmasked)."""
        f = self.elastic_force(q) + self.gravity_force()
        if self.rayleigh.alpha or self.rayleigh.beta:
            f -= self.damping(q) @ v
        if self.contact is not None:
            if cs is None:
                cs = self._contact_set(q)
            f += ct.contact_force(self.mesh, cs, self.contact, q)
            f += ct.friction_force(self.mesh, cs, self.contact, q, v)
        return f

    # -- first-order system ---------------------------------------------

    def eval_F(self, u):
        """F(u) = (v; M^-1 f_tot), masked at fixed vertices."""
        n = self.ndof
        q, v = u[:n], u[n:]
        out = np.zeros(2 * n)
        out[:n] = np.where(self.free, v, 0.0)
        acc = self.minv * self.total_force(q, v)
        out[n:] = np.where(self.free, acc, 0.0)
        return out

    def eval_J(self, u) -> sp.csr_matrix:
        """Block Jacobian [[0, I], [-M^-1 K_eff, -M^-1 D_eff]], masked."""
        n = self.ndof
        q, v = u[:n], u[n:]
        k = self.stiffness(q).copy()
        d = self.damping(q)
        if self.contact is not None:
            cs = self._contact_set(q)
            k = k - ct.contact_stiffness(self.mesh, cs, self.contact, q)
            d = d - ct.friction_velocity_jacobian(self.mesh, cs, self.contact, q, v)
        minv = sp.diags(self.minv)
        mask = sp.diags(self.free.astype(float))
        eye = sp.identity(n, format="csr")
        top = sp.hstack([sp.csr_matrix((n, n)), mask @ eye])
        bot = sp.hstack([-(mask @ minv @ k @ mask), -(mask @ minv @ d @ mask)])
        return sp.vstack([top, bot]).tocsr()

    def eval_remainder(self, u):
        """c(u) with F(u) = J(u) u + (0; c(u)); c lives in the velocity block."""
        n = self.ndof
        f = self.eval_F(u)
        j = self.eval_J(u)
        lin = j @ u
        return f[n:] - lin[n:]

    # convenience aliases used by generic steppers
    def F(self, u):
        return self.eval_F(u)

    def J(self, u):
        return self.eval_J(u)


def state_energy(model: ForceModel, state: SimState):
    """(kinetic, elastic, gravity) energy triple for one state."""
    ke = 0.5 * float(np.dot(state.v, model.mass * state.v))
    pe = model.elastic_energy(state.q)
    pg = model.gravity_energy(state.q)
    return ke, pe, pg


def replace_history(state: SimState, prev: SimState | None) -> SimState:
    return replace(state, history=prev)
