"""Modal model reduction: generalized eigenpairs, G/H force splitting,
the SIERE family of additive integrators, and SMW low-rank solves."""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import expo
from .steppers import NewtonConfig, StepFailure, newton_solve

DENSE_EIG_CUTOFF = 300


class RefreshPolicy(enum.Enum):
    ONCE = "once"
    EVERY_STEP = "every_step"
    EVERY_N = "every_n"


@dataclass
class ModalSplit:
    """s smallest generalized eigenpairs K x = lam M x, M-orthonormal."""

    x: np.ndarray           # (ndof, s), zero rows on fixed dofs
    lam: np.ndarray         # (s,), ascending
    policy: RefreshPolicy = RefreshPolicy.ONCE
    every_n: int = 1
    steps_since_refresh: int = 0
    refresh_count: int = 0
    negative_count: int = 0

    @property
    def s(self):
        return self.x.shape[1]


def smallest_eigpairs(k, m, s):
    """s algebraically smallest eigenpairs of K x = lam M x.

    M must be SPD, K symmetric (possibly indefinite). Eigenvectors are
    M-orthonormal with a deterministic sign (largest-magnitude entry > 0).
    """
    n = k.shape[0]
    if s > n:
        raise ValueError(f"s={s} exceeds dimension {n}")
    if s == 0:
        return np.zeros((n, 0)), np.zeros(0)
    kd = k.toarray() if sp.issparse(k) else np.asarray(k, dtype=float)
    md = m.toarray() if sp.issparse(m) else np.asarray(m, dtype=float)
    if n <= DENSE_EIG_CUTOFF:
        lam, vec = scipy.linalg.eigh(kd, md)
        lam, vec = lam[:s], vec[:, :s]
    else:
        try:
            lam, vec = spla.eigsh(sp.csr_matrix(kd), k=s, M=sp.csr_matrix(md),
                                  sigma=-1e-8, which="LM")
        except spla.ArpackNoConvergence as exc:
            raise RuntimeError("eigensolver did not converge") from exc
        order = np.argsort(lam)
        lam, vec = lam[order], vec[:, order]
    # enforce M-orthonormality and sign convention
    for i in range(s):
        nrm = np.sqrt(vec[:, i] @ (md @ vec[:, i]))
        vec[:, i] /= nrm
        j = np.argmax(np.abs(vec[:, i]))
        if vec[j, i] < 0:
            vec[:, i] = -vec[:, i]
    return vec, lam


def modal_split(model, u, s, policy=RefreshPolicy.ONCE, every_n=1) -> ModalSplit:
    """Build the split from the model's stiffness at state u, respecting
    fixed-vertex masking (eigenproblem solved on the free block)."""
    n = model.ndof
    q = u[:n]
    free = model.free
    nfree = int(free.sum())
    if s > nfree:
        raise ValueError(f"s={s} exceeds free dimension {nfree}")
    k = model.stiffness(q)
    kd = (k.toarray() if sp.issparse(k) else np.asarray(k))[np.ix_(free, free)]
    md = np.diag(model.mass[free])
    xf, lam = smallest_eigpairs(kd, md, s)
    x = np.zeros((n, s))
    x[free] = xf
    neg = int((lam < 0).sum())
    ms = ModalSplit(x, lam, policy, every_n, negative_count=neg)
    if neg:
        warnings.warn(f"{neg} negative stiffness eigenvalue(s) in split")
    return ms


def refresh_split(model, u, ms: ModalSplit, force=False) -> ModalSplit:
    """Recompute eigenpairs per the split's policy; logs drift diagnostics."""
    due = force or (ms.policy is RefreshPolicy.EVERY_STEP) or (
        ms.policy is RefreshPolicy.EVERY_N
        and ms.steps_since_refresh + 1 >= ms.every_n)
    if not due:
        ms.steps_since_refresh += 1
        return ms
    try:
        new = modal_split(model, u, ms.s, ms.policy, ms.every_n)
    except (RuntimeError, ValueError) as exc:
        warnings.warn(f"eigen refresh failed ({exc}); keeping previous split")
        ms.steps_since_refresh += 1
        return ms
    new.refresh_count = ms.refresh_count + 1
    if ms.s and new.s:
        # principal angles between old and new subspaces in the M inner product
        sqm = np.sqrt(np.maximum(model.mass, 0.0))[:, None]
        ang = scipy.linalg.subspace_angles(sqm * ms.x, sqm * new.x)
        new.last_drift = float(ang.max()) if len(ang) else 0.0
        new.eig_drift = float(np.max(np.abs(new.lam - ms.lam)))
    return new


def split_forces(model, u, ms: ModalSplit):
    """(G, H) with G + H = F(u) and G supported on the modal subspace."""
    n = model.ndof
    f_full = model.eval_F(u)
    g = project_G(model, ms, f_full)
    return g, f_full - g


def project_G(model, ms: ModalSplit, fvec):
    """Project a first-order vector onto the G (modal) component."""
    n = model.ndof
    top, bot = fvec[:n], fvec[n:]
    x = ms.x
    g = np.zeros_like(fvec)
    if ms.s == 0:
        return g
    g[:n] = x @ (x.T @ (model.mass * top))
    # bottom block is an acceleration: f = M a, f_G = M X X^T f, so
    # a_G = X X^T (M a).
    g[n:] = x @ (x.T @ (model.mass * bot))
    return g


def build_JG_JH(model, u, ms: ModalSplit):
    """(apply_JG, apply_JH) as matrix-free callables; J_H = J_full - J_G."""
    n = model.ndof
    j = model.eval_J(u)
    x, lam = ms.x, ms.lam

    def apply_jg(w):
        out = np.zeros_like(w)
        if ms.s == 0:
            return out
        wq, wv = w[:n], w[n:]
        mv = x.T @ (model.mass * wv)
        mq = x.T @ (model.mass * wq)
        out[:n] = x @ mv
        out[n:] = -x @ (lam * mq)
        return out

    def apply_jh(w):
        return j @ w - apply_jg(w)

    return apply_jg, apply_jh


class SmwSolver:
    """Solves (A + Y Z^T) x = rhs with one sparse factorization of A.

    A is sparse (or dense) of size 2n, Y and Z are skinny. Counts solves
    for cost diagnostics.
    """

    def __init__(self, a, y=None, z=None):
        self.n_solves = 0
        if sp.issparse(a):
            self._lu = spla.splu(a.tocsc())
            self._solve_a = self._lu.solve
        else:
            lu = scipy.linalg.lu_factor(np.asarray(a, dtype=float))
            self._solve_a = lambda r: scipy.linalg.lu_solve(lu, r)
        self.y = y if y is not None and y.size else None
        self.z = z if z is not None and z.size else None
        if self.y is not None:
            ainv_y = np.column_stack([self._solve_a(self.y[:, i])
                                      for i in range(self.y.shape[1])])
            cap = np.eye(self.y.shape[1]) + self.z.T @ ainv_y
            try:
                self._cap_lu = scipy.linalg.lu_factor(cap)
            except scipy.linalg.LinAlgError as exc:
                raise StepFailure("singular SMW capacitance matrix") from exc
            if np.abs(np.diag(self._cap_lu[0])).min() < 1e-14:
                raise StepFailure("singular SMW capacitance matrix")
            self._ainv_y = ainv_y

    def solve(self, rhs):
        self.n_solves += 1
        x = self._solve_a(rhs)
        if self.y is None:
            return x
        w = scipy.linalg.lu_solve(self._cap_lu, self.z.T @ x)
        return x - self._ainv_y @ w


def smw_solve(a, y, z, rhs):
    """One-shot (A + Y Z^T)^{-1} rhs."""
    return SmwSolver(a, y, z).solve(rhs)


def _smw_factors(model, ms: ModalSplit, coeff):
    """Y, Z with I - c*J_H = (I - c*J) + c*(Y1 Z1^T + Y2 Z2^T) stacked.

    The c factor is folded into Z.
    """
    n = model.ndof
    s = ms.s
    if s == 0:
        return None, None
    x, lam = ms.x, ms.lam
    mx = model.mass[:, None] * x
    y = np.zeros((2 * n, 2 * s))
    z = np.zeros((2 * n, 2 * s))
    y[:n, :s] = x
    z[n:, :s] = coeff * mx
    y[n:, s:] = -x * lam
    z[:n, s:] = coeff * mx
    return y, z


def _h_solver(model, u_ref, ms: ModalSplit, coeff) -> SmwSolver:
    """Factorized solver for (I - coeff * J_H(u_ref))."""
    j = model.eval_J(u_ref)
    n2 = j.shape[0]
    a = (sp.identity(n2) - coeff * j).tocsc() if sp.issparse(j) \
        else np.eye(n2) - coeff * np.asarray(j)
    y, z = _smw_factors(model, ms, coeff)
    return SmwSolver(a, y, z)


def _ere_subspace_term(model, u, ms: ModalSplit, h):
    """h*phi1(h J_G) G(u), evaluated in the modal subspace and prolonged."""
    n = model.ndof
    if ms.s == 0:
        return np.zeros(2 * n)
    f = model.eval_F(u)
    x = ms.x
    # reduced state: G^r = (X^T M v, X^T f) with f = M * acceleration block
    v = u[n:]
    gq = x.T @ (model.mass * v)
    gv = x.T @ (model.mass * f[n:])
    pq, pv = expo.phi1_modal_apply(ms.lam, h, gq, gv)
    out = np.zeros(2 * n)
    out[:n] = x @ pq
    out[n:] = x @ pv
    return out


def siere_step(model, u0, h, ms: ModalSplit, diag=None):
    """SIERE: u1 = u0 + (I - h J_H)^{-1}(h H(u0) + h phi1(h J_G) G(u0))."""
    g0, h0 = split_forces(model, u0, ms)
    ere = _ere_subspace_term(model, u0, ms, h)
    solver = _h_solver(model, u0, ms, h)
    u1 = u0 + solver.solve(h * h0 + ere)
    if diag is not None:
        diag["smw_solves"] = solver.n_solves
        diag["s"] = ms.s
    return u1


def beere_step(model, u0, h, ms: ModalSplit, cfg: NewtonConfig = NewtonConfig()):
    """BEERE: u1 = u0 + h H(u1) + h phi1(h J_G) G(u0), implicit in H."""
    ere = _ere_subspace_term(model, u0, ms, h)

    def residual(u):
        _, hh = split_forces(model, u, ms)
        return u - u0 - h * hh - ere

    def jacobian(u):
        return _h_solver(model, u, ms, h)

    return newton_solve(residual, jacobian, u0, cfg)


def bdf2ere_step(model, u0, um1, h, ms: ModalSplit,
                 cfg: NewtonConfig = NewtonConfig()):
    """BDF2ERE: ERE on the modal part, BE-like implicit solve for the rest."""
    ere = _ere_subspace_term(model, u0, ms, h)
    uhat = (4.0 * u0 - um1 + 2.0 * ere) / 3.0
    ch = 2.0 * h / 3.0

    def residual(u):
        _, hh = split_forces(model, u, ms)
        return u - uhat - ch * hh

    def jacobian(u):
        return _h_solver(model, u, ms, ch)

    return newton_solve(residual, jacobian, u0, cfg)


def sbdf2ere_step(model, u0, um1, h, ms: ModalSplit, diag=None):
    """Semi-implicit BDF2ERE: exactly one large (SMW) solve per step."""
    _, h0 = split_forces(model, u0, ms)
    ere = _ere_subspace_term(model, u0, ms, h)
    solver = _h_solver(model, u0, ms, 2.0 * h / 3.0)
    rhs = u0 - um1 + 2.0 * h * h0 + 2.0 * ere
    u1 = u0 + solver.solve(rhs) / 3.0
    if diag is not None:
        diag["smw_solves"] = solver.n_solves
    return u1


def _exp_g_apply(model, ms: ModalSplit, c, w):
    """expm(c * J_G) w: identity off the subspace, exact 2x2 blocks on it."""
    if ms.s == 0:
        return w
    n = model.ndof
    x = ms.x
    yq = x.T @ (model.mass * w[:n])
    yv = x.T @ (model.mass * w[n:])
    zq, zv = expo.exp_modal_apply(ms.lam, c, yq, yv)
    out = w.copy()
    out[:n] += x @ (zq - yq)
    out[n:] += x @ (zv - yv)
    return out


def _jg_apply(model, ms: ModalSplit, w):
    """J_G w via the modal blocks."""
    n = model.ndof
    out = np.zeros_like(w)
    if ms.s == 0:
        return out
    x = ms.x
    mq = x.T @ (model.mass * w[:n])
    mv = x.T @ (model.mass * w[n:])
    out[:n] = x @ mv
    out[n:] = -x @ (ms.lam * mq)
    return out


def strsbdf2ere_step(model, u0, h, ms: ModalSplit, diag=None,
                     return_stage=False):
    """STR-SBDF2ERE: semi-implicit TR-BDF2 on the complement, exact modal
    exponential on the subspace.

    Stage 2 is BDF2 applied to w(t) = expm(-t J_G) u(t) over the nodes
    {0, h/2, h}, mapped back; this keeps subspace modes neutrally stable
    (a stage-2 rhs that treats the modal exponential explicitly is not)
    and reduces to plain STR-SBDF2 at s = 0.
    """
    n2 = 2 * model.ndof
    f0 = model.eval_F(u0)
    j0 = model.eval_J(u0)
    a1 = (sp.identity(n2) - (h / 4.0) * j0).tocsc() if sp.issparse(j0) \
        else np.eye(n2) - (h / 4.0) * np.asarray(j0)
    s1 = SmwSolver(a1)
    u_half = u0 + 0.5 * s1.solve(h * f0)

    # modal operations act on deviations from rest; propagating absolute
    # positions would spin the rest geometry through the mode rotation
    u_ref = np.concatenate([model.q_rest, np.zeros(model.ndof)])
    u_prop = u_ref + (4.0 * _exp_g_apply(model, ms, h / 2.0, u_half - u_ref)
                      - _exp_g_apply(model, ms, h, u0 - u_ref)) / 3.0
    # remainder relative to the modal linearization
    h_half = model.eval_F(u_half) - _jg_apply(model, ms, u_half - u_ref)
    solver = _h_solver(model, u_half, ms, h / 3.0)
    u1 = u_half + solver.solve(u_prop - u_half + (h / 3.0) * h_half)
    if diag is not None:
        diag["smw_solves"] = s1.n_solves + solver.n_solves
        diag["s"] = ms.s
    return (u1, u_half) if return_stage else u1
