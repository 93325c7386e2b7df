"""Difference time steppers: BE, SI, TR, BDF2, TR-BDF2, SDIRK and their
semi-implicit 'S' variants, plus Newton and optimization-based solvers.

Steppers act on any system exposing ``eval_F(u)`` and ``eval_J(u)`` (J may
be dense or sparse). The step size is kept constant by the caller.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import contact as ct

SDIRK_GAMMA = 2.0 - np.sqrt(2.0)
SDIRK_BETA = np.sqrt(2.0) / 4.0

# A semi-implicit step that inflates ||F|| by more than this gets flagged.
DIVERGENCE_FACTOR = 1e6


class Method(enum.Enum):
    BE = "BE"
    SI = "SI"
    TR = "TR"
    BDF2 = "BDF2"
    SBDF2 = "SBDF2"
    TRBDF2 = "TRBDF2"
    STRBDF2 = "STRBDF2"
    SDIRK = "SDIRK"
    SSDIRK = "SSDIRK"


TWO_STEP_METHODS = {Method.BDF2, Method.SBDF2}


class Scaling(enum.Enum):
    IDENTITY = "identity"
    DIAGONAL_ROWS = "diagonal_rows"
    FROZEN_JACOBIAN_INVERSE = "frozen_jacobian_inverse"


@dataclass(frozen=True)
class NewtonConfig:
    max_iters: int = 50
    abs_tol: float = 1e-10
    rel_tol: float = 1e-12
    scaling: Scaling = Scaling.IDENTITY
    backtrack_factor: float = 0.5
    max_halvings: int = 30
    frozen_jacobian: bool = False
    # if > 0, accept a stalled line search with a warning when the residual
    # is already below this (useful with inexact Jacobians, e.g. friction)
    stall_accept: float = 0.0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be > 0")


@dataclass(frozen=True)
class StepperConfig:
    method: Method = Method.BE
    h: float = 1e-2
    newton: NewtonConfig = field(default_factory=NewtonConfig)

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("step size must be > 0")


class StepFailure(RuntimeError):
    """Nonlinear or linear solve failure; carries the last iterate."""

    def __init__(self, msg, last_iterate=None, residual_norm=None, stage=None):
        super().__init__(msg)
        self.last_iterate = last_iterate
        self.residual_norm = residual_norm
        self.stage = stage


def _factorize(jmat):
    """Return a solve(rhs) callable for a dense/sparse matrix or pass
    through objects that already provide .solve."""
    if hasattr(jmat, "solve") and not sp.issparse(jmat):
        return jmat.solve
    if sp.issparse(jmat):
        lu = spla.splu(jmat.tocsc())
        return lu.solve
    jmat = np.asarray(jmat)
    if jmat.ndim == 0 or jmat.shape == (1, 1):
        val = float(jmat.reshape(())) if jmat.ndim == 0 else float(jmat[0, 0])
        return lambda r: r / val
    lu = scipy.linalg.lu_factor(jmat)
    return lambda r: scipy.linalg.lu_solve(lu, r)


def newton_solve(residual_fn, jacobian_fn, guess, cfg: NewtonConfig):
    """Damped Newton with backtracking on the merit 0.5*||B g||^2.

    ``jacobian_fn(u)`` returns the residual Jacobian (dense, sparse, or an
    object with .solve). Raises StepFailure on non-convergence.
    """
    u = np.array(guess, dtype=float)
    g = residual_fn(u)
    g0_norm = np.linalg.norm(g)
    scale = None
    if cfg.scaling is Scaling.DIAGONAL_ROWS:
        j0 = jacobian_fn(u)
        d = np.abs(j0.diagonal()) if hasattr(j0, "diagonal") else np.abs(np.diag(j0))
        scale = 1.0 / np.maximum(d, 1e-12)
    elif cfg.scaling is Scaling.FROZEN_JACOBIAN_INVERSE:
        scale = _factorize(jacobian_fn(u))

    def merit(g):
        if scale is None:
            return 0.5 * float(np.dot(g, g))
        bg = scale(g) if callable(scale) else scale * g
        return 0.5 * float(np.dot(bg, bg))

    solve = None
    for it in range(cfg.max_iters):
        gnorm = np.linalg.norm(g)
        if gnorm <= cfg.abs_tol or gnorm <= cfg.rel_tol * g0_norm:
            return u
        if solve is None or not cfg.frozen_jacobian:
            solve = _factorize(jacobian_fn(u))
        try:
            du = -solve(g)
        except (RuntimeError, np.linalg.LinAlgError) as exc:
            raise StepFailure(f"linear solve failed: {exc}", u, gnorm) from exc
        phi0 = merit(g)
        step = 1.0
        for _ in range(cfg.max_halvings + 1):
            u_try = u + step * du
            g_try = residual_fn(u_try)
            if merit(g_try) < phi0 or not np.isfinite(phi0):
                break
            step *= cfg.backtrack_factor
            if step < 1e-12:
                return _stall(u, gnorm, cfg, "line search stalled")
        else:
            return _stall(u, gnorm, cfg, "line search exhausted")
        u, g = u_try, g_try
    gnorm = np.linalg.norm(g)
    if gnorm <= cfg.abs_tol or gnorm <= cfg.rel_tol * g0_norm:
        return u
    raise StepFailure(f"Newton did not converge ({gnorm:.3e})", u, gnorm)


def _stall(u, gnorm, cfg, msg):
    if cfg.stall_accept > 0 and gnorm <= cfg.stall_accept:
        warnings.warn(f"Newton {msg} at residual {gnorm:.3e}; accepting "
                      "iterate (stall_accept)", stacklevel=3)
        return u
    raise StepFailure(msg, u, gnorm)


def _implicit_stage(model, base, coeff_h, guess, cfg, stage=None):
    """Solve u = base + coeff_h * F(u) by Newton."""

    def residual(u):
        return u - base - coeff_h * model.eval_F(u)

    def jacobian(u):
        j = model.eval_J(u)
        n = j.shape[0]
        if sp.issparse(j):
            return (sp.identity(n) - coeff_h * j).tocsc()
        return np.eye(n) - coeff_h * np.asarray(j)

    try:
        return newton_solve(residual, jacobian, guess, cfg)
    except StepFailure as exc:
        exc.stage = stage
        raise


def _semi_implicit_solve(model, u_ref, coeff_h, rhs):
    """(I - coeff_h * J(u_ref))^{-1} rhs with a single factorization."""
    j = model.eval_J(u_ref)
    n = len(rhs)
    if sp.issparse(j):
        mat = (sp.identity(n) - coeff_h * j).tocsc()
    else:
        mat = np.eye(n) - coeff_h * np.asarray(j)
    try:
        return _factorize(mat)(rhs)
    except (RuntimeError, np.linalg.LinAlgError) as exc:
        raise StepFailure(f"semi-implicit solve failed: {exc}", u_ref) from exc


def _divergence_guard(model, u0, u1):
    f0 = np.linalg.norm(model.eval_F(u0))
    f1 = np.linalg.norm(model.eval_F(u1))
    flagged = f1 > DIVERGENCE_FACTOR * max(f0, 1e-300)
    if flagged:
        warnings.warn("semi-implicit step increased ||F|| by > 1e6, "
                      "possible divergence", stacklevel=3)
    return flagged


def step_be(model, u0, h, cfg: NewtonConfig = NewtonConfig()):
    """Backward Euler: u1 = u0 + h F(u1)."""
    return _implicit_stage(model, u0, h, u0, cfg)


def step_si(model, u0, h):
    """Semi-implicit BE: one Newton iteration from u0 (one linear solve)."""
    u1 = u0 + _semi_implicit_solve(model, u0, h, h * model.eval_F(u0))
    _divergence_guard(model, u0, u1)
    return u1


def step_tr(model, u0, h, cfg: NewtonConfig = NewtonConfig()):
    """Trapezoidal rule: u1 = u0 + h/2 (F(u1) + F(u0))."""
    base = u0 + 0.5 * h * model.eval_F(u0)
    return _implicit_stage(model, base, 0.5 * h, u0, cfg)


def step_bdf2(model, u0, um1, h, cfg: NewtonConfig = NewtonConfig()):
    """BDF2: u1 = u0 + (1/3)(u0 - um1 + 2 h F(u1))."""
    base = u0 + (u0 - um1) / 3.0
    return _implicit_stage(model, base, 2.0 * h / 3.0, u0, cfg)


def step_sbdf2(model, u0, um1, h):
    """Semi-implicit BDF2: one Newton iteration from u0."""
    rhs = (u0 - um1) / 3.0 + (2.0 * h / 3.0) * model.eval_F(u0)
    u1 = u0 + _semi_implicit_solve(model, u0, 2.0 * h / 3.0, rhs)
    _divergence_guard(model, u0, u1)
    return u1


def step_trbdf2(model, u0, h, cfg: NewtonConfig = NewtonConfig(),
                return_stage=False):
    """TR-BDF2: trapezoidal to the midpoint, then BDF2 over the step."""
    base = u0 + 0.25 * h * model.eval_F(u0)
    u_half = _implicit_stage(model, base, 0.25 * h, u0, cfg, stage=1)
    base2 = u0 + (4.0 / 3.0) * (u_half - u0)
    u1 = _implicit_stage(model, base2, h / 3.0, u_half, cfg, stage=2)
    return (u1, u_half) if return_stage else u1


def step_strbdf2(model, u0, h, return_stage=False):
    """Semi-implicit TR-BDF2 (one linear solve per stage)."""
    f0 = model.eval_F(u0)
    u_half = u0 + 0.5 * _semi_implicit_solve(model, u0, 0.25 * h, h * f0)
    f_half = model.eval_F(u_half)
    rhs = (u_half - u0) + h * f_half
    j_ref = u_half
    u1 = u_half + _semi_implicit_solve(model, j_ref, h / 3.0, rhs) / 3.0
    _divergence_guard(model, u0, u1)
    return (u1, u_half) if return_stage else u1


def step_sdirk(model, u0, h, cfg: NewtonConfig = NewtonConfig(),
               return_stage=False):
    """Two-stage SDIRK (gamma = 2 - sqrt(2)); both stages use gamma*h/2."""
    g, b = SDIRK_GAMMA, SDIRK_BETA
    base = u0 + 0.5 * g * h * model.eval_F(u0)
    u_g = _implicit_stage(model, base, 0.5 * g * h, u0, cfg, stage=1)
    base2 = u0 + (2.0 * b / g) * (u_g - u0)
    u1 = _implicit_stage(model, base2, 0.5 * g * h, u_g, cfg, stage=2)
    return (u1, u_g) if return_stage else u1


def step_ssdirk(model, u0, h, return_stage=False):
    """Semi-implicit SDIRK."""
    g, b = SDIRK_GAMMA, SDIRK_BETA
    f0 = model.eval_F(u0)
    u_g = u0 + _semi_implicit_solve(model, u0, 0.5 * g * h, g * h * f0)
    f_g = model.eval_F(u_g)
    rhs = (2.0 * b / g - 1.0) * (u_g - u0) + 0.5 * g * h * f_g
    u1 = u_g + _semi_implicit_solve(model, u_g, 0.5 * g * h, rhs)
    _divergence_guard(model, u0, u1)
    return (u1, u_g) if return_stage else u1


def bootstrap_history(model, u0, h, policy: Method = Method.SDIRK,
                      cfg: NewtonConfig = NewtonConfig()):
    """Synthesize history for two-step methods: one forward step of the
    configured one-step method, then relabel (u0 -> um1, u1 -> u0).

    Returns (u0_new, um1_new)."""
    one_step = {
        Method.BE: lambda: step_be(model, u0, h, cfg),
        Method.SI: lambda: step_si(model, u0, h),
        Method.TR: lambda: step_tr(model, u0, h, cfg),
        Method.TRBDF2: lambda: step_trbdf2(model, u0, h, cfg),
        Method.SDIRK: lambda: step_sdirk(model, u0, h, cfg),
        Method.SSDIRK: lambda: step_ssdirk(model, u0, h),
        Method.STRBDF2: lambda: step_strbdf2(model, u0, h),
    }
    if policy not in one_step:
        raise ValueError(f"{policy} is not a one-step bootstrap policy")
    u1 = one_step[policy]()
    return u1, u0


# -- optimization-based solvers (integrable forces only) -----------------


def _check_integrable(model):
    if getattr(model, "contact", None) is not None and model.contact.mu > 0:
        raise ValueError("optimization stepper requires integrable forces "
                         "(no friction)")
    ray = getattr(model, "rayleigh", None)
    if ray is not None and (ray.alpha or ray.beta):
        raise ValueError("optimization stepper does not support explicit "
                         "damping")


def _potential(model, q):
    """Total integrable potential: elastic + gravity + contact barrier."""
    w = model.elastic_energy(q) + model.gravity_energy(q)
    if getattr(model, "contact", None) is not None:
        cs = model._contact_set(q)
        w += model.contact.kappa * float(
            np.sum(ct.barrier_value(cs.gaps, model.contact.delta)))
    return w


def _potential_grad(model, q):
    f = model.elastic_force(q) + model.gravity_force()
    if getattr(model, "contact", None) is not None:
        cs = model._contact_set(q)
        f += ct.contact_force(model.mesh, cs, model.contact, q)
    return -f


def _hessian_of_potential(model, q):
    """d^2 W / dq^2: elastic plus contact barrier curvature."""
    k = model.stiffness(q)
    if getattr(model, "contact", None) is not None:
        cs = model._contact_set(q)
        k = k - ct.contact_stiffness(model.mesh, cs, model.contact, q)
    return k


def _newton_polish(model, objective, v1, coeff, q_of_v, tol, max_iters=20):
    """Drive the reduced gradient to stationarity with exact Hessian steps;
    L-BFGS alone stalls well above round-off on stiff problems."""
    free = model.free
    idx = np.nonzero(free)[0]
    for _ in range(max_iters):
        _, grad = objective(v1)
        if np.linalg.norm(grad) <= tol * max(1.0, np.linalg.norm(v1)):
            break
        hess = sp.diags(model.mass) + coeff * coeff * _hessian_of_potential(
            model, q_of_v(np.where(free, v1, 0.0)))
        sub = hess.tocsr()[idx][:, idx]
        step = spla.spsolve(sub, grad[idx])
        if not np.all(np.isfinite(step)):
            break
        v1 = v1.copy()
        v1[idx] -= step
    return v1


def optimize_be(model, u0, h, tol=1e-10):
    """BE via minimizing 0.5*||v1 - v0||_M^2 + W(q0 + h v1)."""
    _check_integrable(model)
    n = model.ndof
    q0, v0 = u0[:n], u0[n:]
    free = model.free
    mass = model.mass

    def objective(v1f):
        v1 = np.where(free, v1f, 0.0)
        q1 = q0 + h * v1
        dv = v1 - v0
        val = 0.5 * float(np.dot(dv, mass * dv)) + _potential(model, q1)
        grad = mass * dv + h * _potential_grad(model, q1)
        return val, np.where(free, grad, 0.0)

    res = scipy.optimize.minimize(objective, np.where(free, v0, 0.0),
                                  jac=True, method="L-BFGS-B",
                                  options={"gtol": tol, "ftol": 0.0,
                                           "maxiter": 2000})
    v1 = _newton_polish(model, objective, np.where(free, res.x, 0.0),
                        h, lambda v: q0 + h * v, tol)
    v1 = np.where(free, v1, 0.0)
    grad_norm = np.linalg.norm(objective(v1)[1])
    if grad_norm > max(100 * tol, 1e-6):
        raise StepFailure(f"optimizer stationarity {grad_norm:.3e}", res.x)
    return np.concatenate([q0 + h * v1, v1])


def optimize_bdf2(model, u0, um1, h, tol=1e-10):
    """BDF2 via minimizing 0.5*||v1 - vtilde||_M^2 + W(q1)."""
    _check_integrable(model)
    n = model.ndof
    q0, v0 = u0[:n], u0[n:]
    qm1, vm1 = um1[:n], um1[n:]
    vt = v0 + (v0 - vm1) / 3.0
    free = model.free
    mass = model.mass
    ch = 2.0 * h / 3.0

    def objective(v1f):
        v1 = np.where(free, v1f, 0.0)
        q1 = q0 + (q0 - qm1) / 3.0 + ch * v1
        dv = v1 - vt
        val = 0.5 * float(np.dot(dv, mass * dv)) + _potential(model, q1)
        grad = mass * dv + ch * _potential_grad(model, q1)
        return val, np.where(free, grad, 0.0)

    res = scipy.optimize.minimize(objective, np.where(free, v0, 0.0),
                                  jac=True, method="L-BFGS-B",
                                  options={"gtol": tol, "ftol": 0.0,
                                           "maxiter": 2000})
    v1 = _newton_polish(model, objective, np.where(free, res.x, 0.0),
                        ch, lambda v: q0 + (q0 - qm1) / 3.0 + ch * v, tol)
    v1 = np.where(free, v1, 0.0)
    grad_norm = np.linalg.norm(objective(v1)[1])
    if grad_norm > max(100 * tol, 1e-6):
        raise StepFailure(f"optimizer stationarity {grad_norm:.3e}", res.x)
    q1 = q0 + (q0 - qm1) / 3.0 + ch * v1
    return np.concatenate([q1, v1])
