"""phi_1 evaluation (dense, Krylov, modal) and the exponential
Rosenbrock-Euler step u1 = u0 + h*phi1(h J) F(u0)."""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg
import scipy.sparse as sp

DEFAULT_KRYLOV_DIM = 30
DEFAULT_KRYLOV_TOL = 1e-10


class KrylovWarning(UserWarning):
    pass


def phi1_dense(z):
    """phi1(Z) = Z^{-1}(exp(Z) - I), via the augmented exponential so that
    singular or near-singular Z is handled by the series limit."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    k = z.shape[0]
    aug = np.zeros((2 * k, 2 * k))
    aug[:k, :k] = z
    aug[:k, k:] = np.eye(k)
    return scipy.linalg.expm(aug)[:k, k:]


def _phi1_times_e1(hh):
    """h*phi1(H_aug) e1 for a small Hessenberg block, augmented-matrix trick.

    hh is the already-scaled small matrix (h*H). Returns phi1(hh) @ e1.
    """
    k = hh.shape[0]
    aug = np.zeros((k + 1, k + 1))
    aug[:k, :k] = hh
    aug[0, k] = 1.0
    return scipy.linalg.expm(aug)[:k, k]


def phi1_action_krylov(j, w, h, m=DEFAULT_KRYLOV_DIM, tol=DEFAULT_KRYLOV_TOL):
    """Approximate h*phi1(h J) w by an Arnoldi projection.

    Returns the vector; emits KrylovWarning if the subspace budget m is
    exhausted before the residual estimate drops below tol.
    """
    n = j.shape[0]
    if m < 1:
        raise ValueError("krylov dimension must be >= 1")
    m = min(m, n)
    beta = np.linalg.norm(w)
    if beta == 0.0 or h == 0.0:
        return np.zeros(n)
    matvec = (lambda x: j @ x) if sp.issparse(j) else (lambda x: np.asarray(j) @ x)
    v = np.zeros((m + 1, n))
    hess = np.zeros((m + 1, m))
    v[0] = w / beta
    happy = False
    used = m
    for jcol in range(m):
        z = matvec(v[jcol])
        for i in range(jcol + 1):
            hess[i, jcol] = np.dot(v[i], z)
            z -= hess[i, jcol] * v[i]
        # one reorthogonalization pass keeps the basis clean
        for i in range(jcol + 1):
            c = np.dot(v[i], z)
            hess[i, jcol] += c
            z -= c * v[i]
        hnorm = np.linalg.norm(z)
        hess[jcol + 1, jcol] = hnorm
        if hnorm < 1e-14 * max(1.0, np.abs(hess[:jcol + 1, jcol]).max()):
            happy = True
            used = jcol + 1
            break
        v[jcol + 1] = z / hnorm
        # residual-style error estimate for the phi1 action
        k = jcol + 1
        y = _phi1_times_e1(h * hess[:k, :k])
        err = beta * h * hnorm * abs(y[-1])
        if err <= tol * max(1.0, beta * h * np.linalg.norm(y)):
            used = k
            break
    else:
        used = m
        k = m
        y = _phi1_times_e1(h * hess[:k, :k])
        err = beta * h * hess[m, m - 1] * abs(y[-1]) if m < n else 0.0
        if err > tol * max(1.0, beta * h * np.linalg.norm(y)):
            warnings.warn(f"Krylov budget m={m} exhausted, estimate {err:.2e}",
                          KrylovWarning, stacklevel=2)
    k = used
    y = _phi1_times_e1(h * hess[:k, :k])
    return beta * h * (v[:k].T @ y)


def ere_step(model, u0, h, m=DEFAULT_KRYLOV_DIM, tol=DEFAULT_KRYLOV_TOL):
    """Exponential Rosenbrock-Euler: one Jacobian, no nonlinear solve."""
    f0 = model.eval_F(u0)
    j = model.eval_J(u0)
    return u0 + phi1_action_krylov(j, f0, h, m=m, tol=tol)


def phi1_modal(lambdas, h):
    """Exact h*phi1(h A_i) for per-mode blocks A_i = [[0, 1], [-lam, 0]].

    Returns (s, 2, 2). Nonnegative lam uses trig, negative lam hyperbolic
    (flagged via the returned diagnostics of callers), lam ~ 0 the series.
    """
    lam = np.asarray(lambdas, dtype=float)
    a = np.empty_like(lam)
    b = np.empty_like(lam)
    small = np.abs(lam) * h * h < 1e-12
    pos = (lam > 0) & ~small
    neg = (lam < 0) & ~small
    wpos = np.sqrt(lam[pos])
    a[pos] = np.sin(wpos * h) / wpos
    b[pos] = (1.0 - np.cos(wpos * h)) / lam[pos]
    wneg = np.sqrt(-lam[neg])
    a[neg] = np.sinh(wneg * h) / wneg
    b[neg] = (1.0 - np.cosh(wneg * h)) / lam[neg]
    z = lam[small] * h * h
    a[small] = h * (1.0 - z / 6.0)
    b[small] = 0.5 * h * h * (1.0 - z / 12.0)
    out = np.empty((len(lam), 2, 2))
    out[:, 0, 0] = a
    out[:, 0, 1] = b
    out[:, 1, 0] = -lam * b
    out[:, 1, 1] = a
    return out


def exp_modal(lambdas, h):
    """Exact expm(h A_i) for per-mode blocks A_i = [[0, 1], [-lam, 0]]."""
    lam = np.asarray(lambdas, dtype=float)
    a = np.empty_like(lam)
    b = np.empty_like(lam)
    small = np.abs(lam) * h * h < 1e-12
    pos = (lam > 0) & ~small
    neg = (lam < 0) & ~small
    wpos = np.sqrt(lam[pos])
    a[pos] = np.cos(wpos * h)
    b[pos] = np.sin(wpos * h) / wpos
    wneg = np.sqrt(-lam[neg])
    a[neg] = np.cosh(wneg * h)
    b[neg] = np.sinh(wneg * h) / wneg
    z = lam[small] * h * h
    a[small] = 1.0 - z / 2.0
    b[small] = h * (1.0 - z / 6.0)
    out = np.empty((len(lam), 2, 2))
    out[:, 0, 0] = a
    out[:, 0, 1] = b
    out[:, 1, 0] = -lam * b
    out[:, 1, 1] = a
    return out


def exp_modal_apply(lambdas, h, gq, gv):
    """Apply expm(h J_G^r) to the reduced vector (gq, gv) mode by mode."""
    blocks = exp_modal(lambdas, h)
    pq = blocks[:, 0, 0] * gq + blocks[:, 0, 1] * gv
    pv = blocks[:, 1, 0] * gq + blocks[:, 1, 1] * gv
    return pq, pv


def phi1_modal_apply(lambdas, h, gq, gv):
    """Apply h*phi1(h J_G^r) to the reduced vector (gq, gv) mode by mode."""
    blocks = phi1_modal(lambdas, h)
    pq = blocks[:, 0, 0] * gq + blocks[:, 0, 1] * gv
    pv = blocks[:, 1, 0] * gq + blocks[:, 1, 1] * gv
    return pq, pv
