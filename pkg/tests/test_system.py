"""First-order form: recomposition identity, Jacobian vs FD, spectrum."""

import numpy as np
import pytest

import softdyn as sd

from conftest import perturb


@pytest.fixture
def model(beam):
    mat = sd.MaterialParams(sd.Material.STABLE_NEO_HOOKEAN, 1e5, 0.4, 1000.0)
    return sd.ForceModel(beam, mat, sd.RayleighParams(0.01, 0.5),
                         (0, 0, -9.8), None)


def rand_state(model, rng, vel_scale=0.1):
    q = perturb(model.mesh, rng, 0.03)
    v = vel_scale * rng.standard_normal(q.size)
    u = np.concatenate([q, v])
    # respect Dirichlet: fixed dofs at rest, zero velocity
    n = model.ndof
    u[:n] = np.where(model.free, u[:n], model.q_rest)
    u[n:] = np.where(model.free, u[n:], 0.0)
    return u


def test_recomposition_identity(model, rng):
    """F(u) = J(u) u + (0; c(u)) exactly by construction."""
    for _ in range(5):
        u = rand_state(model, rng)
        f = model.eval_F(u)
        j = model.eval_J(u)
        c = model.eval_remainder(u)
        full = j @ u
        full[model.ndof:] += c
        assert np.linalg.norm(f - full) < 1e-10 * max(1.0, np.linalg.norm(f))


def test_jacobian_vs_fd(beam, rng):
    # mass-proportional damping only: the q-derivative of K(q) v through
    # stiffness-proportional damping is deliberately lagged in eval_J
    mat = sd.MaterialParams(sd.Material.STABLE_NEO_HOOKEAN, 1e5, 0.4, 1000.0)
    model = sd.ForceModel(beam, mat, sd.RayleighParams(0.0, 0.5),
                          (0, 0, -9.8), None)
    u = rand_state(model, rng)
    j = model.eval_J(u).toarray()
    eps = 1e-6
    jfd = np.zeros_like(j)
    free2 = np.concatenate([model.free, model.free])
    for i in np.nonzero(free2)[0]:  # fixed dofs are held constant
        up, um = u.copy(), u.copy()
        up[i] += eps
        um[i] -= eps
        jfd[:, i] = (model.eval_F(up) - model.eval_F(um)) / (2 * eps)
    assert np.abs(j - jfd).max() < 1e-4 * max(1.0, np.abs(jfd).max())


def test_fixed_dofs_static(model):
    u = np.concatenate([model.q_rest, np.zeros(model.ndof)])
    f = model.eval_F(u)
    fixed = ~model.free
    assert np.abs(f[:model.ndof][fixed]).max() == 0.0
    assert np.abs(f[model.ndof:][fixed]).max() == 0.0


def test_undamped_spectrum_imaginary():
    """Without damping, eigenvalues of J at rest are +-i*sqrt(lambda_i)."""
    mesh = sd.box_mesh(2, 1, 1, 0.2, 0.1, 0.1, fix="left")
    mat = sd.MaterialParams(sd.Material.LINEAR, 1e5, 0.3, 1000.0)
    model = sd.ForceModel(mesh, mat, sd.RayleighParams(), (0, 0, 0), None)
    u = np.concatenate([model.q_rest, np.zeros(model.ndof)])
    j = model.eval_J(u).toarray()
    free2 = np.concatenate([model.free, model.free])
    jf = j[np.ix_(free2, free2)]
    ev = np.linalg.eigvals(jf)
    assert np.abs(ev.real).max() < 1e-6 * np.abs(ev).max()
    # generalized stiffness eigenvalues
    _, lam = sd.smallest_eigpairs(
        model.stiffness(model.q_rest).toarray()[np.ix_(model.free, model.free)],
        np.diag(model.mass[model.free]),
        int(model.free.sum()))
    ref = np.sort(np.concatenate([np.sqrt(lam), -np.sqrt(lam)]))
    got = np.sort(ev.imag)
    np.testing.assert_allclose(got, ref, rtol=1e-6, atol=1e-8)


def test_state_energy_components(model):
    st = sd.SimState(model.q_rest.copy(), np.zeros(model.ndof), 0.0)
    ke, pe, pg = sd.state_energy(model, st)
    assert ke == 0.0
    assert abs(pe) < 1e-10
    # gravity reference: -sum m_i g . q_i
    v = np.ones(model.ndof)
    st2 = sd.SimState(model.q_rest.copy(), v, 0.0)
    ke2, _, _ = sd.state_energy(model, st2)
    assert np.isclose(ke2, 0.5 * model.mass.sum())


def test_simstate_u_roundtrip(model, rng):
    u = rand_state(model, rng)
    st = sd.SimState.from_u(u, 1.5)
    np.testing.assert_array_equal(st.u, u)
    assert st.t == 1.5
