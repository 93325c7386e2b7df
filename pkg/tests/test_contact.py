"""Barrier, contact and friction oracles."""

import numpy as np
import pytest

import softdyn as sd
from softdyn import contact as ct


DELTA = 0.01


def test_barrier_support():
    assert ct.barrier_value(DELTA, DELTA) == 0.0
    assert ct.barrier_value(2 * DELTA, DELTA) == 0.0
    assert ct.barrier_grad(DELTA, DELTA) == 0.0
    assert ct.barrier_value(0.5 * DELTA, DELTA) > 0.0


def test_barrier_closed_form():
    x = 0.4 * DELTA
    ref = -(x - DELTA) ** 2 * np.log(x / DELTA)
    assert np.isclose(ct.barrier_value(x, DELTA), ref, rtol=1e-12)


def test_barrier_derivatives_fd():
    eps = 1e-8 * DELTA
    for x in np.linspace(0.05 * DELTA, 0.95 * DELTA, 9):
        g_fd = (ct.barrier_value(x + eps, DELTA) -
                ct.barrier_value(x - eps, DELTA)) / (2 * eps)
        h_fd = (ct.barrier_grad(x + eps, DELTA) -
                ct.barrier_grad(x - eps, DELTA)) / (2 * eps)
        assert abs(ct.barrier_grad(x, DELTA) - g_fd) < 1e-5 * max(1.0, abs(g_fd))
        assert abs(ct.barrier_hess(x, DELTA) - h_fd) < 1e-4 * max(1.0, abs(h_fd))


def test_lambda_monotone_positive():
    cfg = ct.ContactConfig((sd.HalfSpace((0, 0, 0), (0, 0, 1)),),
                           DELTA, 50.0, 0.0, 1e-3)
    xs = np.linspace(0.9 * DELTA, 0.05 * DELTA, 40)
    cs = ct.ContactSet(np.arange(40), np.zeros(40, int), xs,
                       np.tile([0.0, 0.0, 1.0], (40, 1)))
    lam = ct.contact_lambda(cs, cfg)
    assert np.all(lam > 0)
    assert np.all(np.diff(lam) > 0)  # grows as the gap shrinks


def test_surfaces_geometry():
    with pytest.raises(ValueError):
        sd.HalfSpace((0, 0, 1), (0, 0, 2))  # non-unit normal rejected
    hs = sd.HalfSpace((0, 0, 1), (0, 0, 1))
    assert np.isclose(hs.distance(np.array([5.0, 5.0, 3.0])), 2.0)
    np.testing.assert_allclose(hs.gradient(np.zeros(3)), [0, 0, 1])
    assert np.abs(hs.hessian(np.zeros(3))).max() == 0.0

    sph = sd.Sphere((1, 0, 0), 2.0)
    x = np.array([4.0, 0.0, 0.0])
    assert np.isclose(sph.distance(x), 1.0)
    np.testing.assert_allclose(sph.gradient(x), [1, 0, 0])
    # FD check of the sphere hessian
    eps = 1e-6
    hess_fd = np.zeros((3, 3))
    for i in range(3):
        xp, xm = x.copy(), x.copy()
        xp[i] += eps
        xm[i] -= eps
        hess_fd[:, i] = (sph.gradient(xp) - sph.gradient(xm)) / (2 * eps)
    np.testing.assert_allclose(sph.hessian(x), hess_fd, atol=1e-6)


def test_active_set_and_clamp():
    mesh = sd.single_tet(0.05)
    cfg = ct.ContactConfig((sd.HalfSpace((0, 0, 0.0), (0, 0, 1)),),
                           DELTA, 1.0, 0.0, 1e-3)
    q = mesh.rest_positions.reshape(-1).copy()
    q[2::3] += 0.004  # bottom face at z = 0.004 < delta
    cs = ct.active_set(mesh, cfg, q)
    assert cs.count == 3
    assert np.all(cs.gaps > 0)
    # penetration clamps and warns
    q[2::3] -= 0.005
    with pytest.warns(UserWarning):
        cs2 = ct.active_set(mesh, cfg, q)
    assert np.all(cs2.gaps > 0)


def test_contact_force_fd():
    mesh = sd.single_tet(0.05)
    cfg = ct.ContactConfig((sd.HalfSpace((0, 0, 0), (0, 0, 1)),),
                           DELTA, 7.0, 0.0, 1e-3)
    q = mesh.rest_positions.reshape(-1).copy()
    q[2::3] += 0.004

    def energy(qq):
        cs = ct.active_set(mesh, cfg, qq)
        return cfg.kappa * sum(ct.barrier_value(g, cfg.delta) for g in cs.gaps)

    cs = ct.active_set(mesh, cfg, q)
    f = ct.contact_force(mesh, cs, cfg, q)
    eps = 1e-8
    for i in range(q.size):
        qp, qm = q.copy(), q.copy()
        qp[i] += eps
        qm[i] -= eps
        g = (energy(qp) - energy(qm)) / (2 * eps)
        assert abs(f[i] + g) < 1e-4 * max(1.0, abs(g))


def test_contact_stiffness_fd():
    mesh = sd.single_tet(0.05)
    cfg = ct.ContactConfig((sd.HalfSpace((0, 0, 0), (0, 0, 1)),),
                           DELTA, 7.0, 0.0, 1e-3)
    q = mesh.rest_positions.reshape(-1).copy()
    q[2::3] += 0.004
    cs = ct.active_set(mesh, cfg, q)
    # convention: contact_stiffness is d f_c / d q (not its negative)
    k = ct.contact_stiffness(mesh, cs, cfg, q).toarray()
    eps = 1e-7
    kfd = np.zeros_like(k)
    for i in range(q.size):
        qp, qm = q.copy(), q.copy()
        qp[i] += eps
        qm[i] -= eps
        fp = ct.contact_force(mesh, ct.active_set(mesh, cfg, qp), cfg, qp)
        fm = ct.contact_force(mesh, ct.active_set(mesh, cfg, qm), cfg, qm)
        kfd[:, i] = (fp - fm) / (2 * eps)
    assert np.abs(k - kfd).max() < 1e-4 * max(1.0, np.abs(kfd).max())


def test_tangent_frame_orthonormal():
    rng = np.random.default_rng(3)
    for _ in range(50):
        n = rng.standard_normal(3)
        n /= np.linalg.norm(n)
        t1, t2 = ct._tangent_frame(n)
        basis = np.stack([n, t1, t2])
        np.testing.assert_allclose(basis @ basis.T, np.eye(3), atol=1e-12)


def test_s_profile_and_eta():
    eps = 1e-3
    assert ct.s_profile(0.0, eps) == 0.0
    assert np.isclose(ct.s_profile(eps, eps), 1.0)
    assert np.isclose(ct.s_profile(0.5 * eps, eps), 0.75)
    # eta: unit direction scaled by s(|v|), identity past eps
    v = np.array([2 * eps, 0.0])
    np.testing.assert_allclose(ct.eta_smooth(v, eps), v / np.linalg.norm(v))
    v2 = np.array([0.25 * eps, 0.0])
    s = ct.s_profile(0.25 * eps, eps)
    np.testing.assert_allclose(ct.eta_smooth(v2, eps), [s, 0.0])


def test_eta_jacobian_fd():
    eps = 1e-3
    rng = np.random.default_rng(11)
    for scale in (0.3, 0.9, 2.5):
        v = scale * eps * rng.standard_normal(2)
        jac = ct._eta_jacobian(v, eps)
        d = 1e-9
        jfd = np.zeros((2, 2))
        for i in range(2):
            vp, vm = v.copy(), v.copy()
            vp[i] += d
            vm[i] -= d
            jfd[:, i] = (ct.eta_smooth(vp, eps) - ct.eta_smooth(vm, eps)) / (2 * d)
        np.testing.assert_allclose(jac, jfd, atol=1e-4)
    # continuous limit at v = 0
    np.testing.assert_allclose(ct._eta_jacobian(np.zeros(2), eps),
                               (2.0 / eps) * np.eye(2), atol=1e-12)


def _sliding_setup(v_tangent):
    mesh = sd.single_tet(0.05)
    cfg = ct.ContactConfig((sd.HalfSpace((0, 0, 0), (0, 0, 1)),),
                           DELTA, 7.0, 0.4, 1e-3)
    q = mesh.rest_positions.reshape(-1).copy()
    q[2::3] += 0.004
    v = np.zeros_like(q)
    v[0::3] = v_tangent
    cs = ct.active_set(mesh, cfg, q)
    return mesh, cfg, q, v, cs


def test_friction_opposes_and_coulomb_cone():
    mesh, cfg, q, v, cs = _sliding_setup(0.5)
    ff = ct.friction_force(mesh, cs, cfg, q, v)
    assert np.dot(ff, v) < 0  # dissipative
    lam = ct.contact_lambda(cs, cfg)
    # per-contact cone bound: |f_t| <= mu*lambda (fast sliding -> equality)
    per_vert = ff.reshape(-1, 3)
    for i, vtx in enumerate(cs.vertices):
        ft = np.linalg.norm(per_vert[vtx])
        assert ft <= cfg.mu * lam[i] * (1 + 1e-9)
        assert np.isclose(ft, cfg.mu * lam[i], rtol=1e-9)


def test_friction_vanishes_at_rest():
    mesh, cfg, q, v, cs = _sliding_setup(0.0)
    ff = ct.friction_force(mesh, cs, cfg, q, v)
    assert np.abs(ff).max() == 0.0


def test_friction_mdp_limit():
    # as eps -> 0 the force tends to the maximal dissipation value mu*lambda
    mesh = sd.single_tet(0.05)
    q = mesh.rest_positions.reshape(-1).copy()
    q[2::3] += 0.004
    v = np.zeros_like(q)
    v[0::3] = 1e-4  # slow sliding
    mags = []
    for eps in (1e-2, 1e-3, 1e-4, 1e-5):
        cfg = ct.ContactConfig((sd.HalfSpace((0, 0, 0), (0, 0, 1)),),
                               DELTA, 7.0, 0.4, eps)
        cs = ct.active_set(mesh, cfg, q)
        ff = ct.friction_force(mesh, cs, cfg, q, v)
        lam = ct.contact_lambda(cs, cfg)
        mags.append(np.linalg.norm(ff.reshape(-1, 3)[cs.vertices[0]]) /
                    (cfg.mu * lam[0]))
    assert np.all(np.diff(mags) >= 0)
    assert mags[0] < 0.1 and mags[-1] > 0.999


def test_friction_velocity_jacobian_fd():
    mesh, cfg, q, v, cs = _sliding_setup(0.0007)
    jac = ct.friction_velocity_jacobian(mesh, cs, cfg, q, v).toarray()
    eps = 1e-9
    jfd = np.zeros_like(jac)
    for i in range(v.size):
        vp, vm = v.copy(), v.copy()
        vp[i] += eps
        vm[i] -= eps
        jfd[:, i] = (ct.friction_force(mesh, cs, cfg, q, vp) -
                     ct.friction_force(mesh, cs, cfg, q, vm)) / (2 * eps)
    assert np.abs(jac - jfd).max() < 1e-4 * max(1.0, np.abs(jfd).max())
