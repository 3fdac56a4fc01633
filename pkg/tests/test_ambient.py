from __future__ import annotations

import numpy as np
import pytest
import scipy.linalg

from hamlag.ambient import (
    WarpProfile,
    cheeger_batch,
    cheeger_family,
    cheeger_metric,
    cheeger_submersion,
    homothety_family,
    make_flat_cn,
    make_sphere,
    ricci_tensor,
)
from hamlag.core import retracted_metric
from hamlag.errors import ChartError, DimensionError

from conftest import random_spd


def random_points(model, rng, count=50):
    if model.kind == "flat":
        p = rng.uniform(0.2, 3.0, (count, model.d))
    else:
        p = rng.uniform(-0.9, 0.9, (count, 1))
    theta = rng.uniform(0, 2 * np.pi, (count, model.d))
    return np.concatenate([p, theta], axis=-1)


def cheeger_scalings(G0, E, Q, Gt):
    """Measured scale factors on the vertical eigenvectors and a horizontal basis."""
    S = E @ G0 @ E.T
    lam, xi = scipy.linalg.eigh(S, Q)  # Q-orthonormal eigenvectors of P0
    V = E.T @ xi
    vertical = [(V[:, i] @ Gt @ V[:, i]) / (V[:, i] @ G0 @ V[:, i]) for i in range(len(lam)) if lam[i] > 1e-12]
    H = scipy.linalg.null_space(V.T @ G0)  # g0-orthogonal complement of the orbit
    horizontal = np.abs((H.T @ Gt @ H) - (H.T @ G0 @ H)).max() if H.size else 0.0
    return np.array(vertical), horizontal


@pytest.mark.parametrize("which", ["sphere", "flat2"])
@pytest.mark.parametrize("t", [0.1, 0.5, 1.0])
def test_cheeger_law(which, t, rng):
    model = make_sphere(group="so2") if which == "sphere" else make_flat_cn(2)
    for x in random_points(model, rng, 20):
        G0 = model.base_metric(x)
        E = model.generators(x)
        Gt = cheeger_metric(model, t, x).matrix
        lam = scipy.linalg.eigh(E @ G0 @ E.T, model.action.Q, eigvals_only=True)
        vert, horiz = cheeger_scalings(G0, E, model.action.Q, Gt)
        assert np.allclose(vert, 1.0 / (1.0 + t * lam), atol=1e-10)
        assert horiz < 1e-10


def test_cheeger_law_with_general_Q(rng):
    model = make_sphere(group="so3")
    Q = random_spd(rng, 3)
    t = 0.7
    for x in random_points(model, rng, 10):
        G0, E = model.base_metric(x), model.generators(x)
        Gt = cheeger_batch(G0, E, Q, t)
        S = E @ G0 @ E.T
        lam, xi = scipy.linalg.eigh(S, Q)
        for i in np.nonzero(lam > 1e-10)[0]:
            v = E.T @ xi[:, i]
            assert np.isclose(v @ Gt @ v / (v @ G0 @ v), 1.0 / (1.0 + t * lam[i]), atol=1e-10)


def test_closed_form_agrees_with_eigen_route(rng):
    for model in (make_sphere(group="so3"), make_flat_cn(2)):
        pts = random_points(model, rng, 30)
        Q = random_spd(rng, model.action.group_dim)
        G0, E = model.base_metric(pts), model.generators(pts)
        for t in (0.0, 0.3, 2.0):
            assert np.allclose(cheeger_batch(G0, E, Q, t), cheeger_submersion(G0, E, Q, t), atol=1e-12)


def test_cheeger_rejects_negative_t(flat2):
    with pytest.raises(ValueError):
        cheeger_family(flat2)(np.array([1.0, 1.0, 0.0, 0.0]), -0.1)


def test_cheeger_metric_checks_point(sphere_so2):
    with pytest.raises(DimensionError):
        cheeger_metric(sphere_so2, 0.1, [0.1, 0.2, 0.3])
    with pytest.raises(ChartError):
        cheeger_metric(sphere_so2, 0.1, [1.0, 0.0])


def test_round_christoffel_closed_form(sphere_so2, rng):
    pts = random_points(sphere_so2, rng, 10)
    Gam = sphere_so2.christoffel(pts)
    z = pts[:, 0]
    s2 = 1 - z * z
    # a = 1/s2, b = s2: G^z_zz = a'/2a, G^z_pp = -b'/2a, G^p_zp = b'/2b
    assert np.allclose(Gam[:, 0, 0, 0], z / s2, atol=1e-12)
    assert np.allclose(Gam[:, 0, 1, 1], z * s2, atol=1e-12)
    assert np.allclose(Gam[:, 1, 0, 1], -z / s2, atol=1e-12)
    assert np.allclose(Gam[:, 1, 1, 0], -z / s2, atol=1e-12)


def test_numeric_ricci_of_round_sphere_is_metric(sphere_so2, rng):
    pts = random_points(sphere_so2, rng, 10)
    assert np.allclose(sphere_so2.ricci_numeric(pts), sphere_so2.base_metric(pts), atol=1e-7)


def test_numeric_ricci_of_flat_space_vanishes(flat2, rng):
    pts = random_points(flat2, rng, 10)
    assert np.max(np.abs(flat2.ricci_numeric(pts))) < 1e-8


def test_homothety_keeps_ricci(sphere_so3):
    model = sphere_so3.with_family(homothety_family(sphere_so3))
    x = np.array([0.3, 1.0])
    assert np.allclose(ricci_tensor(model, 0.2, x), sphere_so3.base_metric(x), atol=1e-14)
    assert np.allclose(model.ricci_numeric(x, 0.2), sphere_so3.base_metric(x), atol=1e-7)


def test_homothety_range(sphere_so3):
    fam = homothety_family(sphere_so3)
    x = np.array([0.0, 0.0])
    assert np.allclose(fam(x, 0.25), 0.5 * sphere_so3.base_metric(x))
    with pytest.raises(ValueError):
        fam(x, 0.5)


def test_warped_sphere_is_compatible(rng):
    model = make_sphere(WarpProfile("bulge", 1.5))
    pts = random_points(model, rng, 20)
    for t in (0.0, 0.2, 0.7):
        G = model.metric(pts, t)
        _, R = retracted_metric(model.omega, G)
        assert np.allclose(R, G, atol=1e-12)
        J = model.complex_structure(pts, t)
        assert np.allclose(J @ J, -np.eye(2), atol=1e-12)


def test_warped_ricci_is_gauss_curvature(rng):
    prof = WarpProfile("bulge", 1.0)
    model = make_sphere(prof)
    z = rng.uniform(-0.8, 0.8, 5)
    pts = np.stack([z, np.zeros(5)], axis=-1)
    t = 0.3
    # for dz^2/f^2 + f^2 dphi^2 the Gauss curvature is -(f^2)''/2
    h = 1e-4
    f2 = lambda x: prof.f(x, t) ** 2  # noqa: E731
    K = -(f2(z + h) - 2 * f2(z) + f2(z - h)) / h**2 / 2
    Ric = model.ricci_numeric(pts, t)
    assert np.allclose(Ric, K[:, None, None] * model.metric(pts, t), atol=1e-6)


def test_warp_profile_validation():
    with pytest.raises(ValueError):
        WarpProfile("wobble")
    with pytest.raises(ValueError):
        WarpProfile("bulge", -10.0).check(0.5)


@pytest.mark.parametrize("group", ["so2", "so3"])
def test_sphere_actions_are_hamiltonian(group, rng):
    model = make_sphere(group=group)
    pts = random_points(model, rng, 10)
    X = model.generators(pts)
    h = 1e-6
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        dmu = (model.moment(pts + e) - model.moment(pts - e)) / (2 * h)  # (P, k)
        # omega(X_k, e_i) = d mu_k (e_i)
        lhs = np.einsum("pkj,ji->pki", X, model.omega)[..., i]
        assert np.allclose(lhs, dmu, atol=1e-8)


def test_torus_action_is_hamiltonian(flat2, rng):
    pts = random_points(flat2, rng, 5)
    X = flat2.generators(pts)
    dmu = np.zeros((5, 2, 4))
    dmu[:, 0, 0] = dmu[:, 1, 1] = 1.0
    assert np.allclose(np.einsum("pkj,ji->pki", X, flat2.omega), dmu)


def test_chart_boundary(flat1, sphere_so2):
    with pytest.raises(ChartError):
        flat1.check_points(np.array([[1e-4, 0.0]]))
    with pytest.raises(ChartError):
        sphere_so2.check_points(np.array([[0.9995, 0.0]]))
    sphere_so2.check_points(np.array([[0.99, 0.0]]))


def test_unknown_action(sphere_so2):
    with pytest.raises(ValueError):
        sphere_so2.with_action("torus")
    with pytest.raises(DimensionError):
        make_flat_cn(3)


def test_with_action_accepts_Q(sphere_so3, rng):
    Q = random_spd(rng, 3)
    model = sphere_so3.with_action("so3", Q)
    assert np.allclose(model.action.Q, Q)
    with pytest.raises(ValueError):
        sphere_so3.with_action("so3", -np.eye(3))
