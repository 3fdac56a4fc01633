from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hamlag.ambient import WarpProfile, make_flat_cn, make_sphere
from hamlag.errors import ChartError, DimensionError
from hamlag.lagrangian import LagrangianRep, induced_geometry, realize, sigma_form, volume


@pytest.mark.parametrize("r", [0.5, 1.0, 1.5])
def test_circle_volume_and_curvature(flat1, r):
    rep = LagrangianRep.standard(flat1, [r])
    assert abs(volume(rep) - 2 * np.pi * r) < 1e-12
    geo = induced_geometry(rep)
    assert np.allclose(geo.metric[:, 0, 0], r * r, atol=1e-13)
    assert np.allclose(geo.mean_curvature_norm(), 1.0 / r, atol=1e-12)


def test_torus_volume(torus):
    assert abs(volume(torus) - 8 * np.pi**2) < 1e-10


@pytest.mark.parametrize("z0", [0.0, 0.5, -0.3])
def test_latitude_volume_and_curvature(sphere_so2, z0):
    rep = LagrangianRep.standard(sphere_so2, [z0])
    assert abs(volume(rep) - 2 * np.pi * np.sqrt(1 - z0 * z0)) < 1e-12
    geo = induced_geometry(rep)
    assert np.allclose(geo.mean_curvature_norm(), abs(z0) / np.sqrt(1 - z0 * z0), atol=1e-12)


def test_homothety_scales_volume(sphere_so3):
    from hamlag.ambient import homothety_family

    model = sphere_so3.with_family(homothety_family(sphere_so3))
    rep = LagrangianRep.standard(model, [0.0])
    for t in (0.1, 0.3):
        assert abs(volume(rep, t) - np.sqrt(1 - 2 * t) * 2 * np.pi) < 1e-12


def test_harmonic_part_shifts_level(flat2):
    rep = LagrangianRep.standard(flat2, [1.0, 2.0], harmonic_part=[0.1, -0.2])
    emb = realize(rep)
    assert np.allclose(emb.points[:, 0], 0.6, atol=1e-14)
    assert np.allclose(emb.points[:, 1], 1.8, atol=1e-14)


def perturbed(rep, rng, amp=0.02, modes=8):
    h = np.zeros(rep.basis.size)
    h[:modes] = amp * rng.standard_normal(modes)
    return rep.with_h(h)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000), which=st.sampled_from(["circle", "torus", "latitude", "warped"]))
def test_graphs_are_lagrangian(seed, which):
    rng = np.random.default_rng(seed)
    rep = {
        "circle": lambda: LagrangianRep.standard(make_flat_cn(1), [1.0], cutoff=8),
        "torus": lambda: LagrangianRep.standard(make_flat_cn(2), [1.0, 2.0], cutoff=4),
        "latitude": lambda: LagrangianRep.standard(make_sphere(), [0.3], cutoff=8),
        "warped": lambda: LagrangianRep.standard(make_sphere(WarpProfile("bulge")), [0.3], cutoff=8),
    }[which]()
    geo = induced_geometry(perturbed(rep, rng), 0.2 if which == "warped" else 0.0)
    omega = np.einsum("pai,ij,pbj->pab", geo.tangents, rep.ambient.omega, geo.tangents)
    assert np.max(np.abs(omega)) < 1e-12
    # normals are dual to the tangents under omega
    dual = np.einsum("pbi,ij,paj->pab", geo.normals, rep.ambient.omega, geo.tangents)
    assert np.allclose(dual, np.eye(rep.d), atol=1e-10)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000), which=st.sampled_from(["torus", "latitude", "warped"]))
def test_sigma_of_hamiltonian_field_is_minus_dH(seed, which):
    """For an ambient function H, the field J grad H has sigma = -d(H|L)."""
    rng = np.random.default_rng(seed)
    if which == "torus":
        rep = LagrangianRep.standard(make_flat_cn(2), [1.0, 2.0], cutoff=4)
    elif which == "latitude":
        rep = LagrangianRep.standard(make_sphere(), [0.3], cutoff=8)
    else:
        rep = LagrangianRep.standard(make_sphere(WarpProfile("bulge")), [0.3], cutoff=8)
    t = 0.3 if which == "warped" else 0.0
    geo = induced_geometry(perturbed(rep, rng), t)
    D = rep.ambient.dim
    a = rng.standard_normal(D)
    b = rng.standard_normal(D)

    def dH(x):  # H(x) = sin(a.x) + (b.x)^2
        return np.cos(x @ a)[:, None] * a + 2 * (x @ b)[:, None] * b

    grad = np.linalg.solve(geo.G, dH(geo.points)[..., None])[..., 0]
    X = np.einsum("pij,pj->pi", geo.J, grad)
    sigma = sigma_form(X, geo)
    dH_tangent = np.einsum("pi,pai->pa", dH(geo.points), geo.tangents)
    assert np.allclose(sigma, -dH_tangent, atol=1e-10)


def test_round_trip_through_dict(flat2, rng):
    rep = perturbed(LagrangianRep.standard(flat2, [1.0, 2.0], harmonic_part=[0.05, 0.0]), rng)
    again = LagrangianRep.from_dict(flat2, rep.to_dict())
    assert np.array_equal(again.h, rep.h)
    assert np.array_equal(again.harmonic_part, rep.harmonic_part)
    assert again.cutoff == rep.cutoff


def test_negative_modes_are_folded(flat1):
    a = LagrangianRep.from_dict(flat1, {"base_point": [1.0], "h": [{"k": [-2], "cos": 0.1, "sin": 0.2}]}, cutoff=4)
    b = LagrangianRep.from_dict(flat1, {"base_point": [1.0], "h": [{"k": [2], "cos": 0.1, "sin": -0.2}]}, cutoff=4)
    assert np.array_equal(a.h, b.h)
    with pytest.raises(ValueError):
        LagrangianRep.from_dict(flat1, {"base_point": [1.0], "h": [{"k": [9], "cos": 0.1}]}, cutoff=4)


def test_zero_potential(flat1):
    rep = LagrangianRep.from_dict(flat1, {"base_point": [1.0], "h": "zero"})
    assert not np.any(rep.h)
    assert rep.potential.sup() == 0.0


def test_immutability(circle):
    with pytest.raises(ValueError):
        circle.h[0] = 1.0
    with pytest.raises(ValueError):
        circle.base_point[0] = 2.0


def test_shape_checks(flat2):
    with pytest.raises(DimensionError):
        LagrangianRep.standard(flat2, [1.0])
    with pytest.raises(DimensionError):
        LagrangianRep(flat2, np.ones(2), np.zeros(2), np.zeros(3), 4)


def test_chart_exit_on_realize(flat1, sphere_so2):
    with pytest.raises(ChartError):
        realize(LagrangianRep.standard(flat1, [1.0], harmonic_part=[-0.5]))
    rep = LagrangianRep.standard(sphere_so2, [0.9], cutoff=4)
    h = np.zeros(rep.basis.size)
    h[0] = 0.2  # d/dtheta of sqrt2 cos(theta) reaches 0.28, past the pole
    with pytest.raises(ChartError):
        induced_geometry(rep.with_h(h))
