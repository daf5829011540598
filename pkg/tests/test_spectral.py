import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from npcorner.exceptions import ConfigError, DomainError, NearSingular, WindowTooSmall
from npcorner.geometry import build_mesh, builtin_disk, builtin_droplet, curve_from_config
from npcorner.operators import (BoundaryOperators, assemble_K, assemble_Kstar, assemble_S,
                                eprime_inner, equilibrium_density)
from npcorner.spectral import (EigenResolvent, Polarizability, SingularExponentFit,
                               density_from_polarizability, detect_eigenvalues, essential_radius,
                               exponent_fit, limit_polarizability_sweep, mobius_limit,
                               polarizability, reflection_ratio, richardson, richardson_weights,
                               spectral_density)
from npcorner.symbol import mu_continued

PI = math.pi
ALPHA = 2 * PI / 7


@pytest.fixture(scope="module")
def disk():
    mesh = build_mesh(builtin_disk(), 8, 0, 16)
    return mesh, assemble_K(mesh)


@pytest.fixture(scope="module")
def droplet():
    mesh = build_mesh(builtin_droplet(), 8, 10, 16)
    return mesh, assemble_K(mesh)


@pytest.fixture(scope="module")
def droplet_levels():
    out = []
    for level in (10, 11, 12):
        mesh = build_mesh(builtin_droplet(), 8, level, 16)
        K = assemble_K(mesh)
        out.append((mesh, K, assemble_S(mesh)))
    return out


@pytest.mark.parametrize("z", [3, 1 + 1j, 0.5 + 0.2j, -2 - 0.1j])
def test_disk_polarizability(disk, z):
    om = polarizability(*disk, z).omega
    np.testing.assert_allclose(om, -2 / z * np.eye(2), rtol=1e-10, atol=1e-12)


def test_polarizability_is_scale_invariant():
    pts = [[0, 0], [1, 0], [0.3, 0.8], [0, 0]]
    vals = []
    for scale in (0.1, 0.2):
        spec = curve_from_config({"pieces": [{"polyline": pts}], "scale": scale})
        mesh = build_mesh(spec, 4, 6, 16)
        vals.append(polarizability(mesh, assemble_K(mesh), 1.3 + 0.2j).omega)
    np.testing.assert_allclose(vals[0], vals[1], rtol=1e-10)


def test_droplet_mirror_symmetry(droplet):
    om = polarizability(*droplet, 0.3 + 0.05j).omega
    assert abs(om[0, 1]) < 1e-8 and abs(om[1, 0]) < 1e-8


def test_resolvent_symmetry(droplet):
    z = 0.4 + 0.3j
    a = polarizability(*droplet, z).omega
    b = polarizability(*droplet, np.conj(z)).omega
    np.testing.assert_allclose(b, np.conj(a), atol=1e-12)


def test_polarizability_near_eigenvalue(droplet):
    with pytest.raises(NearSingular):
        polarizability(*droplet, -1.0)


def test_eigen_resolvent_matches_direct_solve(droplet):
    mesh, K = droplet
    solver = EigenResolvent(K)
    rng = np.random.default_rng(42)
    left = rng.standard_normal((2, mesh.n))
    right = rng.standard_normal((mesh.n, 3))
    lams = np.array([0.3 + 0.05j, -0.6 + 0.01j, 1.5])
    vals = solver.bilinear(left, right)(lams)
    for lam, v in zip(lams, vals):
        ref = left @ np.linalg.solve(K.entries - lam * np.eye(mesh.n), right)
        np.testing.assert_allclose(v, ref, rtol=1e-9, atol=1e-12)


def test_richardson_weights_values():
    w = richardson_weights([0.08, 0.04, 0.02, 0.01])
    np.testing.assert_allclose(w, [-1 / 21, 2 / 3, -8 / 3, 64 / 21], rtol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=4, max_size=4))
def test_richardson_exact_for_cubics(coef):
    eps = np.array([0.08, 0.04, 0.02, 0.01])
    vals = np.polyval(coef, eps)
    assert richardson(vals, eps) == pytest.approx(coef[-1], abs=1e-9 * (1 + max(map(abs, coef))))


def test_richardson_skips_failed_cells():
    eps = np.array([0.08, 0.04, 0.02, 0.01])
    vals = 2.0 + 3 * eps
    vals[1] = np.nan
    assert richardson(vals, eps) == pytest.approx(2.0)
    vals[2:] = np.nan
    assert np.isnan(richardson(vals, eps))


def test_mobius_limit_recovers_constant():
    q = 0.3 * np.exp(0.7j)
    w = q ** np.arange(4)
    y = (1.5 - 0.2j + 0.8 * w) / (1 + (0.4 + 0.1j) * w)
    assert mobius_limit(y, q) == pytest.approx(1.5 - 0.2j, abs=1e-12)
    with pytest.raises(ConfigError):
        mobius_limit(y[:2], q)


def test_reflection_ratio():
    lam = 0.3 + 0.05j
    q = reflection_ratio(ALPHA, lam)
    mu = mu_continued(ALPHA, lam).mu
    assert q == pytest.approx(4.0 ** mu, rel=1e-10)
    assert abs(q) < 1
    # odd corner modes see -lambda
    assert reflection_ratio(ALPHA, -lam) == pytest.approx(q, rel=1e-10)
    assert reflection_ratio(ALPHA, 3 + 1j) is None


def test_sweep_on_disk(disk):
    mesh, K = disk
    u = np.array([-3.0, -0.5, 0.5, 2.0, 5.0])
    tab = limit_polarizability_sweep(mesh, K, u)
    ext = tab.extrapolated
    for i, uu in enumerate(u):
        # omega(z) = -2/z; cubic Richardson leaves ~ prod(eps) * 2 / |u|^5
        assert ext[i, 0, 0] == pytest.approx(-2 / uu, rel=2e-4 if abs(uu) < 1 else 1e-6)
    assert abs(ext[-1, 0, 0].imag) < 1e-8
    assert tab.flags == ("ok",) * 5
    near = limit_polarizability_sweep(mesh, K, [-1.05, 0.1])
    assert near.flags == ("near-eigenvalue", "near-endpoint")


def test_sweep_herglotz_and_flags(droplet):
    mesh, K = droplet
    u = np.linspace(-1.2, 1.2, 121)
    tab = limit_polarizability_sweep(mesh, K, u)
    for j in range(2):
        assert np.nanmin(tab.raw[..., j, j].imag) >= -1e-10
    assert tab.flags[np.argmin(np.abs(u + 1))] == "near-eigenvalue"
    assert tab.flags[np.argmin(np.abs(u))] == "near-endpoint"
    assert tab.flags[np.argmin(np.abs(u - 5 / 7))] == "near-endpoint"
    assert tab.info["essential_radius"] == pytest.approx(5 / 7)


def test_sweep_validates_ladder(droplet):
    with pytest.raises(ConfigError):
        limit_polarizability_sweep(*droplet, [0.1], eps_ladder=[0.01, 0.02, 0.04])
    with pytest.raises(ConfigError):
        limit_polarizability_sweep(*droplet, [0.1], eps_ladder=[0.04, 0.02])


def test_sweep_csv_is_deterministic(tmp_path, droplet):
    u = np.linspace(-0.5, 0.5, 11)
    paths = []
    for k in range(2):
        tab = limit_polarizability_sweep(*droplet, u)
        p = tmp_path / f"pol{k}.csv"
        tab.to_csv(p, (0, 0))
        paths.append(p)
    text = paths[0].read_text()
    assert text == paths[1].read_text()
    with pytest.raises(ConfigError):
        tab.to_csv(tmp_path / "bad.csv")
    lines = text.splitlines()
    assert lines[0] == "u,eps,re,im"
    assert sum(",inf," in line for line in lines) == sum(f == "ok" for f in tab.flags)


def test_density_vanishes_on_disk():
    est = BoundaryOperators(grading_levels=0).fit("disk")
    g = est.mesh_.points.real
    tab = spectral_density(est.mesh_, est.K_, est.S_, g, g, np.array([-0.8, -0.5, 0.5, 0.8]))
    assert np.max(np.abs(tab.extrapolated)) < 1e-6


def _orthogonal_data(levels):
    rho0 = {id(m): equilibrium_density(assemble_Kstar(m, K), S).values for m, K, S in levels}

    def g(mesh):
        v = mesh.points.real ** 2 - 0.3 * mesh.points.imag
        return v - np.sum(v * rho0[id(mesh)] * mesh.dsigma)

    return g


def test_density_positivity_and_mass(droplet_levels):
    g = _orthogonal_data(droplet_levels)
    u = np.linspace(-1.2, 1.2, 241)
    mesh, K, S = droplet_levels[0]
    tab = spectral_density(mesh, K, S, g, g, u, refinements=droplet_levels[1:])
    rho = 5 / 7
    ok = tab.ok
    inside = ok & (np.abs(u) < rho)
    assert np.min(tab.extrapolated[inside]) >= -1e-8
    # outside the essential interval the density vanishes up to Richardson residue
    assert np.max(np.abs(tab.extrapolated[ok & (np.abs(u) > rho)])) < 1e-6
    mass = np.trapezoid(np.where(ok, tab.extrapolated, 0.0), u)
    norm = eprime_inner(S, g(mesh), g(mesh)).real
    assert 0 < mass <= norm


def test_density_needs_callables_for_refinements(droplet_levels):
    mesh, K, S = droplet_levels[0]
    with pytest.raises(ConfigError):
        spectral_density(mesh, K, S, np.ones(mesh.n), np.ones(mesh.n), [0.3],
                         refinements=droplet_levels[1:])


def test_eigenvalues_of_disk():
    meshes = [build_mesh(builtin_disk(), p, 0, 16) for p in (6, 8, 10)]
    rep = detect_eigenvalues(meshes, [assemble_K(m) for m in meshes])
    assert rep.essential_interval == (0.0, 0.0) or rep.essential_interval == (-0.0, 0.0)
    st = rep.eigenvalues[rep.stable]
    assert np.any(np.abs(st - 1) < 1e-8)
    assert np.all((np.abs(st - 1) < 1e-8) | (np.abs(st) < 1e-8))


def test_eigenvalues_of_droplet_pair_up():
    meshes = [build_mesh(builtin_droplet(), 8, L, 16) for L in (8, 10, 12, 14)]
    rep = detect_eigenvalues(meshes, [assemble_K(m) for m in meshes])
    assert np.any(np.abs(rep.eigenvalues[rep.stable] - 1) < 1e-8)
    assert all(d < 1e-3 for _, d in rep.pairing_defects())
    assert rep.levels == (8, 10, 12, 14)
    with pytest.raises(ConfigError):
        detect_eigenvalues(meshes[:1], [assemble_K(meshes[0])])


@pytest.mark.parametrize("u", [0.35, 0.55])
def test_exponent_fit_matches_symbol(droplet, u):
    fit = exponent_fit(*droplet, u, 0.04)
    assert fit.relative_error < 0.05
    assert fit.mu_oracle == pytest.approx(mu_continued(ALPHA, complex(u, 0.04)).mu)
    assert fit.window[0] >= droplet[0].s_corner.min()


def test_exponent_fit_sign_flip(droplet):
    up = exponent_fit(*droplet, 0.35, 0.04)
    down = exponent_fit(*droplet, 0.35, -0.04)
    assert down.mu_fit == pytest.approx(-np.conj(up.mu_fit), rel=0.05)


def test_exponent_fit_errors(droplet):
    with pytest.raises(DomainError):
        exponent_fit(*droplet, 0.35, 0.0)
    with pytest.raises(WindowTooSmall):
        exponent_fit(*droplet, 0.35, 0.04, window=(1e-3, 1.1e-3))


def test_estimators():
    est = Polarizability(grading_levels=6, n_levels=3)
    assert est.get_params()["n_levels"] == 3
    with pytest.raises(ConfigError):
        est.predict([1.0])
    est.fit(builtin_droplet())
    om = est.predict([3.0, 0.4 + 0.3j])
    assert om.shape == (2, 2, 2)
    tab = est.sweep(np.linspace(-0.4, 0.4, 5))
    u, tau = density_from_polarizability(tab)
    assert np.all(np.diff(u) > 0)
    with pytest.raises(ConfigError):
        Polarizability(grading_levels=6, n_levels=2).fit("droplet")
    fit = SingularExponentFit(grading_levels=10).fit("droplet").predict([0.35 + 0.04j])[0]
    assert fit.relative_error < 0.05


def test_essential_radius():
    assert essential_radius(builtin_droplet()) == pytest.approx(5 / 7)
    assert essential_radius(builtin_disk()) == 0.0
