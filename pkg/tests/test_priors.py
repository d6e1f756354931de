import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bayesinv._blocks import block_normals
from bayesinv.errors import LevelError, ModelError
from bayesinv.priors import (
    Hyperdensity,
    PriorScheme,
    kl_sigmas,
    project_level,
    read_ensemble_csv,
    sample_gaussian_map,
    sample_hierarchical,
    sample_ito_prior,
    sample_kl,
    sample_quasi_uniform,
    sample_scheme,
    write_ensemble_csv,
)


def test_kl_sigmas_requires_square_summable_decay():
    assert kl_sigmas(3, 1.0).tolist() == [1.0, 0.5, 1 / 3]
    with pytest.raises(ModelError):
        kl_sigmas(3, 0.5)


def test_kl_truncation_structure():
    with pytest.raises(LevelError):
        sample_kl(np.ones(4), 0, 10, 0)
    ens = sample_kl(np.ones(4), 1, 50, 0)
    assert np.all(ens.particles[:, 1:] == 0)
    assert np.all(ens.particles[:, 0] != 0)


def test_kl_variance_and_determinism():
    sig = kl_sigmas(6, 1.0)
    ens = sample_kl(sig, 4, 100_000, 11)
    var = ens.particles.var(axis=0)
    assert np.all(np.abs(var[:4] / sig[:4] ** 2 - 1) < 0.05)
    assert np.all(ens.particles[:, 4:] == 0)
    assert np.array_equal(ens.particles, sample_kl(sig, 4, 100_000, 11).particles)


def test_kl_levels_share_a_skeleton():
    sig = kl_sigmas(8, 1.0)
    lo, hi = sample_kl(sig, 3, 500, 2), sample_kl(sig, 8, 500, 2)
    assert np.array_equal(project_level(hi, 3).particles, lo.particles)


def test_project_level():
    ens = sample_kl(kl_sigmas(6, 1.0), 6, 200, 1)
    assert np.array_equal(project_level(ens, 6).particles, ens.particles)
    p3 = project_level(ens, 3)
    assert np.array_equal(project_level(p3, 3).particles, p3.particles)
    with pytest.raises(LevelError):
        project_level(ens, 7)
    resid = [np.linalg.norm(ens.particles - project_level(ens, n).particles, axis=1) for n in range(1, 7)]
    assert all(np.all(b <= a) for a, b in zip(resid, resid[1:]))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6))
def test_projection_composition(m, n):
    ens = sample_kl(kl_sigmas(6, 1.0), 6, 20, 4)
    both = project_level(project_level(ens, n), m).particles
    assert np.array_equal(both, project_level(ens, min(m, n)).particles)


def test_gaussian_map_interpolates_skeleton():
    fine = sample_gaussian_map("identity", 64, 30, 5, resolution=64)
    coarse = sample_gaussian_map("identity", 8, 30, 5, resolution=64)
    knots = np.arange(0, 65, 8)
    assert np.array_equal(coarse.particles[:, knots], fine.particles[:, knots])
    assert np.all(sample_gaussian_map("clip", 8, 30, 5, resolution=64).particles <= 1.0)
    with pytest.raises(LevelError):
        sample_gaussian_map("identity", 3, 5, 0, resolution=64)


def test_gaussian_map_refinement_median_decreases():
    meds = []
    for n in (4, 8, 16, 32):
        gaps = []
        for seed in range(100):
            a = sample_gaussian_map("identity", n, 1, seed, resolution=256).particles[0]
            b = sample_gaussian_map("identity", 2 * n, 1, seed, resolution=256).particles[0]
            gaps.append(np.max(np.abs(a - b)))
        meds.append(np.median(gaps))
    assert all(b < a for a, b in zip(meds, meds[1:]))


def test_ito_prior_constant_integrands():
    B = sample_gaussian_map("identity", 32, 40, 3, resolution=32).particles
    X = sample_ito_prior("const:1", 32, 40, 3, resolution=32).particles
    assert np.all(X[:, 0] == 0)
    # the telescoping sum reproduces B up to cumulative-sum rounding
    assert np.max(np.abs(X - B)) < 1e-12
    c = 1.7
    Xc = sample_ito_prior(f"const:{c}", 16, 100_000, 8, resolution=16).particles
    assert abs(Xc[:, -1].var() / (c * c) - 1) < 0.05


def test_ito_sin_integrand_starts_at_zero():
    X = sample_ito_prior("sin_b", 8, 20, 1, resolution=64).particles
    assert np.all(X[:, 0] == 0)


def test_hierarchical_spikes():
    sd = kl_sigmas(4, 1.0)
    one = sample_hierarchical(sd, Hyperdensity.spike(1.0), 300, 6)
    Z = block_normals(6, 300, 4) * sd
    assert np.array_equal(one.particles, Z)
    zero = sample_hierarchical(sd, Hyperdensity.spike(0.0), 300, 6)
    assert np.all(zero.particles == 0)


def test_hierarchical_factorisation_and_moments():
    sd = kl_sigmas(3, 1.0)
    hyper = Hyperdensity(np.array([0.0, 0.5, 1.0, 2.0]), np.array([0.4, 1.0, 0.3]))
    ens = sample_hierarchical(sd, hyper, 100_000, 2)
    Z = block_normals(2, 100_000, 3) * sd
    assert np.array_equal(ens.particles, ens.hyper[:, None] * Z)
    second = (ens.particles**2).mean(axis=0)
    assert np.all(np.abs(second / (sd**2 * hyper.moment(2)) - 1) < 0.05)


def test_hyperdensity_validation():
    with pytest.raises(ModelError):
        Hyperdensity(np.array([0.0, 1.0]), np.array([0.0]))
    with pytest.raises(ModelError):
        Hyperdensity(np.array([0.0, 1.0]), np.array([2.0]))


def test_quasi_uniform():
    ens = sample_quasi_uniform("uniform", 1, 10_000)
    u = np.sort(ens.particles[:, 0])
    ecdf_hi = np.arange(1, u.size + 1) / u.size
    assert max(np.max(ecdf_hi - u), np.max(u - (ecdf_hi - 1 / u.size))) < 0.01
    g = sample_quasi_uniform("gaussian", 3, 4096)
    assert np.all(np.abs(g.particles.mean(axis=0)) < 3 / np.sqrt(4096))
    assert np.array_equal(g.particles, sample_quasi_uniform("gaussian", 3, 4096).particles)


@pytest.mark.parametrize("scheme", [
    PriorScheme("kl_truncation", 1, {"dim": 5}),
    PriorScheme("gaussian_map", 1, {"f": "square", "resolution": 16}),
    PriorScheme("ito_prior", 1, {"integrand": "sin_b", "resolution": 16}),
    PriorScheme("hierarchical", 1, {"dim": 5, "edges": [0.0, 1.0, 2.0], "values": [0.5, 0.5]}),
    PriorScheme("quasi_uniform", 1, {"dim": 2}),
])
def test_every_sampler_is_deterministic(scheme):
    a = sample_scheme(scheme, 4, 50, 9)
    b = sample_scheme(scheme, 4, 50, 9)
    assert np.array_equal(a.particles, b.particles)
    assert a.id == b.id


def test_ensemble_csv_round_trip(tmp_path):
    ens = sample_kl(kl_sigmas(5, 1.3), 5, 40, 0)
    p = tmp_path / "ens.csv"
    write_ensemble_csv(ens, p)
    back = read_ensemble_csv(p, ens.scheme, ens.level, ens.seed)
    assert np.array_equal(back.particles, ens.particles)
    assert back.id == ens.id


def test_scheme_level_validation():
    with pytest.raises(LevelError):
        PriorScheme("kl_truncation", 0)
    with pytest.raises(ModelError):
        PriorScheme("besov")
