import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bayesinv.convergence import (
    HalfSpace,
    TestDictionary,
    WholeSpace,
    bl_distance,
    continuity_probe,
    convergence_ladder,
    half_space_family,
    hierarchical_reweightings,
    make_dictionary,
    setwise_distance,
    tv_mixture,
    tv_particle,
    ui_profile,
)
from bayesinv.errors import BasisError, DegenerateEvidence, GridError, SupportError
from bayesinv.fspace import ForwardMap
from bayesinv.noise import DominatedModifier, DominatedNoise, GaussianNoise
from bayesinv.posterior import compute_posterior, from_log_weights
from bayesinv.priors import Hyperdensity, PriorEnsemble, PriorScheme, kl_sigmas, sample_kl

SCHEME = PriorScheme("kl_truncation", 1)


def weighted(rows, weights):
    ens = PriorEnsemble(SCHEME, 1, np.asarray(rows, dtype=float), 0)
    with np.errstate(divide="ignore"):
        return from_log_weights(ens, np.log(np.asarray(weights, dtype=float)))


def random_posteriors(seed, k=3):
    ens = sample_kl(kl_sigmas(4, 1.0), 4, 500, seed)
    model = GaussianNoise("coeff", np.ones(4))
    rng = np.random.default_rng(seed)
    return [compute_posterior(ens, model, None, rng.standard_normal(4)) for _ in range(k)]


def test_dictionary_bounds_and_lipschitz():
    w = np.array([1.0, 0.5, 0.25])
    d = make_dictionary(3, 32, seed=1, embedding_weights=w)
    assert np.all(np.sqrt(np.sum(d.alphas**2 / w, axis=1)) <= 1 + 1e-12)
    rng = np.random.default_rng(0)
    X, Y = rng.standard_normal((200, 3)) * 3, rng.standard_normal((200, 3)) * 3
    fx, fy = d.evaluate(X), d.evaluate(Y)
    assert np.all(np.abs(fx) <= 1)
    dist = np.sqrt(np.sum(w * (X - Y) ** 2, axis=1))
    assert np.all(np.abs(fx - fy) <= dist[:, None] + 1e-12)
    with pytest.raises(ValueError):
        TestDictionary(np.array([[2.0]]), np.array([0.0]))


def test_bl_pseudometric():
    d = make_dictionary(4, 64, seed=3)
    for seed in range(5):
        p, q, r = random_posteriors(seed)
        assert bl_distance(p, p, d) == 0.0
        assert bl_distance(p, q, d) == bl_distance(q, p, d)
        assert bl_distance(p, r, d) <= bl_distance(p, q, d) + bl_distance(q, r, d) + 1e-12


def test_bl_point_masses():
    delta = 0.8
    d = TestDictionary(np.array([[1.0], [0.3]]), np.array([0.0, 0.5]))
    zero, shifted = weighted([[0.0]], [1.0]), weighted([[delta]], [1.0])
    assert bl_distance(zero, shifted, d) >= np.tanh(delta) - np.tanh(0.0)


def test_bl_basis_mismatch():
    p = weighted([[0.0]], [1.0])
    with pytest.raises(BasisError):
        bl_distance(p, p, make_dictionary(2))


def test_tv_particle_examples():
    rows = [[0.0], [1.0]]
    assert tv_particle(weighted(rows, [1, 0]), weighted(rows, [0, 1])) == 1.0
    a = weighted(rows, [0.5, 0.5])
    assert tv_particle(a, a) == 0.0
    assert tv_particle(a, weighted(rows, [0.25, 0.75])) == pytest.approx(0.25, abs=1e-15)
    with pytest.raises(SupportError):
        tv_particle(a, weighted([[0.0], [2.0]], [0.5, 0.5]))


def test_tv_mixture_examples():
    edges = np.linspace(0, 1, 5)
    u = Hyperdensity.uniform(0, 1, edges)
    assert tv_mixture(u, u) == 0.0
    assert tv_mixture(Hyperdensity.uniform(0, 0.5, edges), u) == 0.5
    grid = np.array([0.0, 1e-3, 1.0, 1.001])
    s0 = Hyperdensity(grid, np.array([1e3, 0.0, 0.0]))
    s1 = Hyperdensity(grid, np.array([0.0, 0.0, 1e3]))
    assert tv_mixture(s0, s1) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(GridError):
        tv_mixture(u, Hyperdensity.uniform(0, 1, np.linspace(0, 1, 3)))


def test_setwise_distance():
    p, q, _ = random_posteriors(7)
    fam = half_space_family(p)
    assert setwise_distance(p, p, fam) == 0.0
    assert setwise_distance(p, q, [WholeSpace()]) == 0.0
    assert setwise_distance(p, q, fam) <= tv_particle(p, q) + 1e-15
    assert setwise_distance(p, q, fam) <= 2 * tv_particle(p, q)


def test_half_space_family_shape():
    p, _, _ = random_posteriors(1)
    fam = half_space_family(p, coords=[0, 2])
    assert len(fam) == 18
    assert all(isinstance(U, HalfSpace) and U.index in (0, 2) for U in fam)


def test_ui_profile_empty_tail():
    ens = sample_kl(kl_sigmas(3, 1.0), 3, 1000, 0)
    model = GaussianNoise("coeff", np.ones(3))
    y = np.array([0.5, -0.5, 0.0])
    rho_max = np.exp(np.max(compute_posterior(ens, model, None, y).log_weights))
    prof = ui_profile([ens], model, None, y, [2 * rho_max, 3 * rho_max])
    assert np.all(prof == 0)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(0.01, 20), min_size=2, max_size=12, unique=True), st.integers(0, 100))
def test_ui_profile_nonincreasing(cs, seed):
    ens = sample_kl(kl_sigmas(3, 1.0), 3, 300, seed)
    model = GaussianNoise("coeff", np.full(3, 0.3))
    prof = ui_profile([ens], model, None, np.array([1.0, 0.2, -0.4]), sorted(cs))
    assert np.all(np.diff(prof) <= 0)


def _ladder_setup(N=16):
    sig = kl_sigmas(N, 1.0)
    scheme = PriorScheme("kl_truncation", 1, {"sigmas": sig.tolist()})
    L = ForwardMap("diagonal", (1.0 + np.arange(N)) ** -0.5, "coeff", "coeff")
    model = GaussianNoise("coeff", np.full(N, 0.25))
    y = L.apply_array(sig * np.random.default_rng(0).standard_normal(N)) + 0.5 * np.random.default_rng(1).standard_normal(N)
    return scheme, L, model, y


def test_ladder_decreases_and_is_deterministic():
    scheme, L, model, y = _ladder_setup()
    d = make_dictionary(16, 64, seed=5)
    a = convergence_ladder(scheme, [2, 4, 8, 16], 8000, model, L, y, d, seed=3, C_grid=[1.0, 10.0])
    b = convergence_ladder(scheme, [2, 4, 8, 16], 8000, model, L, y, d, seed=3, C_grid=[1.0, 10.0], threads=4)
    assert a.to_dict() == b.to_dict()
    assert a.values[-1] == 0.0 and a.cm_gaps[-1] == 0.0
    assert a.values[2] < a.values[0]
    assert "seed=5" in a.notes


def test_ladder_identical_levels():
    scheme = PriorScheme("quasi_uniform", 1, {"dim": 2, "marginal": "gaussian"})
    model = GaussianNoise("coeff", np.ones(2))
    rep = convergence_ladder(scheme, [1, 2, 3], 512, model, None, np.array([0.3, 0.1]), make_dictionary(2), 0)
    assert rep.values == [0.0, 0.0, 0.0]
    assert rep.cm_gaps == [0.0, 0.0, 0.0]


def test_ladder_degenerate_reference():
    scheme = PriorScheme("kl_truncation", 1, {"dim": 2})
    model = DominatedNoise(GaussianNoise("coeff", np.ones(2)), DominatedModifier.box([0], 0.1))
    with pytest.raises(DegenerateEvidence):
        convergence_ladder(scheme, [1, 2], 200, model, None, np.array([50.0, 0.0]), make_dictionary(2), 0)


def test_probe_gaussian_modulus_shrinks():
    scheme, L, model, y = _ladder_setup(4)
    ens = sample_kl(kl_sigmas(4, 1.0), 4, 5000, 2)
    rows = continuity_probe(model, L, ens, y, np.eye(4)[:2], [0.0, 1e-3, 1.0])
    by = {(r.direction, r.scale): r.modulus for r in rows}
    for k in range(2):
        assert by[(k, 0.0)] == 0.0
        assert by[(k, 1e-3)] < by[(k, 1.0)]


def test_probe_box_boundary_discontinuity():
    model = DominatedNoise(GaussianNoise("coeff", np.ones(1)), DominatedModifier.box([0], 0.5))
    ens = PriorEnsemble(SCHEME, 1, np.linspace(-1, 1, 201)[:, None], 0)
    y = np.array([0.5])
    fam = [HalfSpace(0, 0.0)]
    rows = continuity_probe(model, None, ens, y, [np.array([1.0])], [1e-1, 1e-3, 1e-6], fam)
    mods = [r.modulus for r in rows]
    # pushing y past the box edge excludes the atom at x = 0: the jump persists at every scale
    assert mods[0] > 0
    assert mods[-1] == pytest.approx(mods[0], rel=1e-12)


def test_hierarchical_reweightings_share_atoms():
    edges = np.linspace(0, 2, 11)
    h, hn = Hyperdensity.uniform(0.4, 1.6, edges), Hyperdensity.uniform(0.4, 1.8, edges)
    model = GaussianNoise("coeff", np.full(3, 4.0))
    a, b = hierarchical_reweightings(kl_sigmas(3, 1.0), hn, h, 4000, 0, model, None, np.zeros(3))
    assert a.ensemble is b.ensemble
    assert abs(np.sum(a.norm_weights) - 1) < 1e-12
    same, _ = hierarchical_reweightings(kl_sigmas(3, 1.0), h, h, 4000, 0, model, None, np.zeros(3))
    assert tv_particle(same, _) == 0.0
    with pytest.raises(GridError):
        hierarchical_reweightings(kl_sigmas(3, 1.0), Hyperdensity.uniform(0, 1, [0, 0.5, 1]), h, 10, 0,
                                  model, None, np.zeros(3))
