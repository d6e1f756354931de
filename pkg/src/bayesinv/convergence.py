"""Empirical checks of posterior convergence and continuity.

Distances are computed between particle measures: bounded-Lipschitz against
a finite random dictionary (a reproducible lower bound on the BL metric),
total variation on a shared atom set, and setwise distances over a finite
family of half-spaces.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from bayesinv.errors import BasisError, DegenerateEvidence, GridError, SupportError
from bayesinv.posterior import (
    PosteriorParticles,
    cm_estimate,
    compute_posterior,
    from_log_weights,
    log_likelihoods,
)
from bayesinv.priors import Hyperdensity, PriorEnsemble, PriorScheme, sample_hierarchical, sample_scheme


@dataclass(frozen=True, eq=False)
class TestDictionary:
    """Functionals ``tanh(<x, alpha_j> + c_j)``, each bounded by 1 and
    1-Lipschitz for the ambient norm ``|x|^2 = sum w_i x_i^2``."""

    __test__ = False  # keep pytest from collecting this class

    alphas: np.ndarray = field(repr=False)
    offsets: np.ndarray = field(repr=False)
    seed: int | None = None
    embedding_weights: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.alphas, dtype=float))
        c = np.asarray(self.offsets, dtype=float).reshape(-1)
        if c.shape != (A.shape[0],):
            raise ValueError("one offset per dictionary entry")
        w = np.ones(A.shape[1]) if self.embedding_weights is None else np.asarray(self.embedding_weights, float)
        dual = np.sqrt(np.sum(A * A / w, axis=1))
        if np.any(dual > 1 + 1e-12) or np.any(np.abs(c) > 1):
            raise ValueError("dictionary entries need |alpha| <= 1 (dual norm) and |c| <= 1")
        object.__setattr__(self, "alphas", A)
        object.__setattr__(self, "offsets", c)
        object.__setattr__(self, "embedding_weights", w)

    @property
    def count(self):
        return self.alphas.shape[0]

    @property
    def dim(self):
        return self.alphas.shape[1]

    def evaluate(self, X):
        """(M, D) matrix of functional values at particle rows ``X``."""
        return np.tanh(np.asarray(X) @ self.alphas.T + self.offsets)


def make_dictionary(dim, count=64, seed=0, embedding_weights=None) -> TestDictionary:
    rng = np.random.default_rng(seed)
    w = np.ones(dim) if embedding_weights is None else np.asarray(embedding_weights, dtype=float)
    g = rng.standard_normal((count, dim))
    g /= np.sqrt(np.sum(g * g / w, axis=1))[:, None]
    radius = rng.uniform(0.0, 1.0, count)
    return TestDictionary(g * radius[:, None], rng.uniform(-1.0, 1.0, count), seed, w)


def _atoms(p):
    if isinstance(p, PosteriorParticles):
        if not p.valid:
            raise DegenerateEvidence(p.diagnostic)
        return p.ensemble.particles, p.shifted_weights, p.ensemble.basis_id
    if isinstance(p, PriorEnsemble):
        return p.particles, None, p.basis_id
    raise TypeError(f"expected a particle measure, got {type(p).__name__}")


def _expect(values, u):
    if u is None:
        return values.mean(axis=0)
    return np.sum(u[:, None] * values, axis=0) / np.sum(u)


def bl_distance(p1, p2, dictionary: TestDictionary) -> float:
    """``max_j |E_1 f_j - E_2 f_j|`` over the dictionary."""
    X1, u1, b1 = _atoms(p1)
    X2, u2, b2 = _atoms(p2)
    if b1 != b2 or X1.shape[1] != X2.shape[1] or X1.shape[1] != dictionary.dim:
        raise BasisError("measures and dictionary must share one basis")
    e1 = _expect(dictionary.evaluate(X1), u1)
    e2 = _expect(dictionary.evaluate(X2), u2)
    return float(np.max(np.abs(e1 - e2)))


def tv_particle(p1: PosteriorParticles, p2: PosteriorParticles) -> float:
    """Total variation ``sum |w - w'| / 2`` of two reweightings of one ensemble."""
    if p1.ensemble is not p2.ensemble and p1.ensemble_ref != p2.ensemble_ref:
        raise SupportError("posteriors live on different prior ensembles")
    return float(0.5 * np.sum(np.abs(p1.norm_weights - p2.norm_weights)))


def tv_mixture(h_n: Hyperdensity, h: Hyperdensity) -> float:
    """``int |lambda_n - lambda| / 2`` on a common cell grid.

    Upper bound for the variation distance of the scale mixtures built from
    the two hyperdensities with a common base law.
    """
    if h_n.edges.shape != h.edges.shape or not np.array_equal(h_n.edges, h.edges):
        raise GridError("hyperdensities are defined on different grids")
    return float(0.5 * np.sum(np.abs(h_n.values - h.values) * np.diff(h.edges)))


def _log_prior_ratio(target: Hyperdensity, proposal: Hyperdensity, t):
    with np.errstate(divide="ignore"):
        lw = np.log(target.pdf(t)) - np.log(proposal.pdf(t))
    m = np.max(lw)
    return lw - (m + np.log(np.sum(np.exp(lw - m))))


def hierarchical_reweightings(base_sd, h_n: Hyperdensity, h: Hyperdensity, M, seed, model, L, y, threads=1):
    """Posteriors under scale mixtures with hyperdensities ``h_n`` and ``h``
    built on one shared skeleton.

    The skeleton draws its scales from the equal mixture of the two
    hyperdensities; each posterior carries the prior importance weights
    ``h_n/q`` or ``h/q``, so the two results are reweightings of the same
    atoms and :func:`tv_particle` applies.
    """
    if not np.array_equal(h_n.edges, h.edges):
        raise GridError("hyperdensities are defined on different grids")
    q = Hyperdensity(h.edges, 0.5 * (h_n.values + h.values))
    ens = sample_hierarchical(base_sd, q, M, seed)
    lw = log_likelihoods(ens, model, L, y, threads)
    p_n = from_log_weights(ens, lw, _log_prior_ratio(h_n, q, ens.hyper))
    p = from_log_weights(ens, lw, _log_prior_ratio(h, q, ens.hyper))
    return p_n, p


@dataclass(frozen=True)
class HalfSpace:
    """The set ``{x : x[index] <= threshold}``."""

    index: int
    threshold: float

    def __call__(self, X):
        return np.asarray(X)[:, self.index] <= self.threshold


class WholeSpace:
    def __call__(self, X):
        return np.ones(np.shape(X)[0], dtype=bool)


def _mass(p, U):
    X, u, _ = _atoms(p)
    mask = np.asarray(U(X), dtype=bool)
    if u is None:
        return float(np.mean(mask))
    return float(np.sum(np.where(mask, u, 0.0)) / np.sum(u))


def setwise_distance(p1, p2, family) -> float:
    """``max_U |p1(U) - p2(U)|`` over a finite set family."""
    _, _, b1 = _atoms(p1)
    _, _, b2 = _atoms(p2)
    if b1 != b2:
        raise BasisError("measures must share one basis")
    return float(max((abs(_mass(p1, U) - _mass(p2, U)) for U in family), default=0.0))


def weighted_quantile(values, weights, qs):
    order = np.argsort(values, kind="stable")
    v, w = values[order], weights[order]
    cum = np.cumsum(w) / np.sum(w)
    idx = np.searchsorted(cum, qs, side="left").clip(0, v.size - 1)
    return v[idx]


def half_space_family(ref, coords=None, quantiles=None):
    """Half-spaces ``{x_i <= q}`` at weighted deciles of ``ref`` per coordinate."""
    X, u, _ = _atoms(ref)
    w = np.ones(X.shape[0]) if u is None else u
    qs = np.arange(1, 10) / 10 if quantiles is None else np.asarray(quantiles)
    coords = range(X.shape[1]) if coords is None else coords
    family = []
    for i in coords:
        for q in weighted_quantile(X[:, i], w, qs):
            family.append(HalfSpace(int(i), float(q)))
    return family


def ui_profile(ensembles, model, L, y, C_grid, threads=1):
    """``sup_n mean(rho * 1{rho > C})`` for each C.

    Tail sums use a fixed summation tree with excluded terms replaced by 0,
    so the profile is nonincreasing in C exactly.
    """
    C = np.asarray(C_grid, dtype=float)
    if np.any(np.diff(C) <= 0):
        raise ValueError("C_grid must be strictly increasing")
    prof = np.zeros(C.size)
    for ens in ensembles:
        rho = np.exp(log_likelihoods(ens, model, L, y, threads))
        for k, c in enumerate(C):
            tail = np.sum(np.where(rho > c, rho, 0.0)) / rho.size
            prof[k] = max(prof[k], tail)
    return prof


@dataclass
class ConvergenceReport:
    levels: list
    metric_name: str
    values: list
    cm_gaps: list
    ui_C: list = field(default_factory=list)
    ui_profile: list = field(default_factory=list)
    degenerate_levels: list = field(default_factory=list)
    log_evidence: list = field(default_factory=list)
    ess: list = field(default_factory=list)
    notes: str = ""

    def rows(self):
        for i, lv in enumerate(self.levels):
            yield (lv, self.metric_name, self.values[i])
            yield (lv, "cm_gap", self.cm_gaps[i])
            if self.ess:
                yield (lv, "ess", self.ess[i])
            if self.log_evidence:
                yield (lv, "log_evidence", self.log_evidence[i])

    def to_dict(self):
        return {
            "levels": list(self.levels),
            "metric": self.metric_name,
            "values": list(self.values),
            "cm_gaps": list(self.cm_gaps),
            "ui_profile": {"C": list(self.ui_C), "tail": list(self.ui_profile)},
            "degenerate_levels": list(self.degenerate_levels),
            "log_evidence": list(self.log_evidence),
            "ess": list(self.ess),
            "notes": self.notes,
        }


def convergence_ladder(scheme: PriorScheme, levels, M, model, L, y, dictionary: TestDictionary, seed,
                       threads=1, C_grid=None, return_posteriors=False):
    """Posteriors at each level from a shared skeleton, compared to the finest.

    The last entry of ``levels`` is the reference.  Degenerate intermediate
    levels are reported with NaN distances; a degenerate reference raises.
    """
    levels = [int(v) for v in levels]
    if not levels or any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("levels must be nonempty and strictly increasing")
    ensembles = [sample_scheme(scheme, lv, M, seed) for lv in levels]
    posts = [compute_posterior(e, model, L, y, threads) for e in ensembles]
    ref = posts[-1]
    if not ref.valid:
        raise DegenerateEvidence(f"reference level {levels[-1]}: {ref.diagnostic}")
    w = dictionary.embedding_weights
    cm_ref = cm_estimate(ref).coeffs
    values, gaps, degenerate = [], [], []
    for lv, p in zip(levels, posts):
        if not p.valid:
            values.append(float("nan"))
            gaps.append(float("nan"))
            degenerate.append(lv)
            continue
        values.append(bl_distance(p, ref, dictionary))
        d = cm_estimate(p).coeffs - cm_ref
        gaps.append(float(np.sqrt(np.sum(w * d * d))))
    report = ConvergenceReport(
        levels, "bl_distance", values, gaps, degenerate_levels=degenerate,
        log_evidence=[p.log_evidence for p in posts],
        ess=[p.ess if p.valid else float("nan") for p in posts],
        notes=f"dictionary seed={dictionary.seed} size={dictionary.count}; reference level={levels[-1]}",
    )
    if C_grid is not None:
        report.ui_C = [float(c) for c in C_grid]
        report.ui_profile = ui_profile(ensembles, model, L, y, C_grid, threads).tolist()
    return (report, posts) if return_posteriors else report


@dataclass(frozen=True)
class ProbeRow:
    direction: int
    scale: float
    modulus: float
    degenerate: bool


def continuity_probe(model, L, ens: PriorEnsemble, y, directions, scales, family=None, threads=1):
    """Setwise modulus ``max_U |mu(U, y + s v) - mu(U, y)|`` per (v, s)."""
    y = np.asarray(y, dtype=float)
    base = compute_posterior(ens, model, L, y, threads)
    if not base.valid:
        raise DegenerateEvidence(f"probe base point: {base.diagnostic}")
    family = half_space_family(base) if family is None else family
    rows = []
    for k, v in enumerate(directions):
        v = np.asarray(v, dtype=float)
        for s in scales:
            p = compute_posterior(ens, model, L, y + float(s) * v, threads)
            if not p.valid:
                rows.append(ProbeRow(k, float(s), float("nan"), True))
                continue
            rows.append(ProbeRow(k, float(s), setwise_distance(base, p, family), False))
    return rows
