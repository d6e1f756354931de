"""Generalized Bayes formula as self-normalized importance weights.

The prior ensemble is the proposal and the likelihood ratio ``rho(x, y)`` is
the weight function, so the particle posterior is
``mu(U, y) ~ sum_{x_i in U} rho(x_i, y) / sum_i rho(x_i, y)``.  Everything
is kept in the log domain; the evidence uses a max-shifted sum.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from bayesinv._blocks import map_blocks
from bayesinv.errors import DegenerateEvidence, NumericError
from bayesinv.fspace import CoeffVector, ForwardMap, PathGrid
from bayesinv.priors import PriorEnsemble


@dataclass(frozen=True, eq=False)
class PosteriorParticles:
    """Reweighted prior ensemble.

    ``shifted_weights`` are ``exp(log_weights - max)`` and are the exact
    numerators used by every estimator here; ``norm_weights`` is their
    normalisation.
    """

    ensemble: PriorEnsemble = field(repr=False)
    log_weights: np.ndarray = field(repr=False)
    shifted_weights: np.ndarray = field(repr=False)
    norm_weights: np.ndarray = field(repr=False)
    log_evidence: float
    ess: float
    valid: bool
    diagnostic: str = ""

    @property
    def ensemble_ref(self):
        return self.ensemble.id

    @property
    def M(self):
        return self.log_weights.size

    def summary(self):
        return {
            "ensemble": self.ensemble_ref,
            "level": self.ensemble.level,
            "particles": self.M,
            "log_evidence": self.log_evidence,
            "ess": self.ess,
            "valid": self.valid,
            "diagnostic": self.diagnostic,
        }


def from_log_weights(ens: PriorEnsemble, log_weights, prior_log_weights=None) -> PosteriorParticles:
    """Normalise per-particle log-weights into a posterior.

    ``prior_log_weights`` (normalised, log-sum-exp zero) are added when the
    ensemble itself is an importance sample of the prior.
    """
    lw = np.array(log_weights, dtype=float)
    if lw.shape != (ens.M,):
        raise ValueError(f"expected {ens.M} log-weights, got {lw.shape}")
    if np.any(np.isnan(lw) | (lw == np.inf)):
        raise NumericError("likelihood ratio produced NaN or +inf")
    if prior_log_weights is not None:
        lw = lw + np.asarray(prior_log_weights, dtype=float)
    lw.flags.writeable = False
    m = np.max(lw)
    if not np.isfinite(m):
        zero = np.zeros(ens.M)
        return PosteriorParticles(ens, lw, zero, zero, -np.inf, float("nan"), False,
                                  "every particle has zero likelihood; observation is in the excluded set")
    u = np.exp(lw - m)
    s = np.sum(u)
    log_evidence = float(m + np.log(s))
    if prior_log_weights is None:
        log_evidence -= float(np.log(ens.M))
    w = u / s
    # (sum u)^2 / sum u^2 equals 1 / sum w^2 and is exactly M for uniform weights
    ess_value = float(s * s / np.sum(u * u))
    if not np.isfinite(log_evidence):
        return PosteriorParticles(ens, lw, u, w, log_evidence, ess_value, False, "nonfinite evidence")
    return PosteriorParticles(ens, lw, u, w, log_evidence, min(max(ess_value, 1.0), float(ens.M)), True)


def log_likelihoods(ens: PriorEnsemble, model, L: ForwardMap | None, y, threads=1):
    """Per-particle ``log rho(x_i, y)``, evaluated over fixed particle blocks."""
    if isinstance(y, (CoeffVector, PathGrid)):
        y = y.coeffs if isinstance(y, CoeffVector) else y.values
    log_rho = model.prepare(np.asarray(y, dtype=float))
    X = ens.particles

    def block(sl):
        LX = X[sl] if L is None else L.apply_array(X[sl])
        return np.asarray(log_rho(LX), dtype=float)

    return map_blocks(block, ens.M, threads)


def compute_posterior(ens: PriorEnsemble, model, L: ForwardMap | None, y, threads=1,
                      prior_log_weights=None) -> PosteriorParticles:
    """Particle posterior for observation ``y``; ``L=None`` means identity.

    Never raises for an all-excluded observation: such posteriors come back
    with ``valid=False``.
    """
    return from_log_weights(ens, log_likelihoods(ens, model, L, y, threads), prior_log_weights)


def _require_valid(post):
    if not post.valid:
        raise DegenerateEvidence(post.diagnostic or "posterior is degenerate")


def cm_estimate(post: PosteriorParticles) -> CoeffVector:
    """Conditional-mean estimate ``sum_i w_i x_i``.

    Each coordinate is reduced as a contiguous 1-d sum, the same order
    :func:`posterior_functional` uses, so coordinate functionals agree
    bit-for-bit.
    """
    _require_valid(post)
    u = post.shifted_weights
    Xt = np.ascontiguousarray(post.ensemble.particles.T)
    return CoeffVector(post.ensemble.basis_id, np.sum(Xt * u, axis=1) / np.sum(u))


def posterior_probability(post: PosteriorParticles, predicate) -> float:
    """Posterior mass of the set ``{x : predicate(x)}``.

    ``predicate`` maps the (M, dim) particle array to a boolean mask.
    """
    _require_valid(post)
    mask = np.asarray(predicate(post.ensemble.particles), dtype=bool)
    u = post.shifted_weights
    return float(np.sum(np.where(mask, u, 0.0)) / np.sum(u))


def posterior_functional(post: PosteriorParticles, g) -> float:
    """``sum_i w_i g(x_i)`` for ``g`` mapping the particle array to M values."""
    _require_valid(post)
    vals = np.asarray(g(post.ensemble.particles), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise NumericError("functional is not finite on every particle")
    u = post.shifted_weights
    return float(np.sum(u * vals) / np.sum(u))


def prior_average(ens: PriorEnsemble, g) -> float:
    return float(np.mean(np.asarray(g(ens.particles), dtype=float)))


def ess(post: PosteriorParticles) -> float:
    """Effective sample size ``1 / sum w_i^2``."""
    _require_valid(post)
    return post.ess


def pointwise(predicate):
    """Lift a predicate on single :class:`CoeffVector` values to particle arrays."""

    def mask(X, basis_id="coeff"):
        return np.array([bool(predicate(CoeffVector(basis_id, row))) for row in X])

    return mask
