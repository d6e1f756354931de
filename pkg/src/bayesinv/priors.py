"""Prior schemes and particle ensembles at nested discretization levels.

All random samplers draw particle blocks from streams derived from
``(seed, block)`` (see :mod:`bayesinv._blocks`), so an ensemble depends only
on its arguments and not on thread counts.  Samplers that take a level reuse
one underlying skeleton (KL coefficients, or a Brownian path on a fine grid)
for every level; ensembles at different levels with the same seed are
therefore coupled.
"""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats
from scipy.stats import qmc

from bayesinv._blocks import block_normals, block_rng, block_slices
from bayesinv.errors import LevelError, ModelError
from bayesinv.fspace import CoeffVector, PathGrid, _frozen


def kl_sigmas(dim, p=1.0):
    """Default standard deviations ``(1 + i) ** -p``, i = 0..dim-1."""
    if p <= 0.5:
        raise ModelError(f"eigendecay p must exceed 1/2 for a square-summable series, got {p}")
    return (1.0 + np.arange(dim)) ** (-float(p))


@dataclass(frozen=True)
class PriorScheme:
    """Declarative prior recipe; ``params`` holds kind-specific settings.

    kinds: ``kl_truncation``, ``gaussian_map``, ``ito_prior``,
    ``hierarchical``, ``quasi_uniform``.
    """

    kind: str
    level: int = 1
    params: dict = field(default_factory=dict, hash=False, compare=False)

    KINDS = ("kl_truncation", "gaussian_map", "ito_prior", "hierarchical", "quasi_uniform")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ModelError(f"unknown prior scheme {self.kind!r}")
        if int(self.level) < 1:
            raise LevelError(f"level must be >= 1, got {self.level}")

    def at_level(self, level):
        return PriorScheme(self.kind, level, self.params)


@dataclass(frozen=True, eq=False)
class PriorEnsemble:
    """Equally weighted particles approximating a prior at one level.

    ``particles`` has shape (M, dim).  Path-valued ensembles also carry the
    common ``times`` grid; hierarchical ensembles record the drawn scale
    ``hyper`` for each particle.
    """

    scheme: PriorScheme
    level: int
    particles: np.ndarray = field(repr=False)
    seed: int | None
    basis_id: str = "coeff"
    times: np.ndarray | None = field(default=None, repr=False)
    hyper: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        P = _frozen(self.particles)
        if P.ndim != 2 or P.shape[0] < 1:
            raise ModelError(f"particles must be a nonempty (M, dim) array, got {P.shape}")
        object.__setattr__(self, "particles", P)
        if self.times is not None:
            object.__setattr__(self, "times", _frozen(self.times))
            if self.times.shape != (P.shape[1],):
                raise ModelError("times grid must match the particle length")
        if self.hyper is not None:
            object.__setattr__(self, "hyper", _frozen(self.hyper))

    @property
    def M(self):
        return self.particles.shape[0]

    @property
    def dim(self):
        return self.particles.shape[1]

    @property
    def id(self):
        """Content-derived identifier; equal ids mean identical atoms."""
        h = hashlib.sha1(self.particles.tobytes())
        h.update(f"{self.basis_id}|{self.M}|{self.dim}".encode())
        return h.hexdigest()[:16]

    def particle(self, i):
        if self.times is not None:
            return PathGrid(self.times, self.particles[i])
        return CoeffVector(self.basis_id, self.particles[i])

    def mean(self):
        return self.particles.mean(axis=0)


# ---------------------------------------------------------------------------
# Karhunen-Loeve truncation and projections


def sample_kl(sigmas, level, M, seed, basis_id="coeff", scheme=None) -> PriorEnsemble:
    """Truncated series ``sum_{i<level} sigma_i xi_i e_i`` in a dimension ``len(sigmas)`` frame.

    All ``len(sigmas)`` standard normals are drawn for every particle and the
    tail is zeroed, so lower levels are exact projections of higher ones.
    """
    sigmas = np.asarray(sigmas, dtype=float)
    N = sigmas.size
    if level < 1:
        raise LevelError("level must be >= 1")
    if level > N:
        raise LevelError(f"level {level} exceeds truncation dimension {N}")
    if M < 1:
        raise ModelError("need at least one particle")
    xi = block_normals(seed, M, N)
    X = xi * sigmas
    X[:, level:] = 0.0
    scheme = scheme or PriorScheme("kl_truncation", level, {"sigmas": sigmas.tolist()})
    return PriorEnsemble(scheme.at_level(level), level, X, seed, basis_id)


def project_level(ens: PriorEnsemble, n: int) -> PriorEnsemble:
    """Zero every coordinate with index >= n (orthogonal projection)."""
    if n < 1 or n > ens.dim:
        raise LevelError(f"projection level {n} outside [1, {ens.dim}]")
    X = np.array(ens.particles)
    X[:, n:] = 0.0
    level = min(n, ens.level)
    return PriorEnsemble(ens.scheme.at_level(level), level, X, ens.seed, ens.basis_id, ens.times, ens.hyper)


# ---------------------------------------------------------------------------
# Path-valued priors built from a shared Brownian skeleton


def _brownian_skeleton(M, seed, resolution, T):
    times = np.linspace(0.0, T, resolution + 1)
    dW = block_normals(seed, M, resolution, stream=1) * np.sqrt(T / resolution)
    B = np.zeros((M, resolution + 1))
    np.cumsum(dW, axis=1, out=B[:, 1:])
    return times, B


def _knots(level, resolution):
    if level < 1 or resolution % level:
        raise LevelError(f"level {level} must divide the skeleton resolution {resolution}")
    return np.arange(0, resolution + 1, resolution // level)


def _interp_rows(times, knot_times, knot_values):
    out = np.empty((knot_values.shape[0], times.size))
    for i, row in enumerate(knot_values):
        out[i] = np.interp(times, knot_times, row)
    return out


GAUSSIAN_MAPS = {
    "identity": lambda t: t,
    "square": lambda t: t * t,
    "clip": lambda t: np.minimum(t, 1.0),
}


def sample_gaussian_map(f, level, M, seed, resolution=256, T=1.0, scheme=None) -> PriorEnsemble:
    """``X_n(t) = f(b_n(t))`` with ``b_n`` the piecewise-linear interpolant of a
    Brownian path at ``level + 1`` equispaced knots.

    Paths are returned on the common fine grid of ``resolution + 1`` points
    shared by all levels; ``level`` must divide ``resolution``.
    """
    fn = GAUSSIAN_MAPS[f] if isinstance(f, str) else f
    times, B = _brownian_skeleton(M, seed, resolution, T)
    k = _knots(level, resolution)
    b_n = _interp_rows(times, times[k], B[:, k])
    scheme = scheme or PriorScheme("gaussian_map", level, {"f": f if isinstance(f, str) else "custom"})
    return PriorEnsemble(scheme.at_level(level), level, fn(b_n), seed, "path", times)


def _integrand(spec):
    if callable(spec):
        return spec
    kind, _, arg = str(spec).partition(":")
    if kind == "const":
        c = float(arg or 1.0)
        return lambda t, b: np.full_like(b, c)
    if kind == "sin_b":
        return lambda t, b: np.sin(b)
    raise ModelError(f"unknown Ito integrand {spec!r}")


def sample_ito_prior(integrand, level, M, seed, resolution=256, T=1.0, scheme=None) -> PriorEnsemble:
    """Left-point sums ``X_n(t_i) = sum_{j<=i} f(t_{j-1}, B_{t_{j-1}}) dB_j``.

    Built-in integrands: ``"const:c"`` and ``"sin_b"`` (``f = sin(B_t)``); a
    callable ``f(t, b)`` acting on column arrays is also accepted.  Sums are
    formed on the level grid and linearly interpolated onto the common fine
    grid.
    """
    fn = _integrand(integrand)
    times, B = _brownian_skeleton(M, seed, resolution, T)
    k = _knots(level, resolution)
    tk, Bk = times[k], B[:, k]
    left = fn(tk[:-1], Bk[:, :-1])
    X = np.zeros_like(Bk)
    np.cumsum(left * np.diff(Bk, axis=1), axis=1, out=X[:, 1:])
    name = integrand if isinstance(integrand, str) else "custom"
    scheme = scheme or PriorScheme("ito_prior", level, {"integrand": name})
    return PriorEnsemble(scheme.at_level(level), level, _interp_rows(times, tk, X), seed, "path", times)


# ---------------------------------------------------------------------------
# Scale mixtures


@dataclass(frozen=True, eq=False)
class Hyperdensity:
    """Piecewise-constant density on cells ``[edges[j], edges[j+1])``.

    ``atom`` marks a point mass: sampling then returns exactly that value,
    while ``edges``/``values`` keep a one-cell stand-in for grid comparisons.
    """

    edges: np.ndarray
    values: np.ndarray
    atom: float | None = None

    def __post_init__(self):
        e, v = _frozen(self.edges), _frozen(self.values)
        if e.ndim != 1 or v.shape != (e.size - 1,) or np.any(np.diff(e) <= 0):
            raise ModelError("hyperdensity needs increasing edges and one value per cell")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ModelError("hyperdensity values must be finite and nonnegative")
        total = float(np.sum(v * np.diff(e)))
        if abs(total - 1.0) > 1e-6:
            raise ModelError(f"hyperdensity integrates to {total:.9f}, not 1")
        object.__setattr__(self, "edges", e)
        object.__setattr__(self, "values", v)

    @classmethod
    def uniform(cls, lo, hi, edges):
        """Uniform density on [lo, hi] expressed on the given cell edges."""
        e = np.asarray(edges, dtype=float)
        v = np.where((e[:-1] >= lo) & (e[1:] <= hi), 1.0 / (hi - lo), 0.0)
        return cls(e, v)

    @classmethod
    def spike(cls, t, width=1e-9):
        """Point mass at ``t`` represented on the cell ``[t, t + width)``."""
        return cls(np.array([t, t + width]), np.array([1.0 / width]), atom=float(t))

    @property
    def masses(self):
        return self.values * np.diff(self.edges)

    def cdf_inverse(self, u):
        if self.atom is not None:
            return np.full(np.shape(u), self.atom)
        cdf = np.r_[0.0, np.cumsum(self.masses)]
        cdf /= cdf[-1]
        return np.interp(u, cdf, self.edges)

    def pdf(self, t):
        j = np.searchsorted(self.edges, t, side="right") - 1
        inside = (j >= 0) & (j < self.values.size)
        return np.where(inside, self.values[np.clip(j, 0, self.values.size - 1)], 0.0)

    def moment(self, k):
        """``E[t**k]`` by exact integration of the piecewise-constant density."""
        if self.atom is not None:
            return float(self.atom**k)
        e = self.edges
        return float(np.sum(self.values * (e[1:] ** (k + 1) - e[:-1] ** (k + 1)) / (k + 1)))


def sample_hierarchical(base_sd, hyper: Hyperdensity, M, seed, basis_id="coeff", level=None,
                        scheme=None) -> PriorEnsemble:
    """``X = t Z`` with ``t`` drawn from ``hyper`` by inverse CDF and
    ``Z ~ N(0, diag(base_sd**2))``; the drawn ``t`` are kept in ``hyper``.

    ``level`` optionally truncates ``Z`` to its first ``level`` coordinates.
    """
    base_sd = np.asarray(base_sd, dtype=float)
    if not hyper.masses.sum() > 0:
        raise ModelError("degenerate hyperdensity")
    N = base_sd.size
    level = N if level is None else level
    if level > N:
        raise LevelError(f"level {level} exceeds dimension {N}")
    Z = block_normals(seed, M, N) * base_sd
    Z[:, level:] = 0.0
    u = np.empty(M)
    for b, sl in enumerate(block_slices(M)):
        u[sl] = block_rng(seed, b, stream=2).uniform(size=sl.stop - sl.start)
    t = hyper.cdf_inverse(u)
    scheme = scheme or PriorScheme("hierarchical", level, {})
    return PriorEnsemble(scheme.at_level(level), level, t[:, None] * Z, seed, basis_id, hyper=t)


# ---------------------------------------------------------------------------
# Quasi-uniform (low-discrepancy) ensembles


def _marginal_ppf(spec, dim):
    kind = spec.get("kind", "uniform") if isinstance(spec, dict) else spec
    if kind == "uniform":
        lo = np.asarray(spec.get("low", 0.0) if isinstance(spec, dict) else 0.0)
        hi = np.asarray(spec.get("high", 1.0) if isinstance(spec, dict) else 1.0)
        return lambda u: lo + (hi - lo) * u
    if kind == "gaussian":
        sd = np.asarray(spec.get("sd", 1.0) if isinstance(spec, dict) else 1.0, dtype=float)
        sd = np.broadcast_to(sd, (dim,))
        return lambda u: stats.norm.ppf(u) * sd
    raise ModelError(f"unknown marginal {kind!r}")


def sample_quasi_uniform(marginal, dim, M, basis_id="coeff", scheme=None) -> PriorEnsemble:
    """Unscrambled Sobol points (origin skipped) mapped through inverse CDFs.

    Deterministic: no seed is involved.
    """
    ppf = _marginal_ppf(marginal, dim)
    engine = qmc.Sobol(d=dim, scramble=False)
    engine.fast_forward(1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        U = engine.random(M)
    scheme = scheme or PriorScheme("quasi_uniform", 1, {"marginal": marginal})
    return PriorEnsemble(scheme, scheme.level, ppf(U), None, basis_id)


# ---------------------------------------------------------------------------
# Generic dispatch used by the harness and the convergence ladder


def sample_scheme(scheme: PriorScheme, level, M, seed) -> PriorEnsemble:
    """Ensemble for ``scheme`` at ``level`` (coupled across levels by ``seed``)."""
    p = scheme.params
    s = scheme.at_level(level)
    if scheme.kind == "kl_truncation":
        sig = np.asarray(p["sigmas"], dtype=float) if "sigmas" in p else kl_sigmas(p["dim"], p.get("p", 1.0))
        return sample_kl(sig, level, M, seed, p.get("basis_id", "coeff"), scheme=s)
    if scheme.kind == "gaussian_map":
        return sample_gaussian_map(p.get("f", "identity"), level, M, seed,
                                   p.get("resolution", 256), p.get("T", 1.0), scheme=s)
    if scheme.kind == "ito_prior":
        return sample_ito_prior(p.get("integrand", "const:1"), level, M, seed,
                                p.get("resolution", 256), p.get("T", 1.0), scheme=s)
    if scheme.kind == "hierarchical":
        sd = np.asarray(p["base_sd"], dtype=float) if "base_sd" in p else kl_sigmas(p["dim"], p.get("p", 1.0))
        hyper = Hyperdensity(np.asarray(p["edges"]), np.asarray(p["values"]))
        return sample_hierarchical(sd, hyper, M, seed, p.get("basis_id", "coeff"), level, scheme=s)
    return sample_quasi_uniform(p.get("marginal", "uniform"), p["dim"], M, p.get("basis_id", "coeff"), scheme=s)


def write_ensemble_csv(ens: PriorEnsemble, path):
    from bayesinv.io import write_matrix_csv

    header = [f"c{j}" for j in range(ens.dim)] if ens.times is None else [f"t{j}" for j in range(ens.dim)]
    write_matrix_csv(path, header, ens.particles)


def read_ensemble_csv(path, scheme: PriorScheme, level, seed=None, basis_id="coeff", times=None):
    from bayesinv.io import read_matrix_csv

    _, X = read_matrix_csv(path)
    return PriorEnsemble(scheme, level, X, seed, basis_id, times)
