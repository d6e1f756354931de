"""Noise models and their log likelihood-ratios.

Each model supplies ``log rho(x, y)``, the log Radon-Nikodym density of the
translated noise law ``mu_{eps + L(x)}`` with respect to a fixed dominating
measure, evaluated at the observation ``y``.  The dominating measure is the
untranslated noise law itself, except for :class:`FiniteDimNoise` which uses
Lebesgue measure.

Models expose two layers:

* module-level functions acting on single :class:`CoeffVector` /
  :class:`PathGrid` arguments, and
* ``model.prepare(y)`` returning a function of a particle batch ``LX`` of
  shape (M, dim) that produces M log-ratios; the posterior engine uses this.

A log-ratio of ``-inf`` is a legal value meaning the particle is excluded.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg
from scipy.special import ndtr

from bayesinv.errors import (
    BasisError,
    DegenerateQVError,
    DegenerateScaleError,
    DomainError,
    ModelError,
    NumericError,
)
from bayesinv.fspace import CoeffVector, PathGrid, _frozen

GAMMA_FLOOR = 1e-12


def _arr(v):
    if isinstance(v, CoeffVector):
        return v.coeffs
    if isinstance(v, PathGrid):
        return v.values
    return np.asarray(v, dtype=float)


def _finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericError("nonfinite input to likelihood ratio")


def _same_basis(*vs):
    ids = {v.basis_id for v in vs if isinstance(v, CoeffVector)}
    if len(ids) > 1:
        raise BasisError(f"basis mismatch: {sorted(ids)}")


def _positive_spectrum(lam):
    lam = _frozen(lam)
    if lam.ndim != 1 or lam.size == 0:
        raise ModelError("eigenvalues must be a nonempty 1-d array")
    if not np.all(np.isfinite(lam)) or np.any(lam <= 0):
        raise ModelError("eigenvalues must be finite and strictly positive")
    return lam


def _gauss_terms(lam, LX, y):
    # same elementwise order as fspace.dual_pairing / cm_norm_sq
    lin = np.sum(y * LX / lam, axis=-1)
    quad = np.sum(LX * LX / lam, axis=-1)
    return lin, quad


# ---------------------------------------------------------------------------
# Gaussian noise in a diagonalising basis


@dataclass(frozen=True, eq=False)
class GaussianNoise:
    """``eps = sum sqrt(lambda_i) xi_i e_i`` with standard normal ``xi_i``."""

    basis_id: str
    eigenvalues: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "eigenvalues", _positive_spectrum(self.eigenvalues))

    @property
    def dim(self):
        return self.eigenvalues.size

    def prepare(self, y):
        y = _arr(y)
        _finite(y)
        lam = self.eigenvalues

        def log_rho(LX):
            lin, quad = _gauss_terms(lam, LX, y)
            return lin - 0.5 * quad

        return log_rho

    def sample(self, seed):
        rng = np.random.default_rng(seed)
        return CoeffVector(self.basis_id, np.sqrt(self.eigenvalues) * rng.standard_normal(self.dim))


def log_rho_gaussian(noise: GaussianNoise, Lx, y) -> float:
    """Cameron-Martin log density ``<y, C^{-1} Lx> - |Lx|_H^2 / 2``."""
    _same_basis(Lx, y)
    a, b = _arr(Lx), _arr(y)
    _finite(a, b)
    if a.shape != (noise.dim,) or b.shape != (noise.dim,):
        raise BasisError(f"expected {noise.dim} coefficients")
    return float(noise.prepare(b)(a))


# ---------------------------------------------------------------------------
# Brownian motion observed on a grid (Gaussian part of the Girsanov example)


def _grid_gauss_prepare(variance_times, y_values):
    """Log-ratio for a Brownian motion run on the clock ``variance_times``.

    ``variance_times[j]`` is the variance at grid point j (j >= 1); the
    covariance is ``min(a_i, a_j)``.  Grid point 0 carries no information.
    """
    a = np.asarray(variance_times, dtype=float)[1:]
    if a.size == 0:
        raise DegenerateQVError("need at least one interior grid point")
    if not np.all(np.isfinite(a)) or a[0] <= 0 or np.any(np.diff(a) <= 0):
        raise DegenerateQVError("time change must be strictly increasing and positive on interior points")
    K = np.minimum.outer(a, a)
    try:
        factor = scipy.linalg.cho_factor(K, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericError(f"covariance factorization failed: {exc}") from exc
    y_int = np.asarray(y_values, dtype=float)[1:]
    _finite(y_int)

    def log_rho(LX):
        LX = np.asarray(LX, dtype=float)
        L_int = LX[..., 1:]
        L2 = np.atleast_2d(L_int)
        W = scipy.linalg.cho_solve(factor, L2.T).T
        lin = np.sum(W * y_int, axis=-1)
        quad = np.sum(L2 * W, axis=-1)
        out = lin - 0.5 * quad
        return out if LX.ndim > 1 else out[0]

    return log_rho


@dataclass(frozen=True, eq=False)
class BrownianNoise:
    """Standard Brownian motion observed at ``times`` (starting at 0)."""

    times: np.ndarray

    def __post_init__(self):
        t = _frozen(self.times)
        if t[0] != 0 or np.any(np.diff(t) <= 0):
            raise DomainError("Brownian grid must start at 0 and increase strictly")
        object.__setattr__(self, "times", t)

    def prepare(self, y):
        return _grid_gauss_prepare(self.times, _arr(y))

    def sample(self, seed):
        rng = np.random.default_rng(seed)
        dt = np.diff(self.times)
        return PathGrid(self.times, np.r_[0.0, np.cumsum(np.sqrt(dt) * rng.standard_normal(dt.size))])


# ---------------------------------------------------------------------------
# Gaussian dominated noise


def _trapz_rows(values, times):
    return np.trapezoid(values, times, axis=-1)


def _girsanov_rows(z, times):
    z = np.asarray(z, dtype=float)
    z2 = z * z
    one_plus = 1.0 + z2
    drift_term = (1.0 - z2) / one_plus**2
    energy = 0.5 * (2.0 * z / one_plus) ** 2
    return np.log1p(z2[..., -1]) - _trapz_rows(drift_term, times) - _trapz_rows(energy, times)


def _check_span(times, T):
    t = np.asarray(times, dtype=float)
    tol = 1e-12 * max(1.0, abs(T))
    if abs(t[0]) > tol or abs(t[-1] - T) > tol:
        raise DomainError(f"path grid spans [{t[0]}, {t[-1]}], expected [0, {T}]")


def girsanov_log_modifier(path: PathGrid, T: float) -> float:
    """Continuous version of the Girsanov density for the drift ``2x/(1+x^2)``.

    The stochastic integral is replaced by its Ito-formula rewriting, so only
    Riemann integrals remain; both are evaluated by the trapezoid rule on
    the path's own grid.
    """
    _check_span(path.times, T)
    return float(_girsanov_rows(path.values, path.times))


@dataclass(frozen=True, eq=False)
class DominatedModifier:
    """Density ``f = d mu_tilde / d mu_eps`` multiplying a Gaussian noise law.

    kinds:
      ``trivial``          f = 1
      ``box_restriction``  noise conditioned on ``lower <= z_i <= upper`` for i in ``index``
      ``girsanov_drift``   drift ``2x/(1+x^2)`` over [0, T] (path observations)
      ``custom``           user ``log_f`` evaluated on rows of ``y - Lx``
    """

    kind: str
    index: tuple = ()
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    T: float | None = None
    log_f: Callable | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind == "box_restriction":
            idx = tuple(int(i) for i in self.index)
            if not idx:
                raise ModelError("box_restriction needs a nonempty coordinate index set")
            lo = np.broadcast_to(np.asarray(self.lower, dtype=float), (len(idx),)).copy()
            hi = np.broadcast_to(np.asarray(self.upper, dtype=float), (len(idx),)).copy()
            if np.any(lo >= hi):
                raise ModelError("box_restriction needs lower < upper")
            object.__setattr__(self, "index", idx)
            object.__setattr__(self, "lower", _frozen(lo))
            object.__setattr__(self, "upper", _frozen(hi))
        elif self.kind == "girsanov_drift":
            if self.T is None or self.T <= 0:
                raise ModelError("girsanov_drift needs T > 0")
        elif self.kind == "custom":
            if self.log_f is None:
                raise ModelError("custom modifier needs log_f")
        elif self.kind != "trivial":
            raise ModelError(f"unknown modifier kind {self.kind!r}")

    @classmethod
    def box(cls, index, bound):
        """Symmetric box ``|z_i| <= bound`` on the given coordinates."""
        if bound <= 0:
            raise ModelError("box bound must be > 0")
        return cls("box_restriction", tuple(index), -bound, bound)

    def log_box_mass(self, noise: GaussianNoise):
        """log mu_eps(K) for the box under the Gaussian spectrum."""
        sd = np.sqrt(noise.eigenvalues[list(self.index)])
        mass = ndtr(self.upper / sd) - ndtr(self.lower / sd)
        if np.any(mass <= 0):
            raise ModelError("box has zero Gaussian mass")
        return float(np.sum(np.log(mass)))

    def bind(self, noise):
        """Return ``log_f`` as a function of rows ``z = y - Lx``."""
        if self.kind == "trivial":
            return lambda z: np.zeros(np.shape(z)[:-1])
        if self.kind == "box_restriction":
            log_mass = self.log_box_mass(noise)
            idx = list(self.index)
            lo, hi = self.lower, self.upper

            def box(z):
                zs = np.asarray(z)[..., idx]
                inside = np.all((zs >= lo) & (zs <= hi), axis=-1)
                return np.where(inside, -log_mass, -np.inf)

            return box
        if self.kind == "girsanov_drift":
            times = noise.times
            _check_span(times, self.T)
            return lambda z: _girsanov_rows(z, times)
        return self.log_f


@dataclass(frozen=True, eq=False)
class DominatedNoise:
    """Gaussian base law (coefficients or Brownian grid) times a modifier."""

    base: GaussianNoise | BrownianNoise
    modifier: DominatedModifier

    def prepare(self, y):
        y = _arr(y)
        gauss = self.base.prepare(y)
        log_f = self.modifier.bind(self.base)

        def log_rho(LX):
            lf = np.asarray(log_f(y - LX), dtype=float)
            if np.any(np.isnan(lf) | (lf == np.inf)):
                raise NumericError("modifier produced a nonfinite value other than -inf")
            g = gauss(LX)
            # excluded patterns stay -inf without touching the Gaussian term
            return np.where(np.isneginf(lf), -np.inf, lf + g)

        return log_rho

    def sample(self, seed, max_tries=100000):
        kind = self.modifier.kind
        if kind == "box_restriction":
            idx = list(self.modifier.index)
            for attempt in range(max_tries):
                z = self.base.sample(np.random.SeedSequence([int(seed), attempt]))
                zs = z.coeffs[idx]
                if np.all((zs >= self.modifier.lower) & (zs <= self.modifier.upper)):
                    return z
            raise NumericError("rejection sampler for box restriction did not terminate")
        if kind == "girsanov_drift":
            return sample_girsanov_noise(self.base.times, seed)
        if kind == "trivial":
            return self.base.sample(seed)
        raise ModelError("no sampler for custom modifiers")


def sample_girsanov_noise(times, seed):
    """Euler-Maruyama path of ``dZ = 2Z/(1+Z^2) dt + dB``, ``Z_0 = 0``.

    This is the law whose density against Wiener measure is the Girsanov
    expression used by :func:`girsanov_log_modifier`.
    """
    rng = np.random.default_rng(seed)
    t = np.asarray(times, dtype=float)
    dt = np.diff(t)
    dB = np.sqrt(dt) * rng.standard_normal(dt.size)
    z = np.zeros(t.size)
    for j in range(dt.size):
        z[j + 1] = z[j] + 2.0 * z[j] / (1.0 + z[j] ** 2) * dt[j] + dB[j]
    return PathGrid(t, z)


def log_rho_dominated(noise, mod: DominatedModifier, Lx, y) -> float:
    """``log f(y - Lx)`` plus the Gaussian log-ratio; ``-inf`` if excluded."""
    _same_basis(Lx, y)
    a, b = _arr(Lx), _arr(y)
    _finite(a, b)
    return float(DominatedNoise(noise, mod).prepare(b)(a[None, :])[0])


# ---------------------------------------------------------------------------
# Spherically invariant noise gamma * Z


@dataclass(frozen=True, eq=False)
class SphericalNoise:
    """``eps = gamma Z`` with Gaussian ``Z`` and an independent scale ``gamma``.

    ``gamma_law_label`` only documents how synthetic scales are drawn; the
    posterior never depends on it.
    """

    base: GaussianNoise
    n_estimator_terms: int
    gamma_law_label: str = "unspecified"

    def __post_init__(self):
        n = int(self.n_estimator_terms)
        if n < 1 or n > self.base.dim:
            raise ModelError(f"n_estimator_terms must lie in [1, {self.base.dim}], got {n}")
        object.__setattr__(self, "n_estimator_terms", n)

    @property
    def basis_id(self):
        return self.base.basis_id

    def prepare(self, y):
        y = _arr(y)
        gamma_hat = _estimate_gamma_array(y, self)
        if gamma_hat < GAMMA_FLOOR:
            raise DegenerateScaleError(f"estimated scale {gamma_hat:.3g} is below {GAMMA_FLOOR}")
        lam = self.base.eigenvalues
        g2 = gamma_hat * gamma_hat

        def log_rho(LX):
            lin, quad = _gauss_terms(lam, LX, y)
            return lin / g2 - quad / (2.0 * g2)

        return log_rho

    def sample(self, seed, gamma=None):
        """Draw ``gamma * Z``; ``gamma`` defaults to a law parsed from the label."""
        rng = np.random.default_rng(seed)
        if gamma is None:
            gamma = _draw_gamma(self.gamma_law_label, rng)
        z = np.sqrt(self.base.eigenvalues) * rng.standard_normal(self.base.dim)
        return CoeffVector(self.basis_id, gamma * z)


def _draw_gamma(label, rng):
    kind, _, arg = label.partition(":")
    if kind == "fixed":
        return float(arg)
    if kind == "lognormal":
        return float(np.exp(float(arg or 0.5) * rng.standard_normal()))
    if kind == "uniform":
        lo, hi = (float(s) for s in arg.split(","))
        return float(rng.uniform(lo, hi))
    raise ModelError(f"cannot sample scale law {label!r}; pass gamma explicitly")


def _scaled_coords(y, noise):
    n = noise.n_estimator_terms
    y = np.asarray(y, dtype=float)[:n]
    _finite(y)
    return y / np.sqrt(noise.base.eigenvalues[:n])


def _estimate_gamma_array(y, noise):
    s = _scaled_coords(y, noise)
    return float(np.sqrt(np.mean(s * s)))


def estimate_gamma(y, noise: SphericalNoise) -> float:
    """Scale estimate from the first ``n`` whitened coordinates of one sample."""
    return _estimate_gamma_array(_arr(y), noise)


def gamma_standard_error(y, noise: SphericalNoise) -> float:
    """Delta-method standard error of :func:`estimate_gamma`."""
    s2 = _scaled_coords(_arr(y), noise) ** 2
    g = np.sqrt(np.mean(s2))
    if g == 0 or s2.size < 2:
        return float("nan")
    return float(np.std(s2, ddof=1) / np.sqrt(s2.size) / (2.0 * g))


def log_rho_spherical(noise: SphericalNoise, Lx, y, gamma_hat: float) -> float:
    if not np.isfinite(gamma_hat) or gamma_hat < GAMMA_FLOOR:
        raise DegenerateScaleError(f"gamma_hat={gamma_hat!r}: the scale limit vanishes at this sample")
    _same_basis(Lx, y)
    a, b = _arr(Lx), _arr(y)
    _finite(a, b)
    lin, quad = _gauss_terms(noise.base.eigenvalues, a, b)
    g2 = gamma_hat * gamma_hat
    return float(lin / g2 - quad / (2.0 * g2))


# ---------------------------------------------------------------------------
# Decomposable noise with independent coordinates


@dataclass(frozen=True, eq=False)
class CoordinateDensity:
    """One-dimensional a.e. positive density for a single coordinate.

    family: ``laplace`` (scale b), ``gaussian`` (sd sigma), ``cauchy``
    (scale s) or ``tabulated`` (``grid`` and ``log_values``, linear
    interpolation of the density, zero outside the grid).
    """

    family: str
    scale: float = 1.0
    grid: np.ndarray | None = field(default=None, repr=False)
    log_values: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.family in ("laplace", "gaussian", "cauchy"):
            if not np.isfinite(self.scale) or self.scale <= 0:
                raise ModelError(f"{self.family} scale must be > 0")
        elif self.family == "tabulated":
            g = _frozen(self.grid)
            lv = _frozen(self.log_values)
            if g.ndim != 1 or g.shape != lv.shape or g.size < 2 or np.any(np.diff(g) <= 0):
                raise ModelError("tabulated density needs an increasing grid and matching log values")
            total = np.trapezoid(np.exp(lv), g)
            if abs(total - 1.0) > 1e-6:
                raise ModelError(f"tabulated density integrates to {total:.9f}, not 1")
            object.__setattr__(self, "grid", g)
            object.__setattr__(self, "log_values", lv)
        else:
            raise ModelError(f"unknown coordinate family {self.family!r}")

    @property
    def key(self):
        if self.family == "tabulated":
            return ("tabulated", id(self))
        return (self.family, float(self.scale))

    def logpdf(self, t):
        t = np.asarray(t, dtype=float)
        s = self.scale
        if self.family == "laplace":
            return -np.log(2 * s) - np.abs(t) / s
        if self.family == "gaussian":
            return -0.5 * np.log(2 * np.pi * s * s) - 0.5 * (t / s) ** 2
        if self.family == "cauchy":
            return -np.log(np.pi * s) - np.log1p((t / s) ** 2)
        dens = np.interp(t, self.grid, np.exp(self.log_values), left=0.0, right=0.0)
        with np.errstate(divide="ignore"):
            return np.log(dens)

    def log_ratio(self, y, a):
        """``log rho(y - a) - log rho(y)`` in a cancellation-free form."""
        s = self.scale
        if self.family == "laplace":
            return _laplace_terms(s, a, y)
        if self.family == "gaussian":
            return (y * a - 0.5 * a * a) / (s * s)
        if self.family == "cauchy":
            return np.log1p((y / s) ** 2) - np.log1p(((y - a) / s) ** 2)
        den = self.logpdf(y)
        if np.any(np.isneginf(den)):
            raise NumericError("observation coordinate has zero tabulated density")
        return self.logpdf(y - a) - den

    def variance(self):
        if self.family == "laplace":
            return 2 * self.scale**2
        if self.family == "gaussian":
            return self.scale**2
        if self.family == "cauchy":
            return float("inf")
        p = np.exp(self.log_values)
        m = np.trapezoid(self.grid * p, self.grid)
        return float(np.trapezoid((self.grid - m) ** 2 * p, self.grid))

    def sample(self, rng, size):
        s = self.scale
        if self.family == "laplace":
            return rng.laplace(0.0, s, size)
        if self.family == "gaussian":
            return s * rng.standard_normal(size)
        if self.family == "cauchy":
            return s * rng.standard_cauchy(size)
        p = np.exp(self.log_values)
        cdf = np.r_[0.0, np.cumsum(0.5 * (p[1:] + p[:-1]) * np.diff(self.grid))]
        return np.interp(rng.uniform(0, cdf[-1], size), cdf, self.grid)


@dataclass(frozen=True, eq=False)
class DecomposableNoise:
    """``eps = sum eps_i f_i`` with independent coordinates of known density."""

    basis_id: str
    coordinate_densities: tuple

    def __post_init__(self):
        dens = tuple(self.coordinate_densities)
        if not dens:
            raise ModelError("decomposable noise needs at least one coordinate")
        object.__setattr__(self, "coordinate_densities", dens)
        groups = {}
        for i, d in enumerate(dens):
            groups.setdefault(d.key, (d, []))[1].append(i)
        object.__setattr__(self, "_groups", [(d, np.array(ix)) for d, ix in groups.values()])

    @classmethod
    def laplace(cls, basis_id, dim, b):
        d = CoordinateDensity("laplace", b)
        return cls(basis_id, (d,) * dim)

    @classmethod
    def gaussian(cls, basis_id, sigmas):
        return cls(basis_id, tuple(CoordinateDensity("gaussian", float(s)) for s in sigmas))

    @property
    def dim(self):
        return len(self.coordinate_densities)

    def prepare(self, y):
        y = _arr(y)
        _finite(y)
        if y.shape != (self.dim,):
            raise BasisError(f"expected {self.dim} observation coefficients")
        for d, ix in self._groups:
            if d.family != "tabulated" and np.any(np.isneginf(d.logpdf(y[ix]))):
                raise NumericError("built-in density vanished at the observation")

        def log_rho(LX):
            LX = np.asarray(LX, dtype=float)
            total = np.zeros(LX.shape[:-1])
            for d, ix in self._groups:
                a = LX[..., ix]
                active = a != 0
                if not np.any(active):
                    continue
                with np.errstate(invalid="ignore"):
                    terms = np.where(active, d.log_ratio(y[ix], a), 0.0)
                total = total + np.sum(terms, axis=-1)
            return total

        return log_rho

    def sample(self, seed):
        rng = np.random.default_rng(seed)
        out = np.empty(self.dim)
        for d, ix in self._groups:
            out[ix] = d.sample(rng, ix.size)
        return CoeffVector(self.basis_id, out)


def log_rho_decomposable(noise: DecomposableNoise, Lx, y) -> float:
    """Product-form log density over the coordinates where ``Lx`` is nonzero."""
    _same_basis(Lx, y)
    a, b = _arr(Lx), _arr(y)
    _finite(a, b)
    return float(noise.prepare(b)(a[None, :])[0])


def _laplace_terms(b, a, y):
    # |y| - |y - a| lies in [-|a|, |a|]; the clamp only removes rounding excursions
    abs_a = np.abs(a)
    return np.clip(np.abs(y) - np.abs(y - a), -abs_a, abs_a) / b


def laplace_fourier_terms(b, Lx_hat, y_hat):
    """Per-coordinate terms ``(|y_k| - |y_k - Lx_k|) / b``."""
    if not b > 0:
        raise ModelError("Laplace scale b must be > 0")
    _same_basis(Lx_hat, y_hat)
    a, y = _arr(Lx_hat), _arr(y_hat)
    if a.shape != y.shape:
        raise BasisError(f"length mismatch {a.shape} vs {y.shape}")
    _finite(a, y)
    return _laplace_terms(b, a, y)


def log_rho_laplace_fourier(b: float, Lx_hat, y_hat) -> float:
    """Log density of a translate of Laplace coefficient noise."""
    return float(np.sum(laplace_fourier_terms(b, Lx_hat, y_hat)))


def char_fn_laplace(b, phi_hat):
    """Partial product ``prod_k 1 / (1 + b^2 phi_k^2)`` over the given coefficients."""
    p = _arr(phi_hat)
    return float(np.exp(-np.sum(np.log1p((b * p) ** 2))))


def char_fn_decomposable(noise: DecomposableNoise, phi_hat) -> float:
    """Characteristic functional of Laplace coefficient noise at ``phi``.

    The product runs over every supplied coefficient, so the pairing of index
    k with ``phi_{-k}`` is immaterial for a common scale.
    """
    scales = {d.scale for d in noise.coordinate_densities if d.family == "laplace"}
    if len(scales) != 1 or any(d.family != "laplace" for d in noise.coordinate_densities):
        raise ModelError("characteristic function needs Laplace coordinates with a common scale")
    return char_fn_laplace(scales.pop(), phi_hat)


# ---------------------------------------------------------------------------
# Subordinated (time-changed) Brownian noise


def quadratic_variation(path: PathGrid) -> PathGrid:
    """Cumulative sum of squared increments along the grid."""
    v = path.values
    if v.size < 2:
        raise DomainError("quadratic variation needs at least two grid points")
    return PathGrid(path.times, np.r_[0.0, np.cumsum(np.diff(v) ** 2)])


def _check_aligned(*paths):
    t0 = paths[0].times
    for p in paths[1:]:
        if p.times.shape != t0.shape or not np.array_equal(p.times, t0):
            raise DomainError("path grids are not aligned")


def log_rho_subordinated(alpha_hat: PathGrid, Lx_path: PathGrid, y_path: PathGrid) -> float:
    """Cameron-Martin log-ratio of Brownian motion run on the clock ``alpha_hat``."""
    _check_aligned(alpha_hat, Lx_path, y_path)
    return float(_grid_gauss_prepare(alpha_hat.values, y_path.values)(Lx_path.values))


@dataclass(frozen=True, eq=False)
class SubordinatedNoise:
    """``B_{alpha_t}`` with ``alpha`` an integrated gamma rate plus a floor.

    ``alpha`` increments are ``(floor + Gamma(shape, rate)) * dt``, so sample
    clocks are strictly increasing with slopes bounded below by ``floor``.
    The likelihood is evaluated on every ``stride``-th grid point with the
    clock estimated by the quadratic variation on the full grid.
    """

    times: np.ndarray
    shape: float = 2.0
    rate: float = 2.0
    floor: float = 0.1
    stride: int = 1

    def __post_init__(self):
        t = _frozen(self.times)
        if t[0] != 0 or np.any(np.diff(t) <= 0):
            raise DomainError("subordinated grid must start at 0 and increase strictly")
        if self.shape <= 0 or self.rate <= 0 or self.floor <= 0:
            raise ModelError("gamma_integral needs shape, rate, floor > 0")
        if int(self.stride) < 1 or (t.size - 1) % int(self.stride):
            raise ModelError("stride must divide the number of grid intervals")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "stride", int(self.stride))

    def coarse_index(self):
        return np.arange(0, self.times.size, self.stride)

    def sample_time_change(self, rng):
        dt = np.diff(self.times)
        slope = self.floor + rng.gamma(self.shape, 1.0 / self.rate, dt.size)
        return PathGrid(self.times, np.r_[0.0, np.cumsum(slope * dt)])

    def sample_with_clock(self, seed):
        rng = np.random.default_rng(seed)
        alpha = self.sample_time_change(rng)
        dA = np.diff(alpha.values)
        b = np.r_[0.0, np.cumsum(np.sqrt(dA) * rng.standard_normal(dA.size))]
        return PathGrid(self.times, b), alpha

    def sample(self, seed):
        return self.sample_with_clock(seed)[0]

    def prepare(self, y):
        y = _arr(y)
        qv = quadratic_variation(PathGrid(self.times, y)).values
        ix = self.coarse_index()
        inner = _grid_gauss_prepare(qv[ix], y[ix])
        return lambda LX: inner(np.asarray(LX)[..., ix])


# ---------------------------------------------------------------------------
# Finite-dimensional noise with a Lebesgue density


_FINITE_BUILTINS = ("gaussian", "uniform_box", "laplace")


@dataclass(frozen=True, eq=False)
class FiniteDimNoise:
    """Noise on R^k with density ``D``; built-ins are i.i.d. coordinates.

    ``kind`` is one of ``gaussian`` (sd ``scale``), ``uniform_box``
    (half-width ``scale``), ``laplace`` (scale ``scale``) or ``custom`` with a
    vectorised ``log_density`` on rows.
    """

    dim: int
    kind: str = "gaussian"
    scale: float = 1.0
    log_density: Callable | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in _FINITE_BUILTINS + ("custom",):
            raise ModelError(f"unknown finite-dimensional noise {self.kind!r}")
        if self.kind == "custom" and self.log_density is None:
            raise ModelError("custom finite-dimensional noise needs log_density")
        if self.kind != "custom" and not self.scale > 0:
            raise ModelError("scale must be > 0")

    def logpdf(self, z):
        z = np.asarray(z, dtype=float)
        s, k = self.scale, self.dim
        if self.kind == "gaussian":
            return -0.5 * k * np.log(2 * np.pi * s * s) - 0.5 * np.sum(z * z, axis=-1) / (s * s)
        if self.kind == "laplace":
            return -k * np.log(2 * s) - np.sum(np.abs(z), axis=-1) / s
        if self.kind == "uniform_box":
            inside = np.all(np.abs(z) <= s, axis=-1)
            return np.where(inside, -k * np.log(2 * s), -np.inf)
        return np.asarray(self.log_density(z), dtype=float)

    def prepare(self, y):
        y = _arr(y)
        _finite(y)
        if y.shape != (self.dim,):
            raise BasisError(f"expected a {self.dim}-vector")

        def log_rho(LX):
            out = self.logpdf(y - LX)
            if np.any(np.isnan(out) | (out == np.inf)):
                raise NumericError("density returned a nonfinite value other than -inf")
            return out

        return log_rho

    def sample(self, seed):
        rng = np.random.default_rng(seed)
        if self.kind == "gaussian":
            z = self.scale * rng.standard_normal(self.dim)
        elif self.kind == "laplace":
            z = rng.laplace(0.0, self.scale, self.dim)
        elif self.kind == "uniform_box":
            z = rng.uniform(-self.scale, self.scale, self.dim)
        else:
            raise ModelError("no sampler for custom finite-dimensional noise")
        return CoeffVector(f"R{self.dim}", z)


def log_rho_finite_dim(noise: FiniteDimNoise, Lx, y) -> float:
    a, b = _arr(Lx), _arr(y)
    _finite(a, b)
    if a.shape != (noise.dim,) or b.shape != (noise.dim,):
        raise BasisError(f"expected {noise.dim}-vectors")
    return float(noise.prepare(b)(a[None, :])[0])


def sample_noise(model, seed):
    """One draw from ``model``; deterministic per seed."""
    return model.sample(seed)
