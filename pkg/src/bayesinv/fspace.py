"""Truncated function spaces as coefficient sequences.

Every infinite-dimensional object is represented by finitely many
coefficients in a declared orthonormal system.  Cameron-Martin geometry of a
diagonal Gaussian reduces to spectrally weighted sums over those coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from bayesinv.errors import BasisError, DomainError, ModelError, NumericError


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Basis:
    """Orthonormal system of dimension ``dim`` with ambient-norm weights.

    ``embedding_weights[i]`` is the squared norm of the i-th basis vector in
    the ambient space, e.g. ``(1 + k**2) ** -1`` for H^{-1} on the circle.
    """

    id: str
    dim: int
    embedding_weights: np.ndarray = field(repr=False)
    index_labels: tuple = field(repr=False)

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ModelError(f"basis {self.id!r}: dim must be >= 1, got {self.dim}")
        w = _frozen(self.embedding_weights)
        if w.shape != (self.dim,):
            raise ModelError(f"basis {self.id!r}: expected {self.dim} embedding weights, got {w.shape}")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ModelError(f"basis {self.id!r}: embedding weights must be finite and > 0")
        labels = tuple(str(s) for s in self.index_labels)
        if len(labels) != self.dim or len(set(labels)) != self.dim:
            raise ModelError(f"basis {self.id!r}: need {self.dim} unique labels")
        object.__setattr__(self, "embedding_weights", w)
        object.__setattr__(self, "index_labels", labels)

    def ambient_norm(self, coeffs):
        """Ambient-space norm of coefficient rows (last axis)."""
        c = np.asarray(coeffs, dtype=float)
        return np.sqrt(np.sum(self.embedding_weights * c * c, axis=-1))


def index_basis(dim, id="coeff", weights=None):
    """Plain basis labelled 0..dim-1, unit weights unless given."""
    w = np.ones(dim) if weights is None else weights
    return Basis(id, int(dim), w, tuple(str(i) for i in range(dim)))


def trig_basis(K, sobolev=0.0, id=None):
    """Real trigonometric basis of degree K on the circle.

    Coefficient order is ``[k=0, 1c, 1s, 2c, 2s, ...]`` where ``kc``/``ks`` are
    the real and negated imaginary parts of the complex coefficient at
    index k, so that ``c_{+-k} = kc -+ i*ks``.  Weights are
    ``(1 + k**2) ** sobolev`` (use ``sobolev=-1`` for H^{-1}).
    """
    labels = ["0"]
    ks = [0]
    for k in range(1, K + 1):
        labels += [f"{k}c", f"{k}s"]
        ks += [k, k]
    ks = np.array(ks, dtype=float)
    return Basis(id or f"trig{K}", 2 * K + 1, (1.0 + ks**2) ** sobolev, tuple(labels))


def trig_frequencies(K):
    """Absolute frequency |k| of every coordinate of :func:`trig_basis`."""
    return np.array([0] + [k for k in range(1, K + 1) for _ in (0, 1)])


@dataclass(frozen=True, eq=False)
class CoeffVector:
    basis_id: str
    coeffs: np.ndarray

    def __post_init__(self):
        c = _frozen(self.coeffs)
        if c.ndim != 1:
            raise BasisError(f"coefficients must be 1-d, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise NumericError("coefficient vector has nonfinite entries")
        object.__setattr__(self, "coeffs", c)

    def __len__(self):
        return self.coeffs.shape[0]

    def _check(self, other):
        if self.basis_id != other.basis_id or len(self) != len(other):
            raise BasisError(f"basis mismatch: {self.basis_id!r} vs {other.basis_id!r}")

    def __add__(self, other):
        self._check(other)
        return CoeffVector(self.basis_id, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check(other)
        return CoeffVector(self.basis_id, self.coeffs - other.coeffs)

    def __mul__(self, a):
        return CoeffVector(self.basis_id, float(a) * self.coeffs)

    __rmul__ = __mul__

    def to_csv_row(self):
        return ",".join(f"{v:.17g}" for v in self.coeffs)

    @classmethod
    def from_csv_row(cls, basis_id, row):
        return cls(basis_id, np.array([float(s) for s in row.split(",")]))


@dataclass(frozen=True, eq=False)
class PathGrid:
    """Sample path on an explicit, possibly nonuniform time grid."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = _frozen(self.times)
        v = _frozen(self.values)
        if t.ndim != 1 or t.shape != v.shape:
            raise DomainError(f"times {t.shape} and values {v.shape} must be equal-length 1-d")
        if t.size < 1 or not np.all(np.diff(t) > 0):
            raise DomainError("times must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise NumericError("path has nonfinite times or values")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def horizon(self):
        return float(self.times[-1])


@dataclass(frozen=True, eq=False)
class ForwardMap:
    """Linear forward operator in coefficients.

    ``kind="diagonal"`` stores N multipliers; ``kind="dense"`` stores a
    (range_dim, domain_dim) matrix.
    """

    kind: str
    entries: np.ndarray
    domain_basis: str
    range_basis: str

    def __post_init__(self):
        e = _frozen(self.entries)
        if self.kind == "diagonal":
            if e.ndim != 1:
                raise ModelError("diagonal forward map needs a 1-d multiplier array")
        elif self.kind == "dense":
            if e.ndim != 2:
                raise ModelError("dense forward map needs a 2-d matrix")
        else:
            raise ModelError(f"unknown forward map kind {self.kind!r}")
        if not np.all(np.isfinite(e)):
            raise NumericError("forward map has nonfinite entries")
        object.__setattr__(self, "entries", e)

    @property
    def domain_dim(self):
        return self.entries.shape[-1]

    @property
    def range_dim(self):
        return self.entries.shape[0]

    def operator_norm(self):
        if self.kind == "diagonal":
            return float(np.max(np.abs(self.entries), initial=0.0))
        return float(np.linalg.norm(self.entries, ord=2))

    def apply_array(self, X):
        """Apply to coefficient rows ``X`` of shape (..., domain_dim)."""
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.domain_dim:
            raise BasisError(f"expected {self.domain_dim} coefficients, got {X.shape[-1]}")
        if self.kind == "diagonal":
            return X * self.entries
        return X @ self.entries.T

    @classmethod
    def zero(cls, domain_basis, dim, range_basis=None):
        return cls("diagonal", np.zeros(dim), domain_basis, range_basis or domain_basis)


def apply_forward(L: ForwardMap, x: CoeffVector) -> CoeffVector:
    if x.basis_id != L.domain_basis:
        raise BasisError(f"forward map expects basis {L.domain_basis!r}, got {x.basis_id!r}")
    return CoeffVector(L.range_basis, L.apply_array(x.coeffs))


def _spectrum(eigenvalues, n):
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.shape != (n,):
        raise BasisError(f"expected {n} eigenvalues, got shape {lam.shape}")
    if not np.all(np.isfinite(lam)) or np.any(lam <= 0):
        raise ModelError("eigenvalues must be finite and strictly positive")
    return lam


def _coeffs(v):
    return v.coeffs if isinstance(v, CoeffVector) else np.asarray(v, dtype=float)


def cm_norm_sq(h, eigenvalues) -> float:
    """Squared Cameron-Martin norm ``sum h_i**2 / lambda_i``."""
    c = _coeffs(h)
    lam = _spectrum(eigenvalues, c.shape[-1])
    return float(np.sum(c * c / lam))


def dual_pairing(y, h, eigenvalues) -> float:
    """Pairing ``<y, C^{-1} h>`` computed as ``sum y_i h_i / lambda_i``."""
    a, b = _coeffs(y), _coeffs(h)
    if isinstance(y, CoeffVector) and isinstance(h, CoeffVector):
        y._check(h)
    if a.shape != b.shape:
        raise BasisError(f"length mismatch {a.shape} vs {b.shape}")
    lam = _spectrum(eigenvalues, a.shape[-1])
    # the product is formed symmetrically so that y=h reproduces cm_norm_sq
    return float(np.sum(a * b / lam))


def _trig_matrix(times, K):
    t = np.asarray(times, dtype=float)
    rows = [np.ones_like(t)]
    for k in range(1, K + 1):
        rows.append(np.cos(k * t))
        rows.append(np.sin(k * t))
    return np.array(rows)


def _check_circle(times):
    t = np.asarray(times, dtype=float)
    tol = 1e-9 * 2 * np.pi
    if abs(t[0]) > tol or abs(t[-1] - 2 * np.pi) > tol:
        raise DomainError(f"trig_coeffs needs times spanning [0, 2pi], got [{t[0]}, {t[-1]}]")
    return t


def trig_coeffs_array(times, values, K):
    """Real trigonometric coefficients of path rows ``values`` (..., m+1)."""
    t = _check_circle(times)
    if K < 0:
        raise ModelError("K must be >= 0")
    basis_rows = _trig_matrix(t, K)
    v = np.asarray(values, dtype=float)
    integrand = v[..., None, :] * basis_rows
    return np.trapezoid(integrand, t, axis=-1) / (2 * np.pi)


def trig_coeffs(path: PathGrid, K: int) -> CoeffVector:
    """Fourier coefficients of a path on [0, 2pi] by the trapezoid rule.

    Returned in :func:`trig_basis` order; see :func:`to_complex` for the
    complex-index view.
    """
    return CoeffVector(f"trig{K}", trig_coeffs_array(path.times, path.values, K))


def to_complex(coeffs):
    """Complex Fourier coefficients ``c_k`` for k = -K..K from real-basis coefficients."""
    c = _coeffs(coeffs)
    K = (c.shape[-1] - 1) // 2
    out = np.empty(c.shape[:-1] + (2 * K + 1,), dtype=complex)
    out[..., K] = c[..., 0]
    re, im = c[..., 1::2], c[..., 2::2]
    out[..., K + 1:] = re - 1j * im
    out[..., :K][..., ::-1] = re + 1j * im
    return out


def trig_synthesize(coeffs, times):
    """Evaluate the real trigonometric series at ``times``."""
    c = _coeffs(coeffs)
    K = (c.shape[-1] - 1) // 2
    rows = _trig_matrix(times, K)
    scale = np.r_[1.0, np.full(2 * K, 2.0)]
    return (c * scale) @ rows
