"""Antisymmetric parametrization, eigenvalues of real matrices, spectrum statistics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import eigvals_real
from .core import ConvergenceError, ShapeError, float_array

MAX_EIG_DIM = 1024
DEFLATION_TOL = 1e-12


@dataclass
class AntisymmetricParam:
    """Strict upper triangle of W, stored row-major: (0,1), (0,2), ..., (1,2), ..."""

    n: int
    upper: np.ndarray

    def __post_init__(self):
        self.upper = float_array(self.upper).reshape(-1)
        if self.upper.size != self.n * (self.n - 1) // 2:
            raise ShapeError(f"n={self.n} needs {self.n * (self.n - 1) // 2} entries, got {self.upper.size}")

    @classmethod
    def zeros(cls, n: int) -> "AntisymmetricParam":
        return cls(n, np.zeros(n * (n - 1) // 2))


def upper_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(n, k=1)


def expand_antisymmetric(p: AntisymmetricParam) -> np.ndarray:
    m = np.zeros((p.n, p.n), dtype=p.upper.dtype)
    iu = upper_indices(p.n)
    m[iu] = p.upper
    return m - m.T


def reduce_antisymmetric_grad(g: np.ndarray) -> np.ndarray:
    """Pull a gradient w.r.t. U - U^T back onto the stored upper entries."""
    iu = upper_indices(g.shape[0])
    return g[iu] - g.T[iu]


@dataclass
class ComplexSpectrum:
    values: np.ndarray
    source_dim: int
    converged: bool = True

    def __post_init__(self):
        self.values = sort_spectrum(np.asarray(self.values, dtype=np.complex128))

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    @property
    def moduli(self) -> np.ndarray:
        return np.abs(self.values)


@dataclass(frozen=True)
class SpectrumStats:
    mean_modulus: float
    std_modulus: float


def sort_spectrum(values: np.ndarray) -> np.ndarray:
    """Order by modulus, then real part, then imaginary part, all descending."""
    values = np.asarray(values, dtype=np.complex128)
    order = np.lexsort((-values.imag, -values.real, -np.abs(values)))
    return values[order]


def eigenvalues(m, strict: bool = True) -> ComplexSpectrum:
    """All eigenvalues of a real square matrix.

    Balancing, Householder reduction to Hessenberg form, then Francis
    double-shift QR with 1x1/2x2 deflation.  Gives up after ``100 * n``
    sweeps: raises :class:`ConvergenceError` when ``strict``, otherwise
    returns the partial spectrum with ``converged=False``.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"eigenvalues need a square matrix, got shape {m.shape}")
    n = m.shape[0]
    if n > MAX_EIG_DIM:
        raise ShapeError(f"matrix dimension {n} exceeds {MAX_EIG_DIM}")
    if not np.isfinite(m).all():
        raise ValueError("matrix has non-finite entries")
    wr, wi, ok = eigvals_real(np.ascontiguousarray(m), DEFLATION_TOL, 100 * n)
    spectrum = ComplexSpectrum(wr + 1j * wi, n, bool(ok))
    if not ok and strict:
        raise ConvergenceError(f"QR iteration did not converge within {100 * n} sweeps", spectrum)
    return spectrum


def verify_dw_imaginary(d_diag, w: AntisymmetricParam, tol: float = 1e-8) -> bool:
    """Check that diag(d) @ W has a purely imaginary spectrum (d invertible, W antisymmetric)."""
    d = np.asarray(d_diag, dtype=np.float64).reshape(-1)
    if d.size != w.n:
        raise ShapeError(f"diagonal has {d.size} entries for n={w.n}")
    if np.any(d == 0):
        raise ValueError("diagonal matrix is not invertible")
    values = eigenvalues(d[:, None] * expand_antisymmetric(w)).values
    if values.size == 0:
        return True
    return bool(np.abs(values.real).max() <= tol * (1.0 + np.abs(values).max()))


def spectral_stats(s: ComplexSpectrum | np.ndarray, log2_scale: int = 0) -> SpectrumStats:
    """Mean and population std of eigenvalue moduli.

    ``log2_scale`` undoes a power-of-two renormalization: moduli are
    multiplied by ``2**log2_scale`` exactly (saturating to 0 or inf).
    """
    values = s.values if isinstance(s, ComplexSpectrum) else np.asarray(s)
    if values.size == 0:
        raise ValueError("empty spectrum")
    with np.errstate(over="ignore", under="ignore"):
        mod = np.ldexp(np.abs(values), int(log2_scale))
        mean = float(mod.mean())
        std = float(np.sqrt(np.mean((mod - mean) ** 2))) if np.isfinite(mean) else float("nan")
    return SpectrumStats(mean, std)
