"""Forward Euler, stability classification and 2-D phase portraits."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from ._kernels import euler_portrait
from .core import SeededRng, ShapeError
from .spectral import ComplexSpectrum

DIVERGENCE_CUTOFF = 1e12
DYNAMICS_KINDS = ("linear2d", "vanilla_rnn2d", "antisym2d")


@dataclass
class Trajectory:
    points: np.ndarray
    epsilon: float
    diverged: bool = False

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.points, axis=1)


@dataclass
class DynamicsSpec:
    kind: str
    matrix: np.ndarray
    gamma: float = 0.0
    input_seed: int | None = None  # None: no input; otherwise i.i.d. N(0, 1) inputs with V = I

    def __post_init__(self):
        if self.kind not in DYNAMICS_KINDS:
            raise ValueError(f"unknown dynamics kind {self.kind!r}")
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.shape != (2, 2):
            raise ShapeError("dynamics matrix must be 2x2")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")

    def transition(self) -> np.ndarray:
        a = self.matrix
        if self.kind == "linear2d":
            return a.copy()
        m = a - a.T if self.kind == "antisym2d" else a.copy()
        return m - self.gamma * np.eye(2)


def forward_euler(f: Callable[[np.ndarray], np.ndarray], h0, epsilon: float, steps: int) -> Trajectory:
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if steps < 0:
        raise ValueError("steps must be non-negative")
    h = np.atleast_1d(np.asarray(h0, dtype=np.float64)).copy()
    points = [h.copy()]
    for _ in range(steps):
        with np.errstate(over="ignore", invalid="ignore"):
            h = h + epsilon * np.asarray(f(h), dtype=np.float64)
        if not np.isfinite(h).all() or np.abs(h).max() > DIVERGENCE_CUTOFF:
            return Trajectory(np.array(points), epsilon, diverged=True)
        points.append(h.copy())
    return Trajectory(np.array(points), epsilon)


def euler_test_equation(lam: complex, y0: complex, epsilon: float, steps: int) -> np.ndarray:
    """Euler iterates of the scalar test equation y' = lam * y."""
    out = np.empty(steps + 1, dtype=np.complex128)
    out[0] = y0
    for t in range(steps):
        out[t + 1] = out[t] + epsilon * lam * out[t]
    return out


def amplification_factor(lam: complex, epsilon: float) -> float:
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    return abs(1.0 + epsilon * complex(lam))


def _values(spectrum) -> np.ndarray:
    values = spectrum.values if isinstance(spectrum, ComplexSpectrum) else np.asarray(list(spectrum), dtype=np.complex128)
    if values.size == 0:
        raise ValueError("empty spectrum")
    return values


def euler_stable(spectrum: ComplexSpectrum | Iterable[complex], epsilon: float) -> bool:
    values = _values(spectrum)
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    return bool(np.abs(1.0 + epsilon * values).max() <= 1.0 + 1e-12)


def ode_stability_class(spectrum: ComplexSpectrum | Iterable[complex], tol: float = 1e-9) -> str:
    """'unstable', 'critical' or 'stable' from the real parts of the Jacobian spectrum."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    re = _values(spectrum).real
    if re.max() > tol:
        return "unstable"
    if np.abs(re).max() <= tol:
        return "critical"
    return "stable"


@dataclass(frozen=True)
class Grid:
    min: float
    max: float
    points_per_axis: int

    @classmethod
    def parse(cls, text: str) -> "Grid":
        lo, hi, k = text.split(":")
        return cls(float(lo), float(hi), int(k))

    def initial_conditions(self) -> np.ndarray:
        if self.points_per_axis < 1:
            raise ValueError("points_per_axis must be at least 1")
        axis = np.linspace(self.min, self.max, self.points_per_axis)
        # row-major: first coordinate varies slowest
        return np.array([(a, b) for a in axis for b in axis], dtype=np.float64)


def phase_portrait(spec: DynamicsSpec, grid: Grid, epsilon: float, steps: int) -> list[Trajectory]:
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    h0s = grid.initial_conditions()
    inputs = None
    if spec.input_seed is not None and spec.kind != "linear2d":
        inputs = SeededRng(spec.input_seed).substream(0).normal(len(h0s) * steps * 2).reshape(len(h0s), steps, 2)
    points, lengths, diverged = euler_portrait(
        spec.transition(), spec.kind != "linear2d", h0s, inputs, float(epsilon), int(steps), DIVERGENCE_CUTOFF
    )
    return [Trajectory(points[k, : lengths[k]].copy(), epsilon, bool(diverged[k])) for k in range(len(h0s))]


SYSTEMS = ("vanilla", "positive", "negative", "imaginary", "imaginary_diffusion", "antisym")


def named_system(name: str, gamma: float = 0.1, seed: int = 1, scale: float = 1.0,
                 gaussian_input: bool = False) -> DynamicsSpec:
    """The 2-D systems of the phase-portrait figures.

    ``vanilla`` and ``antisym`` draw standard Gaussian weights from ``seed``;
    the others are the minimal matrices with the named spectra
    (``scale`` sets a = b = beta).  ``gamma`` applies to
    ``imaginary_diffusion`` and ``antisym`` only.
    """
    a = float(scale)
    input_seed = seed if gaussian_input else None
    if name == "vanilla":
        w = SeededRng(seed).normal(4).reshape(2, 2)
        return DynamicsSpec("vanilla_rnn2d", w, 0.0, input_seed)
    if name == "antisym":
        w = SeededRng(seed).normal(4).reshape(2, 2)
        return DynamicsSpec("antisym2d", w, gamma, input_seed)
    if name == "positive":
        return DynamicsSpec("vanilla_rnn2d", np.diag([a, a]), 0.0, input_seed)
    if name == "negative":
        return DynamicsSpec("vanilla_rnn2d", np.diag([-a, -a]), 0.0, input_seed)
    if name == "imaginary":
        return DynamicsSpec("vanilla_rnn2d", [[0.0, a], [-a, 0.0]], 0.0, input_seed)
    if name == "imaginary_diffusion":
        return DynamicsSpec("vanilla_rnn2d", [[-gamma, a], [-a, -gamma]], 0.0, input_seed)
    raise ValueError(f"unknown system {name!r}; expected one of {', '.join(SYSTEMS)}")
