"""End-to-end Jacobians d(state_T)/d(state_0) and the eigenvalue-statistics sweep."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cells import CellKind, CellParams, step_jacobian
from .core import SeededRng, identity, mat_product
from .network import ClassifierNet, finite_diff_check, unroll
from .optim import InitSpec, init_params, load_checkpoint, uses_gamma
from .spectral import eigenvalues, spectral_stats


def _jacobian_chain(cell: CellParams, seq, h0=None, c0=None, snapshots=None, renormalize=False):
    """Accumulate J_t ... J_1 and yield (t, matrix, log2_scale) at the requested t."""
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim != 2 or seq.shape[1] != cell.m:
        raise ValueError(f"sequence must be (T, {cell.m}), got {seq.shape}")
    T = seq.shape[0]
    want = {T} if snapshots is None else set(snapshots)
    a = identity(cell.state_dim)
    scale = 0
    out = []
    if 0 in want:
        out.append((0, a.copy(), 0))
    if T == 0:
        return out
    _, _, caches = unroll(cell, seq[None], h0, c0)
    for t, cache in enumerate(caches, 1):
        a = mat_product(step_jacobian(cell, cache), a)
        if renormalize:
            peak = float(np.abs(a).max())
            if peak > 0 and math.isfinite(peak):
                e = math.frexp(peak)[1]
                a = np.ldexp(a, -e)
                scale += e
        if t in want:
            out.append((t, a.copy(), scale))
    return out


def end_to_end_jacobian(cell: CellParams, seq, h0=None, c0=None) -> np.ndarray:
    """Ordered product J_T ... J_1 of step Jacobians along the forward pass of ``seq``.

    The matrix is n x n, or 2n x 2n over the stacked (h, c) state for LSTM.
    An empty sequence gives the identity.
    """
    return _jacobian_chain(cell, seq, h0, c0)[-1][1]


def scaled_end_to_end_jacobian(cell: CellParams, seq, h0=None, c0=None) -> tuple[np.ndarray, int]:
    """Same product, renormalized by powers of two after every step.

    Returns ``(a, k)`` with the true Jacobian equal to ``a * 2**k``; the
    rescaling is exact, so long products neither underflow nor overflow.
    """
    _, a, k = _jacobian_chain(cell, seq, h0, c0, renormalize=True)[-1]
    return a, k


@dataclass(frozen=True)
class SweepConfig:
    kinds: tuple[str, ...]
    gamma_list: tuple[float, ...]
    t_list: tuple[int, ...]
    n: int = 32
    m: int = 96
    epsilon: float = 0.1
    sigma_w: float = 1.0
    samples: int = 5
    seed: int = 0
    checkpoint: str | None = None

    def __post_init__(self):
        if not self.kinds or not self.gamma_list or not self.t_list:
            raise ValueError("cell, gamma and T lists must be nonempty")
        if min(self.t_list) < 1:
            raise ValueError("T values must be at least 1")
        if self.samples < 1:
            raise ValueError("samples must be at least 1")
        if min(self.gamma_list) < 0:
            raise ValueError("gamma values must be non-negative")
        for k in self.kinds:
            CellKind(k)


@dataclass(frozen=True)
class SweepRow:
    kind: str
    gamma: float
    T: int
    sample: int
    mean_modulus: float
    std_modulus: float
    converged: bool

    def csv(self) -> str:
        return (f"{self.kind},{self.gamma:.17g},{self.T},{self.sample},"
                f"{self.mean_modulus:.17g},{self.std_modulus:.17g},{int(self.converged)}")


SWEEP_HEADER = "kind,gamma,T,sample,mean_modulus,std_modulus,converged"


def sample_seed(seed: int, sample: int) -> int:
    """Initialization seed of sample ``sample``; shared by all kinds and gammas."""
    return int(np.random.SeedSequence([seed, 1, sample]).generate_state(1)[0])


def noise_input(seed: int, sample: int, steps: int, m: int) -> np.ndarray:
    """Standard Gaussian input; shorter draws are prefixes of longer ones."""
    return SeededRng([seed, 2, sample]).normal(steps * m).reshape(steps, m)


def _points(cfg: SweepConfig, base: ClassifierNet | None):
    for kind in cfg.kinds:
        kind = CellKind(kind)
        if base is not None:
            gammas = (base.cell.gamma,)
        else:
            gammas = tuple(cfg.gamma_list) if uses_gamma(kind) else (0.0,)
        for gamma in gammas:
            for sample in range(cfg.samples):
                yield kind, gamma, sample


def _run_point(cfg: SweepConfig, base: ClassifierNet | None, kind, gamma, sample) -> list[SweepRow]:
    if base is not None:
        cell = base.cell
    else:
        cell = init_params(kind, cfg.n, cfg.m, 2, InitSpec(cfg.sigma_w, sample_seed(cfg.seed, sample)),
                           cfg.epsilon, gamma).cell
    seq = noise_input(cfg.seed, sample, max(cfg.t_list), cell.m)
    chain = {t: (a, k) for t, a, k in _jacobian_chain(cell, seq, snapshots=cfg.t_list, renormalize=True)}
    rows = {}
    for T in cfg.t_list:
        a, k = chain[T]
        spectrum = eigenvalues(a, strict=False)
        stats = spectral_stats(spectrum, k)
        rows[T] = SweepRow(str(kind), float(gamma), int(T), sample, stats.mean_modulus,
                           stats.std_modulus, spectrum.converged)
    return [rows[T] for T in cfg.t_list]


def spectrum_sweep(cfg: SweepConfig, threads: int = 1) -> list[SweepRow]:
    """One row per (kind, gamma, T, sample), in that nesting order.

    Each sample gets its own initialization seed and noise sequence; the
    sequence for the largest T is drawn once and its prefixes serve the
    shorter horizons.  Kinds without diffusion yield a single gamma=0 block.
    Eigensolver failures are flagged with ``converged=False``.
    """
    base = None
    if cfg.checkpoint:
        base = load_checkpoint(cfg.checkpoint)
        if {CellKind(k) for k in cfg.kinds} != {base.cell.kind}:
            raise ValueError(f"checkpoint holds a {base.cell.kind} cell; --cell-list must name only that kind")
    points = list(_points(cfg, base))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda p: _run_point(cfg, base, *p), points))
    else:
        results = [_run_point(cfg, base, *p) for p in points]
    grouped = {}
    for (kind, gamma, sample), rows in zip(points, results):
        for row in rows:
            grouped.setdefault((str(kind), gamma), {}).setdefault(row.T, []).append(row)
    out = []
    for key in dict.fromkeys((str(k), g) for k, g, _ in points):
        for T in cfg.t_list:
            out.extend(grouped[key][T])
    return out


def gradcheck_case(kind, n: int, m: int, t: int, seed: int, delta: float = 1e-5,
                   epsilon: float = 0.1, gamma: float = 0.01, classes: int = 10) -> float:
    """Finite-difference check of BPTT on a freshly initialized net and a Gaussian sequence.

    ``gamma`` only reaches the cells that use diffusion.
    """
    kind = CellKind(kind)
    net = init_params(kind, n, m, classes, InitSpec(1.0, seed), epsilon, gamma if uses_gamma(kind) else 0.0)
    seq = SeededRng(seed).substream(7).normal(t * m).reshape(t, m)
    return finite_diff_check(net, seq, seed % classes, delta)
