"""Sequence classifier: unroll a cell, read out the last hidden state, BPTT."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cells import CellKind, CellParams, PreparedCell, StepCache
from .core import DivergenceError, ShapeError, float_array

Gradients = dict  # parameter name -> array shaped like the parameter


@dataclass
class ClassifierNet:
    cell: CellParams
    readout_w: np.ndarray
    readout_b: np.ndarray

    def __post_init__(self):
        self.readout_w = float_array(self.readout_w)
        self.readout_b = float_array(self.readout_b)
        if self.readout_w.shape != (self.readout_b.size, self.cell.n):
            raise ShapeError(f"readout_w must be {self.readout_b.size}x{self.cell.n}, got {self.readout_w.shape}")

    @property
    def classes(self) -> int:
        return self.readout_b.size

    def parameters(self) -> dict[str, np.ndarray]:
        """Live views of every trainable array, cell weights first."""
        params = dict(self.cell.weights)
        params["readout_w"] = self.readout_w
        params["readout_b"] = self.readout_b
        return params

    def copy(self) -> "ClassifierNet":
        return ClassifierNet(self.cell.copy(), self.readout_w.copy(), self.readout_b.copy())


@dataclass
class ForwardTape:
    caches: list[StepCache]
    h_final: np.ndarray
    logits: np.ndarray
    c_final: np.ndarray | None = None


def _as_batch(seqs, m: int) -> np.ndarray:
    seqs = float_array(seqs)
    if seqs.ndim == 2:
        seqs = seqs[None]
    if seqs.ndim != 3 or seqs.shape[2] != m:
        raise ShapeError(f"sequences must be (batch, T, {m}), got {seqs.shape}")
    return seqs


def unroll(cell: CellParams, seqs, h0=None, c0=None, keep_caches: bool = True):
    """Run the cell over a batch (B, T, m); returns (h_T, c_T, caches)."""
    seqs = _as_batch(seqs, cell.m)
    B, T, _ = seqs.shape
    prep = PreparedCell(cell)
    dtype = np.result_type(seqs, *cell.weights.values())
    H = np.zeros((B, cell.n), dtype) if h0 is None else np.broadcast_to(np.asarray(h0, dtype), (B, cell.n)).copy()
    C = None
    if cell.kind == CellKind.LSTM:
        C = np.zeros((B, cell.n), dtype) if c0 is None else np.broadcast_to(np.asarray(c0, dtype), (B, cell.n)).copy()
    caches = []
    with np.errstate(over="ignore", invalid="ignore"):  # reported below as DivergenceError
        for t in range(T):
            H, C, cache = prep.step(H, C, seqs[:, t, :])
            if keep_caches:
                caches.append(cache)
    if not np.isfinite(H).all() or (C is not None and not np.isfinite(C).all()):
        raise DivergenceError("hidden state became non-finite", step=T)
    return H, C, caches


def forward_batch(net: ClassifierNet, seqs, h0=None, c0=None):
    H, C, caches = unroll(net.cell, seqs, h0, c0)
    logits = H @ net.readout_w.T + net.readout_b
    return logits, ForwardTape(caches, H, logits, C)


def forward(net: ClassifierNet, seq, h0=None, c0=None):
    """Classify one (T, m) sequence; returns (logits, tape)."""
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim != 2:
        raise ShapeError("forward takes a single (T, m) sequence")
    logits, tape = forward_batch(net, seq[None], h0, c0)
    return logits[0], tape


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def cross_entropy(logits, label: int) -> float:
    logits = np.asarray(logits, dtype=np.float64)
    if not 0 <= label < logits.shape[-1]:
        raise ValueError(f"label {label} out of range for {logits.shape[-1]} classes")
    return float(-log_softmax(logits)[label])


def cross_entropy_batch(logits: np.ndarray, labels) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= logits.shape[1]:
        raise ValueError("label out of range")
    return -log_softmax(logits)[np.arange(len(labels)), labels]


def logits_grad(logits: np.ndarray, labels) -> np.ndarray:
    """d(loss)/d(logits) per sample: softmax minus one-hot."""
    logits = np.atleast_2d(logits)
    p = np.exp(log_softmax(logits))
    p[np.arange(p.shape[0]), np.asarray(labels).reshape(-1)] -= 1.0
    return p


def backward_batch(net: ClassifierNet, tape: ForwardTape, labels, return_state_grad: bool = False):
    """Gradients of the batch-mean cross-entropy.

    Per-parameter sums over the batch are taken inside the matrix products
    (batch axis contracted) and over time in reverse step order, then
    divided by the batch size.
    """
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    B = tape.h_final.shape[0]
    if labels.size != B or tape.logits.shape[1] != net.classes:
        raise ShapeError("tape and labels/net do not match")
    prep = PreparedCell(net.cell)
    dlogits = logits_grad(tape.logits, labels)
    grads = prep.zero_grads()
    readout_w = dlogits.T @ tape.h_final
    readout_b = dlogits.sum(axis=0)
    dH = dlogits @ net.readout_w
    dC = np.zeros_like(dH) if net.cell.kind == CellKind.LSTM else None
    for cache in reversed(tape.caches):
        dH, dC = prep.backward_step(cache, dH, dC, grads)
    grads = prep.finish_grads(grads)
    grads["readout_w"] = readout_w
    grads["readout_b"] = readout_b
    grads = {k: v / B for k, v in grads.items()}
    if return_state_grad:
        return grads, dH / B, (dC / B if dC is not None else None)
    return grads


def backward(net: ClassifierNet, tape: ForwardTape, label: int, return_state_grad: bool = False):
    """Exact gradient of cross_entropy(forward(net, seq), label)."""
    if tape.h_final.shape[0] != 1:
        raise ShapeError("backward expects a single-sequence tape; use backward_batch")
    if not 0 <= label < net.classes:
        raise ValueError(f"label {label} out of range")
    out = backward_batch(net, tape, [label], return_state_grad)
    if return_state_grad:
        grads, dH, dC = out
        return grads, dH[0], (dC[0] if dC is not None else None)
    return out


def loss_of(net: ClassifierNet, seq, label: int, h0=None, c0=None) -> float:
    logits, _ = forward(net, seq, h0, c0)
    return cross_entropy(logits, label)


def _extended(net: ClassifierNet) -> ClassifierNet:
    cell = net.cell
    weights = {k: v.astype(np.longdouble) for k, v in cell.weights.items()}
    return ClassifierNet(CellParams(cell.kind, cell.n, cell.m, weights, cell.epsilon, cell.gamma),
                         net.readout_w.astype(np.longdouble), net.readout_b.astype(np.longdouble))


def _extended_loss(net: ClassifierNet, seq, label: int):
    logits, _ = forward_batch(net, seq[None])
    return -log_softmax(logits)[0, label]


def finite_diff_check(net: ClassifierNet, seq, label: int, delta: float = 1e-5) -> float:
    """Largest relative disagreement between BPTT and central differences over all parameters.

    The difference quotients are evaluated in ``longdouble`` (80-bit on
    x86) so that forward-pass rounding does not swamp small gradients;
    BPTT itself runs in float64.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    logits, tape = forward(net, seq)
    grads = backward(net, tape, label)
    ext = _extended(net)
    seq_ext = np.asarray(seq, dtype=np.float64).astype(np.longdouble)
    worst = 0.0
    for name, theta in ext.parameters().items():
        flat = theta.reshape(-1)
        g_bp = grads[name].reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + delta
            up = _extended_loss(ext, seq_ext, label)
            flat[k] = orig - delta
            down = _extended_loss(ext, seq_ext, label)
            flat[k] = orig
            g_fd = float((up - down) / (2 * np.longdouble(delta)))
            err = abs(g_fd - g_bp[k]) / max(1e-8, abs(g_fd) + abs(g_bp[k]))
            worst = max(worst, err)
    return worst
