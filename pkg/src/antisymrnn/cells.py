"""Recurrent cells: one transition step, its Jacobian, and vector-Jacobian products.

All step functions work on row-stacked batches: ``h`` has shape (B, n),
``x`` has shape (B, m).  The single-vector API (:func:`cell_step`) wraps
them with B = 1.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import ShapeError, float_array
from .spectral import AntisymmetricParam, expand_antisymmetric, reduce_antisymmetric_grad


class CellKind(str, Enum):
    VANILLA = "vanilla"
    LSTM = "lstm"
    ANTISYM = "antisym"
    ANTISYM_DIFFUSION = "antisym_diffusion"
    ANTISYM_GATED = "antisym_gated"
    ABLATION_GATED = "ablation_gated"

    def __str__(self):
        return self.value


ANTISYM_KINDS = frozenset({CellKind.ANTISYM, CellKind.ANTISYM_DIFFUSION, CellKind.ANTISYM_GATED})
GATED_KINDS = frozenset({CellKind.ANTISYM_GATED, CellKind.ABLATION_GATED})
LSTM_GATES = ("f", "i", "o", "c")


def weight_shapes(kind: CellKind | str, n: int, m: int) -> dict[str, tuple[int, ...]]:
    kind = CellKind(kind)
    if kind == CellKind.LSTM:
        shapes = {f"w_{g}": (n, n + m) for g in LSTM_GATES}
        shapes.update({f"b_{g}": (n,) for g in LSTM_GATES})
        return shapes
    shapes = {"w_upper": (n * (n - 1) // 2,)} if kind in ANTISYM_KINDS else {"w_h": (n, n)}
    shapes.update({"v_h": (n, m), "b_h": (n,)})
    if kind in GATED_KINDS:
        shapes.update({"v_z": (n, m), "b_z": (n,)})
    return shapes


@dataclass
class CellParams:
    """Weights of one cell plus its fixed step size and diffusion.

    ``gamma`` must be 0 for vanilla and LSTM cells; the plain ``antisym``
    and ``ablation_gated`` cells ignore it.
    """

    kind: CellKind
    n: int
    m: int
    weights: dict[str, np.ndarray]
    epsilon: float = 1.0
    gamma: float = 0.0

    def __post_init__(self):
        self.kind = CellKind(self.kind)
        if self.n < 1 or self.m < 1:
            raise ShapeError("n and m must be positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.kind in (CellKind.VANILLA, CellKind.LSTM) and self.gamma != 0:
            raise ValueError(f"gamma is not used by {self.kind} cells and must be 0")
        expected = weight_shapes(self.kind, self.n, self.m)
        if set(self.weights) != set(expected):
            raise ShapeError(f"{self.kind} expects weights {sorted(expected)}, got {sorted(self.weights)}")
        self.weights = {k: float_array(self.weights[k]) for k in expected}
        for name, shape in expected.items():
            if self.weights[name].shape != shape:
                raise ShapeError(f"{name}: expected shape {shape}, got {self.weights[name].shape}")

    @classmethod
    def zeros(cls, kind, n: int, m: int, epsilon: float = 1.0, gamma: float = 0.0) -> "CellParams":
        shapes = weight_shapes(kind, n, m)
        return cls(CellKind(kind), n, m, {k: np.zeros(s) for k, s in shapes.items()}, epsilon, gamma)

    @property
    def state_dim(self) -> int:
        return 2 * self.n if self.kind == CellKind.LSTM else self.n

    @property
    def w_upper(self) -> AntisymmetricParam:
        return AntisymmetricParam(self.n, self.weights["w_upper"])

    def transition_matrix(self) -> np.ndarray:
        """The hidden-to-hidden matrix M shared by update and gate."""
        if self.kind == CellKind.LSTM:
            raise ValueError("LSTM cells have no single transition matrix")
        if self.kind in ANTISYM_KINDS:
            m = expand_antisymmetric(self.w_upper)
            if self.kind != CellKind.ANTISYM:
                m[np.diag_indices(self.n)] -= self.gamma
            return m
        return self.weights["w_h"]

    def copy(self) -> "CellParams":
        return CellParams(self.kind, self.n, self.m, {k: v.copy() for k, v in self.weights.items()},
                          self.epsilon, self.gamma)


@dataclass
class StepCache:
    h_prev: np.ndarray
    x: np.ndarray
    a: np.ndarray  # update pre-activation; for LSTM the stacked gate pre-activations
    h: np.ndarray
    tanh_a: np.ndarray | None = None
    s: np.ndarray | None = None
    z: np.ndarray | None = None
    c_prev: np.ndarray | None = None
    c: np.ndarray | None = None
    tanh_c: np.ndarray | None = None
    gates: dict = field(default_factory=dict)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class PreparedCell:
    """Derived matrices computed once per unroll."""

    def __init__(self, p: CellParams):
        self.p = p
        self.kind = p.kind
        self.eps = p.epsilon
        w = p.weights
        if p.kind == CellKind.LSTM:
            self.W = np.concatenate([w[f"w_{g}"] for g in LSTM_GATES], axis=0)
            self.b = np.concatenate([w[f"b_{g}"] for g in LSTM_GATES])
        else:
            self.M = p.transition_matrix()
            self.MT = np.ascontiguousarray(self.M.T)
            self.VhT = np.ascontiguousarray(w["v_h"].T)
            if p.kind in GATED_KINDS:
                self.VzT = np.ascontiguousarray(w["v_z"].T)

    def step(self, H, C, X):
        kind, eps, w = self.kind, self.eps, self.p.weights
        if kind == CellKind.LSTM:
            n = self.p.n
            Z = np.concatenate([H, X], axis=1)
            pre = Z @ self.W.T + self.b
            f = sigmoid(pre[:, :n])
            i = sigmoid(pre[:, n:2 * n])
            o = sigmoid(pre[:, 2 * n:3 * n])
            g = np.tanh(pre[:, 3 * n:])
            Cn = f * C + i * g
            tc = np.tanh(Cn)
            Hn = o * tc
            cache = StepCache(H, X, pre, Hn, c_prev=C, c=Cn, tanh_c=tc,
                              gates={"f": f, "i": i, "o": o, "g": g, "z_in": Z})
            return Hn, Cn, cache
        hm = H @ self.MT
        a = hm + X @ self.VhT + w["b_h"]
        ta = np.tanh(a)
        if kind == CellKind.VANILLA:
            return ta, None, StepCache(H, X, a, ta, tanh_a=ta)
        if kind in GATED_KINDS:
            s = hm + X @ self.VzT + w["b_z"]
            z = sigmoid(s)
            Hn = H + eps * (z * ta)
            return Hn, None, StepCache(H, X, a, Hn, tanh_a=ta, s=s, z=z)
        Hn = H + eps * ta
        return Hn, None, StepCache(H, X, a, Hn, tanh_a=ta)

    def zero_grads(self) -> dict[str, np.ndarray]:
        grads = {k: np.zeros_like(v) for k, v in self.p.weights.items()}
        if self.kind == CellKind.LSTM:
            grads["_W"] = np.zeros_like(self.W)
            grads["_b"] = np.zeros_like(self.b)
        else:
            grads["_M"] = np.zeros_like(self.M)
        return grads

    def backward_step(self, cache: StepCache, dH, dC, grads):
        """Accumulate parameter gradients; return (dH_prev, dC_prev)."""
        kind, eps = self.kind, self.eps
        if kind == CellKind.LSTM:
            n = self.p.n
            gt = cache.gates
            f, i, o, g = gt["f"], gt["i"], gt["o"], gt["g"]
            tc = cache.tanh_c
            dc = dC + dH * o * (1.0 - tc * tc)
            dpre = np.concatenate([
                dc * cache.c_prev * f * (1.0 - f),
                dc * g * i * (1.0 - i),
                dH * tc * o * (1.0 - o),
                dc * i * (1.0 - g * g),
            ], axis=1)
            grads["_W"] += dpre.T @ gt["z_in"]
            grads["_b"] += dpre.sum(axis=0)
            dZ = dpre @ self.W
            return dZ[:, :n], dc * f
        w_grad = grads
        if kind == CellKind.VANILLA:
            da = dH * (1.0 - cache.h * cache.h)
            w_grad["_M"] += da.T @ cache.h_prev
            w_grad["v_h"] += da.T @ cache.x
            w_grad["b_h"] += da.sum(axis=0)
            return da @ self.M, None
        ta = cache.tanh_a
        if kind in GATED_KINDS:
            z = cache.z
            da = eps * dH * z * (1.0 - ta * ta)
            ds = eps * dH * ta * z * (1.0 - z)
            dm = da + ds
            w_grad["_M"] += dm.T @ cache.h_prev
            w_grad["v_h"] += da.T @ cache.x
            w_grad["b_h"] += da.sum(axis=0)
            w_grad["v_z"] += ds.T @ cache.x
            w_grad["b_z"] += ds.sum(axis=0)
            return dH + dm @ self.M, None
        da = eps * dH * (1.0 - ta * ta)
        w_grad["_M"] += da.T @ cache.h_prev
        w_grad["v_h"] += da.T @ cache.x
        w_grad["b_h"] += da.sum(axis=0)
        return dH + da @ self.M, None

    def finish_grads(self, grads) -> dict[str, np.ndarray]:
        """Map accumulated gradients of derived matrices back onto stored weights."""
        if self.kind == CellKind.LSTM:
            n = self.p.n
            W, b = grads.pop("_W"), grads.pop("_b")
            for k, g in enumerate(LSTM_GATES):
                grads[f"w_{g}"] += W[k * n:(k + 1) * n]
                grads[f"b_{g}"] += b[k * n:(k + 1) * n]
            return grads
        gm = grads.pop("_M")
        if self.kind in ANTISYM_KINDS:
            grads["w_upper"] += reduce_antisymmetric_grad(gm)
        else:
            grads["w_h"] += gm
        return grads


def _check_vec(v, size: int, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.size != size:
        raise ShapeError(f"{name}: expected {size} entries, got {v.size}")
    return v


def cell_step(p: CellParams, h_prev, c_prev, x):
    """One transition; returns (h, c, cache) with c None except for LSTM."""
    h_prev = _check_vec(h_prev, p.n, "h_prev")
    x = _check_vec(x, p.m, "x")
    if (p.kind == CellKind.LSTM) != (c_prev is not None):
        raise ValueError("c_prev must be given for LSTM cells and only for them")
    C = _check_vec(c_prev, p.n, "c_prev")[None, :] if c_prev is not None else None
    H, Cn, cache = PreparedCell(p).step(h_prev[None, :], C, x[None, :])
    return H[0], (Cn[0] if Cn is not None else None), cache


def step_jacobian(p: CellParams, cache: StepCache, index: int = 0) -> np.ndarray:
    """d(state_t)/d(state_{t-1}) at the cached point; (h, c) stacked for LSTM."""
    n = p.n
    if cache.h_prev.shape[-1] != n or cache.x.shape[-1] != p.m:
        raise ShapeError("cache does not match cell parameters")
    if p.kind == CellKind.LSTM:
        if cache.c_prev is None:
            raise ValueError("cache was not produced by an LSTM cell")
        gt = {k: v[index] for k, v in cache.gates.items()}
        f, i, o, g = gt["f"], gt["i"], gt["o"], gt["g"]
        tc = cache.tanh_c[index]
        cp = cache.c_prev[index]
        wh = {k: p.weights[f"w_{k}"][:, :n] for k in LSTM_GATES}
        dc_dh = ((cp * f * (1 - f))[:, None] * wh["f"] + (g * i * (1 - i))[:, None] * wh["i"]
                 + (i * (1 - g * g))[:, None] * wh["c"])
        dtc = o * (1 - tc * tc)
        dh_dh = (tc * o * (1 - o))[:, None] * wh["o"] + dtc[:, None] * dc_dh
        jac = np.zeros((2 * n, 2 * n))
        jac[:n, :n] = dh_dh
        jac[:n, n:] = np.diag(dtc * f)
        jac[n:, :n] = dc_dh
        jac[n:, n:] = np.diag(f)
        return jac
    M = p.transition_matrix()
    if p.kind == CellKind.VANILLA:
        h = cache.h[index]
        return (1 - h * h)[:, None] * M
    ta = cache.tanh_a[index]
    if p.kind in GATED_KINDS:
        if cache.z is None:
            raise ValueError("cache was not produced by a gated cell")
        z = cache.z[index]
        d = z * (1 - ta * ta) + ta * z * (1 - z)
    else:
        d = 1 - ta * ta
    return np.eye(n) + p.epsilon * d[:, None] * M


def param_count(kind: CellKind | str, n: int, m: int, classes: int) -> int:
    """Trainable scalars in the cell plus the linear readout."""
    kind = CellKind(kind)
    readout = n * classes + classes
    if kind == CellKind.LSTM:
        return 4 * (n * (n + m) + n) + readout
    hidden = n * (n - 1) // 2 if kind in ANTISYM_KINDS else n * n
    count = hidden + n * m + n
    if kind in GATED_KINDS:
        count += n * m + n
    return count + readout
