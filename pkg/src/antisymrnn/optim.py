"""Initialization, SGD with momentum, Adagrad and the minibatch training loop."""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .cells import CellKind, CellParams, weight_shapes
from .core import DivergenceError, SeededRng, seeded_gaussian
from .data import SequenceDataset, batches
from .network import ClassifierNet, backward_batch, cross_entropy_batch, forward_batch

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class InitSpec:
    sigma_w: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma_w < 0:
            raise ValueError("sigma_w must be non-negative")


def init_params(kind, n: int, m: int, classes: int, spec: InitSpec,
                epsilon: float = 0.1, gamma: float = 0.0) -> ClassifierNet:
    """Random classifier.

    Input-to-hidden ~ N(0, 1/m); hidden-to-hidden ~ N(0, sigma_w^2/n), drawn
    directly on the stored strict-upper entries for antisymmetric cells;
    biases 0 except LSTM forget bias 1; readout ~ N(0, 1/n).  Tensors are
    drawn in ``weight_shapes`` order from one stream, readout last.
    """
    kind = CellKind(kind)
    rng = SeededRng(spec.seed)
    hidden_std = spec.sigma_w / math.sqrt(n)
    input_std = 1.0 / math.sqrt(m)
    weights = {}
    for name, shape in weight_shapes(kind, n, m).items():
        if name.startswith("b_"):
            weights[name] = np.full(shape, 1.0 if name == "b_f" else 0.0)
        elif name in ("w_upper", "w_h"):
            weights[name] = seeded_gaussian(1, int(np.prod(shape)), 0.0, hidden_std, rng).reshape(shape)
        elif name.startswith("v_"):
            weights[name] = seeded_gaussian(n, m, 0.0, input_std, rng)
        else:  # LSTM gate block [hidden | input]
            weights[name] = np.concatenate([
                seeded_gaussian(n, n, 0.0, hidden_std, rng),
                seeded_gaussian(n, m, 0.0, input_std, rng),
            ], axis=1)
    cell = CellParams(kind, n, m, weights, epsilon, gamma if uses_gamma(kind) else 0.0)
    readout_w = seeded_gaussian(classes, n, 0.0, 1.0 / math.sqrt(n), rng)
    return ClassifierNet(cell, readout_w, np.zeros(classes))


def uses_gamma(kind: CellKind) -> bool:
    return kind in (CellKind.ANTISYM_DIFFUSION, CellKind.ANTISYM_GATED)


def sgd_momentum_update(theta, grad, velocity, lr: float, mu: float):
    """Classical momentum: v <- mu v + g; theta <- theta - lr v."""
    if lr <= 0 or not 0 <= mu < 1:
        raise ValueError("need lr > 0 and 0 <= mu < 1")
    theta, grad, velocity = np.asarray(theta), np.asarray(grad), np.asarray(velocity)
    if not theta.shape == grad.shape == velocity.shape:
        raise ValueError("theta, grad and velocity shapes differ")
    velocity = mu * velocity + grad
    return theta - lr * velocity, velocity


def adagrad_update(theta, grad, accumulator, lr: float, delta0: float = 1e-10):
    """G <- G + g^2; theta <- theta - lr g / (sqrt(G) + delta0)."""
    if lr <= 0 or delta0 <= 0:
        raise ValueError("need lr > 0 and delta0 > 0")
    theta, grad, accumulator = np.asarray(theta), np.asarray(grad), np.asarray(accumulator)
    if not theta.shape == grad.shape == accumulator.shape:
        raise ValueError("theta, grad and accumulator shapes differ")
    accumulator = accumulator + grad * grad
    return theta - lr * grad / (np.sqrt(accumulator) + delta0), accumulator


@dataclass
class OptimizerState:
    kind: str  # "sgd_momentum" or "adagrad"
    lr: float
    mu: float = 0.9
    delta0: float = 1e-10
    slots: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("sgd_momentum", "adagrad"):
            raise ValueError(f"unknown optimizer {self.kind!r}")

    def apply(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        """Update ``params`` in place, in sorted parameter-name order."""
        for name in sorted(params):
            theta = params[name]
            slot = self.slots.get(name)
            if slot is None:
                slot = np.zeros_like(theta)
            if self.kind == "adagrad":
                new, slot = adagrad_update(theta, grads[name], slot, self.lr, self.delta0)
            else:
                new, slot = sgd_momentum_update(theta, grads[name], slot, self.lr, self.mu)
            theta[...] = new
            self.slots[name] = slot


@dataclass
class RunConfig:
    cell: str = "antisym_diffusion"
    n: int = 32
    m: int = 1
    classes: int = 10
    epsilon: float = 0.1
    gamma: float = 0.01
    sigma_w: float = 1.0
    optimizer: str = "adagrad"
    lr: float = 0.1
    momentum: float = 0.9
    delta0: float = 1e-10
    batch_size: int = 128
    iterations: int = 1000
    eval_every: int = 100
    seed: int = 0
    dataset: str = "planted"
    dataset_args: str = ""
    history_out: str = ""

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if f.type in ("int", int) and not isinstance(value, int):
                setattr(self, f.name, int(value))
            elif f.type in ("float", float) and not isinstance(value, float):
                setattr(self, f.name, float(value))
        CellKind(self.cell)
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.eval_every < 1:
            raise ValueError("eval_every must be at least 1")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if self.optimizer not in ("sgd_momentum", "adagrad"):
            raise ValueError("optimizer must be sgd_momentum or adagrad")

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    @classmethod
    def from_mapping(cls, values: dict[str, str]) -> "RunConfig":
        unknown = set(values) - set(cls.keys())
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**values)

    def as_dict(self) -> dict:
        return asdict(self)


def parse_config_text(text: str) -> dict[str, str]:
    """Flat ``key=value`` lines; blank lines and ``#`` comments skipped."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


@dataclass
class TrainHistory:
    records: list[tuple[int, float, float]] = field(default_factory=list)
    final_accuracy: float = float("nan")

    def to_csv(self) -> str:
        lines = ["iteration,train_loss,test_accuracy"]
        for it, loss, acc in self.records:
            lines.append(f"{it},{loss:.17g},{acc:.17g}")
        return "\n".join(lines) + "\n"


def evaluate(net: ClassifierNet, ds: SequenceDataset, chunk: int = 500) -> float:
    correct = 0
    for start in range(0, len(ds), chunk):
        logits, _ = forward_batch(net, ds.sequences[start:start + chunk])
        correct += int((logits.argmax(axis=1) == ds.labels[start:start + chunk]).sum())
    return correct / max(len(ds), 1)


def train_step(net: ClassifierNet, opt: OptimizerState, seqs, labels) -> float:
    logits, tape = forward_batch(net, seqs)
    loss = float(cross_entropy_batch(logits, labels).mean())
    if not math.isfinite(loss):
        raise DivergenceError("training loss is not finite")
    grads = backward_batch(net, tape, labels)
    opt.apply(net.parameters(), grads)
    return loss


def train(config: RunConfig, train_set: SequenceDataset, test_set: SequenceDataset,
          net: ClassifierNet | None = None):
    """Minibatch training; returns (net, history).

    Evaluates test accuracy after every ``eval_every`` iterations (and after
    the last one); ``train_loss`` is the mean minibatch loss since the
    previous record.
    """
    if train_set.m != config.m or test_set.m != config.m:
        raise ValueError(f"datasets have m={train_set.m}/{test_set.m}, config has m={config.m}")
    if max(train_set.classes, test_set.classes) > config.classes:
        raise ValueError("datasets have more classes than the config")
    kind = CellKind(config.cell)
    if net is None:
        net = init_params(kind, config.n, config.m, config.classes, InitSpec(config.sigma_w, config.seed),
                          config.epsilon, config.gamma)
    opt = OptimizerState(config.optimizer, config.lr, config.momentum, config.delta0)
    history = TrainHistory()
    batch_rng = SeededRng(config.seed).substream(1)
    stream = batches(train_set, config.batch_size, batch_rng)
    losses = []
    for it in range(1, config.iterations + 1):
        idx = next(stream)
        try:
            with np.errstate(over="ignore", invalid="ignore"):  # surfaced as DivergenceError
                loss = train_step(net, opt, train_set.sequences[idx], train_set.labels[idx])
        except (DivergenceError, FloatingPointError) as exc:
            history.final_accuracy = history.records[-1][2] if history.records else float("nan")
            raise DivergenceError(f"diverged at iteration {it}: {exc}", step=it, history=history) from exc
        losses.append(loss)
        if it % config.eval_every == 0 or it == config.iterations:
            acc = evaluate(net, test_set)
            history.records.append((it, float(np.mean(losses)), acc))
            log.info("iter %d loss %.4f acc %.4f", it, history.records[-1][1], acc)
            losses = []
    history.final_accuracy = history.records[-1][2] if history.records else evaluate(net, test_set)
    return net, history


def save_checkpoint(net: ClassifierNet, path) -> None:
    cell = net.cell
    arrays = {f"w.{k}": v for k, v in cell.weights.items()}
    np.savez(path, kind=str(cell.kind), n=cell.n, m=cell.m, epsilon=cell.epsilon, gamma=cell.gamma,
             readout_w=net.readout_w, readout_b=net.readout_b, **arrays)


def load_checkpoint(path) -> ClassifierNet:
    with np.load(path) as z:
        weights = {k[2:]: z[k] for k in z.files if k.startswith("w.")}
        cell = CellParams(str(z["kind"]), int(z["n"]), int(z["m"]), weights, float(z["epsilon"]), float(z["gamma"]))
        return ClassifierNet(cell, z["readout_w"], z["readout_b"])

