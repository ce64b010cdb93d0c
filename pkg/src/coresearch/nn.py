"""Trainable-parameter machinery: stores, AdamW, schedules, grad checking.

All tensors are float64 numpy arrays. There is no autodiff tape: every
scoring expression in the package carries a hand-derived backward pass, and
this module supplies the shared primitives (affine, tanh, softmax/NLL,
dropout) plus a finite-difference checker that keeps them honest.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import TrainingError, ValidationError


class ParamStore:
    """Named tensors with co-located gradient buffers.

    Initialization is uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)), seeded;
    fan_in defaults to the trailing dimension. Not safe to share across
    concurrent trainers; frozen snapshots are plain dicts and are.
    """

    def __init__(self, seed: int = 0):
        self._rng = np.random.default_rng(seed)
        self._values: dict[str, np.ndarray] = {}
        self._grads: dict[str, np.ndarray] = {}

    def add(self, name: str, shape: tuple[int, ...], fan_in: int | None = None, zero: bool = False) -> np.ndarray:
        if name in self._values:
            raise ValidationError(f"parameter {name!r} already exists")
        if zero:
            value = np.zeros(shape)
        else:
            if fan_in is None:
                fan_in = shape[-1] if shape else 1
            bound = 1.0 / np.sqrt(max(1, fan_in))
            value = self._rng.uniform(-bound, bound, size=shape)
        self._values[name] = value
        self._grads[name] = np.zeros(shape)
        return value

    def __getitem__(self, name: str) -> np.ndarray:
        return self._values[name]

    def __contains__(self, name: str) -> bool:
        return name in self._values

    def grad(self, name: str) -> np.ndarray:
        return self._grads[name]

    def names(self) -> list[str]:
        return list(self._values)

    def zero_grads(self) -> None:
        for g in self._grads.values():
            g[...] = 0.0

    def scale_grads(self, factor: float) -> None:
        """Rescale all accumulated gradients (e.g. to average over a batch)."""
        for g in self._grads.values():
            g *= factor

    def num_scalars(self) -> int:
        return sum(v.size for v in self._values.values())

    def snapshot(self) -> dict[str, np.ndarray]:
        """Immutable copy of the current values (for eval-mode inference)."""
        return {k: v.copy() for k, v in self._values.items()}

    def load(self, values: dict[str, np.ndarray]) -> None:
        for name, v in values.items():
            if name not in self._values:
                self.add(name, v.shape, zero=True)
            if self._values[name].shape != v.shape:
                raise ValidationError(
                    f"parameter {name!r}: shape {v.shape} != existing {self._values[name].shape}"
                )
            self._values[name][...] = v


@dataclass
class OptimizerState:
    """AdamW moments plus the training-schedule hyperparameters."""

    lr: float = 1e-2
    weight_decay: float = 0.01
    warmup_fraction: float = 0.1
    total_steps: int = 1
    dropout_rate: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def lr_at(self, step: int) -> float:
        """Linear warmup over the first warmup_fraction of steps, then
        linear decay to 0 at total_steps."""
        warmup = int(self.warmup_fraction * self.total_steps)
        if step <= warmup:
            return self.lr * step / max(1, warmup)
        remaining = self.total_steps - step
        return self.lr * max(0.0, remaining / max(1, self.total_steps - warmup))


def adamw_step(params: ParamStore, state: OptimizerState) -> float:
    """One decoupled-weight-decay Adam update over every parameter.

    theta <- theta - lr_t * m_hat / (sqrt(v_hat) + eps) - lr_t * wd * theta

    Returns the effective learning rate lr_t. Raises TrainingError on a
    non-finite gradient, naming the tensor.
    """
    state.step += 1
    t = state.step
    lr_t = state.lr_at(t)
    for name in params.names():
        g = params.grad(name)
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient in tensor {name!r} at step {t}")
        if name not in state.m:
            state.m[name] = np.zeros_like(g)
            state.v[name] = np.zeros_like(g)
        m, v = state.m[name], state.v[name]
        m *= state.beta1
        m += (1 - state.beta1) * g
        v *= state.beta2
        v += (1 - state.beta2) * g * g
        m_hat = m / (1 - state.beta1**t)
        v_hat = v / (1 - state.beta2**t)
        theta = params[name]
        theta -= lr_t * (m_hat / (np.sqrt(v_hat) + state.eps))
        theta -= lr_t * state.weight_decay * theta
    return lr_t


def softmax(scores: np.ndarray) -> np.ndarray:
    """Numerically stabilized softmax over the last axis."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ValidationError("softmax over empty input")
    z = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(scores: np.ndarray) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ValidationError("log_softmax over empty input")
    z = scores - scores.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def nll_from_logits(logits: np.ndarray, target: int) -> tuple[float, np.ndarray]:
    """-log softmax(logits)[target] and its gradient w.r.t. the logits."""
    p = softmax(logits)
    loss = -log_softmax(logits)[target]
    d = p.copy()
    d[target] -= 1.0
    return float(loss), d


def affine(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """x @ w.T + b with x of shape (..., d_in), w of shape (d_out, d_in)."""
    return x @ w.T + b


def affine_backward(
    d_out: np.ndarray, x: np.ndarray, w: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (d_x, d_w, d_b)."""
    d_x = d_out @ w
    flat_out = d_out.reshape(-1, d_out.shape[-1])
    flat_x = x.reshape(-1, x.shape[-1])
    d_w = flat_out.T @ flat_x
    d_b = flat_out.sum(axis=0)
    return d_x, d_w, d_b


def tanh_backward(d_out: np.ndarray, tanh_out: np.ndarray) -> np.ndarray:
    return d_out * (1.0 - tanh_out * tanh_out)


def dropout_mask(shape: tuple[int, ...], rate: float, rng: np.random.Generator) -> np.ndarray:
    """Inverted-dropout multiplier: 0 with probability rate, else 1/(1-rate).

    Rate 0 returns an all-ones mask, so dropout(0) is the identity and the
    expectation over masks preserves the mean activation.
    """
    if rate <= 0.0:
        return np.ones(shape)
    keep = rng.random(shape) >= rate
    return keep / (1.0 - rate)


def grad_check(
    f,
    params: ParamStore,
    probe_count: int = 20,
    h: float = 1e-3,
    seed: int = 0,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    f() must zero the store's gradients, run the forward+backward pass, and
    return the scalar loss. probe_count scalar parameters are sampled at
    random and perturbed by +-h.
    """
    rng = np.random.default_rng(seed)
    loss0 = f()
    if not np.isfinite(loss0):
        raise TrainingError(f"loss is not finite at the probe point: {loss0}")
    analytic = {name: params.grad(name).copy() for name in params.names()}

    flat: list[tuple[str, int]] = []
    for name in params.names():
        flat.extend((name, i) for i in range(params[name].size))
    if probe_count < len(flat):
        chosen = rng.choice(len(flat), size=probe_count, replace=False)
        probes = [flat[i] for i in chosen]
    else:
        probes = flat

    worst = 0.0
    for name, idx in probes:
        theta = params[name].reshape(-1)
        orig = theta[idx]
        theta[idx] = orig + h
        loss_plus = f()
        theta[idx] = orig - h
        loss_minus = f()
        theta[idx] = orig
        if not (np.isfinite(loss_plus) and np.isfinite(loss_minus)):
            raise TrainingError(f"loss is not finite while probing {name!r}")
        fd = (loss_plus - loss_minus) / (2 * h)
        ga = analytic[name].reshape(-1)[idx]
        rel = abs(ga - fd) / max(1e-8, abs(ga) + abs(fd))
        worst = max(worst, rel)
    return worst
