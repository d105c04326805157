"""Single-hidden-layer linear autoencoder trained with Adam and weight decay.

The model is ``codes = W1 y + b1`` and ``recon = W2 codes + b2`` with no
activation. The per-step objective is the mean over batch columns of the
squared reconstruction error plus ``weight_decay / 2 * (|W1|_F^2 + |W2|_F^2)``;
biases are never decayed so they can absorb the data mean. Inputs are not
centered anywhere in this module.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, fields

import numpy as np

from .matrix import DimensionError, RandomSource, gaussian_fill

PARAM_NAMES = ("w1", "b1", "w2", "b2")


class NumericalError(FloatingPointError):
    """Training produced a non-finite value."""


@dataclass
class AutoencoderParams:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        m, n = self.w1.shape
        if self.w2.shape != (n, m) or self.b1.shape != (m,) or self.b2.shape != (n,):
            raise DimensionError(
                f"inconsistent parameter shapes: w1 {self.w1.shape}, b1 {self.b1.shape}, "
                f"w2 {self.w2.shape}, b2 {self.b2.shape}"
            )

    @property
    def n(self) -> int:
        return self.w1.shape[1]

    @property
    def m(self) -> int:
        return self.w1.shape[0]

    def items(self):
        return [(name, getattr(self, name)) for name in PARAM_NAMES]

    def copy(self) -> "AutoencoderParams":
        return AutoencoderParams(*(getattr(self, k).copy() for k in PARAM_NAMES))

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for _, v in self.items())


@dataclass
class AdamState:
    first_moment: AutoencoderParams
    second_moment: AutoencoderParams
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: AutoencoderParams, **kw) -> "AdamState":
        zeros = lambda: AutoencoderParams(*(np.zeros_like(v) for _, v in params.items()))  # noqa: E731
        return cls(zeros(), zeros(), **kw)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 4e-3
    weight_decay: float = 0.4
    batch_size: int = 32
    epochs: int = 200
    seed: int = 0
    init_scale: float = 0.1
    # fraction of epochs, counted from the end, whose iterates are averaged into the result
    tail_average: float = 0.5

    def validate(self) -> None:
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if not self.weight_decay >= 0:
            raise ValueError(f"weight_decay must be non-negative, got {self.weight_decay}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if not self.init_scale > 0:
            raise ValueError(f"init_scale must be positive, got {self.init_scale}")
        if not 0.0 <= self.tail_average <= 1.0:
            raise ValueError(f"tail_average must lie in [0, 1], got {self.tail_average}")

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class TrainReport:
    """Loss trace of the running iterate plus the loss of the returned parameters.

    ``final_loss`` differs from ``epoch_loss[-1]`` when tail averaging is on.
    """

    initial_loss: float
    epoch_loss: list[float] = field(default_factory=list)
    epoch_recon: list[float] = field(default_factory=list)
    final_loss: float = float("nan")
    final_recon: float = float("nan")
    averaged_steps: int = 0
    wall_time: float = 0.0


def init_params(n: int, m: int, config: TrainConfig, rng: RandomSource | None = None) -> AutoencoderParams:
    if not 1 <= m < n:
        raise ValueError(f"bottleneck must satisfy 1 <= m < n, got m={m}, n={n}")
    rng = rng if rng is not None else RandomSource(config.seed)
    w1 = gaussian_fill(rng, m, n, config.init_scale)
    w2 = gaussian_fill(rng, n, m, config.init_scale)
    return AutoencoderParams(w1, np.zeros(m), w2, np.zeros(n))


def _check_batch(params: AutoencoderParams, batch: np.ndarray) -> None:
    if batch.ndim != 2 or batch.shape[0] != params.n:
        raise DimensionError(f"batch of shape {batch.shape} does not match input dimension {params.n}")


def forward(params: AutoencoderParams, batch: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    _check_batch(params, batch)
    codes = params.w1 @ batch + params.b1[:, None]
    recon = params.w2 @ codes + params.b2[:, None]
    return codes, recon


def regularizer(params: AutoencoderParams, weight_decay: float) -> float:
    return 0.5 * weight_decay * (float(np.sum(params.w1**2)) + float(np.sum(params.w2**2)))


def reconstruction_loss(params: AutoencoderParams, batch: np.ndarray) -> float:
    """Mean over columns of the squared reconstruction error."""
    _, recon = forward(params, batch)
    return float(np.sum((batch - recon) ** 2)) / batch.shape[1]


def loss(params: AutoencoderParams, batch: np.ndarray, weight_decay: float = 0.0) -> float:
    return reconstruction_loss(params, batch) + regularizer(params, weight_decay)


def gradients(params: AutoencoderParams, batch: np.ndarray, weight_decay: float = 0.0) -> AutoencoderParams:
    codes, recon = forward(params, batch)
    scale = 2.0 / batch.shape[1]
    err = recon - batch
    back = params.w2.T @ err
    return AutoencoderParams(
        w1=scale * back @ batch.T + weight_decay * params.w1,
        b1=scale * back.sum(axis=1),
        w2=scale * err @ codes.T + weight_decay * params.w2,
        b2=scale * err.sum(axis=1),
    )


def adam_step(
    params: AutoencoderParams, grads: AutoencoderParams, state: AdamState, learning_rate: float
) -> tuple[AutoencoderParams, AdamState]:
    """Apply one bias-corrected Adam update in place; returns ``(params, state)``."""
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1**t
    corr2 = 1.0 - b2**t
    for name in PARAM_NAMES:
        p, g = getattr(params, name), getattr(grads, name)
        if p.shape != g.shape:
            raise DimensionError(f"gradient for {name} has shape {g.shape}, expected {p.shape}")
        mom = getattr(state.first_moment, name)
        sec = getattr(state.second_moment, name)
        mom *= b1
        mom += (1.0 - b1) * g
        sec *= b2
        sec += (1.0 - b2) * g * g
        p -= learning_rate * (mom / corr1) / (np.sqrt(sec / corr2) + state.eps)
    return params, state


def train(
    observations: np.ndarray,
    m: int,
    config: TrainConfig,
    *,
    on_epoch=None,
) -> tuple[AutoencoderParams, TrainReport]:
    """Minibatch Adam on the raw (uncentered) observations, one per column.

    Each epoch visits every observation once in an order drawn from a stream
    keyed on ``(config.seed, epoch)``. With ``tail_average > 0`` the returned
    parameters are the running mean of the iterates over the last
    ``ceil(tail_average * epochs)`` epochs; otherwise the last iterate.
    ``on_epoch(epoch, params, report)`` is called after every epoch if given.
    """
    observations = getattr(observations, "observations", observations)
    config.validate()
    n, count = observations.shape
    if not 1 <= m < n:
        raise ValueError(f"bottleneck must satisfy 1 <= m < n, got m={m}, n={n}")
    if count < config.batch_size:
        raise ValueError(f"dataset has {count} observations, fewer than batch_size={config.batch_size}")

    root = RandomSource(config.seed)
    params = init_params(n, m, config, root)
    state = AdamState.zeros_like(params)
    report = TrainReport(initial_loss=loss(params, observations, config.weight_decay))
    started = time.perf_counter()
    steps = math.ceil(count / config.batch_size)
    average_start = config.epochs - math.ceil(config.tail_average * config.epochs)
    average = None
    for epoch in range(config.epochs):
        order = root.spawn(epoch).permutation(count)
        for k in range(steps):
            batch = observations[:, order[k * config.batch_size : (k + 1) * config.batch_size]]
            grads = gradients(params, batch, config.weight_decay)
            adam_step(params, grads, state, config.learning_rate)
            if epoch >= average_start:
                report.averaged_steps += 1
                if average is None:
                    average = params.copy()
                else:
                    for name, value in params.items():
                        mean = getattr(average, name)
                        mean += (value - mean) / report.averaged_steps
        if not params.all_finite():
            raise NumericalError(f"non-finite parameters after epoch {epoch + 1}")
        recon = reconstruction_loss(params, observations)
        report.epoch_recon.append(recon)
        report.epoch_loss.append(recon + regularizer(params, config.weight_decay))
        if on_epoch is not None:
            on_epoch(epoch, params, report)
    result = average if average is not None else params
    report.final_recon = reconstruction_loss(result, observations)
    report.final_loss = report.final_recon + regularizer(result, config.weight_decay)
    report.wall_time = time.perf_counter() - started
    return result, report
