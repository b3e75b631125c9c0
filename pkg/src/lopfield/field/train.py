"""Training loop: weighted sampling, Adam, and the learning-rate schedule.

Dense parameters (trunk, heads, log-tau) use standard Adam. Hash tables use
lazy per-row Adam: moments update only on rows touched by the batch, with
bias correction driven by the global step, which keeps the cost proportional
to the batch instead of the table. Everything is seeded, so two runs with
the same seed produce bitwise-identical parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..embed.cloud import FeaturePointCloud
from ..errors import DimMismatch, NoData
from ..hashgrid import HashGridConfig
from .core import FieldGradients, LopField, total_loss
from .loss import LossConfig


@dataclass(frozen=True)
class TrainConfig:
    """Desk-scale defaults; :meth:`paper_scale` restores the full recipe."""

    batch_size: int = 512
    epochs: int = 20
    samples_per_epoch: int = 50_000
    learning_rate: float = 1e-4
    lr_decay: float = 3e-3
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 for in-batch negatives")
        if self.epochs < 1 or self.samples_per_epoch < 1:
            raise ValueError("epochs and samples_per_epoch must be >= 1")

    @classmethod
    def paper_scale(cls, seed: int = 0) -> "TrainConfig":
        return cls(
            batch_size=12544,
            epochs=100,
            samples_per_epoch=3_000_000,
            learning_rate=1e-4,
            lr_decay=3e-3,
            seed=seed,
        )

    def lr_at(self, epoch: int) -> float:
        return self.learning_rate * (1.0 - self.lr_decay) ** epoch

    def to_dict(self) -> dict:
        return {
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "samples_per_epoch": self.samples_per_epoch,
            "learning_rate": self.learning_rate,
            "lr_decay": self.lr_decay,
            "seed": self.seed,
        }


class _Adam:
    """Standard Adam for one dense array."""

    def __init__(self, shape, dtype, beta1=0.9, beta2=0.999, eps=1e-8):
        self.m = np.zeros(shape, dtype=dtype)
        self.v = np.zeros(shape, dtype=dtype)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps

    def step(self, param: np.ndarray, grad: np.ndarray, lr: float, t: int) -> None:
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1**t)
        v_hat = self.v / (1 - self.beta2**t)
        param -= (lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(param.dtype)


class _SparseAdam:
    """Lazy Adam over hash-table rows: touched rows only."""

    def __init__(self, shape, dtype, beta1=0.9, beta2=0.999, eps=1e-8):
        self.m = np.zeros(shape, dtype=dtype)
        self.v = np.zeros(shape, dtype=dtype)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps

    def step(self, param, rows, grad_rows, lr: float, t: int) -> None:
        m = self.beta1 * self.m[rows] + (1 - self.beta1) * grad_rows
        v = self.beta2 * self.v[rows] + (1 - self.beta2) * grad_rows * grad_rows
        self.m[rows] = m
        self.v[rows] = v
        m_hat = m / (1 - self.beta1**t)
        v_hat = v / (1 - self.beta2**t)
        param[rows] -= (lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(param.dtype)


def _weighted_batch(rng, weights: np.ndarray, size: int) -> np.ndarray:
    """Weight-proportional sample without replacement (exponential keys)."""
    n = len(weights)
    size = min(size, n)
    keys = rng.exponential(size=n) / weights
    idx = np.argpartition(keys, size - 1)[:size]
    return np.sort(idx)


@dataclass
class TrainResult:
    field: LopField
    epoch_losses: list[float]
    config: TrainConfig


def train(
    cloud: FeaturePointCloud,
    grid_config: HashGridConfig | None = None,
    train_config: TrainConfig = TrainConfig(),
    loss_config: LossConfig = LossConfig(),
    seed: int | None = None,
    init_field: LopField | None = None,
    checkpoint_path=None,
    log_every: int = 0,
) -> TrainResult:
    """Fit a field to a feature cloud; optionally fine-tune ``init_field``.

    ``seed`` overrides ``train_config.seed``. When ``checkpoint_path`` is
    given the trained field is saved there.
    """
    if len(cloud) < 2:
        raise NoData("training needs at least 2 cloud points")
    dv, ds = cloud.dims
    run_seed = train_config.seed if seed is None else seed

    if init_field is not None:
        if init_field.dims[1:] != (dv, ds):
            raise DimMismatch(
                f"checkpoint dims {init_field.dims[1:]} != cloud dims {(dv, ds)}"
            )
        field = init_field
    else:
        if grid_config is None:
            lo, hi = cloud.bounds()
            grid_config = HashGridConfig().with_bounds(lo, hi)
        field = LopField.init(grid_config, dv, ds, seed=run_seed, loss_config=loss_config)

    rng = np.random.default_rng(np.random.SeedSequence([run_seed, 0x5A17]))
    weights = cloud.weights.astype(np.float64)
    positions = cloud.positions.astype(np.float64)

    tables_opt = [
        _SparseAdam(t.shape, np.float32) for t in field.grid.tables
    ]
    heads_opt = {k: _Adam(v.shape, np.float32) for k, v in field.heads.params().items()}
    tau_opt = _Adam((), np.float64)

    batches_per_epoch = max(1, math.ceil(train_config.samples_per_epoch / train_config.batch_size))
    epoch_losses: list[float] = []
    step = 0
    for epoch in range(train_config.epochs):
        lr = train_config.lr_at(epoch)
        losses = []
        for _ in range(batches_per_epoch):
            idx = _weighted_batch(rng, weights, train_config.batch_size)
            if len(idx) < 2:
                idx = np.arange(min(2, len(cloud)))
            loss, grads = total_loss(
                field,
                positions[idx],
                cloud.e_v[idx],
                cloud.e_s[idx],
                cloud.dists[idx],
                cloud.confs[idx],
            )
            step += 1
            _apply(field, grads, tables_opt, heads_opt, tau_opt, lr, step)
            losses.append(loss)
        epoch_losses.append(float(np.mean(losses)))
        if log_every and (epoch + 1) % log_every == 0:
            print(f"epoch {epoch + 1}/{train_config.epochs}: loss {epoch_losses[-1]:.4f}")

    result = TrainResult(field=field, epoch_losses=epoch_losses, config=train_config)
    if checkpoint_path is not None:
        from .checkpoint import save_checkpoint

        save_checkpoint(field, checkpoint_path)
    return result


def _apply(field, grads: FieldGradients, tables_opt, heads_opt, tau_opt, lr, step):
    for level, opt in enumerate(tables_opt):
        rows, grad_rows = grads.tables.rows(level)
        if len(rows):
            opt.step(field.grid.tables[level], rows, grad_rows.astype(np.float32), lr, step)
    params = field.heads.params()
    for name, opt in heads_opt.items():
        opt.step(params[name], grads.heads[name].astype(np.float32), lr, step)
    m = tau_opt
    new_log_tau = np.float64(field.log_tau)
    g = np.float64(grads.log_tau)
    m.m = m.beta1 * m.m + (1 - m.beta1) * g
    m.v = m.beta2 * m.v + (1 - m.beta2) * g * g
    m_hat = m.m / (1 - m.beta1**step)
    v_hat = m.v / (1 - m.beta2**step)
    new_log_tau = new_log_tau - lr * m_hat / (np.sqrt(v_hat) + m.eps)
    field.log_tau = field.loss_config.clamp_log_tau(float(new_log_tau))
