"""The implicit scene function: hash encoder composed with the MLP heads."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimMismatch, InvalidInput
from ..hashgrid import HashGrid, HashGridConfig, SparseTableGrads
from .heads import FieldHeads
from .loss import LossConfig, contrastive_loss_grads


@dataclass
class LopField:
    """Trainable mapping from 3D positions to (vision-language, semantic)
    embedding pairs, plus the learned temperature."""

    grid: HashGrid
    heads: FieldHeads
    log_tau: float
    loss_config: LossConfig

    def __post_init__(self):
        d, dv, ds = self.heads.dims
        if d != self.grid.config.output_dim:
            raise DimMismatch(
                f"heads expect d={d}, grid outputs {self.grid.config.output_dim}"
            )

    @classmethod
    def init(cls, grid_config: HashGridConfig, dv: int, ds: int, seed: int = 0,
             loss_config: LossConfig = LossConfig(), dtype=np.float32) -> "LopField":
        ss = np.random.SeedSequence(seed)
        grid_seed, heads_seed = (int(s.generate_state(1)[0]) for s in ss.spawn(2))
        grid = HashGrid.init(grid_config, seed=grid_seed, dtype=dtype)
        heads = FieldHeads.init(
            grid_config.output_dim, dv, ds, seed=heads_seed, dtype=dtype
        )
        return cls(grid=grid, heads=heads,
                   log_tau=loss_config.log_tau_init, loss_config=loss_config)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.heads.dims

    @property
    def tau(self) -> float:
        return float(np.exp(self.log_tau))

    def astype(self, dtype) -> "LopField":
        return LopField(self.grid.astype(dtype), self.heads.astype(dtype),
                        self.log_tau, self.loss_config)

    def forward(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Normalized embeddings (F_v, F_s) for points (B, 3)."""
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        if len(pts) < 1:
            raise InvalidInput("forward needs at least one point")
        enc = self.grid.encode(pts)
        f_v, f_s = self.heads.forward(enc)
        return f_v, f_s


@dataclass
class FieldGradients:
    tables: SparseTableGrads
    heads: dict[str, np.ndarray]
    log_tau: float


def total_loss(
    field: LopField,
    positions: np.ndarray,
    e_v: np.ndarray,
    e_s: np.ndarray,
    dists: np.ndarray,
    confs: np.ndarray,
) -> tuple[float, FieldGradients]:
    """Combined vision-language + semantic contrastive loss with gradients.

    The vision branch weights rows by exp(-dist); the semantic branch by the
    detection confidence.
    """
    cfg = field.loss_config
    pts = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    dtype = field.heads.dtype
    e_v = np.asarray(e_v, dtype=dtype)
    e_s = np.asarray(e_s, dtype=dtype)
    if e_v.shape[1] != field.dims[1] or e_s.shape[1] != field.dims[2]:
        raise DimMismatch(
            f"target dims {(e_v.shape[1], e_s.shape[1])} != field dims {field.dims[1:]}"
        )
    tau = field.tau

    enc = field.grid.encode(pts)
    f_v, f_s, cache = field.heads.forward(enc, want_cache=True)

    w_v = np.exp(-np.asarray(dists, dtype=dtype))
    w_s = np.asarray(confs, dtype=dtype)
    loss_v, d_fv, d_tau_v = contrastive_loss_grads(f_v, e_v, w_v, tau)
    loss_s, d_fs, d_tau_s = contrastive_loss_grads(f_s, e_s, w_s, tau)

    loss = cfg.weight_v * loss_v + cfg.weight_s * loss_s
    head_grads, d_enc = field.heads.backward(
        cache, cfg.weight_v * d_fv, cfg.weight_s * d_fs
    )
    table_grads = field.grid.encode_backward(pts, d_enc)
    d_log_tau = (cfg.weight_v * d_tau_v + cfg.weight_s * d_tau_s) * tau
    return loss, FieldGradients(tables=table_grads, heads=head_grads, log_tau=d_log_tau)
