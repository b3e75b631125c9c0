"""MLP heads mapping hash encodings to the two target embedding spaces.

One shared hidden layer (softplus, so gradients stay smooth for the
finite-difference checks) feeds two linear heads whose rows are
L2-normalized. Zero rows pass normalization unchanged and carry no
gradient; they only occur with deliberately zeroed weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInput

HIDDEN_SIZE = 600
_ZERO_TOL = 1e-12


def softplus(z: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, z)


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _norm_rows_fwd(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    safe = np.where(norms > _ZERO_TOL, norms, 1.0)
    y = np.where(norms > _ZERO_TOL, x / safe, 0.0)
    return y, norms


def _norm_rows_bwd(dy: np.ndarray, y: np.ndarray, norms: np.ndarray) -> np.ndarray:
    inner = np.sum(dy * y, axis=1, keepdims=True)
    dx = (dy - inner * y) / np.where(norms > _ZERO_TOL, norms, 1.0)
    return np.where(norms > _ZERO_TOL, dx, 0.0)


@dataclass
class FieldHeads:
    """Trunk (d -> hidden) plus the vision-language and semantic heads."""

    w_trunk: np.ndarray
    b_trunk: np.ndarray
    w_v: np.ndarray
    b_v: np.ndarray
    w_s: np.ndarray
    b_s: np.ndarray

    def __post_init__(self):
        d, h = self.w_trunk.shape
        if self.b_trunk.shape != (h,):
            raise InvalidInput("trunk bias shape mismatch")
        if self.w_v.shape[0] != h or self.w_s.shape[0] != h:
            raise InvalidInput("head input dim must match trunk output")
        if self.b_v.shape != (self.w_v.shape[1],) or self.b_s.shape != (self.w_s.shape[1],):
            raise InvalidInput("head bias shape mismatch")
        for arr in self.params().values():
            if not np.all(np.isfinite(arr)):
                raise InvalidInput("head weights must be finite")

    @classmethod
    def init(cls, d: int, dv: int, ds: int, seed: int = 0,
             hidden: int = HIDDEN_SIZE, dtype=np.float32) -> "FieldHeads":
        rng = np.random.default_rng(seed)

        def xavier(fan_in, fan_out):
            a = np.sqrt(6.0 / (fan_in + fan_out))
            return rng.uniform(-a, a, size=(fan_in, fan_out)).astype(dtype)

        return cls(
            w_trunk=xavier(d, hidden),
            b_trunk=np.zeros(hidden, dtype=dtype),
            w_v=xavier(hidden, dv),
            b_v=np.zeros(dv, dtype=dtype),
            w_s=xavier(hidden, ds),
            b_s=np.zeros(ds, dtype=dtype),
        )

    @classmethod
    def zeros(cls, d: int, dv: int, ds: int, hidden: int = HIDDEN_SIZE,
              dtype=np.float32) -> "FieldHeads":
        return cls(
            w_trunk=np.zeros((d, hidden), dtype=dtype),
            b_trunk=np.zeros(hidden, dtype=dtype),
            w_v=np.zeros((hidden, dv), dtype=dtype),
            b_v=np.zeros(dv, dtype=dtype),
            w_s=np.zeros((hidden, ds), dtype=dtype),
            b_s=np.zeros(ds, dtype=dtype),
        )

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.w_trunk.shape[0], self.w_v.shape[1], self.w_s.shape[1]

    @property
    def hidden(self) -> int:
        return self.w_trunk.shape[1]

    @property
    def dtype(self):
        return self.w_trunk.dtype

    def params(self) -> dict[str, np.ndarray]:
        return {
            "w_trunk": self.w_trunk,
            "b_trunk": self.b_trunk,
            "w_v": self.w_v,
            "b_v": self.b_v,
            "w_s": self.w_s,
            "b_s": self.b_s,
        }

    def astype(self, dtype) -> "FieldHeads":
        return FieldHeads(**{k: v.astype(dtype) for k, v in self.params().items()})

    def forward(self, enc: np.ndarray, want_cache: bool = False):
        """Map encodings (B, d) to normalized (F_v, F_s) rows."""
        z = enc @ self.w_trunk + self.b_trunk
        a = softplus(z)
        fv_raw = a @ self.w_v + self.b_v
        fs_raw = a @ self.w_s + self.b_s
        f_v, nv = _norm_rows_fwd(fv_raw)
        f_s, ns = _norm_rows_fwd(fs_raw)
        if not want_cache:
            return f_v, f_s
        cache = {"enc": enc, "z": z, "a": a, "f_v": f_v, "f_s": f_s, "nv": nv, "ns": ns}
        return f_v, f_s, cache

    def backward(self, cache: dict, d_fv: np.ndarray, d_fs: np.ndarray):
        """Backprop through normalization, heads, and trunk.

        Returns (parameter gradient dict, gradient wrt the encodings).
        """
        d_fv_raw = _norm_rows_bwd(d_fv, cache["f_v"], cache["nv"])
        d_fs_raw = _norm_rows_bwd(d_fs, cache["f_s"], cache["ns"])
        a = cache["a"]
        grads = {
            "w_v": a.T @ d_fv_raw,
            "b_v": d_fv_raw.sum(axis=0),
            "w_s": a.T @ d_fs_raw,
            "b_s": d_fs_raw.sum(axis=0),
        }
        d_a = d_fv_raw @ self.w_v.T + d_fs_raw @ self.w_s.T
        d_z = d_a * sigmoid(cache["z"])
        grads["w_trunk"] = cache["enc"].T @ d_z
        grads["b_trunk"] = d_z.sum(axis=0)
        d_enc = d_z @ self.w_trunk.T
        return grads, d_enc
