"""Inference against a trained field: attribute labels and query heatmaps.

Scores are convex mixes of the two branch cosine similarities,
``w * cos_v + (1 - w) * cos_s``. Text and image queries score every sample
point and return a heatmap; the predicted point cloud of a query is its
top-k samples, reduced to a score-weighted centroid for text queries.
Image-localization quality is the similarity-weighted mean distance from
the predicted points to the target view's surface points.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import DimMismatch, InvalidInput, NoSamples, UndefinedEmbedding
from .field.core import LopField
from .embed.providers import EmbeddingProvider
from .validation import as_points, check_unit_rows

DEFAULT_VS_WEIGHT = 0.5
DEFAULT_TOP_K = 50


@dataclass(frozen=True)
class LabelBank:
    """Provider-embedded label set used as the classification target."""

    labels: tuple[str, ...]
    e_v: np.ndarray
    e_s: np.ndarray

    def __post_init__(self):
        if len(self.labels) == 0:
            raise InvalidInput("label bank must be non-empty")
        if len(set(self.labels)) != len(self.labels):
            raise InvalidInput("bank labels must be unique")
        e_v = np.asarray(self.e_v, dtype=np.float64).reshape(len(self.labels), -1)
        e_s = np.asarray(self.e_s, dtype=np.float64).reshape(len(self.labels), -1)
        check_unit_rows(e_v, "bank e_v")
        check_unit_rows(e_s, "bank e_s")
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "e_v", e_v)
        object.__setattr__(self, "e_s", e_s)

    @classmethod
    def from_labels(cls, labels, provider: EmbeddingProvider) -> "LabelBank":
        pairs = [provider.embed_text(label) for label in labels]
        return cls(
            labels=tuple(labels),
            e_v=np.stack([p[0] for p in pairs]),
            e_s=np.stack([p[1] for p in pairs]),
        )

    def index_of(self, label: str) -> int:
        return self.labels.index(label)


@dataclass
class Heatmap:
    """Per-sample similarity scores for one query."""

    points: np.ndarray
    scores: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        self.scores = np.asarray(self.scores, dtype=np.float64).reshape(-1)
        if len(self.points) != len(self.scores):
            raise InvalidInput("points and scores must have equal length")
        if not np.all(np.isfinite(self.scores)):
            raise InvalidInput("scores must be finite")

    @property
    def best(self) -> int:
        return int(np.argmax(self.scores))

    @property
    def best_point(self) -> np.ndarray:
        return self.points[self.best]

    def top_k(self, k: int = DEFAULT_TOP_K) -> np.ndarray:
        """Indices of the k best-scoring samples, best first."""
        k = min(k, len(self.scores))
        order = np.argsort(-self.scores, kind="stable")
        return order[:k]

    def predicted_position(self, k: int = DEFAULT_TOP_K) -> np.ndarray:
        """Score-weighted centroid of the top-k samples.

        Negative scores are clipped to zero; if every top score is
        non-positive the plain mean of the top-k points is used.
        """
        idx = self.top_k(k)
        w = np.clip(self.scores[idx], 0.0, None)
        if w.sum() <= 0:
            return self.points[idx].mean(axis=0)
        return (self.points[idx] * w[:, None]).sum(axis=0) / w.sum()

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["x", "y", "z", "score"])
            for p, s in zip(self.points, self.scores):
                writer.writerow([f"{p[0]:.6g}", f"{p[1]:.6g}", f"{p[2]:.6g}", f"{s:.6g}"])

    def topdown_grid_csv(self, path, cell: float = 0.25) -> None:
        """Bin max scores into a top-down (x, y) grid for plotting."""
        keys = np.floor(self.points[:, :2] / cell).astype(np.int64)
        best: dict[tuple[int, int], float] = {}
        for (kx, ky), s in zip(map(tuple, keys), self.scores):
            cur = best.get((kx, ky))
            if cur is None or s > cur:
                best[(kx, ky)] = float(s)
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["x", "y", "score"])
            for (kx, ky) in sorted(best):
                writer.writerow(
                    [f"{(kx + 0.5) * cell:.6g}", f"{(ky + 0.5) * cell:.6g}", f"{best[(kx, ky)]:.6g}"]
                )


def _branch_scores(field: LopField, points: np.ndarray, e_v, e_s, w: float):
    f_v, f_s = field.forward(points)
    cos_v = f_v.astype(np.float64) @ np.asarray(e_v, dtype=np.float64).T
    cos_s = f_s.astype(np.float64) @ np.asarray(e_s, dtype=np.float64).T
    zero_v = np.linalg.norm(f_v, axis=1) == 0
    zero_s = np.linalg.norm(f_s, axis=1) == 0
    return w * cos_v + (1.0 - w) * cos_s, zero_v, zero_s


def infer_attribute(
    field: LopField, point, bank: LabelBank, w: float = DEFAULT_VS_WEIGHT
) -> tuple[str, np.ndarray]:
    """Classify one 3D point against the bank; ties break to the lowest index."""
    pts = as_points(point, "point")
    scores, zero_v, zero_s = _branch_scores(field, pts, bank.e_v, bank.e_s, w)
    if (w > 0 and zero_v[0]) or (w < 1 and zero_s[0]):
        raise UndefinedEmbedding("field returned a zero embedding at the query point")
    row = scores[0]
    best = int(np.argmax(row))  # argmax returns the first (lowest-index) max
    return bank.labels[best], row


def infer_attribute_batch(
    field: LopField, points, bank: LabelBank, w: float = DEFAULT_VS_WEIGHT
) -> tuple[list[str], np.ndarray]:
    """Vectorized :func:`infer_attribute` without the zero-output check."""
    pts = as_points(points, "points")
    scores, _, _ = _branch_scores(field, pts, bank.e_v, bank.e_s, w)
    best = np.argmax(scores, axis=1)
    return [bank.labels[i] for i in best], scores


def localize_text(
    field: LopField,
    query: str,
    provider: EmbeddingProvider,
    samples,
    w: float = DEFAULT_VS_WEIGHT,
) -> Heatmap:
    """Score every sample point against an embedded text query."""
    pts = _require_samples(samples)
    e_v, e_s = provider.embed_text(query)
    scores, _, _ = _branch_scores(field, pts, e_v[None, :], e_s[None, :], w)
    return Heatmap(points=pts, scores=scores[:, 0])


def localize_image(
    field: LopField,
    image_embedding,
    samples,
    w: float = 1.0,
) -> Heatmap:
    """Score every sample against a precomputed vision-language embedding.

    Only the vision branch participates (there is no semantic target for an
    image), so the semantic share of ``w`` contributes nothing.
    """
    pts = _require_samples(samples)
    emb = np.asarray(image_embedding, dtype=np.float64).reshape(-1)
    dv = field.dims[1]
    if emb.shape[0] != dv:
        raise DimMismatch(f"image embedding dim {emb.shape[0]} != dv {dv}")
    check_unit_rows(emb[None, :], "image embedding")
    f_v, _ = field.forward(pts)
    scores = w * (f_v.astype(np.float64) @ emb)
    return Heatmap(points=pts, scores=scores)


def _require_samples(samples) -> np.ndarray:
    pts = np.asarray(samples, dtype=np.float64)
    if pts.size == 0:
        raise NoSamples("sample set is empty")
    return as_points(pts, "samples")


def grid_samples(bounds_min, bounds_max, step: float = 0.25) -> np.ndarray:
    """Uniform 3D grid sampler for field-only deployments."""
    lo = np.asarray(bounds_min, dtype=np.float64)
    hi = np.asarray(bounds_max, dtype=np.float64)
    axes = [np.arange(lo[i] + step / 2, hi[i], step) for i in range(3)]
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    return np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)


def weighted_average_distance(
    heatmap: Heatmap,
    target_points,
    k: int = DEFAULT_TOP_K,
) -> float:
    """Similarity-weighted mean distance from the predicted point cloud to
    the target surface.

    The predicted point cloud is the heatmap's top-k samples (the same
    reduction text queries use); each one contributes its distance to the
    nearest target point, weighted by its clipped similarity score.
    """
    targets = as_points(target_points, "target_points")
    tree = cKDTree(targets)
    idx = heatmap.top_k(k)
    dists, _ = tree.query(heatmap.points[idx], k=1)
    w = np.clip(heatmap.scores[idx], 0.0, None)
    if w.sum() <= 0:
        return float(np.mean(dists))
    return float(np.sum(w * dists) / np.sum(w))


def evaluate_region_inference(
    field: LopField,
    points,
    true_labels: list[str],
    bank: LabelBank,
    w: float = DEFAULT_VS_WEIGHT,
) -> dict:
    """Held-out region classification report: accuracy, per-label P/R/F1."""
    pred, _ = infer_attribute_batch(field, points, bank, w)
    true = list(true_labels)
    if len(pred) != len(true):
        raise InvalidInput("points and labels must align")
    n = len(true)
    accuracy = sum(p == t for p, t in zip(pred, true)) / n
    per_label = {}
    for label in bank.labels:
        tp = sum(1 for p, t in zip(pred, true) if p == label and t == label)
        fp = sum(1 for p, t in zip(pred, true) if p == label and t != label)
        fn = sum(1 for p, t in zip(pred, true) if p != label and t == label)
        support = tp + fn
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / support if support else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_label[label] = {
            "accuracy": recall,
            "precision": precision,
            "f1": f1,
            "support": support,
        }
    return {"accuracy": accuracy, "count": n, "per_label": per_label}
