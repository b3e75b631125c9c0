"""Instance detection backends.

``masks`` consumes precomputed instance-id rasters shipped with the
sequence (the usual lab setup: an offline open-vocabulary detector was
already run and its masks exported). ``zero-shot`` runs a HF zero-shot
object-detection model over a caller-supplied vocabulary and rasterizes its
boxes into masks; the model must be available locally or via the hub.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from .sequence import ExtractError, Sequence


@dataclass
class Detection:
    instance_id: int
    label: str
    confidence: float
    mask: np.ndarray  # (H, W) bool


class PrecomputedMaskDetector:
    """Reads masks/NNNNNN.bin plus labels.json from the sequence."""

    def __init__(self, sequence: Sequence, default_confidence: float = 0.9):
        self.sequence = sequence
        self.labels = sequence.labels()
        self.default_confidence = default_confidence

    def detect(self, rgb: Image.Image, frame_index: int) -> list[Detection]:
        raster = self.sequence.mask(frame_index)
        out = []
        for inst_id in np.unique(raster):
            if inst_id < 0:
                continue
            info = self.labels.get(int(inst_id))
            if info is None:
                raise ExtractError(f"instance {inst_id} missing from labels.json")
            out.append(
                Detection(
                    instance_id=int(inst_id),
                    label=info["class"],
                    confidence=float(info.get("confidence", self.default_confidence)),
                    mask=raster == inst_id,
                )
            )
        return out


class HFZeroShotDetector:
    """Zero-shot detector adapter (OwlViT-style checkpoints).

    Detections are box-shaped masks; instance ids are assigned per (frame,
    box) and are not tracked across frames, so persistence-based consumers
    should prefer precomputed masks.
    """

    def __init__(self, model_path: str, vocabulary: list[str], threshold: float = 0.1):
        try:
            from transformers import pipeline

            self.pipe = pipeline(
                "zero-shot-object-detection", model=model_path, device=-1
            )
        except Exception as exc:
            raise ExtractError(f"failed to load zero-shot detector: {exc}") from None
        if not vocabulary:
            raise ExtractError("zero-shot detector needs a vocabulary")
        self.vocabulary = list(vocabulary)
        self.threshold = threshold
        self._next_id = 0

    def detect(self, rgb: Image.Image, frame_index: int) -> list[Detection]:
        results = self.pipe(rgb, candidate_labels=self.vocabulary,
                            threshold=self.threshold)
        w, h = rgb.size
        out = []
        for r in results:
            box = r["box"]
            mask = np.zeros((h, w), dtype=bool)
            x0 = int(np.clip(box["xmin"], 0, w - 1))
            x1 = int(np.clip(box["xmax"], x0 + 1, w))
            y0 = int(np.clip(box["ymin"], 0, h - 1))
            y1 = int(np.clip(box["ymax"], y0 + 1, h))
            mask[y0:y1, x0:x1] = True
            out.append(
                Detection(
                    instance_id=self._next_id,
                    label=r["label"],
                    confidence=float(r["score"]),
                    mask=mask,
                )
            )
            self._next_id += 1
        return out


def make_detector(config: dict, sequence: Sequence):
    kind = config.get("kind", "masks")
    if kind == "masks":
        return PrecomputedMaskDetector(
            sequence, default_confidence=config.get("default_confidence", 0.9)
        )
    if kind == "zero-shot":
        return HFZeroShotDetector(
            model_path=config["model"],
            vocabulary=config.get("vocabulary", []),
            threshold=config.get("threshold", 0.1),
        )
    raise ExtractError(f"unknown detector kind {kind!r}")
