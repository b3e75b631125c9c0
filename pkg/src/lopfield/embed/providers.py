"""Embedding providers: the interface plus synthetic and file-backed backends.

A provider turns text, image crops, and whole images into unit-norm vectors
in two spaces: a vision-language space of dimension ``dv`` and a semantic
space of dimension ``ds``. The synthetic backend is a deterministic stand-in
for real encoders: token-built text vectors give related prompts a cosine
similarity strictly between 0 and 1 while unrelated labels stay near
orthogonal, which is the property the training and query stages rely on.
"""

from __future__ import annotations

import hashlib
import json
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from ..errors import InvalidInput, InvalidLabel

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def compose_prompt(object_label: str, region_label: str) -> str:
    """Compose the contextual prompt for an object seen inside a region."""
    if not object_label or not object_label.strip():
        raise InvalidLabel("object label must be non-empty")
    if not region_label or not region_label.strip():
        raise InvalidLabel("region label must be non-empty")
    return f"{object_label} in the {region_label}"


@dataclass(frozen=True)
class CropRef:
    """Reference to an instance crop: class label plus a stable instance key."""

    label: str
    instance_key: int = 0


@dataclass(frozen=True)
class ImageRef:
    """Reference to a whole image: its dominant region plus a stable frame key."""

    region_label: str
    frame_key: int = 0


class EmbeddingProvider(ABC):
    """Deterministic embedding source; identical input gives identical output."""

    dv: int
    ds: int

    @abstractmethod
    def embed_text(self, text: str) -> tuple[np.ndarray, np.ndarray]:
        """Return (vision-language, semantic) unit vectors for ``text``."""

    @abstractmethod
    def embed_image_crop(self, crop: CropRef) -> np.ndarray:
        """Return the vision-language unit vector of an instance crop."""

    @abstractmethod
    def embed_image(self, image: ImageRef) -> np.ndarray:
        """Return the vision-language unit vector of a whole image."""


def _seeded_unit(key: str, dim: int) -> np.ndarray:
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


class SyntheticProvider(EmbeddingProvider):
    """Hash-token embedding stand-in for real image/text encoders.

    Text vectors are the normalized sum of per-token unit vectors, so two
    prompts sharing tokens land at cos in (0, 1) while disjoint label pairs
    stay near orthogonal. Crop vectors are the class text vector plus
    per-instance noise of norm ``noise`` (default 0.1); whole-image vectors
    do the same with the frame's dominant region label and per-frame noise.
    """

    def __init__(self, seed: int = 0, dv: int = 64, ds: int = 64, noise: float = 0.1):
        if dv < 8 or ds < 8:
            raise InvalidInput("embedding dimensions must be >= 8")
        self.seed = int(seed)
        self.dv = int(dv)
        self.ds = int(ds)
        self.noise = float(noise)

    @staticmethod
    def _tokens(text: str) -> list[str]:
        return _TOKEN_RE.findall(text.lower())

    @lru_cache(maxsize=4096)
    def _token_vec(self, branch: str, token: str) -> np.ndarray:
        dim = self.dv if branch == "vl" else self.ds
        return _seeded_unit(f"{self.seed}:{branch}:{token}", dim)

    def _text_vec(self, branch: str, text: str) -> np.ndarray:
        tokens = self._tokens(text)
        if not tokens:
            raise InvalidLabel(f"text {text!r} has no tokens")
        dim = self.dv if branch == "vl" else self.ds
        acc = np.zeros(dim)
        for t in tokens:
            acc += self._token_vec(branch, t)
        n = np.linalg.norm(acc)
        if n < 1e-12:
            raise InvalidInput(f"degenerate embedding for {text!r}")
        return acc / n

    def _noised(self, base: np.ndarray, key: str) -> np.ndarray:
        out = base + self.noise * _seeded_unit(key, base.shape[0])
        return out / np.linalg.norm(out)

    def embed_text(self, text: str) -> tuple[np.ndarray, np.ndarray]:
        return self._text_vec("vl", text), self._text_vec("sem", text)

    def embed_image_crop(self, crop: CropRef) -> np.ndarray:
        base = self._text_vec("vl", crop.label)
        return self._noised(base, f"{self.seed}:crop:{crop.instance_key}")

    def embed_image(self, image: ImageRef) -> np.ndarray:
        base = self._text_vec("vl", image.region_label)
        return self._noised(base, f"{self.seed}:image:{image.frame_key}")


class FileProvider(EmbeddingProvider):
    """Embeddings precomputed by an external pipeline, loaded from JSON.

    Schema: {"dv": int, "ds": int, "text": {key: {"vl": [...], "sem": [...]}},
    "crops": {key: [...]}, "images": {key: [...]}}. Crop lookups try the
    instance key first, then fall back to the class label; image lookups try
    the frame key, then the region label.
    """

    def __init__(self, path):
        with open(path) as f:
            data = json.load(f)
        self.dv = int(data["dv"])
        self.ds = int(data["ds"])
        self._text = {k: (np.asarray(v["vl"], dtype=np.float64),
                          np.asarray(v["sem"], dtype=np.float64))
                      for k, v in data.get("text", {}).items()}
        self._crops = {k: np.asarray(v, dtype=np.float64)
                       for k, v in data.get("crops", {}).items()}
        self._images = {k: np.asarray(v, dtype=np.float64)
                        for k, v in data.get("images", {}).items()}
        self.path = str(Path(path))

    def embed_text(self, text: str) -> tuple[np.ndarray, np.ndarray]:
        try:
            return self._text[text]
        except KeyError:
            raise InvalidInput(f"no stored embedding for text {text!r}") from None

    def _lookup(self, table: dict, keys: list[str], what: str) -> np.ndarray:
        for k in keys:
            if k in table:
                return table[k]
        raise InvalidInput(f"no stored {what} embedding for {keys}")

    def embed_image_crop(self, crop: CropRef) -> np.ndarray:
        return self._lookup(self._crops, [str(crop.instance_key), crop.label], "crop")

    def embed_image(self, image: ImageRef) -> np.ndarray:
        return self._lookup(
            self._images, [str(image.frame_key), image.region_label], "image"
        )


def synthetic_provider(seed: int = 0, dv: int = 64, ds: int = 64) -> SyntheticProvider:
    return SyntheticProvider(seed=seed, dv=dv, ds=ds)
