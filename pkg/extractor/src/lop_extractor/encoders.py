"""Wrappers around the image-text and sentence encoders.

Models load from local paths or hub identifiers (hub access is the caller's
concern; everything here also works fully offline with locally saved
weights). Outputs are L2-normalized float64 rows. transformers >= 5 returns
pooled output objects from the CLIP feature helpers; both shapes are
handled.
"""

from __future__ import annotations

import numpy as np
import torch
from PIL import Image

from .sequence import ExtractError


def _to_tensor(out) -> torch.Tensor:
    if torch.is_tensor(out):
        return out
    for attr in ("pooler_output", "text_embeds", "image_embeds"):
        value = getattr(out, attr, None)
        if value is not None:
            return value
    raise ExtractError(f"unexpected encoder output type {type(out).__name__}")


def _normalized(x: torch.Tensor) -> np.ndarray:
    arr = x.detach().cpu().to(torch.float64).numpy()
    norms = np.linalg.norm(arr, axis=1, keepdims=True)
    return arr / np.where(norms > 1e-12, norms, 1.0)


class ClipEncoder:
    """Dual image-text encoder (CLIP-style); dv = projection dim."""

    def __init__(self, model_path: str, tokenizer_path: str | None = None,
                 batch_size: int = 32):
        from transformers import AutoTokenizer, CLIPImageProcessor, CLIPModel

        try:
            self.model = CLIPModel.from_pretrained(model_path).eval()
            self.tokenizer = AutoTokenizer.from_pretrained(tokenizer_path or model_path)
        except Exception as exc:
            raise ExtractError(f"failed to load image-text encoder: {exc}") from None
        image_size = self.model.config.vision_config.image_size
        self.processor = CLIPImageProcessor(
            size={"shortest_edge": image_size},
            crop_size={"height": image_size, "width": image_size},
        )
        self.batch_size = batch_size
        self.dim = int(self.model.config.projection_dim)

    @torch.no_grad()
    def embed_texts(self, texts: list[str]) -> np.ndarray:
        chunks = []
        for start in range(0, len(texts), self.batch_size):
            batch = self.tokenizer(
                texts[start : start + self.batch_size],
                return_tensors="pt", padding=True, truncation=True,
                max_length=self.model.config.text_config.max_position_embeddings,
            )
            out = self.model.get_text_features(
                input_ids=batch["input_ids"], attention_mask=batch["attention_mask"]
            )
            chunks.append(_normalized(_to_tensor(out)))
        return np.concatenate(chunks) if chunks else np.zeros((0, self.dim))

    @torch.no_grad()
    def embed_images(self, images: list[Image.Image]) -> np.ndarray:
        chunks = []
        for start in range(0, len(images), self.batch_size):
            pixel = self.processor(
                images=images[start : start + self.batch_size], return_tensors="pt"
            )["pixel_values"]
            out = self.model.get_image_features(pixel_values=pixel)
            chunks.append(_normalized(_to_tensor(out)))
        return np.concatenate(chunks) if chunks else np.zeros((0, self.dim))


class SentenceEncoder:
    """Mean-pooled transformer sentence embeddings; ds = hidden size."""

    def __init__(self, model_path: str, tokenizer_path: str | None = None,
                 batch_size: int = 64):
        from transformers import AutoModel, AutoTokenizer

        try:
            self.model = AutoModel.from_pretrained(model_path).eval()
            self.tokenizer = AutoTokenizer.from_pretrained(tokenizer_path or model_path)
        except Exception as exc:
            raise ExtractError(f"failed to load sentence encoder: {exc}") from None
        self.batch_size = batch_size
        self.dim = int(self.model.config.hidden_size)

    @torch.no_grad()
    def embed_texts(self, texts: list[str]) -> np.ndarray:
        chunks = []
        for start in range(0, len(texts), self.batch_size):
            batch = self.tokenizer(
                texts[start : start + self.batch_size],
                return_tensors="pt", padding=True, truncation=True,
                max_length=self.model.config.max_position_embeddings,
            )
            hidden = self.model(**batch).last_hidden_state
            mask = batch["attention_mask"].unsqueeze(-1).to(hidden.dtype)
            pooled = (hidden * mask).sum(dim=1) / mask.sum(dim=1).clamp(min=1e-9)
            chunks.append(_normalized(pooled))
        return np.concatenate(chunks) if chunks else np.zeros((0, self.dim))
