"""Fixtures: tiny locally built encoder models and a small real-style
sequence derived from the consumer's scene generator through its CLI (the
file formats are the only coupling)."""

from __future__ import annotations

import json
import shutil
import subprocess

import numpy as np
import pytest
import torch
from PIL import Image

SEQ_FRAMES = 10

RUN_INI = """
[scene]
rooms = 2
objects_per_room = 2
frames = {frames}
image_width = 48
image_height = 36
seed = 3
"""


@pytest.fixture(scope="session")
def tiny_models(tmp_path_factory):
    """Random-weight CLIP + sentence models with a shared WordPiece tokenizer."""
    from tokenizers import Tokenizer, models, normalizers, pre_tokenizers
    from transformers import (
        BertConfig,
        BertModel,
        CLIPConfig,
        CLIPModel,
        CLIPTextConfig,
        CLIPVisionConfig,
        PreTrainedTokenizerFast,
    )

    root = tmp_path_factory.mktemp("models")
    words = [
        "cup", "sofa", "bed", "table", "plant", "lamp", "kitchen", "bedroom",
        "bathroom", "living", "dining", "family", "room", "toilet", "lobby",
        "office", "hallway", "study", "laundry", "the", "in", "of",
    ]
    letters = [c for c in "abcdefghijklmnopqrstuvwxyz"]
    vocab = ["[PAD]", "[UNK]"] + words + letters + ["##" + c for c in letters]
    vocab = list(dict.fromkeys(vocab))
    wp = models.WordPiece({t: i for i, t in enumerate(vocab)}, unk_token="[UNK]",
                          max_input_chars_per_word=64)
    tok = Tokenizer(wp)
    tok.normalizer = normalizers.Lowercase()
    tok.pre_tokenizer = pre_tokenizers.Whitespace()
    fast = PreTrainedTokenizerFast(tokenizer_object=tok, unk_token="[UNK]",
                                   pad_token="[PAD]")
    tok_dir = root / "tokenizer"
    fast.save_pretrained(tok_dir)

    torch.manual_seed(0)
    clip_cfg = CLIPConfig(
        text_config=CLIPTextConfig(
            vocab_size=len(vocab), hidden_size=32, intermediate_size=48,
            num_hidden_layers=1, num_attention_heads=2,
            max_position_embeddings=32, bos_token_id=0, eos_token_id=1,
        ),
        vision_config=CLIPVisionConfig(
            hidden_size=32, intermediate_size=48, num_hidden_layers=1,
            num_attention_heads=2, image_size=32, patch_size=8,
        ),
        projection_dim=48,
    )
    clip_dir = root / "clip"
    CLIPModel(clip_cfg).eval().save_pretrained(clip_dir)

    bert_cfg = BertConfig(
        vocab_size=len(vocab), hidden_size=40, num_hidden_layers=1,
        num_attention_heads=2, intermediate_size=64, max_position_embeddings=32,
    )
    sent_dir = root / "sentence"
    BertModel(bert_cfg).eval().save_pretrained(sent_dir)

    return {
        "clip": str(clip_dir),
        "sentence": str(sent_dir),
        "tokenizer": str(tok_dir),
        "dv": 48,
        "ds": 40,
    }


@pytest.fixture(scope="session")
def real_sequence(tmp_path_factory):
    """10-frame RGB-D sequence in the extractor input layout.

    Geometry comes from the consumer's scene generator (invoked through its
    CLI); RGB images are shaded depth renders, which is all a random-weight
    encoder needs.
    """
    root = tmp_path_factory.mktemp("sequence")
    gen = root / "generated"
    ini = root / "run.ini"
    ini.write_text(RUN_INI.format(frames=SEQ_FRAMES))
    subprocess.run(
        ["lopfield", "--config", str(ini), "gen-scene", "--out", str(gen)],
        check=True, capture_output=True,
    )

    seq = root / "seq"
    for sub in ("rgb", "depth", "pose", "masks"):
        (seq / sub).mkdir(parents=True)
    scene = json.loads((gen / "scene.json").read_text())
    intr = scene["intrinsics"]
    (seq / "meta.json").write_text(json.dumps({
        "width": intr["width"], "height": intr["height"],
        "fx": intr["fx"], "fy": intr["fy"], "cx": intr["cx"], "cy": intr["cy"],
        "frames": SEQ_FRAMES,
    }))
    (seq / "partition.json").write_text(json.dumps(scene["partition"]))
    shutil.copy(gen / "labels.json", seq / "labels.json")

    h, w = intr["height"], intr["width"]
    for i in range(SEQ_FRAMES):
        stem = f"{i:06d}"
        depth = np.fromfile(gen / "frames" / f"{stem}.depth.bin", dtype="<f4")
        shutil.copy(gen / "frames" / f"{stem}.depth.bin", seq / "depth" / f"{stem}.bin")
        shutil.copy(gen / "frames" / f"{stem}.inst.bin", seq / "masks" / f"{stem}.bin")
        shutil.copy(gen / "frames" / f"{stem}.pose.txt", seq / "pose" / f"{stem}.txt")
        shaded = np.clip(depth.reshape(h, w) / 6.0, 0, 1)
        rgb = np.stack([shaded, 1.0 - shaded, shaded * 0.5], axis=-1)
        Image.fromarray((rgb * 255).astype(np.uint8)).save(seq / "rgb" / f"{stem}.png")
    return seq
