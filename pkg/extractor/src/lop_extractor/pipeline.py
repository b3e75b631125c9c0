"""The extraction pipeline: real encoders over a posed RGB-D sequence.

Per frame: detect instances, embed each instance crop and the whole image
in the image-text space, embed contextual prompts ("<label> in the
<region>") and region labels in the sentence space, back-project a
stratified pixel sample, and voxel-merge everything into an LOPF feature
cloud. A scene sequence directory in the consumer's layout is emitted next
to it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .detectors import make_detector
from .encoders import ClipEncoder, SentenceEncoder
from .lopf import merge_voxels, write_lopf
from .sequence import ExtractError, Sequence, back_project, regions_of


def compose_prompt(label: str, region: str) -> str:
    if not label or not region:
        raise ExtractError("labels must be non-empty")
    return f"{label} in the {region}"


@dataclass
class ExtractorConfig:
    sequence: str
    output: str
    clip_model: str
    sentence_model: str
    clip_tokenizer: str | None = None
    sentence_tokenizer: str | None = None
    detector: dict = field(default_factory=lambda: {"kind": "masks"})
    voxel_size: float = 0.05
    max_pixels_per_frame: int = 4096
    encode_background: bool = True
    context_prompt: bool = True
    seed: int = 0

    @classmethod
    def load(cls, path) -> "ExtractorConfig":
        data = json.loads(Path(path).read_text())
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ExtractError(f"unknown config keys: {sorted(unknown)}")
        missing = {"sequence", "output", "clip_model", "sentence_model"} - set(data)
        if missing:
            raise ExtractError(f"missing config keys: {sorted(missing)}")
        return cls(**data)


class _TextCache:
    def __init__(self, encoder):
        self.encoder = encoder
        self.cache: dict[str, np.ndarray] = {}

    def get(self, texts: list[str]) -> np.ndarray:
        new = sorted({t for t in texts if t not in self.cache})
        if new:
            rows = self.encoder.embed_texts(new)
            for t, r in zip(new, rows):
                self.cache[t] = r
        return np.stack([self.cache[t] for t in texts])


def _sample_split(valid_obj, valid_bg, quota, rng):
    half = quota // 2
    n_obj = min(len(valid_obj), half)
    n_bg = min(len(valid_bg), quota - n_obj)
    n_obj = min(len(valid_obj), quota - n_bg)
    obj = valid_obj[np.sort(rng.choice(len(valid_obj), n_obj, replace=False))] if n_obj else np.empty(0, np.int64)
    bg = valid_bg[np.sort(rng.choice(len(valid_bg), n_bg, replace=False))] if n_bg else np.empty(0, np.int64)
    return obj, bg


def _crop_image(rgb, mask: np.ndarray, pad: int = 4):
    ys, xs = np.nonzero(mask)
    x0 = max(int(xs.min()) - pad, 0)
    x1 = min(int(xs.max()) + 1 + pad, rgb.size[0])
    y0 = max(int(ys.min()) - pad, 0)
    y1 = min(int(ys.max()) + 1 + pad, rgb.size[1])
    return rgb.crop((x0, y0, x1, y1))


def extract(config: ExtractorConfig) -> dict:
    """Run the full pipeline; returns a summary dict."""
    seq = Sequence(config.sequence)
    clip = ClipEncoder(config.clip_model, config.clip_tokenizer)
    sentence = SentenceEncoder(config.sentence_model, config.sentence_tokenizer)
    detector = make_detector(config.detector, seq)
    sem_cache = _TextCache(sentence)

    out_root = Path(config.output)
    frames_dir = out_root / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)

    all_pos, all_ev, all_es, all_dist, all_conf = [], [], [], [], []
    emitted_labels: dict[int, dict] = {}

    for index in range(seq.meta.frames):
        frame = seq.frame(index)
        detections = detector.detect(frame.rgb, index)
        h, w = seq.meta.height, seq.meta.width

        inst_raster = np.full((h, w), -1, dtype=np.int32)
        for det in detections:
            inst_raster[det.mask] = det.instance_id
            emitted_labels[det.instance_id] = {
                "class": det.label,
                "confidence": det.confidence,
            }

        # emit the consumer-layout frame files
        stem = f"{index:06d}"
        frame.depth.astype("<f4").tofile(frames_dir / f"{stem}.depth.bin")
        inst_raster.astype("<i4").tofile(frames_dir / f"{stem}.inst.bin")
        np.savetxt(frames_dir / f"{stem}.pose.txt", frame.pose, fmt="%.17g")

        flat_depth = frame.depth.reshape(-1)
        flat_inst = inst_raster.reshape(-1)
        valid = flat_depth > 0
        obj_idx = np.flatnonzero(valid & (flat_inst >= 0))
        bg_idx = np.flatnonzero(valid & (flat_inst < 0))
        rng = np.random.default_rng((config.seed, index))
        if config.encode_background:
            obj_sel, bg_sel = _sample_split(obj_idx, bg_idx,
                                            config.max_pixels_per_frame, rng)
        else:
            take = min(len(obj_idx), config.max_pixels_per_frame)
            obj_sel = obj_idx[np.sort(rng.choice(len(obj_idx), take, replace=False))] if take else np.empty(0, np.int64)
            bg_sel = np.empty(0, np.int64)
        sel = np.concatenate([obj_sel, bg_sel])
        if len(sel) == 0:
            continue

        us = (sel % w).astype(np.float64)
        vs = (sel // w).astype(np.float64)
        depths = flat_depth[sel].astype(np.float64)
        points = back_project(us, vs, depths, seq.meta, frame.pose)
        regions = regions_of(points[:, :2], seq.partition)
        cam = frame.pose[:3, 3]
        dists = np.linalg.norm(points - cam, axis=1)

        by_id = {d.instance_id: d for d in detections}
        crop_rows = {}
        if len(obj_sel):
            ids = sorted({int(i) for i in flat_inst[obj_sel]})
            crops = [_crop_image(frame.rgb, by_id[i].mask) for i in ids]
            rows = clip.embed_images(crops)
            crop_rows = dict(zip(ids, rows))

        ev = np.empty((len(sel), clip.dim))
        es = np.empty((len(sel), sentence.dim))
        conf = np.empty(len(sel))
        sem_texts = []
        for k in range(len(obj_sel)):
            det = by_id[int(flat_inst[obj_sel[k]])]
            ev[k] = crop_rows[det.instance_id]
            conf[k] = det.confidence
            sem_texts.append(
                compose_prompt(det.label, regions[k]) if config.context_prompt
                else det.label
            )
        if len(bg_sel):
            whole = clip.embed_images([frame.rgb])[0]
            ev[len(obj_sel):] = whole
            conf[len(obj_sel):] = 1.0
            sem_texts.extend(regions[len(obj_sel):])
        es[:] = sem_cache.get(sem_texts)

        all_pos.append(points)
        all_ev.append(ev)
        all_es.append(es)
        all_dist.append(dists)
        all_conf.append(conf)

    if not all_pos:
        raise ExtractError("no valid pixels in the sequence")

    merged = merge_voxels(
        np.concatenate(all_pos),
        np.concatenate(all_ev),
        np.concatenate(all_es),
        np.concatenate(all_dist),
        np.concatenate(all_conf),
        config.voxel_size,
    )
    cloud_path = out_root / "cloud.lopf"
    count = write_lopf(cloud_path, *merged, voxel_size=config.voxel_size)

    scene = {
        "format": "lop-scene",
        "version": 1,
        "seed": config.seed,
        "extent": _extent_from_partition(seq.partition, np.concatenate(all_pos)),
        "rooms": [],
        "doorways": [],
        "walls": [],
        "objects": [],
        "partition": seq.partition,
        "intrinsics": {
            "fx": seq.meta.fx, "fy": seq.meta.fy,
            "cx": seq.meta.cx, "cy": seq.meta.cy,
            "width": seq.meta.width, "height": seq.meta.height,
        },
        "num_frames": seq.meta.frames,
    }
    (out_root / "scene.json").write_text(json.dumps(scene, indent=2, sort_keys=True))
    (out_root / "labels.json").write_text(
        json.dumps({str(k): v for k, v in sorted(emitted_labels.items())},
                   indent=2, sort_keys=True)
    )
    return {
        "frames": seq.meta.frames,
        "points": count,
        "dv": clip.dim,
        "ds": sentence.dim,
        "cloud": str(cloud_path),
        "scene": str(out_root),
    }


def _extent_from_partition(partition: dict, points: np.ndarray) -> list[float]:
    return [float(points[:, 0].max()), float(points[:, 1].max())]
