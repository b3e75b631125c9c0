"""Fusion of per-pixel target embeddings into a distilled feature cloud.

Every frame contributes a bounded, stratified pixel sample (half object,
half background). Object pixels take the instance's crop embedding plus the
semantic embedding of its contextual prompt; background pixels take the
whole-image embedding plus the semantic embedding of their region label.
Pixels are back-projected and voxel-merged; per-frame randomness is seeded
from the frame content so the result is independent of frame order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimMismatch, NoData
from ..scene.geometry import Frame, back_project_pixels
from ..scene.partition import RegionPartition, region_of, region_of_batch
from .cloud import FeaturePointCloud, merge_observations
from .providers import CropRef, EmbeddingProvider, ImageRef, compose_prompt


@dataclass(frozen=True)
class FusionConfig:
    voxel_size: float = 0.05
    max_pixels_per_frame: int = 4096
    encode_background: bool = True
    context_prompt: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.voxel_size <= 0:
            raise ValueError("voxel_size must be positive")
        if self.max_pixels_per_frame < 1:
            raise ValueError("max_pixels_per_frame must be >= 1")


def _sample_pixels(frame: Frame, cfg: FusionConfig) -> tuple[np.ndarray, np.ndarray]:
    """Pick stratified flat pixel indices (object, background) for one frame."""
    rng = np.random.default_rng((frame.content_key() ^ (cfg.seed * 0x9E3779B9)) & 0xFFFFFFFFFFFFFFFF)
    valid = frame.depth.reshape(-1) > 0
    inst = frame.instance_ids.reshape(-1)
    obj_idx = np.flatnonzero(valid & (inst >= 0))
    bg_idx = np.flatnonzero(valid & (inst < 0))

    quota = cfg.max_pixels_per_frame
    if not cfg.encode_background:
        n_obj = min(len(obj_idx), quota)
        chosen_obj = rng.choice(len(obj_idx), size=n_obj, replace=False) if n_obj else []
        return obj_idx[np.sort(np.asarray(chosen_obj, dtype=np.int64))], np.empty(0, dtype=np.int64)

    half = quota // 2
    n_obj = min(len(obj_idx), half)
    n_bg = min(len(bg_idx), quota - n_obj)
    n_obj = min(len(obj_idx), quota - n_bg)
    chosen_obj = rng.choice(len(obj_idx), size=n_obj, replace=False) if n_obj else []
    chosen_bg = rng.choice(len(bg_idx), size=n_bg, replace=False) if n_bg else []
    return (
        obj_idx[np.sort(np.asarray(chosen_obj, dtype=np.int64))],
        bg_idx[np.sort(np.asarray(chosen_bg, dtype=np.int64))],
    )


def build_feature_cloud(
    frames: list[Frame],
    part: RegionPartition,
    provider: EmbeddingProvider,
    cfg: FusionConfig = FusionConfig(),
) -> FeaturePointCloud:
    """Distill posed frames into a voxel-merged feature point cloud."""
    if not frames:
        raise NoData("no frames to fuse")
    dv, ds = provider.dv, provider.ds

    prompt_cache: dict[str, np.ndarray] = {}

    def sem_of(text: str) -> np.ndarray:
        vec = prompt_cache.get(text)
        if vec is None:
            _, vec = provider.embed_text(text)
            vec = np.asarray(vec, dtype=np.float64)
            if vec.shape[0] != ds:
                raise DimMismatch(f"provider semantic dim {vec.shape[0]} != ds {ds}")
            prompt_cache[text] = vec
        return vec

    all_pos, all_ev, all_es, all_dist, all_conf = [], [], [], [], []

    for frame in frames:
        h, w = frame.shape
        obj_sel, bg_sel = _sample_pixels(frame, cfg)
        sel = np.concatenate([obj_sel, bg_sel])
        if len(sel) == 0:
            continue
        us = (sel % w).astype(np.float64)
        vs = (sel // w).astype(np.float64)
        depths = frame.depth.reshape(-1)[sel].astype(np.float64)
        points = back_project_pixels(us, vs, depths, frame.intrinsics, frame.pose)
        regions = region_of_batch(points[:, :2], part)
        cam_dist = np.linalg.norm(points - frame.pose.translation, axis=1)

        inst = frame.instance_ids.reshape(-1)[sel]
        frame_key = frame.content_key()
        ev = np.empty((len(sel), dv))
        es = np.empty((len(sel), ds))
        conf = np.empty(len(sel))

        crop_cache: dict[int, np.ndarray] = {}
        n_obj = len(obj_sel)
        for i in range(n_obj):
            inst_id = int(inst[i])
            crop = crop_cache.get(inst_id)
            if crop is None:
                crop = np.asarray(
                    provider.embed_image_crop(
                        CropRef(label=frame.instance_labels[inst_id], instance_key=inst_id)
                    ),
                    dtype=np.float64,
                )
                if crop.shape[0] != dv:
                    raise DimMismatch(f"provider vl dim {crop.shape[0]} != dv {dv}")
                crop_cache[inst_id] = crop
            ev[i] = crop
            label = frame.instance_labels[inst_id]
            text = compose_prompt(label, regions[i]) if cfg.context_prompt else label
            es[i] = sem_of(text)
            conf[i] = frame.instance_confidences[inst_id]

        if len(bg_sel):
            cam_region = region_of(frame.pose.translation[:2], part)
            whole = np.asarray(
                provider.embed_image(ImageRef(region_label=cam_region, frame_key=frame_key)),
                dtype=np.float64,
            )
            if whole.shape[0] != dv:
                raise DimMismatch(f"provider vl dim {whole.shape[0]} != dv {dv}")
            ev[n_obj:] = whole
            for i in range(n_obj, len(sel)):
                es[i] = sem_of(regions[i])
            conf[n_obj:] = 1.0

        all_pos.append(points)
        all_ev.append(ev)
        all_es.append(es)
        all_dist.append(cam_dist)
        all_conf.append(conf)

    if not all_pos:
        raise NoData("no valid pixels in any frame")
    return merge_observations(
        positions=np.concatenate(all_pos),
        e_v=np.concatenate(all_ev),
        e_s=np.concatenate(all_es),
        dists=np.concatenate(all_dist),
        confs=np.concatenate(all_conf),
        voxel_size=cfg.voxel_size,
        dv=dv,
        ds=ds,
    )
