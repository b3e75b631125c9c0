"""Run configuration: one INI file governs everything numeric.

Unknown sections or keys are rejected so a config can't silently drift from
the code; every CLI command writes the fully resolved config next to its
outputs, which makes any run reproducible from its artifacts alone.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field
from pathlib import Path

from .embed.fusion import FusionConfig
from .embed.providers import EmbeddingProvider, FileProvider, SyntheticProvider
from .errors import ConfigError
from .field.loss import LossConfig
from .field.train import TrainConfig
from .hashgrid import HashGridConfig
from .topomap.mapper import MapperConfig


def _bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _str_list(raw: str) -> tuple[str, ...]:
    return tuple(s.strip() for s in raw.split(",") if s.strip())


# section -> key -> (converter, default)
SCHEMA: dict[str, dict[str, tuple]] = {
    "scene": {
        "rooms": (int, 4),
        "objects_per_room": (int, 3),
        "vocabulary": (_str_list, ("cup", "sofa", "bed", "table", "plant", "lamp")),
        "frames": (int, 48),
        "image_width": (int, 96),
        "image_height": (int, 72),
        "seed": (int, 11),
    },
    "provider": {
        "kind": (str, "synthetic"),
        "seed": (int, 5),
        "dv": (int, 64),
        "ds": (int, 64),
        "path": (str, ""),
    },
    "fusion": {
        "voxel_size": (float, 0.05),
        "max_pixels_per_frame": (int, 4096),
        "encode_background": (_bool, True),
        "context_prompt": (_bool, True),
        "seed": (int, 0),
        "holdout_every": (int, 5),
    },
    "hashgrid": {
        "levels": (int, 18),
        "features_per_level": (int, 8),
        "log2_table_size": (int, 16),
        "base_resolution": (int, 16),
        "finest_resolution": (int, 512),
    },
    "train": {
        "scale": (str, "desk"),
        "batch_size": (int, 512),
        "epochs": (int, 20),
        "samples_per_epoch": (int, 50_000),
        "learning_rate": (float, 1e-4),
        "lr_decay": (float, 3e-3),
        "seed": (int, 1),
    },
    "loss": {
        "weight_v": (float, 1.0),
        "weight_s": (float, 1.0),
    },
    "query": {
        "vs_weight": (float, 0.5),
        "top_k": (int, 50),
    },
    "mapper": {
        "grid_step": (float, 0.5),
        "conf_threshold": (float, 0.60),
        "min_observations": (int, 3),
        "edge_refresh_interval": (int, 50),
        "describer": (str, "rule"),
        "sample_height": (float, 0.1),
    },
    "planner": {
        "step": (float, 0.25),
    },
    "runtime": {
        "threads": (int, 0),
    },
}


@dataclass
class RunConfig:
    values: dict[str, dict[str, object]] = field(default_factory=dict)

    def __post_init__(self):
        merged = {}
        for section, keys in SCHEMA.items():
            merged[section] = {k: default for k, (_, default) in keys.items()}
            for k, v in self.values.get(section, {}).items():
                merged[section][k] = v
        self.values = merged

    @classmethod
    def load(cls, path=None) -> "RunConfig":
        if path is None:
            return cls()
        parser = configparser.ConfigParser(interpolation=None)
        read = parser.read(path)
        if not read:
            raise ConfigError(f"config file not found: {path}")
        values: dict[str, dict[str, object]] = {}
        for section in parser.sections():
            if section not in SCHEMA:
                raise ConfigError(f"unknown config section [{section}]")
            values[section] = {}
            for key, raw in parser.items(section):
                if key not in SCHEMA[section]:
                    raise ConfigError(f"unknown key {key!r} in section [{section}]")
                conv = SCHEMA[section][key][0]
                try:
                    values[section][key] = conv(raw)
                except ValueError as exc:
                    raise ConfigError(f"[{section}] {key}: {exc}") from None
        return cls(values)

    def get(self, section: str, key: str):
        return self.values[section][key]

    def override(self, section: str, key: str, value) -> None:
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"unknown key [{section}] {key}")
        self.values[section][key] = value

    def resolved_text(self) -> str:
        out = io.StringIO()
        for section in SCHEMA:
            out.write(f"[{section}]\n")
            for key in SCHEMA[section]:
                v = self.values[section][key]
                if isinstance(v, tuple):
                    v = ", ".join(v)
                elif isinstance(v, bool):
                    v = "true" if v else "false"
                out.write(f"{key} = {v}\n")
            out.write("\n")
        return out.getvalue()

    def write_resolved(self, directory, stem: str) -> Path:
        path = Path(directory) / f"{stem}.resolved.ini"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.resolved_text())
        return path

    # typed views -----------------------------------------------------------

    def scene_config(self):
        from .scene.synthetic import SceneConfig

        s = self.values["scene"]
        return SceneConfig(
            rooms=s["rooms"],
            objects_per_room=s["objects_per_room"],
            vocabulary=tuple(s["vocabulary"]),
            frames=s["frames"],
            image_width=s["image_width"],
            image_height=s["image_height"],
        )

    def provider(self) -> EmbeddingProvider:
        p = self.values["provider"]
        if p["kind"] == "synthetic":
            return SyntheticProvider(seed=p["seed"], dv=p["dv"], ds=p["ds"])
        if p["kind"] == "file":
            if not p["path"]:
                raise ConfigError("[provider] path required for kind=file")
            return FileProvider(p["path"])
        raise ConfigError(f"unknown provider kind {p['kind']!r}")

    def fusion_config(self) -> FusionConfig:
        f = self.values["fusion"]
        return FusionConfig(
            voxel_size=f["voxel_size"],
            max_pixels_per_frame=f["max_pixels_per_frame"],
            encode_background=f["encode_background"],
            context_prompt=f["context_prompt"],
            seed=f["seed"],
        )

    def hashgrid_config(self) -> HashGridConfig:
        h = self.values["hashgrid"]
        return HashGridConfig(
            levels=h["levels"],
            features_per_level=h["features_per_level"],
            log2_table_size=h["log2_table_size"],
            base_resolution=h["base_resolution"],
            finest_resolution=h["finest_resolution"],
        )

    def train_config(self) -> TrainConfig:
        t = self.values["train"]
        if t["scale"] == "paper":
            return TrainConfig.paper_scale(seed=t["seed"])
        if t["scale"] != "desk":
            raise ConfigError(f"unknown train scale {t['scale']!r}")
        return TrainConfig(
            batch_size=t["batch_size"],
            epochs=t["epochs"],
            samples_per_epoch=t["samples_per_epoch"],
            learning_rate=t["learning_rate"],
            lr_decay=t["lr_decay"],
            seed=t["seed"],
        )

    def loss_config(self) -> LossConfig:
        l = self.values["loss"]
        return LossConfig(weight_v=l["weight_v"], weight_s=l["weight_s"])

    def mapper_config(self) -> MapperConfig:
        m = self.values["mapper"]
        return MapperConfig(
            grid_step=m["grid_step"],
            conf_threshold=m["conf_threshold"],
            min_observations=m["min_observations"],
            edge_refresh_interval=m["edge_refresh_interval"],
            vs_weight=self.values["query"]["vs_weight"],
            describer=m["describer"],
            sample_height=m["sample_height"],
        )
