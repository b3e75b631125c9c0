import json
from pathlib import Path

import numpy as np
import pytest

from lopfield.cli import main
from lopfield.config import RunConfig
from lopfield.errors import ConfigError

TINY_INI = """
[scene]
rooms = 2
objects_per_room = 2
frames = 8
image_width = 48
image_height = 36
seed = 3

[provider]
dv = 16
ds = 16

[fusion]
max_pixels_per_frame = 384
holdout_every = 4

[hashgrid]
levels = 6
features_per_level = 4
log2_table_size = 12

[train]
epochs = 2
batch_size = 64
samples_per_epoch = 1500
learning_rate = 1e-3
seed = 9
"""


def test_defaults_without_file():
    cfg = RunConfig.load(None)
    assert cfg.get("scene", "rooms") == 4
    assert cfg.get("train", "batch_size") == 512
    assert cfg.get("mapper", "conf_threshold") == 0.60
    assert cfg.get("query", "top_k") == 50


def test_unknown_section_and_key_rejected(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[nonsense]\nx = 1\n")
    with pytest.raises(ConfigError):
        RunConfig.load(bad)
    bad.write_text("[scene]\nroomz = 4\n")
    with pytest.raises(ConfigError):
        RunConfig.load(bad)
    bad.write_text("[scene]\nrooms = soup\n")
    with pytest.raises(ConfigError):
        RunConfig.load(bad)


def test_resolved_text_parses_back(tmp_path):
    cfg = RunConfig.load(None)
    path = cfg.write_resolved(tmp_path, "check")
    again = RunConfig.load(path)
    assert again.values == cfg.values


def test_paper_scale_train_config():
    cfg = RunConfig()
    cfg.override("train", "scale", "paper")
    tc = cfg.train_config()
    assert (tc.batch_size, tc.epochs, tc.samples_per_epoch) == (12544, 100, 3_000_000)
    assert (tc.learning_rate, tc.lr_decay) == (1e-4, 3e-3)


@pytest.fixture(scope="module")
def cli_workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cliwork")
    ini = root / "run.ini"
    ini.write_text(TINY_INI)
    scene_dir = root / "scene"
    assert main(["--config", str(ini), "gen-scene", "--out", str(scene_dir)]) == 0
    cloud = root / "cloud.lopf"
    assert main(["--config", str(ini), "build-cloud", "--scene", str(scene_dir),
                 "--out", str(cloud)]) == 0
    ckpt = root / "field.lopc"
    assert main(["--config", str(ini), "train", "--cloud", str(cloud),
                 "--out", str(ckpt)]) == 0
    return root, ini, scene_dir, cloud, ckpt


def test_gen_scene_is_reproducible(tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text(TINY_INI)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["--config", str(ini), "gen-scene", "--out", str(a)]) == 0
    assert main(["--config", str(ini), "gen-scene", "--out", str(b)]) == 0
    files_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    assert files_a == files_b
    for rel in files_a:
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel


def test_cli_pipeline_outputs(cli_workspace):
    root, ini, scene_dir, cloud, ckpt = cli_workspace
    # resolved configs are written next to outputs
    assert (scene_dir / "gen-scene.resolved.ini").exists()
    assert (root / "build-cloud.resolved.ini").exists()
    assert (root / "train.resolved.ini").exists()
    assert ckpt.with_suffix(".losses.json").exists()
    assert main(["check-cloud", str(cloud)]) == 0


def test_cli_infer_and_localize(cli_workspace, capsys):
    root, ini, scene_dir, cloud, ckpt = cli_workspace
    assert main(["--config", str(ini), "infer", "--checkpoint", str(ckpt),
                 "--scene", str(scene_dir), "--point", "1.0,1.0,0.2"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert "label" in out and "scores" in out

    heat = root / "heat.csv"
    grid = root / "heatgrid.csv"
    assert main(["--config", str(ini), "localize", "--checkpoint", str(ckpt),
                 "--scene", str(scene_dir), "--text", "cup in the kitchen",
                 "--cloud", str(cloud), "--out", str(heat),
                 "--grid-csv", str(grid)]) == 0
    assert heat.read_text().startswith("x,y,z,score")
    assert grid.exists()

    # image query from a stored unit embedding
    emb = np.zeros(16)
    emb[0] = 1.0
    emb_path = root / "emb.json"
    emb_path.write_text(json.dumps(emb.tolist()))
    assert main(["--config", str(ini), "localize", "--checkpoint", str(ckpt),
                 "--scene", str(scene_dir), "--image-emb", str(emb_path),
                 "--out", str(root / "heat2.csv")]) == 0


def test_cli_map_plan_eval(cli_workspace, capsys):
    root, ini, scene_dir, cloud, ckpt = cli_workspace
    map_path = root / "map.json"
    assert main(["--config", str(ini), "build-map", "--checkpoint", str(ckpt),
                 "--scene", str(scene_dir), "--out", str(map_path)]) == 0
    graph = json.loads(map_path.read_text())
    assert graph["vertices"] and "provenance" in graph

    plan_path = root / "path.json"
    rc = main(["--config", str(ini), "plan", "--checkpoint", str(ckpt),
               "--scene", str(scene_dir), "--map", str(map_path),
               "--start", "1.0,1.0,0.2", "--goal", "cup", "--out", str(plan_path)])
    assert rc == 0
    plan = json.loads(plan_path.read_text())
    assert plan["vertices"] and plan["waypoints"]

    report_path = root / "report.json"
    assert main(["--config", str(ini), "eval-region", "--checkpoint", str(ckpt),
                 "--scene", str(scene_dir), "--num-points", "200",
                 "--out", str(report_path)]) == 0
    report = json.loads(report_path.read_text())
    assert 0.0 <= report["accuracy"] <= 1.0
    assert report["count"] == 200

    upd_path = root / "map2.json"
    assert main(["--config", str(ini), "update-map", "--checkpoint", str(ckpt),
                 "--scene", str(scene_dir), "--map", str(map_path),
                 "--out", str(upd_path), "--frames", "0,1"]) == 0
    assert upd_path.exists()


def test_cli_structured_errors(cli_workspace, capsys):
    root, ini, scene_dir, cloud, ckpt = cli_workspace
    bad = root / "missing.lopf"
    bad.write_bytes(b"XXXX garbage")
    rc = main(["check-cloud", str(bad)])
    assert rc == 1
    err = capsys.readouterr().err
    assert "CorruptCloud" in err


def test_update_map_rejects_foreign_checkpoint(cli_workspace, tmp_path, capsys):
    root, ini, scene_dir, cloud, ckpt = cli_workspace
    map_path = root / "map.json"
    if not map_path.exists():
        assert main(["--config", str(ini), "build-map", "--checkpoint", str(ckpt),
                     "--scene", str(scene_dir), "--out", str(map_path)]) == 0
        capsys.readouterr()
    other = tmp_path / "other.lopc"
    raw = bytearray(Path(ckpt).read_bytes())
    raw[-1] ^= 0xFF  # flip one parameter byte: different checkpoint hash
    other.write_bytes(bytes(raw))
    rc = main(["--config", str(ini), "update-map", "--checkpoint", str(other),
               "--scene", str(scene_dir), "--map", str(map_path),
               "--out", str(tmp_path / "m2.json")])
    assert rc == 1
    assert "DimMismatch" in capsys.readouterr().err
