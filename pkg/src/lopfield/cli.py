"""Command-line surface tying the pipeline together.

Commands only select files and actions; everything numeric comes from the
INI config (see :mod:`lopfield.config`). Every command writes the resolved
config next to its outputs and exits non-zero with a structured error name
when a pipeline stage rejects its input.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path


def _set_thread_cap(argv) -> None:
    # honored only if set before numpy/BLAS load, so peek at raw argv
    cap = None
    for i, a in enumerate(argv):
        if a == "--threads" and i + 1 < len(argv):
            cap = argv[i + 1]
        elif a.startswith("--threads="):
            cap = a.split("=", 1)[1]
    if cap and cap.isdigit() and int(cap) > 0:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, cap)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lopfield",
        description="Train and query layout-object-position scene fields.",
    )
    parser.add_argument("--config", help="INI config file (defaults apply if omitted)")
    parser.add_argument("--threads", type=int, default=0,
                        help="cap BLAS worker threads (0 = library default)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-scene", help="generate a synthetic apartment sequence")
    p.add_argument("--out", required=True, help="output scene directory")
    p.add_argument("--seed", type=int, help="override [scene] seed")

    p = sub.add_parser("build-cloud", help="fuse frames into an LOPF feature cloud")
    p.add_argument("--scene", required=True, help="scene sequence directory")
    p.add_argument("--out", required=True, help="output .lopf path")
    p.add_argument("--split", choices=("train", "all"), default="train",
                   help="use the train split (holdout_every) or all frames")

    p = sub.add_parser("train", help="train a field on a feature cloud")
    p.add_argument("--cloud", required=True, help="input .lopf path")
    p.add_argument("--out", required=True, help="output checkpoint (.lopc)")
    p.add_argument("--resume", help="fine-tune from an existing checkpoint")

    p = sub.add_parser("infer", help="infer the region attribute of a 3D point")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--scene", required=True, help="scene directory (for the label set)")
    p.add_argument("--point", required=True, help="x,y,z in meters")
    p.add_argument("--labels", help="comma-separated label override")

    p = sub.add_parser("localize", help="localize a text or image query")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--scene", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--text", help="text query")
    group.add_argument("--image-emb", help=".npy or .json unit vision-language vector")
    p.add_argument("--cloud", help="sample positions from this .lopf (default: grid)")
    p.add_argument("--out", required=True, help="heatmap CSV path")
    p.add_argument("--grid-csv", help="also write a binned top-down CSV")

    p = sub.add_parser("build-map", help="build the topometric graph")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--scene", required=True)
    p.add_argument("--out", required=True, help="output graph JSON")

    p = sub.add_parser("update-map", help="update a graph with new frames")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--scene", required=True, help="directory holding the new frames")
    p.add_argument("--map", dest="map_path", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--frames", help="comma-separated frame indices (default: all)")

    p = sub.add_parser("plan", help="plan a path to a queried object")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--scene", required=True)
    p.add_argument("--map", dest="map_path", required=True)
    start = p.add_mutually_exclusive_group(required=True)
    start.add_argument("--start", help="x,y,z start position")
    start.add_argument("--start-id", type=int, help="start vertex id")
    goal = p.add_mutually_exclusive_group(required=True)
    goal.add_argument("--goal", help="object text query")
    goal.add_argument("--goal-id", type=int, help="goal vertex id")
    p.add_argument("--goal-region", help="optional region hint for the goal")
    p.add_argument("--out", required=True, help="output path JSON")

    p = sub.add_parser("eval-region", help="held-out region inference report")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--scene", required=True)
    p.add_argument("--num-points", type=int, default=1000)
    p.add_argument("--eval-seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output report JSON")

    p = sub.add_parser("check-cloud", help="validate an LOPF file against the schema")
    p.add_argument("cloud", help=".lopf path")

    return parser


def _parse_point(text: str):
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 3:
        raise ValueError("point must be x,y,z")
    return parts


def _load_bank(cfg, scene, labels_override=None):
    from .query import LabelBank

    labels = labels_override or list(scene.partition.regions)
    return LabelBank.from_labels(labels, cfg.provider())


def _out_dir(path) -> Path:
    d = Path(path).resolve().parent
    d.mkdir(parents=True, exist_ok=True)
    return d


def run(args) -> int:
    from .config import RunConfig

    cfg = RunConfig.load(args.config)
    if args.threads:
        cfg.override("runtime", "threads", args.threads)
    command = args.command

    if command == "gen-scene":
        from .scene import generate_scene, save_scene_dir

        seed = args.seed if args.seed is not None else cfg.get("scene", "seed")
        cfg.override("scene", "seed", seed)
        scene = generate_scene(cfg.scene_config(), seed)
        out = Path(args.out)
        save_scene_dir(scene, out)
        cfg.write_resolved(out, "gen-scene")
        print(f"scene with {len(scene.rooms)} rooms, {len(scene.objects)} objects, "
              f"{len(scene.trajectory)} frames -> {out}")
        return 0

    if command == "build-cloud":
        from .embed import build_feature_cloud, save_cloud
        from .evaluation import split_indices
        from .scene import load_frames, load_scene_dir

        scene = load_scene_dir(args.scene)
        n = len(scene.trajectory)
        train_idx, _ = split_indices(n, cfg.get("fusion", "holdout_every"))
        indices = train_idx if args.split == "train" else list(range(n))
        frames = load_frames(args.scene, indices)
        cloud = build_feature_cloud(frames, scene.partition, cfg.provider(),
                                    cfg.fusion_config())
        save_cloud(cloud, args.out)
        cfg.write_resolved(_out_dir(args.out), "build-cloud")
        dv, ds = cloud.dims
        print(f"fused {len(frames)} frames into {len(cloud)} points "
              f"(dv={dv}, ds={ds}) -> {args.out}")
        return 0

    if command == "train":
        from .embed import load_cloud
        from .field import load_checkpoint, train as train_field

        cloud = load_cloud(args.cloud, validate=True)
        init_field = load_checkpoint(args.resume) if args.resume else None
        grid_config = None
        if init_field is None:
            grid_config = cfg.hashgrid_config().with_bounds(*cloud.bounds())
        result = train_field(
            cloud,
            grid_config=grid_config,
            train_config=cfg.train_config(),
            loss_config=cfg.loss_config(),
            init_field=init_field,
            checkpoint_path=args.out,
        )
        out_dir = _out_dir(args.out)
        cfg.write_resolved(out_dir, "train")
        log_path = Path(args.out).with_suffix(".losses.json")
        log_path.write_text(json.dumps({
            "epoch_losses": result.epoch_losses,
            "train_config": result.config.to_dict(),
        }, indent=2))
        print(f"trained {result.config.epochs} epochs; "
              f"loss {result.epoch_losses[0]:.4f} -> {result.epoch_losses[-1]:.4f}; "
              f"checkpoint -> {args.out}")
        return 0

    if command == "infer":
        from .field import load_checkpoint
        from .query import infer_attribute
        from .scene import load_scene_dir

        field = load_checkpoint(args.checkpoint)
        scene = load_scene_dir(args.scene)
        labels = [s.strip() for s in args.labels.split(",")] if args.labels else None
        bank = _load_bank(cfg, scene, labels)
        point = _parse_point(args.point)
        label, scores = infer_attribute(field, point, bank, cfg.get("query", "vs_weight"))
        result = {"point": point, "label": label,
                  "scores": {l: float(s) for l, s in zip(bank.labels, scores)}}
        print(json.dumps(result, indent=2))
        return 0

    if command == "localize":
        import numpy as np

        from .embed import load_cloud
        from .field import load_checkpoint
        from .query import grid_samples, localize_image, localize_text
        from .scene import load_scene_dir

        field = load_checkpoint(args.checkpoint)
        scene = load_scene_dir(args.scene)
        if args.cloud:
            samples = load_cloud(args.cloud).positions.astype(np.float64)
        else:
            samples = grid_samples(*scene.bounds, step=0.25)
        if args.text:
            heatmap = localize_text(field, args.text, cfg.provider(), samples,
                                    cfg.get("query", "vs_weight"))
        else:
            emb_path = Path(args.image_emb)
            if emb_path.suffix == ".npy":
                emb = np.load(emb_path)
            else:
                emb = np.asarray(json.loads(emb_path.read_text()))
            heatmap = localize_image(field, emb, samples)
        heatmap.to_csv(args.out)
        if args.grid_csv:
            heatmap.topdown_grid_csv(args.grid_csv)
        cfg.write_resolved(_out_dir(args.out), "localize")
        top = heatmap.predicted_position(cfg.get("query", "top_k"))
        print(f"best score {heatmap.scores[heatmap.best]:.4f} at "
              f"({top[0]:.2f}, {top[1]:.2f}, {top[2]:.2f}); heatmap -> {args.out}")
        return 0

    if command == "build-map":
        from .field import checkpoint_hash, load_checkpoint
        from .scene import load_frames, load_scene_dir
        from .topomap import build_topomap, save_graph

        field = load_checkpoint(args.checkpoint)
        scene = load_scene_dir(args.scene)
        frames = load_frames(args.scene)
        bank = _load_bank(cfg, scene)
        graph = build_topomap(
            field, frames, bank, scene.bounds, cfg.mapper_config(),
            provenance={"checkpoint_hash": checkpoint_hash(args.checkpoint)},
        )
        save_graph(graph, args.out)
        cfg.write_resolved(_out_dir(args.out), "build-map")
        print(f"graph: {len(graph.vertices)} vertices, {len(graph.edges)} edges "
              f"-> {args.out}")
        return 0

    if command == "update-map":
        from .errors import DimMismatch
        from .field import checkpoint_hash, load_checkpoint
        from .scene import load_frames, load_scene_dir
        from .topomap import load_graph, save_graph, update

        field = load_checkpoint(args.checkpoint)
        scene = load_scene_dir(args.scene)
        graph = load_graph(args.map_path)
        recorded = graph.provenance.get("checkpoint_hash")
        actual = checkpoint_hash(args.checkpoint)
        if recorded and recorded != actual:
            raise DimMismatch("checkpoint does not match the graph provenance hash")
        indices = None
        if args.frames:
            indices = [int(i) for i in args.frames.split(",")]
        frames = load_frames(args.scene, indices)
        bank = _load_bank(cfg, scene)
        updated = update(graph, frames, field, bank, cfg.mapper_config())
        save_graph(updated, args.out)
        cfg.write_resolved(_out_dir(args.out), "update-map")
        print(f"updated graph: {len(updated.vertices)} vertices, "
              f"{len(updated.edges)} edges -> {args.out}")
        return 0

    if command == "plan":
        from .field import load_checkpoint
        from .planner import astar, emit_waypoints, floor_height, resolve_goal, resolve_start
        from .scene import load_scene_dir
        from .topomap import load_graph

        field = load_checkpoint(args.checkpoint)
        scene = load_scene_dir(args.scene)
        graph = load_graph(args.map_path)
        bank = _load_bank(cfg, scene)
        w = cfg.get("query", "vs_weight")
        ground_z = floor_height(graph, cfg.get("mapper", "sample_height"))
        if args.start_id is not None:
            start_id = args.start_id
        else:
            start_id = resolve_start(graph, _parse_point(args.start), field, bank, w,
                                     sample_z=ground_z)
        if args.goal_id is not None:
            goal_id = args.goal_id
        else:
            goal_id = resolve_goal(graph, args.goal, cfg.provider(), w,
                                   region_hint=args.goal_region)
        path = astar(graph, start_id, goal_id)
        path = emit_waypoints(graph, path, field, bank,
                              step=cfg.get("planner", "step"), w=w,
                              waypoint_z=ground_z)
        Path(args.out).write_text(path.to_json() + "\n")
        cfg.write_resolved(_out_dir(args.out), "plan")
        print(f"path {path.vertex_ids} cost {path.cost:.2f} m, "
              f"{len(path.waypoints)} waypoints -> {args.out}")
        return 0

    if command == "eval-region":
        from .evaluation import format_region_report, region_report, split_indices
        from .field import load_checkpoint
        from .scene import load_frames, load_scene_dir

        field = load_checkpoint(args.checkpoint)
        scene = load_scene_dir(args.scene)
        _, held = split_indices(len(scene.trajectory), cfg.get("fusion", "holdout_every"))
        if not held:
            raise SystemExit("eval-region needs [fusion] holdout_every >= 1")
        frames = load_frames(args.scene, held)
        bank = _load_bank(cfg, scene)
        report = region_report(
            field, frames, scene.partition, bank,
            n=args.num_points, seed=args.eval_seed, w=cfg.get("query", "vs_weight"),
        )
        Path(args.out).write_text(json.dumps(report, indent=2))
        cfg.write_resolved(_out_dir(args.out), "eval-region")
        print(format_region_report(report))
        return 0

    if command == "check-cloud":
        from .embed import load_cloud

        cloud = load_cloud(args.cloud, validate=True)
        dv, ds = cloud.dims
        print(f"ok: {len(cloud)} points, dv={dv}, ds={ds}, "
              f"voxel_size={cloud.voxel_size:g}")
        return 0

    raise AssertionError(f"unhandled command {command}")


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    _set_thread_cap(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    from .errors import LopFieldError

    try:
        return run(args)
    except LopFieldError as exc:
        print(f"error {exc.name}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
