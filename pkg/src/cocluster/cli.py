"""Command-line entry point: fixtures, hierarchies, solves, evaluation, rendering.

Every command is driven by a :class:`RunConfig` assembled from defaults, an
optional JSON config file, and explicit flags (in that order).  Outputs are
staged and moved into place atomically, so a failing command never leaves a
partial artifact directory behind.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import shutil
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import synth
from .descriptors import DescriptorConfig
from .errors import CoclusterError, ConfigError, FormatError, InfeasibleError, InputError
from .hierarchy import build_bpt, load_hierarchy, save_hierarchy
from .metrics import boundary_mask, boundary_pr, consistency_curve, sequence_curve
from .pipeline import (
    cocluster,
    default_schedule,
    load_bundle,
    multiresolution,
    save_bundle,
    video_segment,
)
from .raster import Image, load_image, load_label_map, read_label_array, save_image, write_label_array
from .solver import DEFAULT_ITERATION_LIMIT, DEFAULT_NODE_LIMIT


@dataclass(frozen=True)
class RunConfig:
    """Everything a command needs, merged from defaults, file, and flags."""

    frames: tuple[str, ...] = ()
    leaves: tuple[str, ...] = ()
    hierarchies: tuple[str, ...] = ()
    bundle: str = ""
    gt: tuple[str, ...] = ()
    out: str = "out"
    overwrite: bool = False
    # schedule
    levels: int = 30
    t_max: float = 0.4
    t_min: float = 0.1
    beta: float = 0.1
    t_r: float = 0.25
    # descriptor knobs
    bins: int = 8
    cell: int = 16
    half_disk: int = 4
    window: float = 20.0
    mu: float = 0.2
    color_var: float = 0.05
    shape_var: float = 0.05
    pos_var: float = 25.0
    # band + solver
    weighted: bool = True
    mode: str = "auto"
    node_limit: int = DEFAULT_NODE_LIMIT
    iteration_limit: int = DEFAULT_ITERATION_LIMIT
    # misc
    seed: int = 19
    tol: float = 2.0

    def validate(self) -> "RunConfig":
        if not self.t_max >= self.t_min > 0:
            raise ConfigError("cli", "RunConfig",
                              f"need t_max >= t_min > 0, got t_max={self.t_max}, t_min={self.t_min}")
        if self.beta > self.t_max:
            raise ConfigError("cli", "RunConfig", f"beta {self.beta} exceeds t_max {self.t_max}")
        try:
            self.descriptor_config()
        except InputError as exc:
            raise ConfigError("cli", "RunConfig", exc.cause) from None
        if self.levels < 1:
            raise ConfigError("cli", "RunConfig", f"levels must be >= 1, got {self.levels}")
        if self.mode not in ("auto", "exact", "float"):
            raise ConfigError("cli", "RunConfig", f"unknown solver mode {self.mode!r}")
        return self

    def descriptor_config(self) -> DescriptorConfig:
        return DescriptorConfig(bins=self.bins, cell=self.cell, half_disk=self.half_disk,
                                window=self.window, mu=self.mu, color_var=self.color_var,
                                shape_var=self.shape_var, pos_var=self.pos_var)


_LIST_FIELDS = {"frames", "leaves", "hierarchies", "gt"}


def _config_from_sources(args: argparse.Namespace) -> RunConfig:
    values = {f.name: f.default for f in dataclasses.fields(RunConfig)}
    valid = set(values)
    if args.config is not None:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError("cli", "load_config", f"no such config file: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError("cli", "load_config", f"{path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("cli", "load_config", f"{path}: top level must be an object")
        for key, val in data.items():
            if key not in valid:
                raise ConfigError("cli", "load_config", f"{path}: unknown key {key!r}")
            values[key] = val
    for key in valid:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    for key in _LIST_FIELDS:
        seq = values[key]
        if isinstance(seq, str):
            raise ConfigError("cli", "load_config", f"{key} must be a list of paths")
        values[key] = tuple(str(p) for p in seq)
    return RunConfig(**values).validate()


# ---------------------------------------------------------------------------
# shared plumbing

def _staged_output(out_dir, overwrite: bool, write_fn) -> None:
    """Run ``write_fn(tmp_dir)`` and move the result into place atomically."""
    out = Path(out_dir)
    if out.exists() and not overwrite:
        raise InputError("cli", "write_output", f"output directory exists: {out} (pass --overwrite)")
    tmp = out.with_name(out.name + ".partial")
    if tmp.exists():
        shutil.rmtree(tmp)
    tmp.mkdir(parents=True)
    try:
        write_fn(tmp)
        if out.exists():
            shutil.rmtree(out)
        tmp.rename(out)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise


def _load_scene(cfg: RunConfig, operation: str, minimum: int = 1):
    if len(cfg.frames) < minimum:
        raise ConfigError("cli", operation, f"need at least {minimum} frame(s), got {len(cfg.frames)}")
    if len(cfg.leaves) != len(cfg.frames):
        raise ConfigError("cli", operation,
                          f"{len(cfg.frames)} frames but {len(cfg.leaves)} leave partitions")
    images = [load_image(p) for p in cfg.frames]
    maps = [load_label_map(p) for p in cfg.leaves]
    if cfg.hierarchies:
        if len(cfg.hierarchies) != len(cfg.frames):
            raise ConfigError("cli", operation,
                              f"{len(cfg.frames)} frames but {len(cfg.hierarchies)} hierarchies")
        trees = [load_hierarchy(p) for p in cfg.hierarchies]
    else:
        trees = [build_bpt(img, lv) for img, lv in zip(images, maps)]
    return images, maps, trees


def _solver_kwargs(cfg: RunConfig) -> dict:
    return {"weighted": cfg.weighted, "mode": cfg.mode, "node_limit": cfg.node_limit,
            "iteration_limit": cfg.iteration_limit}


# ---------------------------------------------------------------------------
# commands

def _cmd_hierarchy(cfg: RunConfig) -> None:
    images, maps, _ = _load_scene(cfg, "hierarchy")

    def write(tmp: Path) -> None:
        for i, (img, lv) in enumerate(zip(images, maps)):
            save_hierarchy(build_bpt(img, lv), tmp / f"hierarchy_{i:03d}.json")

    _staged_output(cfg.out, cfg.overwrite, write)


def _cmd_cocluster(cfg: RunConfig) -> None:
    images, maps, trees = _load_scene(cfg, "cocluster")
    solution = cocluster(images, maps, trees, cfg.t_r, cfg.beta, cfg.descriptor_config(),
                         **_solver_kwargs(cfg))
    save_bundle(solution, cfg.out, overwrite=cfg.overwrite)


def _cmd_multires(cfg: RunConfig) -> None:
    images, maps, trees = _load_scene(cfg, "multires")
    schedule = default_schedule(cfg.levels, cfg.t_max, cfg.t_min)
    results = multiresolution(images, maps, trees, schedule, cfg.beta,
                              cfg.descriptor_config(), **_solver_kwargs(cfg))
    save_bundle(results, cfg.out, overwrite=cfg.overwrite)


def _cmd_video(cfg: RunConfig) -> None:
    images, maps, trees = _load_scene(cfg, "video", minimum=2)
    schedule = default_schedule(cfg.levels, cfg.t_max, cfg.t_min)
    result = video_segment(images, maps, trees, schedule, cfg.beta,
                           cfg.descriptor_config(), **_solver_kwargs(cfg))
    save_bundle(result, cfg.out, overwrite=cfg.overwrite)


def _read_bundle(cfg: RunConfig, operation: str):
    if not cfg.bundle:
        raise ConfigError("cli", operation, "a solution bundle is required (--bundle)")
    return load_bundle(cfg.bundle)


def _cmd_eval(cfg: RunConfig) -> None:
    bundle = _read_bundle(cfg, "eval")
    n_frames = len(bundle.label_maps[0]) if bundle.label_maps else 0
    if len(cfg.gt) != n_frames:
        raise ConfigError("cli", "eval",
                          f"bundle has {n_frames} frames but {len(cfg.gt)} ground-truth maps given")
    gt_arrays = [read_label_array(p) for p in cfg.gt]
    gt_masks = [arr != 0 for arr in gt_arrays]

    def write(tmp: Path) -> None:
        pr_rows = []
        for li, level_maps in enumerate(bundle.label_maps):
            if any(m is None for m in level_maps):
                continue
            for fi, arr in enumerate(level_maps):
                curve = consistency_curve(arr, gt_masks[fi])
                curve.write_csv(tmp / f"consistency_frame{fi:03d}_level{li:02d}.csv")
                precision, recall = boundary_pr(boundary_mask(arr),
                                                boundary_mask(gt_arrays[fi]), cfg.tol)
                pr_rows.append((fi, li, precision, recall))
            sequence_curve(level_maps, gt_masks).write_csv(tmp / f"sequence_level{li:02d}.csv")
        with open(tmp / "boundary_pr.csv", "w", newline="") as fh:
            fh.write("frame,level,precision,recall\n")
            for fi, li, precision, recall in pr_rows:
                fh.write(f"{fi},{li},{precision!r},{recall!r}\n")

    _staged_output(cfg.out, cfg.overwrite, write)


def _id_color(cid: int) -> tuple[int, int, int]:
    """Stable pseudo-random color per global cluster id."""
    x = (cid + 1) * 0x9E3779B9 & 0xFFFFFFFF
    x ^= x >> 16
    x = x * 0x85EBCA6B & 0xFFFFFFFF
    x ^= x >> 13
    return 64 + (x & 0x7F), 64 + ((x >> 7) & 0x7F), 64 + ((x >> 14) & 0x7F)


def _cmd_render(cfg: RunConfig) -> None:
    bundle = _read_bundle(cfg, "render")
    n_frames = len(bundle.label_maps[0]) if bundle.label_maps else 0
    if len(cfg.frames) != n_frames:
        raise ConfigError("cli", "render",
                          f"bundle has {n_frames} frames but {len(cfg.frames)} images given")
    images = [load_image(p) for p in cfg.frames]

    def write(tmp: Path) -> None:
        for li, level_maps in enumerate(bundle.label_maps):
            for fi, arr in enumerate(level_maps):
                if arr is None:
                    continue
                overlay = images[fi].pixels.copy()
                overlay[boundary_mask(arr)] = (255, 255, 255)
                save_image(Image(overlay), tmp / f"overlay_frame{fi:03d}_level{li:02d}.png")
                ids = np.unique(arr)
                lut = np.zeros((int(ids.max()) + 1, 3), dtype=np.uint8)
                for cid in ids.tolist():
                    lut[cid] = _id_color(int(cid))
                save_image(Image(lut[arr]), tmp / f"fill_frame{fi:03d}_level{li:02d}.png")

    _staged_output(cfg.out, cfg.overwrite, write)


def _write_scene(tmp: Path, scene) -> None:
    for fi, (img, lv) in enumerate(zip(scene.images, scene.leaves)):
        save_image(img, tmp / f"frame_{fi:03d}.png")
        write_label_array(lv.labels, tmp / f"leaves_{fi:03d}.csv")
        gt = np.zeros(lv.shape, dtype=np.int64)
        for k, mask in enumerate(scene.masks[fi]):
            gt[mask] = k + 1
        write_label_array(gt, tmp / f"gt_{fi:03d}.csv")


def _cmd_synth(cfg: RunConfig) -> None:
    def write(tmp: Path) -> None:
        pair_dir = tmp / "two_rectangles"
        pair_dir.mkdir()
        _write_scene(pair_dir, synth.two_rectangle_scene(seed=cfg.seed))
        seq_dir = tmp / "translated"
        seq_dir.mkdir()
        _write_scene(seq_dir, synth.translated_sequence(seed=cfg.seed))
        fixture = dataclasses.asdict(synth.fixture_config())
        fixture.update({"levels": 10, "t_max": 0.4, "t_min": 0.1, "beta": 0.1})
        (tmp / "config.json").write_text(json.dumps(fixture, indent=2, sort_keys=True) + "\n")

    _staged_output(cfg.out, cfg.overwrite, write)


_COMMANDS = {
    "hierarchy": _cmd_hierarchy,
    "cocluster": _cmd_cocluster,
    "multires": _cmd_multires,
    "video": _cmd_video,
    "eval": _cmd_eval,
    "render": _cmd_render,
    "synth": _cmd_synth,
}


# ---------------------------------------------------------------------------
# argument parsing

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cocluster",
                                     description="Hierarchical co-clustering of image sequences")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("hierarchy", "build merging trees from frames and leave partitions"),
        ("cocluster", "joint solve at a single resolution level"),
        ("multires", "independent solves over a resolution schedule"),
        ("video", "forward-only video segmentation"),
        ("eval", "consistency and boundary metrics for a bundle"),
        ("render", "overlay and fill images for a bundle"),
        ("synth", "generate the deterministic synthetic fixtures"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--frames", nargs="+", help="input frame images (PNG/PPM)")
        p.add_argument("--leaves", nargs="+", help="leave partitions (CSV or 16-bit PNG)")
        p.add_argument("--hierarchies", nargs="+", help="hierarchy JSON files (default: build)")
        p.add_argument("--bundle", help="existing solution bundle directory")
        p.add_argument("--gt", nargs="+", help="ground-truth label maps, one per frame")
        p.add_argument("--out", help="output directory")
        p.add_argument("--overwrite", action="store_true", default=None,
                       help="replace the output directory if present")
        p.add_argument("--levels", type=int, help="number of schedule levels")
        p.add_argument("--t-max", dest="t_max", type=float, help="coarsest resolution target")
        p.add_argument("--t-min", dest="t_min", type=float, help="finest resolution target")
        p.add_argument("--beta", type=float, help="band slack")
        p.add_argument("--t-r", dest="t_r", type=float, help="single-level resolution target")
        p.add_argument("--bins", type=int, help="histogram bins per channel")
        p.add_argument("--cell", type=int, help="contour cell size")
        p.add_argument("--half-disk", dest="half_disk", type=int, help="half-disk radius")
        p.add_argument("--window", type=float, help="matching window in pixels")
        p.add_argument("--mu", type=float, help="inter-pair penalty")
        p.add_argument("--color-var", dest="color_var", type=float)
        p.add_argument("--shape-var", dest="shape_var", type=float)
        p.add_argument("--pos-var", dest="pos_var", type=float)
        p.add_argument("--unweighted", dest="weighted", action="store_false", default=None,
                       help="count variables instead of boundary length in bands")
        p.add_argument("--mode", choices=["auto", "exact", "float"], help="LP arithmetic")
        p.add_argument("--node-limit", dest="node_limit", type=int)
        p.add_argument("--iteration-limit", dest="iteration_limit", type=int)
        p.add_argument("--seed", type=int, help="seed for synthetic generators")
        p.add_argument("--tol", type=float, help="boundary matching tolerance in pixels")
    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        cfg = _config_from_sources(args)
        _COMMANDS[args.command](cfg)
        return 0
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    except (InputError, FormatError) as exc:
        print(exc, file=sys.stderr)
        return 3
    except InfeasibleError as exc:
        print(exc, file=sys.stderr)
        return 4
    except CoclusterError as exc:
        print(exc, file=sys.stderr)
        return 5
    except Exception as exc:  # noqa: BLE001 — the CLI boundary maps everything
        print(f"cli: {args.command}: unexpected failure: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
