"""End-to-end co-clustering: joint solves, resolution sweeps, video runs.

This module glues the geometric layers (partitions, merging trees, boundary
variables, affinities) to the binary solver and turns assignments back into
globally labeled partitions, including the forward-only video scheme where
already-published frame labelings are frozen and never revised.
"""

from __future__ import annotations

import csv
import json
import shutil
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .adjacency import BoundaryVariableSet, build_graph, enumerate_variables
from .constraints import (
    LinearConstraint,
    _as_fraction,
    band_bounds,
    band_constraints,
    freeze_constraints,
    intra_constraints,
    triangle_constraints,
)
from .descriptors import DescriptorConfig, assemble_affinity
from .errors import CoclusterError, InfeasibleError, InputError
from .hierarchy import Hierarchy
from .raster import Image, LabelMap, read_label_array, write_label_array
from .solver import (
    DEFAULT_ITERATION_LIMIT,
    DEFAULT_NODE_LIMIT,
    LpProblem,
    extract_fixings,
    solve_binary,
)

DEFAULT_LEVELS = 30
DEFAULT_T_MAX = Fraction(2, 5)
DEFAULT_T_MIN = Fraction(1, 10)
DEFAULT_BETA = Fraction(1, 10)


def default_schedule(levels: int = DEFAULT_LEVELS, t_max=DEFAULT_T_MAX,
                     t_min=DEFAULT_T_MIN) -> list[Fraction]:
    """Linearly spaced resolution targets, coarse to fine, as exact rationals."""
    if levels < 1:
        raise InputError("pipeline", "default_schedule", f"levels must be >= 1, got {levels}")
    hi, lo = _as_fraction(t_max), _as_fraction(t_min)
    if not 0 < lo <= hi <= 1:
        raise InputError("pipeline", "default_schedule",
                         f"need 0 < t_min <= t_max <= 1, got t_min={t_min}, t_max={t_max}")
    if levels == 1:
        return [hi]
    if lo == hi:
        raise InputError("pipeline", "default_schedule",
                         f"{levels} levels need t_min < t_max, got both {t_max}")
    step = (hi - lo) / (levels - 1)
    return [hi - k * step for k in range(levels)]


def _check_schedule(schedule, operation: str) -> list[Fraction]:
    ts = [_as_fraction(t) for t in schedule]
    if not ts:
        raise InputError("pipeline", operation, "empty schedule")
    for a, b in zip(ts, ts[1:]):
        if b >= a:
            raise InputError("pipeline", operation,
                             f"schedule must be strictly decreasing, got {float(a):g} before {float(b):g}")
    return ts


# ---------------------------------------------------------------------------
# problem assembly

@dataclass(frozen=True)
class ProblemSetup:
    """Level-independent pieces of a joint solve, reusable across bands.

    ``hierarchies`` may hold ``None`` for an image whose partition is already
    a final clustering (every intra variable of such an image must then be
    pinned by freezes); no merging-tree rows are emitted for it.
    """

    images: tuple[Image, ...]
    leaves: tuple[LabelMap, ...]
    hierarchies: tuple[Hierarchy | None, ...]
    config: DescriptorConfig
    vars: BoundaryVariableSet
    affinity: tuple[float, ...]
    structure: tuple[LinearConstraint, ...]


def build_setup(images, leaves, hierarchies, config: DescriptorConfig = DescriptorConfig()) -> ProblemSetup:
    """Enumerate variables, score them, and collect the structural rows."""
    images = tuple(images)
    leaves = tuple(leaves)
    hierarchies = tuple(hierarchies)
    if not images:
        raise InputError("pipeline", "build_setup", "need at least one image")
    if not len(images) == len(leaves) == len(hierarchies):
        raise InputError("pipeline", "build_setup",
                         f"got {len(images)} images, {len(leaves)} leave partitions, "
                         f"{len(hierarchies)} hierarchies")
    for i, (img, lv, h) in enumerate(zip(images, leaves, hierarchies)):
        if img.shape != lv.shape:
            raise InputError("pipeline", "build_setup",
                             f"image {i}: pixel grid {img.shape} vs partition grid {lv.shape}")
        if h is not None and h.leaf_count != lv.n_regions:
            raise InputError("pipeline", "build_setup",
                             f"image {i}: hierarchy over {h.leaf_count} leaves, partition has {lv.n_regions}")

    graphs = [build_graph(lv, image=i) for i, lv in enumerate(leaves)]
    vars_ = enumerate_variables(graphs, window=config.window)
    q = assemble_affinity(vars_, images, config)
    rows: list[LinearConstraint] = []
    for i, h in enumerate(hierarchies):
        if h is not None:
            rows.extend(intra_constraints(h, vars_, image=i))
    rows.extend(triangle_constraints(vars_))
    return ProblemSetup(images, leaves, hierarchies, config, vars_,
                        tuple(float(v) for v in q), tuple(rows))


# ---------------------------------------------------------------------------
# cluster extraction

def _components(vars_: BoundaryVariableSet, assignment) -> list[list[tuple[int, int]]]:
    """Connected components of the merged-boundary graph.

    Nodes are ``(image, region)`` pairs; an edge exists where a boundary
    variable is 0.  Components come back sorted by their smallest member,
    members sorted within each.
    """
    values = list(assignment)
    if len(values) != len(vars_):
        raise InputError("pipeline", "extract_clusters",
                         f"{len(values)} assignment values for {len(vars_)} variables")
    for v in values:
        if v != 0 and v != 1:
            raise InputError("pipeline", "extract_clusters", f"assignment must be binary, got {v!r}")

    nodes = [(g.image, r) for g in vars_.graphs for r in range(g.n_regions)]
    parent = {node: node for node in nodes}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for var, val in zip(vars_.variables, values):
        if val == 0:
            ra = find((var.image_a, var.region_a))
            rb = find((var.image_b, var.region_b))
            if ra != rb:
                # keep the smaller pair as the root so roots order components
                lo, hi = (ra, rb) if ra < rb else (rb, ra)
                parent[hi] = lo

    groups: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for node in nodes:  # already in (image, region) order
        groups.setdefault(find(node), []).append(node)
    return [groups[root] for root in sorted(groups)]


def extract_clusters(vars_: BoundaryVariableSet, assignment) -> list[list[int]]:
    """Per-image global cluster ids implied by a binary assignment.

    Clusters are connected components of the graph whose edges are the
    variables at 0; ids count up in order of each component's smallest
    ``(image, region)`` member.
    """
    comps = _components(vars_, assignment)
    labels = [[-1] * g.n_regions for g in vars_.graphs]
    for cid, comp in enumerate(comps):
        for i, r in comp:
            labels[i][r] = cid
    return labels


# ---------------------------------------------------------------------------
# single-level solve

@dataclass(frozen=True)
class CoClusterSolution:
    """Globally labeled partitions from one joint solve at one resolution.

    ``leaf_labels[i][r]`` is the global cluster id of region ``r`` of image
    ``i``; ``label_maps[i]`` paints those ids over the pixel grid.  The same
    id appearing in several images marks one cluster spanning them.
    """

    t_r: Fraction
    beta: Fraction
    leaf_labels: tuple[tuple[int, ...], ...]
    label_maps: tuple[np.ndarray, ...]
    assignment: tuple[int, ...]
    objective: Fraction
    status: str

    @property
    def n_clusters(self) -> int:
        return 1 + max(max(row) for row in self.leaf_labels)


def _paint(leaves: LabelMap, row) -> np.ndarray:
    arr = np.asarray(row, dtype=np.int32)[leaves.labels]
    arr.setflags(write=False)
    return arr


def solve_level(setup: ProblemSetup, t_r, beta, *, weighted: bool = True, band_images=None,
                frozen_labels=None, mode: str = "auto", node_limit: int = DEFAULT_NODE_LIMIT,
                iteration_limit: int = DEFAULT_ITERATION_LIMIT) -> CoClusterSolution:
    """Solve one resolution level on a prebuilt setup and extract clusters.

    ``band_images`` limits the resolution band to those images (default: all);
    ``frozen_labels`` pins every variable between already-labeled partitions,
    one label sequence per image or ``None`` for images still being solved.
    """
    t = _as_fraction(t_r)
    b = _as_fraction(beta)
    band_list = list(range(len(setup.images))) if band_images is None else [int(i) for i in band_images]
    rows = list(setup.structure)
    for i in band_list:
        rows.extend(band_constraints(setup.vars, i, t, b, weighted))
    fixed: dict[int, int] = {}
    if frozen_labels is not None:
        fixed, leftover = extract_fixings(freeze_constraints(setup.vars, frozen_labels))
        rows.extend(leftover)

    problem = LpProblem(setup.affinity, tuple(rows), fixed)
    sol = solve_binary(problem, mode=mode, node_limit=node_limit, iteration_limit=iteration_limit)
    if sol.status == "infeasible":
        raise _diagnose_infeasible(setup, t, b, weighted, band_list, fixed, mode,
                                   node_limit, iteration_limit)
    if not sol.values:
        raise CoclusterError("pipeline", "solve_level",
                             f"node limit {node_limit} exhausted without an incumbent")

    leaf_labels = extract_clusters(setup.vars, sol.values)
    maps = tuple(_paint(lv, row) for lv, row in zip(setup.leaves, leaf_labels))
    return CoClusterSolution(
        t_r=t,
        beta=b,
        leaf_labels=tuple(tuple(row) for row in leaf_labels),
        label_maps=maps,
        assignment=tuple(int(v) for v in sol.values),
        objective=sol.objective,
        status=sol.status,
    )


def _diagnose_infeasible(setup, t, b, weighted, band_list, fixed, mode, node_limit,
                         iteration_limit) -> CoclusterError:
    """Tell a too-tight band apart from a broken freeze system."""
    probe = LpProblem(setup.affinity, setup.structure, fixed)
    relaxed = solve_binary(probe, mode=mode, node_limit=node_limit, iteration_limit=iteration_limit)
    if relaxed.status != "infeasible":
        bands = "; ".join(
            "image {}: mass must lie in [{}, {}]".format(i, *band_bounds(setup.vars, i, t, b, weighted))
            for i in band_list
        )
        return InfeasibleError("pipeline", "solve_level",
                               f"resolution band t_r={float(t):g}, beta={float(b):g} admits no "
                               f"tree cut ({bands})")
    if fixed:
        # A frozen labeling is a realized solution, so it must stay feasible;
        # failing here means the constraint system itself is wrong.
        return CoclusterError("pipeline", "solve_level",
                              "frozen labels cannot be reproduced under the structural rows; "
                              "this indicates an internal defect")
    return InfeasibleError("pipeline", "solve_level", "structural constraints admit no assignment")


def cocluster(images, leaves, hierarchies, t_r, beta, config: DescriptorConfig = DescriptorConfig(),
              *, weighted: bool = True, band_images=None, frozen_labels=None, mode: str = "auto",
              node_limit: int = DEFAULT_NODE_LIMIT,
              iteration_limit: int = DEFAULT_ITERATION_LIMIT) -> CoClusterSolution:
    """One joint solve: variables, affinities, constraints, solve, extract."""
    setup = build_setup(images, leaves, hierarchies, config)
    return solve_level(setup, t_r, beta, weighted=weighted, band_images=band_images,
                       frozen_labels=frozen_labels, mode=mode, node_limit=node_limit,
                       iteration_limit=iteration_limit)


# ---------------------------------------------------------------------------
# multiresolution sweep

@dataclass(frozen=True)
class LevelResult:
    """Outcome of one schedule level: a solution, or a recorded failure."""

    t_r: Fraction
    beta: Fraction
    solution: CoClusterSolution | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.solution is not None


def multiresolution(images, leaves, hierarchies, schedule=None, beta=DEFAULT_BETA,
                    config: DescriptorConfig = DescriptorConfig(), *, weighted: bool = True,
                    mode: str = "auto", node_limit: int = DEFAULT_NODE_LIMIT,
                    iteration_limit: int = DEFAULT_ITERATION_LIMIT) -> list[LevelResult]:
    """Independent joint solves over a strictly decreasing resolution schedule.

    A level whose band admits no tree cut is reported in its ``LevelResult``
    without disturbing the remaining levels.
    """
    ts = default_schedule() if schedule is None else _check_schedule(schedule, "multiresolution")
    b = _as_fraction(beta)
    setup = build_setup(images, leaves, hierarchies, config)
    out: list[LevelResult] = []
    for t in ts:
        try:
            sol = solve_level(setup, t, b, weighted=weighted, mode=mode,
                              node_limit=node_limit, iteration_limit=iteration_limit)
            out.append(LevelResult(t, b, solution=sol))
        except InfeasibleError as exc:
            out.append(LevelResult(t, b, error=str(exc)))
    return out


# ---------------------------------------------------------------------------
# forward-only video scheme

@dataclass(frozen=True)
class VideoResult:
    """Per-level, per-frame globally labeled partitions of a video run.

    ``leaf_labels[r][i][k]`` is the global cluster id of leaf ``k`` of frame
    ``i`` at level ``r``; ``label_maps[r][i]`` paints frame ``i`` at that
    level.  Ids are persistent forward in time within each level.
    """

    schedule: tuple[Fraction, ...]
    beta: Fraction
    leaf_labels: tuple[tuple[tuple[int, ...], ...], ...]
    label_maps: tuple[tuple[np.ndarray, ...], ...]

    @property
    def n_levels(self) -> int:
        return len(self.label_maps)

    @property
    def n_frames(self) -> int:
        return len(self.label_maps[0]) if self.label_maps else 0


def _cluster_partition(level_row, leaves: LabelMap) -> tuple[LabelMap, list[int]]:
    """Re-read a realized clustering as a leave partition plus its global ids.

    A cluster occupying several disconnected patches of the frame splits into
    one region per patch; every patch keeps the cluster's global id, so the
    label-equality freeze still pins each patch pair to "merged".
    """
    painted = np.asarray(level_row, dtype=np.int64)[leaves.labels]
    part = LabelMap(painted)
    first = np.unique(part.labels.ravel(), return_index=True)[1]
    return part, painted.ravel()[first].tolist()


def video_segment(frames, leaves, hierarchies, schedule=None, beta=DEFAULT_BETA,
                  config: DescriptorConfig = DescriptorConfig(), *, weighted: bool = True,
                  mode: str = "auto", node_limit: int = DEFAULT_NODE_LIMIT,
                  iteration_limit: int = DEFAULT_ITERATION_LIMIT,
                  on_solution=None) -> VideoResult:
    """Forward-only sequence segmentation with persistent global labels.

    The first two frames are labeled by a joint solve per level.  Every later
    frame ``i`` is solved per level against the realized clustering of frame
    ``i-2`` at that level (re-read as a leave partition) and the leaves of
    frame ``i-1``; variables between already-labeled partitions are frozen to
    their published values, and the resolution band applies to frame ``i``
    only.  Earlier frames are never revisited.

    ``on_solution(setup, solution)``, when given, observes every internal
    solve (init levels and forward steps) — useful for auditing realized
    assignments without changing the result.
    """
    frames = tuple(frames)
    leaves = tuple(leaves)
    hierarchies = tuple(hierarchies)
    if len(frames) < 2:
        raise InputError("pipeline", "video_segment", f"need at least two frames, got {len(frames)}")
    if not len(frames) == len(leaves) == len(hierarchies):
        raise InputError("pipeline", "video_segment",
                         f"got {len(frames)} frames, {len(leaves)} leave partitions, "
                         f"{len(hierarchies)} hierarchies")
    ts = default_schedule() if schedule is None else _check_schedule(schedule, "video_segment")
    b = _as_fraction(beta)

    init = build_setup(frames[:2], leaves[:2], hierarchies[:2], config)
    level_labels: list[list[list[int]]] = []  # [level][frame] -> per-leaf global ids
    next_ids: list[int] = []
    for t in ts:
        sol = solve_level(init, t, b, weighted=weighted, mode=mode,
                          node_limit=node_limit, iteration_limit=iteration_limit)
        if on_solution is not None:
            on_solution(init, sol)
        rows = [list(r) for r in sol.leaf_labels]
        level_labels.append(rows)
        next_ids.append(1 + max(max(r) for r in rows))

    for i in range(2, len(frames)):
        for li, t in enumerate(ts):
            prev_part, prev_ids = _cluster_partition(level_labels[li][i - 2], leaves[i - 2])
            step = build_setup(
                (frames[i - 2], frames[i - 1], frames[i]),
                (prev_part, leaves[i - 1], leaves[i]),
                (None, hierarchies[i - 1], hierarchies[i]),
                config,
            )
            frozen = [prev_ids, level_labels[li][i - 1], None]
            sol = solve_level(step, t, b, weighted=weighted, band_images=(2,),
                              frozen_labels=frozen, mode=mode, node_limit=node_limit,
                              iteration_limit=iteration_limit)
            if on_solution is not None:
                on_solution(step, sol)

            # Carry ids forward: a component touching frozen members inherits
            # their id (smallest on the rare multi-id bridge); pure new-frame
            # components get fresh ids in order of their smallest leaf.
            known = (prev_ids, level_labels[li][i - 1])
            labels_i = [-1] * leaves[i].n_regions
            fresh = next_ids[li]
            for comp in _components(step.vars, sol.assignment):
                inherited = sorted({known[img][r] for img, r in comp if img < 2})
                if inherited:
                    cid = inherited[0]
                else:
                    cid = fresh
                    fresh += 1
                for img, r in comp:
                    if img == 2:
                        labels_i[r] = cid
            level_labels[li].append(labels_i)
            next_ids[li] = fresh

    maps = tuple(
        tuple(_paint(leaves[fi], level_labels[li][fi]) for fi in range(len(frames)))
        for li in range(len(ts))
    )
    leaf_out = tuple(tuple(tuple(row) for row in level_labels[li]) for li in range(len(ts)))
    return VideoResult(schedule=tuple(ts), beta=b, leaf_labels=leaf_out, label_maps=maps)


# ---------------------------------------------------------------------------
# solution bundles on disk

@dataclass(frozen=True)
class Bundle:
    """A solution bundle read back from disk.

    ``label_maps[r][i]`` is the global-id array of frame ``i`` at level ``r``
    (``None`` for a level recorded as infeasible); ``leaf_labels`` mirrors the
    correspondence table.
    """

    schedule: tuple[float, ...]
    beta: float
    label_maps: tuple[tuple[np.ndarray | None, ...], ...]
    leaf_labels: tuple[tuple[tuple[int, ...] | None, ...], ...]
    errors: dict[int, str]


def _level_width(n_levels: int) -> int:
    return max(2, len(str(max(n_levels - 1, 0))))


def _frame_width(n_frames: int) -> int:
    return max(3, len(str(max(n_frames - 1, 0))))


def _normalize_bundle(result):
    """Flatten any solve product into (schedule, beta, per-level data, errors)."""
    if isinstance(result, VideoResult):
        per_level = [(result.leaf_labels[li], result.label_maps[li])
                     for li in range(result.n_levels)]
        return list(result.schedule), result.beta, per_level, {}
    if isinstance(result, CoClusterSolution):
        return [result.t_r], result.beta, [(result.leaf_labels, result.label_maps)], {}
    levels = list(result)
    if not levels or not all(isinstance(lv, LevelResult) for lv in levels):
        raise InputError("pipeline", "save_bundle",
                         f"cannot bundle {type(result).__name__} objects")
    schedule = [lv.t_r for lv in levels]
    beta = levels[0].beta
    per_level = []
    errors = {}
    for li, lv in enumerate(levels):
        if lv.ok:
            per_level.append((lv.solution.leaf_labels, lv.solution.label_maps))
        else:
            per_level.append(None)
            errors[li] = lv.error or "infeasible"
    return schedule, beta, per_level, errors


def save_bundle(result, out_dir, *, overwrite: bool = False) -> None:
    """Write a solution bundle: per frame and level a label-map PNG and CSV,
    plus a cluster-correspondence table and run metadata.

    ``result`` may be a :class:`CoClusterSolution`, a list of
    :class:`LevelResult`, or a :class:`VideoResult`.  The bundle is staged in
    a sibling directory and moved into place only when complete, so a failed
    write never leaves partial output behind.
    """
    schedule, beta, per_level, errors = _normalize_bundle(result)
    out_dir = Path(out_dir)
    if out_dir.exists() and not overwrite:
        raise InputError("pipeline", "save_bundle", f"output directory exists: {out_dir}")

    n_frames = max((len(maps) for data in per_level if data for _, maps in [data]), default=0)
    lw, fw = _level_width(len(per_level)), _frame_width(n_frames)
    staging = out_dir.with_name(out_dir.name + ".partial")
    if staging.exists():
        shutil.rmtree(staging)
    staging.mkdir(parents=True)
    try:
        grids = {}
        rows = []
        for li, data in enumerate(per_level):
            if data is None:
                continue
            leaf_labels, maps = data
            for fi, (labels, arr) in enumerate(zip(leaf_labels, maps)):
                frame_dir = staging / f"frame_{fi:0{fw}d}"
                frame_dir.mkdir(exist_ok=True)
                write_label_array(arr, frame_dir / f"level_{li:0{lw}d}.png")
                write_label_array(arr, frame_dir / f"level_{li:0{lw}d}.csv")
                grids.setdefault(fi, [int(arr.shape[0]), int(arr.shape[1])])
                for leaf, cid in enumerate(labels):
                    rows.append((fi, leaf, int(cid), li))
        rows.sort(key=lambda r: (r[0], r[3], r[1]))
        with open(staging / "correspondence.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["frame", "leaf", "cluster", "level"])
            writer.writerows(rows)
        meta = {
            "beta": float(beta),
            "errors": {str(k): v for k, v in sorted(errors.items())},
            "frames": n_frames,
            "grids": [grids[fi] for fi in sorted(grids)],
            "levels": len(per_level),
            "schedule": [float(t) for t in schedule],
        }
        (staging / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        if out_dir.exists():
            shutil.rmtree(out_dir)
        staging.rename(out_dir)
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise


def load_bundle(path) -> Bundle:
    """Read a solution bundle written by :func:`save_bundle`."""
    path = Path(path)
    meta_path = path / "meta.json"
    if not meta_path.exists():
        raise InputError("pipeline", "load_bundle", f"no bundle at {path} (missing meta.json)")
    meta = json.loads(meta_path.read_text())
    n_levels = int(meta["levels"])
    n_frames = int(meta["frames"])
    errors = {int(k): v for k, v in meta.get("errors", {}).items()}
    lw, fw = _level_width(n_levels), _frame_width(n_frames)

    table: dict[tuple[int, int], dict[int, int]] = {}
    corr = path / "correspondence.csv"
    if corr.exists():
        with open(corr, newline="") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                key = (int(row["level"]), int(row["frame"]))
                table.setdefault(key, {})[int(row["leaf"])] = int(row["cluster"])

    maps = []
    leaf_labels = []
    for li in range(n_levels):
        if li in errors:
            maps.append(tuple([None] * n_frames))
            leaf_labels.append(tuple([None] * n_frames))
            continue
        level_maps = []
        level_leaves = []
        for fi in range(n_frames):
            csv_path = path / f"frame_{fi:0{fw}d}" / f"level_{li:0{lw}d}.csv"
            arr = read_label_array(csv_path)
            arr.setflags(write=False)
            level_maps.append(arr)
            leaves_here = table.get((li, fi))
            if leaves_here is None:
                level_leaves.append(None)
            else:
                level_leaves.append(tuple(leaves_here[k] for k in sorted(leaves_here)))
        maps.append(tuple(level_maps))
        leaf_labels.append(tuple(level_leaves))
    return Bundle(
        schedule=tuple(float(t) for t in meta["schedule"]),
        beta=float(meta["beta"]),
        label_maps=tuple(maps),
        leaf_labels=tuple(leaf_labels),
        errors=errors,
    )
