from fractions import Fraction

import numpy as np
import pytest

from cocluster.descriptors import DescriptorConfig
from cocluster.errors import CoclusterError, InfeasibleError, InputError
from cocluster.hierarchy import encoding_to_cut
from cocluster.pipeline import (
    build_setup,
    cocluster,
    default_schedule,
    extract_clusters,
    load_bundle,
    multiresolution,
    save_bundle,
    solve_level,
    video_segment,
)
from cocluster.synth import four_leaf_fixture

CFG = DescriptorConfig(window=3.0, mu=0.02)


@pytest.fixture(scope="module")
def pair():
    """Two identical copies of the 4-region image; masses per image are
    limited to {0, 4, 6, 8}, which makes band feasibility easy to reason
    about by hand."""
    image, leaves, h = four_leaf_fixture()
    return ([image, image], [leaves, leaves], [h, h])


@pytest.fixture(scope="module")
def pair_setup(pair):
    return build_setup(*pair, CFG)


def test_default_schedule_exact_rationals():
    ts = default_schedule()
    assert len(ts) == 30
    assert ts[0] == Fraction(2, 5) and ts[-1] == Fraction(1, 10)
    steps = {ts[i] - ts[i + 1] for i in range(29)}
    assert steps == {Fraction(3, 10) / 29}
    assert default_schedule(1, 0.25, 0.25) == [Fraction(1, 4)]


@pytest.mark.parametrize(
    "args",
    [
        (0, 0.4, 0.1),
        (5, 0.1, 0.4),  # t_max < t_min
        (5, 1.5, 0.1),  # above 1
        (5, 0.4, 0.0),  # t_min must be positive
        (2, 0.3, 0.3),  # needs room to descend
    ],
)
def test_default_schedule_validation(args):
    with pytest.raises(InputError):
        default_schedule(*args)


def test_build_setup_shapes(pair, pair_setup):
    setup = pair_setup
    assert len(setup.affinity) == len(setup.vars)
    assert setup.vars.intra_ids(0) == [0, 1, 2, 3, 4]
    tags = {row.tag for row in setup.structure}
    assert "triangle" in tags
    assert tags - {"triangle"}, "expected merging-tree rows alongside the triangles"
    assert not any(t.startswith("band") for t in tags)  # bands are per-level, not structural


def test_build_setup_validation(pair):
    images, leaves, trees = pair
    with pytest.raises(InputError):
        build_setup(images, leaves[:1], trees, CFG)
    with pytest.raises(InputError):
        build_setup([], [], [], CFG)
    from cocluster.hierarchy import Hierarchy

    wrong = Hierarchy(3, ((0, 1, 3), (2, 3, 4)))
    with pytest.raises(InputError):
        build_setup(images, leaves, [trees[0], wrong], CFG)


def test_extract_clusters_hand_case(pair_setup):
    vars_ = pair_setup.vars
    assignment = [1] * len(vars_)
    # merge only (0,1) within each image and 0-0' across
    assignment[vars_.id_of(0, 0, 0, 1)] = 0
    assignment[vars_.id_of(1, 0, 1, 1)] = 0
    assignment[vars_.id_of(0, 0, 1, 0)] = 0
    rows = extract_clusters(vars_, assignment)
    # rows[i][k] is the global cluster id of leaf k in image i: the two first
    # leaves of both images collapse into cluster 0, the rest stay singletons
    # numbered in first-appearance order
    assert rows == [[0, 0, 1, 2], [0, 0, 3, 4]]


def test_extract_clusters_rejects_fractional(pair_setup):
    vars_ = pair_setup.vars
    with pytest.raises(InputError):
        extract_clusters(vars_, [0.5] * len(vars_))
    with pytest.raises(InputError):
        extract_clusters(vars_, [0] * (len(vars_) - 1))


def test_cocluster_solution_invariants(pair, pair_setup):
    images, leaves, trees = pair
    t, beta = Fraction(3, 4), Fraction(1, 10)
    sol = cocluster(images, leaves, trees, t, beta, CFG)
    assert sol.status == "optimal"
    assert sol.t_r == t and sol.beta == beta

    # per-image assignment decodes to a valid tree cut
    intra = {i: [sol.assignment[v] for v in pair_setup.vars.intra_ids(i)] for i in range(2)}
    for i in range(2):
        assert encoding_to_cut(trees[i], pair_setup.vars, intra[i], image=i).ok

    # band: alpha-weighted active mass must be 6 on each image at t=3/4
    g = pair_setup.vars.graphs[0]
    for i in range(2):
        mass = sum(
            g.alpha[(v.region_a, v.region_b)]
            for v in pair_setup.vars.variables
            if v.kind == "intra" and v.image_a == i and sol.assignment[v.index]
        )
        assert mass == 6

    # objective re-priced exactly from the affinity vector: no drift
    expected = sum(
        (Fraction(sol.assignment[i]) * Fraction(pair_setup.affinity[i]) for i in range(len(pair_setup.affinity))),
        Fraction(0),
    )
    assert sol.objective == expected

    # painted maps agree with the leaf labels
    for i in range(2):
        painted = np.asarray(sol.leaf_labels[i])[leaves[i].labels]
        assert np.array_equal(sol.label_maps[i], painted)
    assert sol.n_clusters == len({lab for row in sol.leaf_labels for lab in row})


def test_identical_frames_share_labels(pair):
    images, leaves, trees = pair
    sol = cocluster(images, leaves, trees, Fraction(3, 4), Fraction(1, 10), CFG)
    # same-position regions attract strongly, so the frames tell one story
    assert sol.leaf_labels[0] == sol.leaf_labels[1]


def test_infeasible_band_raises(pair_setup):
    # mass would have to be exactly 2; only {0, 4, 6, 8} are achievable
    with pytest.raises(InfeasibleError) as exc:
        solve_level(pair_setup, Fraction(3, 10), Fraction(1, 20))
    msg = str(exc.value)
    assert "band" in msg and "image 0" in msg


def test_freeze_conflict_is_internal_error(pair_setup):
    # {0,2} | {1,3} is not a cut of the merging tree: freezing it cannot work
    with pytest.raises(CoclusterError) as exc:
        solve_level(pair_setup, Fraction(3, 4), Fraction(1, 10),
                    frozen_labels=[[0, 1, 0, 1], None])
    assert not isinstance(exc.value, InfeasibleError)
    assert "frozen" in str(exc.value)


def test_multiresolution_isolates_infeasible_levels(pair):
    images, leaves, trees = pair
    schedule = [Fraction(9, 10), Fraction(3, 4), Fraction(1, 2)]
    results = multiresolution(images, leaves, trees, schedule, Fraction(1, 10), CFG)
    assert [r.ok for r in results] == [False, True, True]
    assert results[0].error and "band" in results[0].error
    assert results[0].solution is None
    assert results[1].solution.status == "optimal"
    assert [r.t_r for r in results] == schedule


def test_schedule_must_strictly_decrease(pair):
    images, leaves, trees = pair
    with pytest.raises(InputError):
        multiresolution(images, leaves, trees, [Fraction(1, 2), Fraction(1, 2)], Fraction(1, 10), CFG)


def test_video_segment_basic(pair):
    images, leaves, trees = pair
    frames = [images[0]] * 3
    lv = [leaves[0]] * 3
    hs = [trees[0]] * 3
    schedule = [Fraction(3, 4), Fraction(1, 2)]
    observed = []
    result = video_segment(frames, lv, hs, schedule, Fraction(1, 10), CFG,
                           on_solution=lambda setup, sol: observed.append((setup, sol)))
    assert result.n_levels == 2 and result.n_frames == 3
    # two init solves plus one forward step per level
    assert len(observed) == 4
    for li in range(2):
        for fi in range(3):
            painted = np.asarray(result.leaf_labels[li][fi])[lv[fi].labels]
            assert np.array_equal(result.label_maps[li][fi], painted)
        # identical frames: the same global ids persist through the sequence
        assert set(result.leaf_labels[li][2]) <= set(result.leaf_labels[li][0]) | set(result.leaf_labels[li][1])
        assert result.leaf_labels[li][0] == result.leaf_labels[li][1] == result.leaf_labels[li][2]


def test_video_prefix_is_stable(pair):
    images, leaves, trees = pair
    schedule = [Fraction(3, 4)]
    short = video_segment([images[0]] * 2, [leaves[0]] * 2, [trees[0]] * 2, schedule, Fraction(1, 10), CFG)
    longer = video_segment([images[0]] * 3, [leaves[0]] * 3, [trees[0]] * 3, schedule, Fraction(1, 10), CFG)
    for fi in range(2):
        assert longer.leaf_labels[0][fi] == short.leaf_labels[0][fi]
        assert np.array_equal(longer.label_maps[0][fi], short.label_maps[0][fi])


def test_video_segment_validation(pair):
    images, leaves, trees = pair
    with pytest.raises(InputError):
        video_segment(images[:1], leaves[:1], trees[:1], [Fraction(1, 2)], Fraction(1, 10), CFG)
    with pytest.raises(InputError):
        video_segment(images, leaves[:1], trees, [Fraction(1, 2)], Fraction(1, 10), CFG)


# ---------------------------------------------------------------------------
# bundles

def test_bundle_round_trip_single(pair, tmp_path):
    images, leaves, trees = pair
    sol = cocluster(images, leaves, trees, Fraction(3, 4), Fraction(1, 10), CFG)
    out = tmp_path / "single"
    save_bundle(sol, out)
    bundle = load_bundle(out)
    assert bundle.schedule == (0.75,)
    assert bundle.beta == 0.1
    assert bundle.errors == {}
    for i in range(2):
        assert np.array_equal(bundle.label_maps[0][i], sol.label_maps[i])
        assert bundle.leaf_labels[0][i] == tuple(sol.leaf_labels[i])


def test_bundle_round_trip_multires_with_error_level(pair, tmp_path):
    images, leaves, trees = pair
    schedule = [Fraction(9, 10), Fraction(3, 4)]
    results = multiresolution(images, leaves, trees, schedule, Fraction(1, 10), CFG)
    out = tmp_path / "mr"
    save_bundle(results, out)
    bundle = load_bundle(out)
    assert bundle.label_maps[0] == (None, None)
    assert 0 in bundle.errors and "band" in bundle.errors[0]
    assert all(m is not None for m in bundle.label_maps[1])


def test_bundle_round_trip_video(pair, tmp_path):
    images, leaves, trees = pair
    result = video_segment([images[0]] * 3, [leaves[0]] * 3, [trees[0]] * 3,
                           [Fraction(3, 4), Fraction(1, 2)], Fraction(1, 10), CFG)
    out = tmp_path / "vid"
    save_bundle(result, out)
    bundle = load_bundle(out)
    for li in range(2):
        for fi in range(3):
            assert np.array_equal(bundle.label_maps[li][fi], result.label_maps[li][fi])
            assert bundle.leaf_labels[li][fi] == result.leaf_labels[li][fi]


def test_bundle_refuses_overwrite_by_default(pair, tmp_path):
    images, leaves, trees = pair
    sol = cocluster(images, leaves, trees, Fraction(3, 4), Fraction(1, 10), CFG)
    out = tmp_path / "dup"
    save_bundle(sol, out)
    with pytest.raises(InputError):
        save_bundle(sol, out)
    save_bundle(sol, out, overwrite=True)  # explicit opt-in works


def test_bundle_bytes_are_deterministic(pair, tmp_path):
    import hashlib

    images, leaves, trees = pair
    sol = cocluster(images, leaves, trees, Fraction(3, 4), Fraction(1, 10), CFG)

    def digest(d):
        h = hashlib.sha256()
        for p in sorted(d.rglob("*")):
            if p.is_file():
                h.update(str(p.relative_to(d)).encode())
                h.update(p.read_bytes())
        return h.hexdigest()

    a, b = tmp_path / "a", tmp_path / "b"
    save_bundle(sol, a)
    save_bundle(sol, b)
    assert digest(a) == digest(b)
    assert not list(tmp_path.glob("*.partial"))
