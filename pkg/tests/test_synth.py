import numpy as np
import pytest

from cocluster.descriptors import DescriptorConfig
from cocluster.synth import (
    GRAY_A,
    GRAY_B,
    fixture_config,
    four_leaf_fixture,
    jittered_sites,
    random_hierarchy,
    random_scene,
    translated_sequence,
    two_rectangle_scene,
    voronoi_labels,
)


def bbox(mask):
    rows, cols = np.nonzero(mask)
    return rows.min(), rows.max(), cols.min(), cols.max()


def test_two_rectangle_scene_is_deterministic():
    a = two_rectangle_scene()
    b = two_rectangle_scene()
    for fa, fb in zip(a.images, b.images):
        assert np.array_equal(fa.pixels, fb.pixels)
    for la, lb in zip(a.leaves, b.leaves):
        assert np.array_equal(la.labels, lb.labels)


def test_two_rectangle_scene_shape():
    scene = two_rectangle_scene()
    assert len(scene.images) == len(scene.leaves) == len(scene.masks) == 2
    for img, lv in zip(scene.images, scene.leaves):
        assert img.pixels.shape == (90, 120, 3)
        assert lv.n_regions == 26
    assert all(len(m) == 2 for m in scene.masks)


def test_rectangles_are_single_leaves():
    scene = two_rectangle_scene()
    for fi in range(2):
        labels = scene.leaves[fi].labels
        for mask in scene.masks[fi]:
            assert mask.sum() == 14 * 8
            covered = np.unique(labels[mask])
            assert covered.size == 1
            # the leaf does not bleed outside the mask
            assert np.array_equal(labels == covered[0], mask)


def test_second_frame_is_translated_copy():
    scene = two_rectangle_scene()
    shifts = set()
    for k in range(2):
        r0 = bbox(scene.masks[0][k])
        r1 = bbox(scene.masks[1][k])
        shifts.add((r1[0] - r0[0], r1[2] - r0[2]))
        assert (r0[1] - r0[0], r0[3] - r0[2]) == (r1[1] - r1[0], r1[3] - r1[2])
    assert len(shifts) == 1
    assert shifts.pop() != (0, 0)


def test_background_is_two_tone_dither():
    scene = two_rectangle_scene()
    labels = scene.leaves[0].labels
    px = scene.images[0].pixels
    fg = scene.masks[0][0] | scene.masks[0][1]
    grays = px[~fg]
    assert set(np.unique(grays)) <= {GRAY_A, GRAY_B}
    # every background leaf mixes the two tones at a bounded ratio
    for lab in np.unique(labels[~fg]):
        area = labels == lab
        frac = (px[area][:, 0] == GRAY_A).mean()
        assert 0.25 <= frac <= 0.75


def test_translated_sequence_moves_in_equal_steps():
    seq = translated_sequence()
    assert len(seq.images) == 6
    boxes = [bbox(m[0]) for m in seq.masks]
    areas = [m[0].sum() for m in seq.masks]
    assert len(set(areas)) == 1
    dys = {b[0] for b in boxes}
    dxs = [b[2] for b in boxes]
    assert len(dys) == 1  # horizontal translation only
    assert np.diff(dxs).tolist() == [3] * 5


def test_voronoi_labels_partition():
    rng = np.random.default_rng(3)
    sites = jittered_sites(rng, 40, 60, 4, 6)
    labels = voronoi_labels(40, 60, sites)
    assert labels.shape == (40, 60)
    assert labels.min() == 0
    assert np.unique(labels).size == 24


def test_jittered_sites_stay_in_bounds():
    rng = np.random.default_rng(9)
    sites = jittered_sites(rng, 90, 120, 4, 6)
    assert sites.shape == (24, 2)
    assert (sites[:, 0] >= 0).all() and (sites[:, 0] < 90).all()
    assert (sites[:, 1] >= 0).all() and (sites[:, 1] < 120).all()


def test_fixture_config_scales_down_defaults():
    cfg = fixture_config()
    assert (cfg.window, cfg.mu) == (6.0, 0.02)
    default = DescriptorConfig()
    assert (default.window, default.mu) == (20.0, 0.2)


def test_four_leaf_fixture_layout():
    _, leaves, h = four_leaf_fixture()
    assert leaves.labels.tolist() == [
        [0, 0, 1, 1],
        [0, 0, 1, 1],
        [2, 2, 2, 3],
        [2, 2, 2, 3],
    ]
    assert h.leaf_count == 4
    assert h.merges == ((0, 1, 4), (2, 3, 5), (4, 5, 6))


def test_random_scene_respects_leaf_count():
    rng = np.random.default_rng(17)
    for n in (4, 5, 6):
        img, lv = random_scene(rng, n)
        assert lv.n_regions == n
        assert img.pixels.shape[:2] == lv.shape
        h = random_hierarchy(rng, lv)
        assert h.leaf_count == n
        assert len(h.merges) == n - 1


def test_random_scene_reproducible_per_seed():
    a = random_scene(np.random.default_rng(5), 5)
    b = random_scene(np.random.default_rng(5), 5)
    assert np.array_equal(a[1].labels, b[1].labels)
    assert np.array_equal(a[0].pixels, b[0].pixels)
