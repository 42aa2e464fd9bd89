import numpy as np
import pytest

from conftest import all_cuts
from cocluster.errors import FormatError, InputError
from cocluster.hierarchy import (
    Hierarchy,
    TreeCut,
    build_bpt,
    cut_to_encoding,
    encoding_to_cut,
    hierarchy_from_json,
    hierarchy_to_json,
    load_hierarchy,
    merging_step_encoding,
    save_hierarchy,
)
from cocluster.synth import four_leaf_fixture


def test_step_encodings(four_leaf_case):
    _, _, h, vars_ = four_leaf_case
    assert merging_step_encoding(h, vars_, 0).tolist() == [1, 1, 1, 1, 1]
    assert merging_step_encoding(h, vars_, 1).tolist() == [0, 1, 1, 1, 1]
    assert merging_step_encoding(h, vars_, 2).tolist() == [0, 1, 1, 1, 0]
    assert merging_step_encoding(h, vars_, 3).tolist() == [0, 0, 0, 0, 0]


def test_step_encoding_bounds(four_leaf_case):
    _, _, h, vars_ = four_leaf_case
    with pytest.raises(InputError):
        merging_step_encoding(h, vars_, 4)
    with pytest.raises(InputError):
        merging_step_encoding(h, vars_, -1)


def test_cut_encoding_round_trip(four_leaf_case):
    _, _, h, vars_ = four_leaf_case
    enc = cut_to_encoding(h, vars_, TreeCut((0, 1, 5)))
    assert enc.tolist() == [1, 1, 1, 1, 0]
    back = encoding_to_cut(h, vars_, enc)
    assert back.ok and back.cut.nodes == (0, 1, 5)


def test_every_cut_round_trips(four_leaf_case):
    _, _, h, vars_ = four_leaf_case
    for nodes in all_cuts(h):
        enc = cut_to_encoding(h, vars_, TreeCut(nodes))
        dec = encoding_to_cut(h, vars_, enc)
        assert dec.ok and dec.cut.nodes == nodes


def test_decode_rejects_non_cut(four_leaf_case):
    _, _, h, vars_ = four_leaf_case
    # 0 merged with both 1 and 2 while 1-2 stays separated: not a cut.
    dec = encoding_to_cut(h, vars_, [0, 0, 1, 1, 1])
    assert not dec.ok
    assert dec.violated_node is not None


def test_invalid_cut_rejected(four_leaf_case):
    _, _, h, vars_ = four_leaf_case
    with pytest.raises(InputError):
        cut_to_encoding(h, vars_, TreeCut((0, 1)))  # does not cover leaves 2, 3
    with pytest.raises(InputError):
        cut_to_encoding(h, vars_, TreeCut((0, 1, 2, 3, 6)))  # overlaps


def test_hierarchy_validation():
    with pytest.raises(InputError):
        Hierarchy(3, ((0, 1, 3),))  # too few merges
    with pytest.raises(InputError):
        Hierarchy(2, ((0, 0, 2),))  # self-merge
    with pytest.raises(InputError):
        Hierarchy(2, ((0, 1, 5),))  # parent id out of sequence


def test_build_bpt_on_fixture_is_deterministic():
    # Red and green only share the blue channel bin, but their union then
    # overlaps yellow in two channels, so the second merge grabs region 3.
    image, leaves, _ = four_leaf_fixture()
    assert build_bpt(image, leaves).merges == ((0, 1, 4), (3, 4, 5), (2, 5, 6))


def test_build_bpt_ties_pick_smallest_pair():
    # Four grays landing in pairwise-distinct bins of every channel: all
    # candidate coefficients tie at zero and the smallest pair wins each round.
    px = np.zeros((4, 4, 3), dtype=np.uint8)
    for r, v in enumerate((0, 32, 64, 96)):
        px[2 * (r // 2):2 * (r // 2) + 2, 2 * (r % 2):2 * (r % 2) + 2] = v
    labels = np.repeat(np.repeat(np.array([[0, 1], [2, 3]]), 2, 0), 2, 1)
    from cocluster.raster import Image, LabelMap

    h = build_bpt(Image(px), LabelMap(labels))
    assert h.merges == ((0, 1, 4), (2, 3, 5), (4, 5, 6))


def test_build_bpt_merges_identical_colors_first():
    px = np.zeros((2, 4, 3), dtype=np.uint8)
    px[:, :2] = (200, 10, 10)
    px[:, 2:3] = (200, 10, 10)
    px[:, 3:] = (10, 10, 200)
    labels = np.array([[0, 0, 1, 2], [0, 0, 1, 2]])
    from cocluster.raster import Image, LabelMap

    h = build_bpt(Image(px), LabelMap(labels))
    assert h.merges[0][:2] == (0, 1)  # same color, coefficient 1


def test_json_round_trip(four_leaf_case, tmp_path):
    _, _, h, _ = four_leaf_case
    assert hierarchy_from_json(hierarchy_to_json(h)) == h
    path = tmp_path / "tree.json"
    save_hierarchy(h, path)
    assert load_hierarchy(path) == h


def test_json_rejects_malformed(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{\"leaf_count\": 2}")
    with pytest.raises(FormatError):
        load_hierarchy(path)
