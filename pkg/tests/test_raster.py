import numpy as np
import pytest

from cocluster.errors import FormatError, InputError
from cocluster.raster import (
    Image,
    LabelMap,
    canonical_labels,
    load_image,
    load_label_map,
    read_label_array,
    save_image,
    save_label_map,
    write_label_array,
)


def test_canonical_labels_first_occurrence_order():
    arr = np.array([[5, 5, 9], [9, 9, 9]])
    out = canonical_labels(arr)
    assert out.tolist() == [[0, 0, 1], [1, 1, 1]]


def test_canonical_labels_splits_disconnected_patches():
    # Same raw value, two patches not 4-connected: they become two regions.
    arr = np.array([[7, 0, 7]])
    assert canonical_labels(arr).tolist() == [[0, 1, 2]]


def test_canonical_labels_diagonal_is_not_connected():
    arr = np.array([[1, 0], [0, 1]])
    out = canonical_labels(arr)
    assert out[0, 0] != out[1, 1]


def test_label_map_canonicalizes_and_counts():
    lm = LabelMap(np.array([[4, 4], [2, 2]]))
    assert lm.labels.tolist() == [[0, 0], [1, 1]]
    assert lm.n_regions == 2
    assert lm.shape == (2, 2)


def test_label_map_is_read_only():
    lm = LabelMap(np.zeros((2, 2), dtype=np.int64))
    with pytest.raises(ValueError):
        lm.labels[0, 0] = 1


def test_label_array_csv_round_trip(tmp_path):
    arr = np.array([[0, 1, 2], [3, 4, 5]], dtype=np.int64)
    path = tmp_path / "labels.csv"
    write_label_array(arr, path)
    assert np.array_equal(read_label_array(path), arr)


def test_label_array_png_round_trip(tmp_path):
    arr = np.array([[0, 300], [70000 % 65535, 12]], dtype=np.int64)
    path = tmp_path / "labels.png"
    write_label_array(arr, path)
    assert np.array_equal(read_label_array(path), arr)


def test_load_label_map_canonicalizes(tmp_path):
    path = tmp_path / "raw.csv"
    write_label_array(np.array([[9, 9], [1, 1]]), path)
    lm = load_label_map(path)
    assert lm.labels.tolist() == [[0, 0], [1, 1]]


@pytest.mark.parametrize("name", ["img.png", "img.ppm"])
def test_image_round_trip(tmp_path, name):
    px = np.arange(24, dtype=np.uint8).reshape(2, 4, 3)
    path = tmp_path / name
    save_image(Image(px), path)
    back = load_image(path)
    assert np.array_equal(back.pixels, px)


def test_image_requires_rgb_uint8():
    with pytest.raises(InputError):
        Image(np.zeros((4, 4), dtype=np.uint8))
    with pytest.raises(InputError):
        Image(np.zeros((4, 4, 3), dtype=np.float64))


def test_load_image_missing_file():
    with pytest.raises(InputError):
        load_image("/does/not/exist.png")


def test_read_label_array_rejects_garbage(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1,2\n3,notanumber\n")
    with pytest.raises(FormatError):
        read_label_array(path)


def test_save_label_map_accepts_label_map(tmp_path):
    lm = LabelMap(np.array([[0, 1], [0, 1]]))
    path = tmp_path / "lm.csv"
    save_label_map(lm, path)
    assert np.array_equal(read_label_array(path), lm.labels)
