"""Raster input/output: RGB images and integer label maps.

Images are 8-bit RGB, stored as ``(H, W, 3)`` uint8 arrays and read/written
as PNG or binary PPM (P6).  Label maps are ``(H, W)`` int32 arrays stored as
CSV or 16-bit grayscale PNG.  Loading a label map canonicalizes it: labels
are relabeled onto a dense ``[0, N-1]`` range in first-occurrence scan
order, and pixels that share a label without being 4-connected are split
into one label per connected component.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as _PILImage
from scipy import ndimage

from .errors import FormatError, InputError

_FOUR_CONN = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=np.uint8)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Image:
    """An 8-bit RGB raster."""

    pixels: np.ndarray

    def __post_init__(self):
        px = self.pixels
        if px.ndim != 3 or px.shape[2] != 3 or px.dtype != np.uint8:
            raise InputError("raster", "Image", f"expected (H, W, 3) uint8, got {px.shape} {px.dtype}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise InputError("raster", "Image", "empty image")
        object.__setattr__(self, "pixels", _frozen(px.copy()))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape[:2]


def canonical_labels(arr: np.ndarray) -> np.ndarray:
    """Densify labels in first-occurrence order and split 4-disconnected ones.

    A pixel pair sharing a label but not joined by any 4-connected path ends
    up in distinct regions, so every region of the result is 4-connected.
    """
    arr = np.asarray(arr)
    if arr.ndim != 2:
        raise InputError("raster", "canonical_labels", f"expected 2-d array, got shape {arr.shape}")
    if arr.size == 0:
        raise InputError("raster", "canonical_labels", "empty label map")
    if np.issubdtype(arr.dtype, np.floating):
        raise InputError("raster", "canonical_labels", "labels must be integers")
    if (arr < 0).any():
        raise InputError("raster", "canonical_labels", "labels must be non-negative")

    # Key each pixel by (original label, 4-connected component of that label),
    # then relabel keys densely by first occurrence in row-major scan order.
    keys = np.zeros(arr.shape, dtype=np.int64)
    next_key = 0
    for value in np.unique(arr):
        comp, n = ndimage.label(arr == value, structure=_FOUR_CONN)
        keys[comp > 0] = comp[comp > 0] + next_key
        next_key += n
    flat = keys.ravel()
    _, first_pos, inverse = np.unique(flat, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first_pos))
    return order[inverse].reshape(arr.shape).astype(np.int32)


@dataclass(frozen=True)
class LabelMap:
    """A dense, 4-connected region labeling of a pixel grid."""

    labels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "labels", _frozen(canonical_labels(self.labels)))

    @property
    def n_regions(self) -> int:
        return int(self.labels.max()) + 1

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape


# ---------------------------------------------------------------------------
# images

def load_image(path: str | Path) -> Image:
    path = Path(path)
    if not path.exists():
        raise InputError("raster", "load_image", f"no such file: {path}")
    if path.suffix.lower() == ".ppm":
        return Image(_read_ppm(path))
    if path.suffix.lower() == ".png":
        with _PILImage.open(path) as im:
            if im.mode != "RGB":
                raise FormatError("raster", "load_image", f"PNG mode {im.mode!r} unsupported, need 8-bit RGB")
            return Image(np.asarray(im, dtype=np.uint8))
    raise InputError("raster", "load_image", f"unsupported image suffix {path.suffix!r}")


def save_image(image: Image, path: str | Path) -> None:
    path = Path(path)
    if path.suffix.lower() == ".ppm":
        path.write_bytes(_ppm_bytes(image.pixels))
    elif path.suffix.lower() == ".png":
        _PILImage.fromarray(image.pixels, mode="RGB").save(path, format="PNG")
    else:
        raise InputError("raster", "save_image", f"unsupported image suffix {path.suffix!r}")


def _ppm_bytes(px: np.ndarray) -> bytes:
    h, w = px.shape[:2]
    return b"P6\n%d %d\n255\n" % (w, h) + px.tobytes()


def _read_ppm(path: Path) -> np.ndarray:
    data = path.read_bytes()
    stream = io.BytesIO(data)

    def token() -> bytes:
        tok = b""
        while True:
            ch = stream.read(1)
            if ch == b"":
                raise FormatError("raster", "load_image", "PPM header: truncated")
            if ch == b"#":  # comment to end of line
                while ch not in (b"\n", b""):
                    ch = stream.read(1)
                continue
            if ch.isspace():
                if tok:
                    return tok
                continue
            tok += ch

    magic = token()
    if magic != b"P6":
        raise FormatError("raster", "load_image", f"PPM magic: expected P6, got {magic!r}")
    try:
        width, height, maxval = int(token()), int(token()), int(token())
    except ValueError:
        raise FormatError("raster", "load_image", "PPM header: non-numeric field") from None
    if width < 1 or height < 1:
        raise FormatError("raster", "load_image", "PPM size: non-positive dimension")
    if maxval != 255:
        raise FormatError("raster", "load_image", f"PPM maxval: {maxval} unsupported, need 255")
    body = stream.read(width * height * 3)
    if len(body) != width * height * 3:
        raise FormatError("raster", "load_image", "PPM pixel data: truncated")
    return np.frombuffer(body, dtype=np.uint8).reshape(height, width, 3)


# ---------------------------------------------------------------------------
# label maps

def load_label_map(path: str | Path) -> LabelMap:
    """Load and canonicalize a label map (CSV or 16-bit grayscale PNG)."""
    return LabelMap(read_label_array(path))


def save_label_map(labels: LabelMap | np.ndarray, path: str | Path) -> None:
    arr = labels.labels if isinstance(labels, LabelMap) else np.asarray(labels)
    write_label_array(arr, path)


def read_label_array(path: str | Path) -> np.ndarray:
    """Read raw label values without canonicalization."""
    path = Path(path)
    if not path.exists():
        raise InputError("raster", "load_label_map", f"no such file: {path}")
    if path.suffix.lower() == ".csv":
        rows = []
        with open(path, newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh)):
                if not row:
                    continue
                try:
                    rows.append([int(cell) for cell in row])
                except ValueError:
                    raise FormatError("raster", "load_label_map", f"CSV row {lineno}: non-integer cell") from None
        if not rows:
            raise FormatError("raster", "load_label_map", "CSV: no rows")
        widths = {len(r) for r in rows}
        if len(widths) != 1:
            raise FormatError("raster", "load_label_map", f"CSV: ragged rows (widths {sorted(widths)})")
        return np.array(rows, dtype=np.int64)
    if path.suffix.lower() == ".png":
        with _PILImage.open(path) as im:
            if im.mode not in ("I;16", "I", "L"):
                raise FormatError("raster", "load_label_map", f"PNG mode {im.mode!r} unsupported, need 16-bit gray")
            return np.asarray(im).astype(np.int64)
    raise InputError("raster", "load_label_map", f"unsupported label suffix {path.suffix!r}")


def write_label_array(arr: np.ndarray, path: str | Path) -> None:
    """Write raw label values bit-exactly (CSV or 16-bit grayscale PNG)."""
    arr = np.asarray(arr)
    if arr.ndim != 2:
        raise InputError("raster", "save_label_map", f"expected 2-d array, got shape {arr.shape}")
    if (arr < 0).any():
        raise InputError("raster", "save_label_map", "labels must be non-negative")
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            for row in arr.tolist():
                writer.writerow(row)
    elif path.suffix.lower() == ".png":
        if arr.max(initial=0) > 0xFFFF:
            raise InputError("raster", "save_label_map", f"label {int(arr.max())} exceeds 16-bit PNG range")
        _PILImage.fromarray(arr.astype(np.uint16)).save(path, format="PNG")
    else:
        raise InputError("raster", "save_label_map", f"unsupported label suffix {path.suffix!r}")
