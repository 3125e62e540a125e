"""On-disk formats: images, seed masks, trimaps, probability and label maps.

Exact byte layouts are documented in FORMATS.md at the repository root.  In
short: images come in as 8-bit grayscale/RGB PNG or binary PGM/PPM; seed
masks are PNG with codes {0 none, 1 background, 2 foreground}; trimaps are
PNG with codes {0 background, 128 unclassified, 255 foreground}; probability
maps go out both as display PNG (quantized) and as a lossless ``.pmap``
float64 raster.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DimensionMismatchError, FormatError, InvalidInputError
from .graph import ImageGrid
from .walks import ProbabilityMap, SeedState

SEED_NONE = 0
SEED_BACKGROUND = 1
SEED_FOREGROUND = 2

TRIMAP_BACKGROUND = 0
TRIMAP_UNCLASSIFIED = 128
TRIMAP_FOREGROUND = 255

PMAP_MAGIC = b"PMAP"
_PMAP_HEADER = struct.Struct("<4sIII")  # magic, width, height, reserved

# Rec. 601 luma coefficients for RGB -> gray conversion.
_LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True, eq=False)
class SeedMask:
    """Seed stroke raster; same dimensions as its image, codes {0, 1, 2}."""

    codes: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.codes, dtype=np.uint8)
        if arr.ndim != 2:
            raise InvalidInputError("seed mask must be a 2-d raster")
        if not np.isin(arr, (SEED_NONE, SEED_BACKGROUND, SEED_FOREGROUND)).all():
            raise FormatError("seed mask may only contain codes 0, 1, 2")
        object.__setattr__(self, "codes", arr)

    @classmethod
    def from_seed_state(cls, seeds: SeedState, shape: tuple[int, int]) -> "SeedMask":
        codes = np.zeros(shape[0] * shape[1], dtype=np.uint8)
        codes[seeds.background] = SEED_BACKGROUND
        codes[seeds.foreground] = SEED_FOREGROUND
        return cls(codes.reshape(shape))

    def to_seed_state(self) -> SeedState:
        flat = self.codes.ravel()
        return SeedState(
            foreground=np.flatnonzero(flat == SEED_FOREGROUND),
            background=np.flatnonzero(flat == SEED_BACKGROUND),
        )

    @property
    def shape(self) -> tuple[int, int]:
        return self.codes.shape


@dataclass(frozen=True, eq=False)
class Trimap:
    """Evaluation mask: foreground, background, and an unclassified band."""

    codes: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.codes, dtype=np.uint8)
        if arr.ndim != 2:
            raise InvalidInputError("trimap must be a 2-d raster")
        if not np.isin(arr, (TRIMAP_BACKGROUND, TRIMAP_UNCLASSIFIED, TRIMAP_FOREGROUND)).all():
            raise FormatError("trimap may only contain codes 0, 128, 255")
        object.__setattr__(self, "codes", arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.codes.shape

    @property
    def foreground_mask(self) -> np.ndarray:
        return self.codes == TRIMAP_FOREGROUND

    @property
    def background_mask(self) -> np.ndarray:
        return self.codes == TRIMAP_BACKGROUND

    @property
    def unclassified_mask(self) -> np.ndarray:
        return self.codes == TRIMAP_UNCLASSIFIED


def _check_shape(shape, expected_shape, what: str) -> None:
    if expected_shape is not None and tuple(shape) != tuple(expected_shape):
        raise DimensionMismatchError(
            f"{what} has shape {tuple(shape)}, expected {tuple(expected_shape)}"
        )


def _read_pnm(data: bytes, origin: str) -> tuple[np.ndarray, int, int]:
    """Binary PGM (P5) / PPM (P6) reader; returns (array, maxval, channels)."""
    if data[:2] not in (b"P5", b"P6"):
        raise FormatError(f"{origin}: not a binary PGM/PPM file")
    channels = 1 if data[:2] == b"P5" else 3

    # Header tokens (width, height, maxval) separated by whitespace/comments.
    tokens: list[int] = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{origin}: truncated PNM header")
        try:
            tokens.append(int(data[start:pos]))
        except ValueError as exc:
            raise FormatError(f"{origin}: bad PNM header token") from exc
    pos += 1  # single whitespace byte after maxval
    width, height, maxval = tokens
    if not (0 < maxval <= 255):
        raise FormatError(f"{origin}: only 8-bit PNM supported (maxval {maxval})")
    expected = width * height * channels
    raster = data[pos : pos + expected]
    if len(raster) != expected:
        raise FormatError(f"{origin}: truncated PNM raster")
    arr = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, channels)
    return arr, maxval, channels


def _read_png(data: bytes, origin: str) -> np.ndarray:
    try:
        with Image.open(io.BytesIO(data)) as im:
            im.load()
            if im.mode not in ("L", "RGB"):
                raise FormatError(
                    f"{origin}: unsupported PNG mode {im.mode!r}; need 8-bit grayscale or RGB"
                )
            return np.asarray(im)
    except UnidentifiedImageError as exc:
        raise FormatError(f"{origin}: not a readable PNG file") from exc


def image_from_bytes(data: bytes, origin: str = "image") -> ImageGrid:
    """Decode PNG / binary PGM / binary PPM bytes, normalized to [0, 1].

    RGB inputs keep their channels for display and are converted to a single
    intensity per pixel with the Rec. 601 luma weights.
    """
    if data.startswith(b"\x89PNG"):
        arr = _read_png(data, origin)
        if arr.ndim == 2:
            return ImageGrid(intensity=arr / 255.0)
        channels = arr / 255.0
        return ImageGrid(intensity=channels @ _LUMA, channels=channels)
    if data[:2] in (b"P5", b"P6"):
        arr, maxval, nch = _read_pnm(data, origin)
        if nch == 1:
            return ImageGrid(intensity=arr[:, :, 0] / maxval)
        channels = arr / maxval
        return ImageGrid(intensity=channels @ _LUMA, channels=channels)
    raise FormatError(f"{origin}: unsupported image format (need PNG, PGM, or PPM)")


def load_image(path) -> ImageGrid:
    """Load a PNG / binary PGM / binary PPM file; see :func:`image_from_bytes`."""
    path = Path(path)
    if not path.is_file():
        raise InvalidInputError(f"no such image file: {path}")
    return image_from_bytes(path.read_bytes(), origin=str(path))


def _png_bytes(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(arr, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def _load_gray_png(path: Path, what: str) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise InvalidInputError(f"no such {what} file: {path}")
    arr = _read_png(path.read_bytes(), str(path))
    if arr.ndim != 2:
        raise FormatError(f"{path}: {what} must be 8-bit grayscale PNG")
    return arr


def load_seed_mask(path, expected_shape: tuple[int, int] | None = None) -> SeedMask:
    arr = _load_gray_png(Path(path), "seed mask")
    _check_shape(arr.shape, expected_shape, "seed mask")
    return SeedMask(codes=arr)


def save_seed_mask(mask: SeedMask, path) -> None:
    Path(path).write_bytes(_png_bytes(mask.codes))


def load_trimap(path, expected_shape: tuple[int, int] | None = None) -> Trimap:
    arr = _load_gray_png(Path(path), "trimap")
    _check_shape(arr.shape, expected_shape, "trimap")
    return Trimap(codes=arr)


def save_trimap(trimap: Trimap, path) -> None:
    Path(path).write_bytes(_png_bytes(trimap.codes))


def probability_to_bytes(pmap: ProbabilityMap) -> np.ndarray:
    """Quantize the clamped map to display bytes, round half up."""
    return np.floor(pmap.clamped * 255.0 + 0.5).astype(np.uint8)


def encode_probability_png(pmap: ProbabilityMap) -> bytes:
    return _png_bytes(probability_to_bytes(pmap))


def encode_probability_raster(pmap: ProbabilityMap) -> bytes:
    h, w = pmap.shape
    header = _PMAP_HEADER.pack(PMAP_MAGIC, w, h, 0)
    raw = np.ascontiguousarray(pmap.raw, dtype="<f8")
    return header + raw.tobytes()


def save_probability_map(pmap: ProbabilityMap, path) -> None:
    """Write a probability map; the suffix picks the format.

    ``.png`` writes the quantized clamped map for display; ``.pmap`` writes
    the raw solver values as a lossless little-endian float64 raster.
    """
    path = Path(path)
    if path.suffix == ".png":
        path.write_bytes(encode_probability_png(pmap))
    elif path.suffix == ".pmap":
        path.write_bytes(encode_probability_raster(pmap))
    else:
        raise InvalidInputError(f"unknown probability map suffix {path.suffix!r}")


def load_probability_raster(path) -> np.ndarray:
    """Read a ``.pmap`` float64 raster back, bit-identical to what was saved."""
    path = Path(path)
    data = path.read_bytes()
    if len(data) < _PMAP_HEADER.size:
        raise FormatError(f"{path}: truncated probability raster")
    magic, w, h, _ = _PMAP_HEADER.unpack_from(data)
    if magic != PMAP_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {PMAP_MAGIC!r}")
    expected = _PMAP_HEADER.size + 8 * w * h
    if len(data) != expected:
        raise FormatError(f"{path}: raster size {len(data)} does not match header")
    return np.frombuffer(data, dtype="<f8", offset=_PMAP_HEADER.size).reshape(h, w).copy()


def encode_labels_png(labels: np.ndarray) -> bytes:
    arr = np.where(np.asarray(labels, dtype=bool), 255, 0).astype(np.uint8)
    return _png_bytes(arr)


def save_labels(labels: np.ndarray, path) -> None:
    """Write a binary label map as 0/255 grayscale PNG."""
    Path(path).write_bytes(encode_labels_png(labels))


def load_labels(path, expected_shape: tuple[int, int] | None = None) -> np.ndarray:
    arr = _load_gray_png(Path(path), "label map")
    if not np.isin(arr, (0, 255)).all():
        raise FormatError(f"{path}: label map may only contain 0 and 255")
    _check_shape(arr.shape, expected_shape, "label map")
    return arr == 255
