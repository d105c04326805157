"""Dataset loading, synthetic planted-spectrum data, and file formats.

Formats handled here:

* IDX3 ubyte image files (MNIST), big-endian header, optionally gzip-compressed.
* Numeric CSV without quoting.
* PCAE binary matrices: ``b"PCAE"``, u32 version, u64 rows, u64 cols (all
  little-endian) followed by rows*cols little-endian float64 in row-major order.
* Binary PGM (P5, maxval 255) tile grids for viewing loading vectors.
"""

from __future__ import annotations

import csv
import gzip
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .matrix import DimensionError, RandomSource

IDX_IMAGE_MAGIC = 0x00000803
PCAE_MAGIC = b"PCAE"
PCAE_VERSION = 1
_PCAE_HEADER = struct.Struct("<4sIQQ")
_MAX_ELEMENTS = 1 << 34


class FormatError(ValueError):
    """A file does not follow its expected format."""


class BadMagicError(FormatError):
    pass


class UnsupportedVersionError(FormatError):
    pass


class TruncatedFileError(FormatError):
    pass


class DimensionOverflowError(FormatError):
    pass


class CsvFormatError(FormatError):
    pass


@dataclass(frozen=True)
class Dataset:
    observations: np.ndarray
    source_tag: str = ""
    image_shape: tuple[int, int] | None = None

    def __post_init__(self):
        obs = self.observations
        if obs.ndim != 2 or obs.shape[0] < 1 or obs.shape[1] < 1:
            raise DimensionError(f"dataset needs n >= 1 and N >= 1, got shape {obs.shape}")
        if self.image_shape is not None and self.image_shape[0] * self.image_shape[1] != obs.shape[0]:
            raise DimensionError(f"image shape {self.image_shape} does not match dimension {obs.shape[0]}")

    @property
    def n(self) -> int:
        return self.observations.shape[0]

    @property
    def count(self) -> int:
        return self.observations.shape[1]


@dataclass(frozen=True)
class PlantedSpectrum:
    """Ground truth for synthetic data: an orthogonal basis, per-axis score stds and a mean.

    ``stds`` must be non-negative and non-increasing, strictly decreasing among
    its positive entries; trailing zeros are allowed to plant low-rank data.
    """

    basis: np.ndarray
    stds: np.ndarray
    mean: np.ndarray

    def __post_init__(self):
        n = self.basis.shape[0]
        if self.basis.shape != (n, n) or self.stds.shape != (n,) or self.mean.shape != (n,):
            raise DimensionError("basis must be n x n with stds and mean of length n")
        if np.linalg.norm(self.basis.T @ self.basis - np.eye(n)) > 1e-10:
            raise ValueError("planted basis is not orthogonal")
        validate_stds(self.stds)

    @property
    def n(self) -> int:
        return self.basis.shape[0]


def validate_stds(stds) -> np.ndarray:
    stds = np.asarray(stds, dtype=np.float64)
    if np.any(stds < 0) or not np.all(np.isfinite(stds)):
        raise ValueError("stds must be finite and non-negative")
    positive = stds[stds > 0]
    if np.any(np.diff(stds) > 0) or np.any(np.diff(positive) >= 0):
        raise ValueError("stds must be strictly descending (trailing zeros allowed)")
    return stds


def _open_maybe_gzip(path):
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(2)
    return gzip.open(path, "rb") if head == b"\x1f\x8b" else open(path, "rb")


def read_idx_images(path, limit: int | None = None) -> Dataset:
    """Read an IDX3 image file; pixels are scaled to [0, 1].

    ``limit`` keeps only the first ``limit`` images.
    """
    with _open_maybe_gzip(path) as fh:
        header = fh.read(16)
        if len(header) < 4:
            raise TruncatedFileError(f"{path}: file too short for an IDX header")
        (magic,) = struct.unpack(">I", header[:4])
        if magic != IDX_IMAGE_MAGIC:
            raise BadMagicError(f"{path}: not an image IDX file (magic 0x{magic:08x})")
        if len(header) < 16:
            raise TruncatedFileError(f"{path}: truncated IDX header")
        count, rows, cols = struct.unpack(">III", header[4:16])
        if count == 0 or rows == 0 or cols == 0:
            raise DimensionOverflowError(f"{path}: zero-sized dimension {count}x{rows}x{cols}")
        if count * rows * cols > _MAX_ELEMENTS:
            raise DimensionOverflowError(f"{path}: dimensions {count}x{rows}x{cols} are too large")
        keep = count if limit is None else min(count, int(limit))
        need = keep * rows * cols
        payload = fh.read(need)
    if len(payload) < need:
        raise TruncatedFileError(f"{path}: expected {need} pixel bytes, found {len(payload)}")
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(keep, rows * cols)
    return Dataset(pixels.T.astype(np.float64) / 255.0, source_tag=f"idx:{Path(path).name}", image_shape=(rows, cols))


def write_idx_images(images: np.ndarray, path) -> None:
    """Write uint8 images of shape (count, rows, cols) as an IDX3 file."""
    images = np.asarray(images, dtype=np.uint8)
    count, rows, cols = images.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGE_MAGIC, count, rows, cols))
        fh.write(images.tobytes())


def read_csv_matrix(path, orientation: str = "observations") -> Dataset:
    """Read a rectangular numeric CSV.

    ``orientation="observations"`` treats each CSV row as one observation (it
    becomes a column of the dataset); ``"variables"`` keeps the CSV layout.
    """
    if orientation not in ("observations", "variables"):
        raise ValueError(f"unknown orientation {orientation!r}")
    rows: list[list[float]] = []
    with open(path, newline="") as fh:
        for r, record in enumerate(csv.reader(fh), start=1):
            if not record or all(not cell.strip() for cell in record):
                continue
            values = []
            for c, cell in enumerate(record, start=1):
                try:
                    value = float(cell)
                except ValueError:
                    raise CsvFormatError(f"{path}: row {r}, column {c}: not a number: {cell!r}") from None
                if not math.isfinite(value):
                    raise CsvFormatError(f"{path}: row {r}, column {c}: non-finite value")
                values.append(value)
            if rows and len(values) != len(rows[0]):
                raise CsvFormatError(f"{path}: row {r} has {len(values)} fields, expected {len(rows[0])}")
            rows.append(values)
    if not rows:
        raise CsvFormatError(f"{path}: empty CSV file")
    table = np.array(rows, dtype=np.float64)
    obs = table.T if orientation == "observations" else table
    return Dataset(np.ascontiguousarray(obs), source_tag=f"csv:{Path(path).name}")


def write_csv_matrix(matrix: np.ndarray, path, orientation: str = "variables") -> None:
    """Write ``matrix`` as CSV using ``repr`` so values round-trip exactly."""
    table = matrix.T if orientation == "observations" else matrix
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in np.atleast_2d(table):
            writer.writerow([repr(float(x)) for x in row])


def random_orthogonal(n: int, rng: RandomSource) -> np.ndarray:
    """Haar-distributed orthogonal matrix from the QR factorization of a Gaussian matrix."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    q, r = np.linalg.qr(rng.normal((n, n)))
    return q * np.where(np.diag(r) < 0, -1.0, 1.0)


def synthesize_gaussian(spectrum: PlantedSpectrum, count: int, rng: RandomSource) -> Dataset:
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    z = rng.normal((spectrum.n, count))
    obs = spectrum.mean[:, None] + spectrum.basis @ (spectrum.stds[:, None] * z)
    return Dataset(obs, source_tag="planted-gaussian")


def planted_spectrum(stds, rng: RandomSource, mean_norm: float = 0.0) -> PlantedSpectrum:
    """Random planted basis, with the mean placed along a random direction of norm ``mean_norm``."""
    stds = validate_stds(stds)
    n = stds.size
    basis = random_orthogonal(n, rng)
    direction = rng.normal(n)
    mean = mean_norm * direction / np.linalg.norm(direction) if mean_norm else np.zeros(n)
    return PlantedSpectrum(basis=basis, stds=stds, mean=mean)


def _to_bytes(column: np.ndarray) -> np.ndarray:
    lo, hi = float(column.min()), float(column.max())
    if hi == lo:
        return np.full(column.shape, 128, dtype=np.uint8)
    return np.rint((column - lo) / (hi - lo) * 255.0).astype(np.uint8)


def write_pgm_grid(vectors: np.ndarray, image_shape, grid_cols: int, path) -> tuple[int, int]:
    """Tile the columns of ``vectors`` as images in a binary PGM; returns (height, width).

    Each column is stretched independently so its minimum maps to 0 and its
    maximum to 255; a constant column renders as mid-gray. Unused tiles are black.
    """
    h, w = image_shape
    n, m = vectors.shape
    if h * w != n:
        raise DimensionError(f"image shape {h}x{w} does not match vector length {n}")
    if grid_cols < 1:
        raise ValueError("grid_cols must be >= 1")
    grid_rows = math.ceil(m / grid_cols)
    canvas = np.zeros((grid_rows * h, grid_cols * w), dtype=np.uint8)
    for j in range(m):
        r, c = divmod(j, grid_cols)
        canvas[r * h : (r + 1) * h, c * w : (c + 1) * w] = _to_bytes(vectors[:, j]).reshape(h, w)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{canvas.shape[1]} {canvas.shape[0]}\n255\n".encode("ascii"))
        fh.write(canvas.tobytes())
    return canvas.shape


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise BadMagicError(f"{path}: not a binary PGM")
    width, height, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 255:
        raise FormatError(f"{path}: unsupported maxval {maxval}")
    pixels = parts[4]
    if len(pixels) < width * height:
        raise TruncatedFileError(f"{path}: truncated PGM payload")
    return np.frombuffer(pixels[: width * height], dtype=np.uint8).reshape(height, width)


def write_matrix(matrix: np.ndarray, path) -> None:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim == 1:
        matrix = matrix[:, None]
    rows, cols = matrix.shape
    with open(path, "wb") as fh:
        fh.write(_PCAE_HEADER.pack(PCAE_MAGIC, PCAE_VERSION, rows, cols))
        fh.write(np.ascontiguousarray(matrix).astype("<f8").tobytes())


def read_matrix(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 4 or data[:4] != PCAE_MAGIC:
        raise BadMagicError(f"{path}: not a PCAE matrix file")
    if len(data) < _PCAE_HEADER.size:
        raise TruncatedFileError(f"{path}: truncated PCAE header")
    _, version, rows, cols = _PCAE_HEADER.unpack_from(data)
    if version != PCAE_VERSION:
        raise UnsupportedVersionError(f"{path}: unsupported PCAE version {version}")
    if rows * cols > _MAX_ELEMENTS:
        raise DimensionOverflowError(f"{path}: {rows}x{cols} matrix is too large")
    need = rows * cols * 8
    payload = data[_PCAE_HEADER.size :]
    if len(payload) < need:
        raise TruncatedFileError(f"{path}: expected {need} payload bytes, found {len(payload)}")
    if len(payload) > need:
        raise FormatError(f"{path}: {len(payload) - need} unexpected trailing bytes")
    return np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(rows, cols)


def save_params(params, directory) -> None:
    """Persist autoencoder parameters as ``w1/b1/w2/b2.pcae`` (biases as column vectors)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, value in params.items():
        write_matrix(value, directory / f"{name}.pcae")


def load_params(directory):
    from .autoencoder import PARAM_NAMES, AutoencoderParams

    directory = Path(directory)
    values = {}
    for name in PARAM_NAMES:
        arr = read_matrix(directory / f"{name}.pcae")
        values[name] = arr[:, 0].copy() if name.startswith("b") else arr.copy()
    return AutoencoderParams(**values)
