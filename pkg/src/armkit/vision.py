"""Workspace perception fallback: background subtraction against a stored
frame, 4-connected blob extraction, and pixel-to-table-plane calibration.

Image fixtures travel as binary PGM (P5, maxval 255), read and written
bit-exactly.  Calibration files are JSON arrays of >= 4 objects
``{px, py, wx_m, wy_m}`` pairing pixel coordinates with table-plane meters.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class HomographyError(ValueError):
    """Calibration input is degenerate or otherwise unusable."""


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Row-major 8-bit grayscale frame."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError("image must be at least 1x1")
        px = np.asarray(self.pixels)
        if px.shape != (self.height, self.width):
            raise ValueError(
                f"pixel array shape {px.shape} does not match {self.height}x{self.width}"
            )
        if px.dtype != np.uint8:
            if not np.issubdtype(px.dtype, np.integer):
                raise ValueError("pixel intensities must be integers")
            if px.size and (px.min() < 0 or px.max() > 255):
                raise ValueError("pixel intensities must lie in [0, 255]")
            px = px.astype(np.uint8)
        else:
            px = px.copy()
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @classmethod
    def from_array(cls, pixels) -> "GrayImage":
        px = np.asarray(pixels)
        if px.ndim != 2:
            raise ValueError("expected a 2-D pixel array")
        return cls(width=px.shape[1], height=px.shape[0], pixels=px)


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Foreground bits with the dimensions of the source images."""

    width: int
    height: int
    bits: np.ndarray

    def __post_init__(self) -> None:
        bits = np.asarray(self.bits, dtype=bool)
        if bits.shape != (self.height, self.width):
            raise ValueError(
                f"bit array shape {bits.shape} does not match {self.height}x{self.width}"
            )
        bits = bits.copy()
        bits.flags.writeable = False
        object.__setattr__(self, "bits", bits)

    def count(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True)
class Blob:
    """One connected component: sub-pixel centroid (x, y), area, and the
    (row, col) of its first pixel in scan order."""

    pixel_centroid: tuple[float, float]
    area: int
    top_left: tuple[int, int]


@dataclass(frozen=True)
class Detection:
    """A located object: image centroid plus its table-plane position."""

    pixel_centroid: tuple[float, float]
    area: int
    world_point: tuple[float, float, float]


def rgb_to_gray(rgb) -> GrayImage:
    """Luminance conversion 0.299 R + 0.587 G + 0.114 B, rounded half up."""
    arr = np.asarray(rgb, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError("expected an (h, w, 3) RGB array")
    y = 0.299 * arr[:, :, 0] + 0.587 * arr[:, :, 1] + 0.114 * arr[:, :, 2]
    return GrayImage.from_array(np.floor(y + 0.5).astype(np.uint8))


def subtract_images(background: GrayImage, frame: GrayImage, threshold: float) -> BinaryMask:
    """Foreground mask: pixel set iff |frame - background| > threshold."""
    if (background.width, background.height) != (frame.width, frame.height):
        raise ValueError(
            f"image dimensions differ: {background.width}x{background.height} "
            f"vs {frame.width}x{frame.height}"
        )
    if not 0 <= threshold <= 255:
        raise ValueError(f"threshold must lie in [0, 255], got {threshold}")
    diff = np.abs(frame.pixels.astype(np.int16) - background.pixels.astype(np.int16))
    return BinaryMask(background.width, background.height, diff > threshold)


def largest_blob(mask: BinaryMask, min_area: int) -> Blob | None:
    """Largest 4-connected component with area >= min_area, or None.

    Ties go to the component whose first scan-order pixel has the smaller
    (row, col).
    """
    bits = mask.bits
    visited = np.zeros_like(bits, dtype=bool)
    height, width = bits.shape
    best: Blob | None = None
    rows_set, cols_set = np.nonzero(bits)
    for r0, c0 in zip(rows_set.tolist(), cols_set.tolist()):
        if visited[r0, c0]:
            continue
        stack = [(r0, c0)]
        visited[r0, c0] = True
        area = 0
        sum_r = 0
        sum_c = 0
        while stack:
            r, c = stack.pop()
            area += 1
            sum_r += r
            sum_c += c
            if r > 0 and bits[r - 1, c] and not visited[r - 1, c]:
                visited[r - 1, c] = True
                stack.append((r - 1, c))
            if r + 1 < height and bits[r + 1, c] and not visited[r + 1, c]:
                visited[r + 1, c] = True
                stack.append((r + 1, c))
            if c > 0 and bits[r, c - 1] and not visited[r, c - 1]:
                visited[r, c - 1] = True
                stack.append((r, c - 1))
            if c + 1 < width and bits[r, c + 1] and not visited[r, c + 1]:
                visited[r, c + 1] = True
                stack.append((r, c + 1))
        if area < min_area:
            continue
        # Scan order guarantees (r0, c0) is the component's smallest (row, col).
        if best is None or area > best.area:
            best = Blob((sum_c / area, sum_r / area), area, (r0, c0))
    return best


@dataclass(frozen=True, eq=False)
class Homography:
    """Invertible 3x3 map from homogeneous pixel coordinates to table-plane
    meters, normalized so the bottom-right entry is 1."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        H = np.asarray(self.matrix, dtype=float)
        if H.shape != (3, 3):
            raise ValueError("homography must be 3x3")
        if abs(H[2, 2]) < 1e-12:
            raise HomographyError("homography cannot be normalized (corner entry ~ 0)")
        H = H / H[2, 2]
        if abs(float(np.linalg.det(H))) <= 1e-12:
            raise HomographyError("homography is singular")
        H.flags.writeable = False
        object.__setattr__(self, "matrix", H)

    @classmethod
    def identity(cls) -> "Homography":
        return cls(np.eye(3))

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.matrix))


def _normalization(points: np.ndarray) -> np.ndarray:
    """Hartley conditioning: translate the centroid to the origin and scale
    the mean distance to sqrt(2)."""
    centroid = points.mean(axis=0)
    dist = np.linalg.norm(points - centroid, axis=1).mean()
    scale = math.sqrt(2.0) / dist if dist > 0 else 1.0
    return np.array(
        [
            [scale, 0.0, -scale * centroid[0]],
            [0.0, scale, -scale * centroid[1]],
            [0.0, 0.0, 1.0],
        ]
    )


def estimate_homography(pixel_points, world_points) -> Homography:
    """Direct linear transform over normalized coordinates.

    Requires >= 4 correspondences with no duplicates and no rank-collapsing
    (e.g. collinear) arrangement; exact inputs reproject to ~1e-12 m.
    """
    px = np.asarray(pixel_points, dtype=float).reshape(-1, 2)
    wd = np.asarray(world_points, dtype=float).reshape(-1, 2)
    if px.shape[0] != wd.shape[0]:
        raise HomographyError("pixel and world point counts differ")
    n = px.shape[0]
    if n < 4:
        raise HomographyError(f"at least 4 correspondences required, got {n}")
    for label, pts in (("pixel", px), ("world", wd)):
        for i in range(n):
            for j in range(i + 1, n):
                if np.linalg.norm(pts[i] - pts[j]) < 1e-12:
                    raise HomographyError(f"duplicate {label} points at indices {i} and {j}")
    Tp = _normalization(px)
    Tw = _normalization(wd)
    px_n = (Tp @ np.column_stack([px, np.ones(n)]).T).T
    wd_n = (Tw @ np.column_stack([wd, np.ones(n)]).T).T
    A = np.zeros((2 * n, 9))
    for i in range(n):
        x, y = px_n[i, 0], px_n[i, 1]
        u, v = wd_n[i, 0], wd_n[i, 1]
        A[2 * i] = [x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, -u]
        A[2 * i + 1] = [0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y, -v]
    _, s, Vt = np.linalg.svd(A)
    if s[7] <= 1e-10 * s[0]:
        raise HomographyError("degenerate correspondence configuration (collinear points?)")
    Hn = Vt[-1].reshape(3, 3)
    H = np.linalg.inv(Tw) @ Hn @ Tp
    try:
        return Homography(H)
    except HomographyError as exc:
        raise HomographyError(f"degenerate correspondence configuration: {exc}") from exc


def pixel_to_world(h: Homography, p, table_height: float) -> np.ndarray:
    """Map a pixel to table-plane meters; z is the configured table height."""
    p = np.asarray(p, dtype=float).reshape(2)
    v = h.matrix @ np.array([p[0], p[1], 1.0])
    if abs(v[2]) < 1e-12:
        raise ValueError(f"pixel {tuple(p)} maps to infinity under this homography")
    return np.array([v[0] / v[2], v[1] / v[2], float(table_height)])


def detect_object(
    background: GrayImage,
    frame: GrayImage,
    h: Homography,
    *,
    threshold: float,
    min_area: int,
    table_height: float,
) -> Detection | None:
    """Subtraction -> largest blob -> table plane; None when nothing qualifies."""
    mask = subtract_images(background, frame, threshold)
    blob = largest_blob(mask, min_area)
    if blob is None:
        return None
    world = pixel_to_world(h, blob.pixel_centroid, table_height)
    return Detection(blob.pixel_centroid, blob.area, tuple(float(v) for v in world))


def pgm_bytes(image: GrayImage) -> bytes:
    """Serialize to binary PGM: P5 header, maxval 255, raw row-major payload."""
    header = f"P5\n{image.width} {image.height}\n255\n".encode("ascii")
    return header + image.pixels.tobytes()


def parse_pgm(data: bytes) -> GrayImage:
    """Parse binary PGM produced by pgm_bytes (or any P5 with maxval 255).

    Header tokens may be separated by any whitespace; '#' comments run to end
    of line.  Exactly one whitespace byte separates the maxval from the pixel
    payload.
    """
    pos = 0

    def next_token() -> bytes:
        nonlocal pos
        while pos < len(data):
            ch = data[pos : pos + 1]
            if ch == b"#":
                while pos < len(data) and data[pos : pos + 1] != b"\n":
                    pos += 1
            elif ch.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PGM header")
        return data[start:pos]

    magic = next_token()
    if magic != b"P5":
        raise ValueError(f"unsupported PGM magic {magic!r}; only binary P5 is accepted")
    try:
        width = int(next_token())
        height = int(next_token())
        maxval = int(next_token())
    except ValueError as exc:
        raise ValueError(f"malformed PGM header: {exc}") from exc
    if maxval != 255:
        raise ValueError(f"unsupported PGM maxval {maxval}; expected 255")
    if width < 1 or height < 1:
        raise ValueError(f"invalid PGM dimensions {width}x{height}")
    pos += 1  # single whitespace byte after maxval
    payload = data[pos : pos + width * height]
    if len(payload) != width * height:
        raise ValueError(
            f"PGM payload holds {len(payload)} bytes, expected {width * height}"
        )
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    return GrayImage(width=width, height=height, pixels=pixels)


def read_pgm(path) -> GrayImage:
    return parse_pgm(Path(path).read_bytes())


def write_pgm(image: GrayImage, path) -> None:
    Path(path).write_bytes(pgm_bytes(image))


def load_calibration(text: str) -> tuple[np.ndarray, np.ndarray]:
    """Parse a calibration file into (pixel_points, world_points) arrays."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed calibration JSON: {exc}") from exc
    if not isinstance(doc, list):
        raise ValueError("calibration file must be a JSON array")
    if len(doc) < 4:
        raise ValueError(f"calibration needs at least 4 correspondences, got {len(doc)}")
    pixel_pts = []
    world_pts = []
    for i, entry in enumerate(doc):
        if not isinstance(entry, dict):
            raise ValueError(f"calibration entry {i}: must be an object")
        unknown = set(entry) - {"px", "py", "wx_m", "wy_m"}
        if unknown:
            raise ValueError(f"calibration entry {i}: unknown fields: {sorted(unknown)}")
        try:
            pixel_pts.append([float(entry["px"]), float(entry["py"])])
            world_pts.append([float(entry["wx_m"]), float(entry["wy_m"])])
        except (KeyError, TypeError) as exc:
            raise ValueError(f"calibration entry {i}: missing or non-numeric field ({exc})")
    return np.array(pixel_pts), np.array(world_pts)
