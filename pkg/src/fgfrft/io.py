"""File formats: binary PGM, ASCII XYZ, CSV results and run manifests."""

from __future__ import annotations

import csv
import io as _io
import os
from dataclasses import dataclass
from typing import Iterable, List, Sequence

import numpy as np

from .errors import ParseError, SizeError

# ------------------------------------------------------------------- PGM

_WS = b" \t\n\r\v\f"


def _pgm_token(data: bytes, pos: int):
    while True:
        while pos < len(data) and data[pos] in _WS:
            pos += 1
        if pos < len(data) and data[pos] == ord("#"):
            while pos < len(data) and data[pos] not in b"\r\n":
                pos += 1
            continue
        break
    start = pos
    while pos < len(data) and data[pos] not in _WS and data[pos] != ord("#"):
        pos += 1
    if start == pos:
        raise ParseError(f"unexpected end of PGM header at byte {start}", start)
    return data[start:pos], start, pos


def parse_pgm(data: bytes) -> np.ndarray:
    if data[:2] != b"P5":
        raise ParseError("not a binary PGM (magic P5 expected) at byte 0", 0)
    pos = 2
    values = []
    for name in ("width", "height", "maxval"):
        tok, start, pos = _pgm_token(data, pos)
        if not tok.isdigit():
            raise ParseError(f"bad PGM {name} {tok!r} at byte {start}", start)
        values.append(int(tok))
    width, height, maxval = values
    if maxval != 255:
        raise ParseError(f"only 8-bit PGM (maxval 255) is supported, got {maxval}", start)
    if width < 1 or height < 1:
        raise ParseError(f"empty PGM image {width}x{height}", start)
    if pos >= len(data) or data[pos] not in _WS:
        raise ParseError(f"missing whitespace after PGM header at byte {pos}", pos)
    pos += 1
    need = width * height
    if len(data) - pos < need:
        raise ParseError(
            f"PGM raster truncated at byte {len(data)}: need {need} bytes from byte {pos}",
            len(data),
        )
    return np.frombuffer(data, dtype=np.uint8, count=need, offset=pos).reshape(height, width).copy()


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return parse_pgm(fh.read())


def write_pgm(path, img) -> None:
    a = np.asarray(img)
    if a.ndim != 2:
        raise SizeError("PGM images are 2-D")
    a = np.clip(np.rint(a), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (a.shape[1], a.shape[0]))
        fh.write(a.tobytes())


# ------------------------------------------------------------------- XYZ


def parse_xyz(text: str) -> np.ndarray:
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s:
            continue
        parts = s.split()
        if len(parts) != 3:
            raise ParseError(f"line {lineno}: expected 3 coordinates, got {len(parts)}", lineno)
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise ParseError(f"line {lineno}: non-numeric coordinate in {s!r}", lineno) from None
    if not rows:
        raise ParseError("empty XYZ file", 0)
    pts = np.array(rows)
    if not np.all(np.isfinite(pts)):
        raise ParseError("XYZ file contains non-finite coordinates", 0)
    return pts


def read_xyz(path) -> np.ndarray:
    with open(path, "r", encoding="ascii") as fh:
        return parse_xyz(fh.read())


def write_xyz(path, points) -> None:
    pts = np.asarray(points, dtype=float)
    with open(path, "w", encoding="ascii") as fh:
        for x, y, z in pts.tolist():
            fh.write(f"{x!r} {y!r} {z!r}\n")


def voxel_downsample(points, voxel: float) -> np.ndarray:
    """Keep the first point (file order) falling in each cubic voxel."""
    pts = np.asarray(points, dtype=float)
    if voxel <= 0:
        return pts
    keys = np.floor(pts / voxel).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    return pts[np.sort(first)]


def split_batches(n: int, batch: int, min_size: int = 1) -> List[slice]:
    """Sequential chunks of ``batch``; a short tail below ``min_size`` joins the previous chunk."""
    if batch < 1:
        raise SizeError("batch size must be >= 1")
    bounds = list(range(0, n, batch)) + [n]
    if len(bounds) > 2 and bounds[-1] - bounds[-2] < min_size:
        del bounds[-2]
    return [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]


# --------------------------------------------------------------- patches


@dataclass(frozen=True)
class ImagePatchSet:
    height: int
    width: int
    size: int
    patches: tuple

    @classmethod
    def from_image(cls, img, size: int = 64) -> "ImagePatchSet":
        a = np.asarray(img)
        h, w = a.shape
        if h % size or w % size:
            raise SizeError(
                f"image {w}x{h} is not divisible into {size}x{size} patches; "
                f"crop to {w - w % size}x{h - h % size}"
            )
        patches = tuple(
            a[r : r + size, c : c + size].copy() for r in range(0, h, size) for c in range(0, w, size)
        )
        return cls(h, w, size, patches)

    def with_patches(self, patches: Sequence[np.ndarray]) -> "ImagePatchSet":
        return ImagePatchSet(self.height, self.width, self.size, tuple(patches))

    def reassemble(self) -> np.ndarray:
        out = np.empty((self.height, self.width), dtype=self.patches[0].dtype)
        cols = self.width // self.size
        for i, p in enumerate(self.patches):
            r, c = divmod(i, cols)
            out[r * self.size : (r + 1) * self.size, c * self.size : (c + 1) * self.size] = p
        return out


# ------------------------------------------------------------ CSV/manifest


def fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def csv_text(header, rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_manifest(path, entries: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in entries.items():
            text = fmt(value).replace("\n", " ")
            fh.write(f"{key}={text}\n")


def read_manifest(path) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line:
                key, _, value = line.partition("=")
                out[key] = value
    return out


def ensure_dir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return path
