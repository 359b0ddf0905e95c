"""Escape-time rasters of a z-plane slice w = const, written as binary PGM."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dynamics import SkewProduct, escape_steps

MAX_PIXELS = 8192 * 8192


@dataclass
class EscapeTimeImage:
    width: int
    height: int
    viewport: tuple
    w_slice: complex
    maxiter: int
    radius: float
    steps: np.ndarray

    def pixel_point(self, i: int, j: int) -> complex:
        return pixel_grid(self.viewport, self.width, self.height, rows=(i, i + 1))[0, j]

    def gray(self) -> np.ndarray:
        return (self.steps * 255 // self.maxiter).astype(np.uint8)


def pixel_grid(viewport, width: int, height: int, rows=None) -> np.ndarray:
    """Pixel centres: x = xmin + (j + 1/2) dx, y = ymax - (i + 1/2) dy."""
    xmin, ymin, xmax, ymax = viewport
    dx = (xmax - xmin) / width
    dy = (ymax - ymin) / height
    lo, hi = rows if rows is not None else (0, height)
    x = xmin + (np.arange(width) + 0.5) * dx
    y = ymax - (np.arange(lo, hi) + 0.5) * dy
    return x[None, :] + 1j * y[:, None]


def render_slice(F: SkewProduct, viewport, w_slice: complex = 0.0, size=(512, 512), maxiter: int = 100,
                 radius: float = 1e3, threads: int | None = None, band: int = 16) -> EscapeTimeImage:
    """Per-pixel escape step of F from (z, w_slice); row bands are swept by a thread pool."""
    width, height = size
    if width < 1 or height < 1 or width * height > MAX_PIXELS:
        raise ValueError("image size must be between 1x1 and 8192x8192")
    xmin, ymin, xmax, ymax = viewport
    if not (xmax > xmin and ymax > ymin):
        raise ValueError("viewport must satisfy xmin < xmax and ymin < ymax")
    if maxiter < 1:
        raise ValueError("maxiter must be >= 1")
    steps = np.empty((height, width), dtype=np.int64)

    def job(lo):
        hi = min(height, lo + band)
        steps[lo:hi] = escape_steps(F, pixel_grid(viewport, width, height, (lo, hi)), w_slice, maxiter, radius)

    workers = threads or os.cpu_count() or 1
    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(job, range(0, height, band)))
    return EscapeTimeImage(width, height, tuple(viewport), complex(w_slice), maxiter, radius, steps)


def pgm_bytes(img: EscapeTimeImage) -> bytes:
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.gray().tobytes()


def write_pgm(img: EscapeTimeImage, path) -> None:
    with open(path, "wb") as fh:
        fh.write(pgm_bytes(img))


def read_pgm(path) -> np.ndarray:
    """Read a binary P5 file with maxval 255."""
    with open(path, "rb") as fh:
        data = fh.read()
    fields, pos = [], 0
    while len(fields) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        end = pos
        while end < len(data) and not data[end:end + 1].isspace():
            end += 1
        fields.append(data[pos:end])
        pos = end
    if fields[0] != b"P5" or int(fields[3]) != 255:
        raise ValueError("not a P5 / maxval 255 image")
    w, h = int(fields[1]), int(fields[2])
    pix = np.frombuffer(data[pos + 1: pos + 1 + w * h], dtype=np.uint8)
    if pix.size != w * h:
        raise ValueError("truncated PGM data")
    return pix.reshape(h, w)
