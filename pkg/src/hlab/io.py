"""Point-cloud files and density rasters (binary PGM/PPM)."""

from __future__ import annotations

import csv
import json

import numpy as np

from .errors import InputError


def save_cloud_csv(cloud, path):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        if cloud.symbolic:
            out.writerow(["word"])
            for w in cloud.points:
                out.writerow([" ".join(str(int(s)) for s in w)])
        else:
            d = cloud.points.shape[1]
            out.writerow([f"x{k}" for k in range(d)])
            for p in cloud.points:
                out.writerow([repr(float(v)) for v in p])


def load_cloud_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    if header == ["word"]:
        return np.array([[int(s) for s in r[0].split()] for r in body], dtype=np.int64)
    return np.array([[float(v) for v in r] for r in body], dtype=float).reshape(len(body), len(header))


def save_cloud_json(cloud, path):
    doc = {"metric": cloud.metric, "provenance": cloud.provenance, "points": cloud.points.tolist()}
    with open(path, "w") as fh:
        json.dump(doc, fh)


def density_raster(points, box, width=512, height=None):
    """Point counts on a pixel grid over ``box``, scaled to 0..255 (0 = empty).

    1-D clouds give a strip of ``height`` identical rows (default 64); 2-D
    clouds a square grid with y increasing upwards.
    """
    pts = np.asarray(points, dtype=float)
    lo = np.asarray(box[0], dtype=float)
    hi = np.asarray(box[1], dtype=float)
    if pts.shape[1] == 1:
        counts, _ = np.histogram(pts[:, 0], bins=width, range=(lo[0], hi[0]))
        counts = np.tile(counts, (height or 64, 1))
    elif pts.shape[1] == 2:
        h = height or width
        counts, _, _ = np.histogram2d(pts[:, 1], pts[:, 0], bins=(h, width),
                                      range=((lo[1], hi[1]), (lo[0], hi[0])))
        counts = counts[::-1]
    else:
        raise InputError("rasters are available for 1-D and 2-D clouds only")
    img = np.zeros(counts.shape, dtype=np.uint8)
    occupied = counts > 0
    if occupied.any():
        # log scale keeps sparse regions visible next to dense ones
        scaled = np.log1p(counts) / np.log1p(counts.max())
        img[occupied] = np.maximum(1, np.round(255 * scaled[occupied])).astype(np.uint8)
    return img


def write_pgm(img, path):
    img = np.asarray(img, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode())
        fh.write(img.tobytes())


def write_ppm(img, path):
    """Grey densities rendered as a blue-to-yellow ramp; empty pixels stay black."""
    img = np.asarray(img, dtype=np.uint8)
    t = img.astype(float) / 255.0
    rgb = np.stack([255 * t, 255 * t**0.5, 255 * (1 - t) * (img > 0)], axis=-1)
    rgb = np.round(rgb).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P6\n{img.shape[1]} {img.shape[0]}\n255\n".encode())
        fh.write(rgb.tobytes())


def read_pnm(path):
    """Read a binary PGM (P5) or PPM (P6) written by this module."""
    with open(path, "rb") as fh:
        data = fh.read()
    # four header tokens, then exactly one whitespace byte before the pixels
    tokens, pos = [], 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        tokens.append(data[pos:end])
        pos = end
    magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval != 255 or magic not in (b"P5", b"P6"):
        raise InputError(f"{path}: unsupported image header")
    channels = 3 if magic == b"P6" else 1
    pixels = np.frombuffer(data[pos + 1: pos + 1 + w * h * channels], dtype=np.uint8)
    return pixels.reshape(h, w, channels) if channels == 3 else pixels.reshape(h, w)
