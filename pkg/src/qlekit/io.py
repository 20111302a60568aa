"""Output plumbing: CSV tables, run manifests, images, field snapshots, config."""
import configparser
import csv
import json
import math
import os
import time
from dataclasses import dataclass, field as dc_field, asdict

import numpy as np

from . import __version__
from .errors import InvalidArgument
from .field import LatticeField

MANIFEST_VERSION = 1


def _cell(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, complex):
        return repr(x)
    return str(x)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(x) for x in r])
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    if hasattr(x, "numerator") and hasattr(x, "denominator") and not isinstance(x, int):
        return str(x)
    return x


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


@dataclass
class RunManifest:
    subcommand: str
    params: dict
    seed: int | None
    version: str = __version__
    outputs: list = dc_field(default_factory=list)
    wall_clock: float = 0.0
    manifest_version: int = MANIFEST_VERSION

    def write(self, out_dir):
        path = os.path.join(out_dir, "manifest.json")
        write_json(path, asdict(self))
        return path


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


# images

def write_ppm(path, img):
    img = np.asarray(img, dtype=np.uint8)
    if img.ndim != 3 or img.shape[2] != 3:
        raise InvalidArgument("image must have shape (h, w, 3)")
    h, w, _ = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(img.tobytes())
    return path


def write_png(path, img):
    try:
        from PIL import Image
    except ImportError as exc:
        raise InvalidArgument("png output needs Pillow (install the 'png' extra)") from exc
    Image.fromarray(np.asarray(img, dtype=np.uint8), "RGB").save(path)
    return path


def write_image(path_stem, img, fmt):
    if fmt == "png":
        return write_png(path_stem + ".png", img)
    return write_ppm(path_stem + ".ppm", img)


def gray_image(values):
    """Grayscale RGB rendering of a 2d array scaled to its range."""
    v = np.asarray(values, float)
    lo, hi = v.min(), v.max()
    g = np.zeros_like(v) if hi == lo else (v - lo) / (hi - lo)
    g = (255 * g).astype(np.uint8)
    return np.repeat(g[:, :, None], 3, axis=2)


def line_plot(xs, series, size=256, colors=None):
    """Crude polyline plot of several y-series on a white canvas."""
    colors = colors or [(200, 0, 0), (0, 120, 0), (0, 0, 200), (90, 90, 90)]
    xs = np.asarray(xs, float)
    ys = np.concatenate([np.asarray(s, float) for s in series])
    ys = ys[np.isfinite(ys)]
    ylo, yhi = ys.min(), ys.max()
    if yhi == ylo:
        yhi = ylo + 1
    img = np.full((size, size, 3), 255, np.uint8)
    pad = size // 16

    def px(x, y):
        u = pad + (x - xs.min()) / (xs.max() - xs.min()) * (size - 2 * pad)
        v = size - pad - (y - ylo) / (yhi - ylo) * (size - 2 * pad)
        return u, v

    img[size - pad, pad:size - pad] = 0
    img[pad:size - pad, pad] = 0
    for k, s in enumerate(series):
        s = np.asarray(s, float)
        for a in range(len(xs) - 1):
            if not (np.isfinite(s[a]) and np.isfinite(s[a + 1])):
                continue
            (u0, v0), (u1, v1) = px(xs[a], s[a]), px(xs[a + 1], s[a + 1])
            m = int(max(abs(u1 - u0), abs(v1 - v0))) + 1
            uu = np.linspace(u0, u1, m + 1).round().astype(int).clip(0, size - 1)
            vv = np.linspace(v0, v1, m + 1).round().astype(int).clip(0, size - 1)
            img[vv, uu] = colors[k % len(colors)]
    return img


def polyline_image(curves, size=256):
    """Curves in the unit disk drawn on a canvas with the unit circle."""
    img = np.full((size, size, 3), 255, np.uint8)
    th = np.linspace(0, 2 * np.pi, 4 * size)

    def put(z, color):
        z = np.asarray(z, complex)
        u = ((z.real + 1) / 2 * (size - 1)).round().astype(int).clip(0, size - 1)
        v = ((1 - z.imag) / 2 * (size - 1)).round().astype(int).clip(0, size - 1)
        img[v, u] = color

    put(np.exp(1j * th), (160, 160, 160))
    from .lqg import rainbow

    for k, c in enumerate(curves):
        c = np.asarray(c, complex)
        dense = np.concatenate([np.linspace(c[a], c[a + 1], 8, endpoint=False)
                                for a in range(len(c) - 1)] + [c[-1:]]) if len(c) > 1 else c
        put(dense, rainbow(k / max(1, len(curves) - 1)))
    return img


# field snapshots: text header line then float64 little-endian values

def save_field(path, fld):
    header = f"qlekit-field n={fld.n} bc={fld.bc} normalization={fld.normalization!r} seed={fld.seed}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode())
        fh.write(np.ascontiguousarray(fld.values, dtype="<f8").tobytes())
    return path


def load_field(path):
    with open(path, "rb") as fh:
        header = fh.readline().decode().split()
        if not header or header[0] != "qlekit-field":
            raise InvalidArgument("not a field snapshot")
        meta = dict(kv.split("=", 1) for kv in header[1:])
        n = int(meta["n"])
        vals = np.frombuffer(fh.read(), dtype="<f8")
    if vals.size != n * n:
        raise InvalidArgument("snapshot size does not match its header")
    seed = None if meta["seed"] == "None" else int(meta["seed"])
    return LatticeField(vals.reshape(n, n).copy(), meta["bc"], float(meta["normalization"]), seed)


# config: flat key = value lines

def read_config(path):
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"))
    parser.optionxform = str
    with open(path) as fh:
        parser.read_string("[main]\n" + fh.read())
    return dict(parser["main"])
