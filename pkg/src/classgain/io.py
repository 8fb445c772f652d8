"""File formats: mixture spec text, CSV signals and labels, binary PGM, SVG figures, manifests.

Labels on disk are 1-based.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .exceptions import ValidationError
from .model import MixtureSpec, SampleSet, block_runs

SCALE_SUFFIX = ".scale.json"


class SpecParseError(ValidationError):
    def __init__(self, message: str, lineno: int):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def atomic_write(path, data: str | bytes) -> Path:
    """Write via a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# -- mixture spec text ---------------------------------------------------------
#
#   samples 256
#   seed 1
#   class 128 16          # mean variance [weight]
#   class 16 16
#   layout blocks 1:64 2:64 1:64 2:64
#   grid 32 32


def _floats(tokens, lineno, what):
    try:
        return [float(t) for t in tokens]
    except ValueError:
        raise SpecParseError(f"{what} expects numbers, got {' '.join(tokens)!r}", lineno) from None


def _int(token, lineno, what):
    try:
        return int(token)
    except ValueError:
        raise SpecParseError(f"{what} expects an integer, got {token!r}", lineno) from None


def parse_spec(text: str) -> tuple[MixtureSpec, int | None]:
    """Parse mixture spec text; returns the spec and the declared sample count (if any)."""
    means, variances, weights = [], [], []
    layout, runs, seed, samples, grid = None, [], 0, None, None
    layout_line = 1
    seen = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        seen = True
        key, *args = line.split()
        key = key.lower()
        if key == "class":
            if len(args) not in (2, 3):
                raise SpecParseError("class expects: mean variance [weight]", lineno)
            vals = _floats(args, lineno, "class")
            if not vals[1] > 0:
                raise SpecParseError("class variance must be positive", lineno)
            means.append(vals[0])
            variances.append(vals[1])
            if len(vals) == 3:
                weights.append(vals[2])
        elif key == "layout":
            if not args or args[0] not in ("blocks", "iid"):
                raise SpecParseError("layout expects 'blocks' or 'iid'", lineno)
            layout, layout_line = args[0], lineno
            for tok in args[1:]:
                if layout != "blocks" or ":" not in tok:
                    raise SpecParseError(f"bad run {tok!r}; expected class:length", lineno)
                c, k = tok.split(":", 1)
                runs.append((_int(c, lineno, "run class") - 1, _int(k, lineno, "run length")))
        elif key == "seed" and len(args) == 1:
            seed = _int(args[0], lineno, "seed")
        elif key in ("samples", "n") and len(args) == 1:
            samples = _int(args[0], lineno, "samples")
            if samples < 1:
                raise SpecParseError("samples must be positive", lineno)
        elif key == "grid" and len(args) == 2:
            grid = (_int(args[0], lineno, "grid"), _int(args[1], lineno, "grid"))
        else:
            raise SpecParseError(f"unrecognized entry {line!r}", lineno)
    if not seen:
        raise SpecParseError("spec is empty", 1)
    if not means:
        raise SpecParseError("spec declares no class", 1)
    if weights and len(weights) != len(means):
        raise SpecParseError("either every class has a weight or none does", layout_line)
    if grid is not None and samples is None:
        samples = grid[0] * grid[1]
    layout = layout or "blocks"
    if layout == "blocks" and not runs:
        if samples is None:
            raise SpecParseError("blocks layout needs runs or a sample count", layout_line)
        runs = list(block_runs(range(len(means)), samples))
    if layout == "blocks" and samples is None:
        samples = sum(k for _, k in runs)
    try:
        spec = MixtureSpec(
            tuple(means),
            tuple(variances),
            weights=tuple(weights) if weights else None,
            layout=layout,
            runs=tuple(runs) if layout == "blocks" else (),
            seed=seed,
            grid=grid,
        )
        spec.validate(samples)
    except ValidationError as exc:
        raise SpecParseError(str(exc), layout_line) from None
    return spec, samples


def format_spec(spec: MixtureSpec, n_samples: int | None = None) -> str:
    lines = []
    if n_samples is not None:
        lines.append(f"samples {n_samples}")
    lines.append(f"seed {spec.seed}")
    for j, (m, v) in enumerate(zip(spec.means, spec.variances)):
        w = f" {spec.weights[j]!r}" if spec.weights is not None else ""
        lines.append(f"class {m!r} {v!r}{w}")
    if spec.layout == "blocks":
        lines.append("layout blocks " + " ".join(f"{c + 1}:{k}" for c, k in spec.runs))
    else:
        lines.append("layout iid")
    if spec.grid is not None:
        lines.append(f"grid {spec.grid[0]} {spec.grid[1]}")
    return "\n".join(lines) + "\n"


# -- CSV -----------------------------------------------------------------------


def read_csv_values(path) -> np.ndarray:
    values = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            values.append(float(line.split(",")[0]))
        except ValueError:
            raise ValidationError(f"{path}:{lineno}: not a number: {line!r}") from None
    if not values:
        raise ValidationError(f"{path}: no samples")
    return np.asarray(values)


def write_csv_values(path, values) -> Path:
    return atomic_write(path, "".join(f"{float(v)!r}\n" for v in np.ravel(values)))


def read_csv_labels(path) -> np.ndarray:
    raw = read_csv_values(path)
    if not np.all(raw == np.round(raw)) or raw.min() < 1:
        raise ValidationError(f"{path}: labels must be positive integers")
    return raw.astype(int) - 1


def write_csv_labels(path, labels) -> Path:
    return atomic_write(path, "".join(f"{int(z) + 1}\n" for z in np.ravel(labels)))


# -- PGM (P5) ------------------------------------------------------------------


def _pgm_tokens(data: bytes):
    pos, tokens = 2, []
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValidationError("truncated PGM header")
        tokens.append(int(data[start:pos]))
    return tokens, pos + 1


def read_pgm_raw(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:2] != b"P5":
        raise ValidationError(f"{path}: not a binary PGM (P5) file")
    try:
        (width, height, maxval), offset = _pgm_tokens(data)
    except ValueError:
        raise ValidationError(f"{path}: malformed PGM header") from None
    dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
    count = width * height
    if len(data) - offset < count * np.dtype(dtype).itemsize:
        raise ValidationError(f"{path}: PGM data shorter than {width}x{height}")
    pixels = np.frombuffer(data, dtype=dtype, count=count, offset=offset)
    return pixels.reshape(height, width).astype(float)


def write_pgm_raw(path, pixels: np.ndarray) -> Path:
    pixels = np.asarray(pixels, dtype=np.uint8)
    h, w = pixels.shape
    return atomic_write(path, f"P5\n{w} {h}\n255\n".encode() + pixels.tobytes())


def scale_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + SCALE_SUFFIX)


def quantize(grid: np.ndarray) -> tuple[np.ndarray, dict]:
    """Map values onto 0..255; ``value ~= offset + scale * byte``."""
    lo, hi = float(grid.min()), float(grid.max())
    scale = (hi - lo) / 255.0 if hi > lo else 1.0
    pixels = np.clip(np.round((grid - lo) / scale), 0, 255).astype(np.uint8)
    return pixels, {"offset": lo, "scale": scale, "max_abs_error": scale / 2.0}


def write_pgm_signal(path, grid: np.ndarray) -> tuple[Path, Path]:
    pixels, record = quantize(np.asarray(grid, dtype=float))
    p = write_pgm_raw(path, pixels)
    s = atomic_write(scale_path(path), json.dumps(record, indent=2) + "\n")
    return p, s


def read_pgm_signal(path) -> np.ndarray:
    pixels = read_pgm_raw(path)
    sidecar = scale_path(path)
    if sidecar.exists():
        record = json.loads(sidecar.read_text())
        return record["offset"] + record["scale"] * pixels
    return pixels


def label_pixels(labels: np.ndarray, n_classes: int) -> np.ndarray:
    if n_classes == 1:
        return np.zeros_like(labels, dtype=np.uint8)
    return np.round(255.0 * np.asarray(labels) / (n_classes - 1)).astype(np.uint8)


def pixel_labels(pixels: np.ndarray, n_classes: int) -> np.ndarray:
    if n_classes == 1:
        return np.zeros(pixels.shape, dtype=int)
    return np.round(np.asarray(pixels, dtype=float) * (n_classes - 1) / 255.0).astype(int)


def read_signal(path) -> SampleSet:
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        return SampleSet.from_array(read_pgm_signal(path))
    return SampleSet.from_array(read_csv_values(path))


def read_labels(path, n_classes: int) -> np.ndarray:
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        return pixel_labels(read_pgm_raw(path), n_classes).ravel()
    return read_csv_labels(path)


# -- SVG -----------------------------------------------------------------------

_PALETTE = ["#9e9e9e", "#ffffff", "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"]


def _color(j: int) -> str:
    return _PALETTE[j % len(_PALETTE)]


def render_svg(signal: SampleSet, labels: np.ndarray) -> str:
    """Signal above a class-colored bar (1D), or image beside its label map (2D)."""
    labels = np.asarray(labels)
    if signal.is_grid:
        return _svg_grid(signal.as_array(), labels.reshape(signal.shape))
    return _svg_line(signal.values, labels)


def _svg_line(values: np.ndarray, labels: np.ndarray) -> str:
    N = values.size
    width, plot_h, bar_h, pad = 800.0, 200.0, 40.0, 10.0
    lo, hi = float(values.min()), float(values.max())
    span = hi - lo if hi > lo else 1.0
    dx = (width - 2 * pad) / max(N, 1)
    pts = " ".join(
        f"{pad + (n + 0.5) * dx:.2f},{pad + plot_h * (1 - (v - lo) / span):.2f}" for n, v in enumerate(values)
    )
    y_bar = 2 * pad + plot_h
    rects = []
    start = 0
    for n in range(1, N + 1):
        if n == N or labels[n] != labels[start]:
            rects.append(
                f'<rect x="{pad + start * dx:.2f}" y="{y_bar:.2f}" width="{(n - start) * dx:.2f}" '
                f'height="{bar_h:.2f}" fill="{_color(int(labels[start]))}"/>'
            )
            start = n
    total_h = y_bar + bar_h + pad
    return "\n".join(
        [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{total_h:.0f}" '
            f'viewBox="0 0 {width:.0f} {total_h:.0f}">',
            f'<rect x="0" y="0" width="{width:.0f}" height="{total_h:.0f}" fill="#ffffff"/>',
            f'<polyline fill="none" stroke="#000000" stroke-width="1" points="{pts}"/>',
            *rects,
            f'<rect x="{pad:.2f}" y="{y_bar:.2f}" width="{width - 2 * pad:.2f}" height="{bar_h:.2f}" '
            'fill="none" stroke="#000000"/>',
            "</svg>",
            "",
        ]
    )


def _svg_grid(image: np.ndarray, labels: np.ndarray) -> str:
    h, w = image.shape
    cell, gap = 8, 16
    lo, hi = float(image.min()), float(image.max())
    span = hi - lo if hi > lo else 1.0
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{2 * w * cell + gap}" height="{h * cell}">',
    ]
    for r in range(h):
        for c in range(w):
            g = int(round(255 * (image[r, c] - lo) / span))
            out.append(f'<rect x="{c * cell}" y="{r * cell}" width="{cell}" height="{cell}" fill="rgb({g},{g},{g})"/>')
    x0 = w * cell + gap
    for r in range(h):
        for c in range(w):
            out.append(
                f'<rect x="{x0 + c * cell}" y="{r * cell}" width="{cell}" height="{cell}" '
                f'fill="{_color(int(labels[r, c]))}"/>'
            )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def json_ready(obj):
    """Convert numpy scalars/arrays and non-finite floats into JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_ready(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return json_ready(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def dump_json(path, payload) -> Path:
    return atomic_write(path, json.dumps(json_ready(payload), indent=2, sort_keys=True) + "\n")
