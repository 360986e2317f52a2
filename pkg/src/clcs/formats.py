"""File formats used by the command-line harness.

Signal CSV
    ``# {json metadata}`` on the first line, then a header row
    ``x0,x1,...`` and one signal per row. Values use the shortest
    representation that parses back to the same double (at most 17
    significant digits), so a round trip is lossless.
Image PGM
    Binary P5, 8 bits per pixel, metadata as a ``# clcs {json}`` comment.
Reports
    JSON. Timing lives under a separate ``"timing"`` key so reruns can be
    compared byte for byte once it is dropped.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .errors import InputError

PGM_TAG = "clcs"


def fmt(v: float) -> str:
    return repr(float(v))


def dumps_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _clean(obj):
    # numpy scalars and non-finite floats are not valid JSON
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def write_json(path, obj):
    Path(path).write_text(dumps_json(obj), encoding="utf-8")


def read_json(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise InputError(f"{path}: {e.strerror or e}") from e
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e


def write_signals_csv(path, rows, meta: dict, prefix: str = "x"):
    """Write a ``(count, length)`` array, one row per signal."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    buf = io.StringIO()
    buf.write("# " + json.dumps(_clean(meta), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"{prefix}{i}" for i in range(rows.shape[1])])
    for r in rows:
        w.writerow([fmt(v) for v in r])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_signals_csv(path):
    """Return ``(rows, meta)``; ``rows`` has shape ``(count, length)``."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise InputError(f"{path}: cannot read CSV ({e})") from e
    lines = text.splitlines()
    meta = {}
    start = 0
    if lines and lines[0].startswith("#"):
        try:
            meta = json.loads(lines[0][1:].strip() or "{}")
        except json.JSONDecodeError as e:
            raise InputError(f"{path}:1: metadata line is not valid JSON ({e.msg})") from e
        start = 1
    reader = csv.reader(lines[start:])
    try:
        header = next(reader)
    except StopIteration:
        raise InputError(f"{path}: missing header row") from None
    rows = []
    for k, rec in enumerate(reader):
        lineno = start + 2 + k
        if not rec:
            continue
        if len(rec) != len(header):
            raise InputError(f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}")
        try:
            rows.append([float(v) for v in rec])
        except ValueError as e:
            raise InputError(f"{path}:{lineno}: {e}") from e
    if not rows:
        raise InputError(f"{path}: no data rows")
    arr = np.array(rows)
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{path}: non-finite values")
    return arr, meta


def to_pixels(img) -> np.ndarray:
    return np.round(np.clip(np.asarray(img, dtype=float), 0.0, 1.0) * 255).astype(np.uint8)


def write_pgm(path, img, meta: dict):
    """8-bit binary PGM; values in [0, 1] are scaled to 0..255."""
    px = to_pixels(img)
    H, W = px.shape
    comment = json.dumps(_clean(meta), sort_keys=True)
    head = f"P5\n# {PGM_TAG} {comment}\n{W} {H}\n255\n".encode("utf-8")
    Path(path).write_bytes(head + px.tobytes())


def read_pgm(path):
    """Return ``(image in [0, 1], meta)`` from a binary P5 file."""
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise InputError(f"{path}: {e.strerror or e}") from e
    pos = 0
    meta = {}
    tokens = []

    def fail(msg):
        raise InputError(f"{path}: byte {pos}: {msg}")

    # header: magic, width, height, maxval separated by whitespace/comments
    while len(tokens) < 4:
        if pos >= len(data):
            fail("truncated header")
        c = data[pos:pos + 1]
        if c.isspace():
            pos += 1
        elif c == b"#":
            end = data.find(b"\n", pos)
            if end < 0:
                fail("unterminated comment")
            text = data[pos + 1:end].decode("utf-8", "replace").strip()
            if text.startswith(PGM_TAG + " "):
                try:
                    meta = json.loads(text[len(PGM_TAG) + 1:])
                except json.JSONDecodeError:
                    fail("metadata comment is not valid JSON")
            pos = end + 1
        else:
            start = pos
            while pos < len(data) and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
                pos += 1
            tokens.append(data[start:pos].decode("ascii", "replace"))
            if len(tokens) == 1 and tokens[0] != "P5":
                pos = start
                fail(f"not a binary PGM (magic {tokens[0]!r})")
    try:
        W, H, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError:
        fail("non-integer size or maxval")
    if W < 1 or H < 1 or not 0 < maxval < 256:
        fail(f"unsupported size {W}x{H} or maxval {maxval}")
    pos += 1  # single whitespace after maxval
    body = data[pos:]
    if len(body) != W * H:
        fail(f"expected {W * H} pixel bytes, found {len(body)}")
    img = np.frombuffer(body, dtype=np.uint8).reshape(H, W).astype(float) / maxval
    return img, meta


def is_image_path(path) -> bool:
    return Path(path).suffix.lower() in (".pgm", ".pnm")


def read_table(path):
    """Signals as ``(n, a)`` columns (CSV) or an image (PGM), with metadata."""
    if is_image_path(path):
        img, meta = read_pgm(path)
        meta.setdefault("kind", "image")
        return img, meta
    rows, meta = read_signals_csv(path)
    return rows.T, meta
