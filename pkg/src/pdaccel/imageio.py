"""Binary PGM (P5) reading and writing; PNG reading through Pillow if present."""

from __future__ import annotations

import os

import numpy as np


def _tokens(data: bytes, count: int, pos: int):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    out = []
    n = len(data)
    while len(out) < count:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PGM header")
        out.append(data[start:pos])
    return out, pos


def read_pgm(path: str | os.PathLike) -> np.ndarray:
    """Load a P5 image as float intensities in [0, 255]."""
    with open(path, "rb") as fh:
        data = fh.read()
    toks, pos = _tokens(data, 4, 0)
    if toks[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (magic {toks[0]!r})")
    cols, rows, maxval = (int(t) for t in toks[1:])
    if not 0 < maxval < 65536:
        raise ValueError(f"{path}: invalid maxval {maxval}")
    pos += 1  # single whitespace byte after maxval
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    need = rows * cols * dtype.itemsize
    raw = data[pos : pos + need]
    if len(raw) != need:
        raise ValueError(f"{path}: expected {need} bytes of pixel data, got {len(raw)}")
    img = np.frombuffer(raw, dtype=dtype).reshape(rows, cols).astype(float)
    return img * (255.0 / maxval)


def write_pgm(path: str | os.PathLike, img: np.ndarray, bits: int = 8) -> None:
    """Write intensities (clipped to [0, 255]) as an 8- or 16-bit P5 file."""
    if bits not in (8, 16):
        raise ValueError("bits must be 8 or 16")
    img = np.clip(np.asarray(img, dtype=float), 0.0, 255.0)
    if img.ndim != 2:
        raise ValueError("only scalar images can be written")
    rows, cols = img.shape
    if bits == 8:
        maxval, body = 255, np.rint(img).astype("u1").tobytes()
    else:
        maxval = 65535
        body = np.rint(img * (65535.0 / 255.0)).astype(">u2").tobytes()
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n{maxval}\n".encode("ascii"))
        fh.write(body)


def read_image(path: str | os.PathLike) -> np.ndarray:
    """Read a PGM, or a PNG converted to greyscale, as floats in [0, 255]."""
    ext = os.path.splitext(str(path))[1].lower()
    if ext in (".pgm", ".pnm"):
        return read_pgm(path)
    try:
        from PIL import Image
    except ImportError as exc:  # pragma: no cover - Pillow is optional
        raise ValueError(f"cannot read {path}: Pillow is not installed") from exc
    with Image.open(path) as im:
        if im.mode in ("I;16", "I;16B", "I"):
            arr = np.asarray(im, dtype=float)
            return arr * (255.0 / 65535.0)
        return np.asarray(im.convert("L"), dtype=float)
