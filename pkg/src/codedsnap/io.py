"""Frame, mask, CSV and key=value config I/O.

Images live in [0, 1] floats inside the toolkit; integers only appear on disk
(8- or 16-bit PGM/PPM, 8-bit PNG).
"""
import csv
import re
from pathlib import Path

import numpy as np

CSV_SCHEMA_VERSION = 1


class DataError(Exception):
    """Unreadable or inconsistent input data."""


def _tokens(buf, count, pos):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    out = []
    while len(out) < count:
        while pos < len(buf) and buf[pos : pos + 1].isspace():
            pos += 1
        if buf[pos : pos + 1] == b"#":
            while pos < len(buf) and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise DataError("truncated netpbm header")
        out.append(buf[start:pos])
    return out, pos + 1


def read_pnm(path):
    """Read a binary PGM (P5) or PPM (P6). Returns (array, maxval)."""
    buf = Path(path).read_bytes()
    magic = buf[:2]
    if magic not in (b"P5", b"P6"):
        raise DataError(f"{path}: not a binary PGM/PPM file")
    (w, h, maxval), pos = _tokens(buf, 3, 2)
    w, h, maxval = int(w), int(h), int(maxval)
    channels = 3 if magic == b"P6" else 1
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = w * h * channels
    if len(buf) - pos < count * dtype.itemsize:
        raise DataError(f"{path}: truncated pixel data")
    data = np.frombuffer(buf, dtype=dtype, count=count, offset=pos)
    shape = (h, w, 3) if channels == 3 else (h, w)
    return data.reshape(shape).astype(np.int64), maxval


def write_pnm(path, array, maxval=255):
    """Write integer samples as binary PGM (2-D) or PPM (H x W x 3)."""
    a = np.asarray(array)
    if a.ndim == 2:
        magic = b"P5"
    elif a.ndim == 3 and a.shape[2] == 3:
        magic = b"P6"
    else:
        raise ValueError(f"cannot store array of shape {a.shape} as PGM/PPM")
    if a.min() < 0 or a.max() > maxval:
        raise ValueError("sample values outside [0, maxval]")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    header = b"%s\n%d %d\n%d\n" % (magic, a.shape[1], a.shape[0], maxval)
    Path(path).write_bytes(header + a.astype(dtype).tobytes())


def quantize(image, bits=8):
    maxval = (1 << bits) - 1
    return np.rint(np.clip(image, 0.0, 1.0) * maxval).astype(np.int64)


def read_image(path):
    """Read a PGM/PPM/PNG as float64 in [0, 1] (gray 2-D or color H x W x 3)."""
    path = Path(path)
    try:
        if path.suffix.lower() == ".png":
            from PIL import Image

            with Image.open(path) as im:
                if im.mode in ("I;16", "I;16B", "I"):
                    return np.asarray(im, dtype=np.float64) / 65535.0
                if im.mode not in ("L", "RGB"):
                    im = im.convert("RGB")
                return np.asarray(im, dtype=np.float64) / 255.0
        data, maxval = read_pnm(path)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    return data.astype(np.float64) / maxval


def write_image(path, image, bits=8):
    """Write a [0, 1] gray or RGB image; format chosen from the suffix."""
    path = Path(path)
    q = quantize(image, bits)
    if path.suffix.lower() == ".png":
        from PIL import Image

        if bits != 8:
            raise ValueError("PNG output is 8-bit only")
        Image.fromarray(q.astype(np.uint8)).save(path)
    else:
        write_pnm(path, q, (1 << bits) - 1)
    return q


def write_mask_pgm(path, mask):
    """Binary mask as an 8-bit PGM (0 or 255)."""
    m = np.asarray(mask)
    if not np.all((m == 0) | (m == 1)):
        raise ValueError("PGM mask export needs a binary mask; use CSV for gray masks")
    write_pnm(path, m.astype(np.int64) * 255, 255)


def read_mask_pgm(path):
    data, maxval = read_pnm(path)
    if data.ndim != 2:
        raise DataError(f"{path}: mask must be a single-channel PGM")
    return (data > maxval // 2).astype(np.float64)


def write_mask_csv(path, mask):
    np.savetxt(path, np.asarray(mask, dtype=np.float64), delimiter=",", fmt="%.17g")


def read_mask_csv(path):
    try:
        m = np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read mask {path}: {exc}") from exc
    if np.any(m < 0) or np.any(m > 1):
        raise DataError(f"{path}: mask transmissions must lie in [0, 1]")
    return m


def write_csv(path, header, rows, comment=None):
    """CSV with a leading ``# schema=<version>`` comment line."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema={CSV_SCHEMA_VERSION}")
        if comment:
            fh.write(f" {comment}")
        fh.write("\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if v is None else v for v in row])


def read_csv(path):
    """Rows (as dicts) of a CSV written by :func:`write_csv`; comment lines skipped."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#") and ln.strip()]
    return list(csv.DictReader(lines))


_KV = re.compile(r"^\s*([A-Za-z_][\w.\-]*)\s*=\s*(.*?)\s*$")


def read_kv(path):
    """Parse a flat ``key = value`` text file (``#`` starts a comment)."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0]
        if not line.strip():
            continue
        m = _KV.match(line)
        if not m:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        out[m.group(1)] = m.group(2)
    return out


def write_kv(path, items):
    lines = [f"{k} = {v}" for k, v in items.items()]
    Path(path).write_text("\n".join(lines) + "\n")
