"""Model files, field dumps and PGM rasters.

Model file layout (version 1)::

    b"VEKUA-CASCADE\\n"
    one line of JSON: {"version", "in_dim", "blocks": [{"K", "hidden", "lam", "scale"}, ...]}
    raw little-endian float64 payload, per block in order:
        W (in_dim x hidden, row-major), b, W_out (hidden x 2, row-major),
        omega_re, omega_im, w

The payload holds the exact bytes of every parameter, so a round trip
reproduces predictions bit for bit.
"""

import json

import numpy as np

from .basis import FrequencyBank
from .cascade import Block, CascadeModel
from .warp import WarpParams

MAGIC = b"VEKUA-CASCADE\n"
FORMAT_VERSION = 1
_LE = np.dtype("<f8")


class ModelFormatError(ValueError):
    pass


def _block_arrays(b: Block):
    return [b.warp.W, b.warp.b, b.warp.W_out, b.bank.omega_re, b.bank.omega_im, b.w]


def save_model(model: CascadeModel, path) -> None:
    header = {
        "version": FORMAT_VERSION,
        "in_dim": model.in_dim,
        "blocks": [{"K": b.bank.K, "hidden": b.warp.b.size, "lam": b.lam, "scale": b.warp.scale}
                   for b in model.blocks],
    }
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(header).encode("ascii") + b"\n")
        for b in model.blocks:
            for arr in _block_arrays(b):
                fh.write(np.ascontiguousarray(arr, dtype=_LE).tobytes())


def load_model(path) -> CascadeModel:
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ModelFormatError(f"{path}: not a cascade model file")
        header = json.loads(fh.readline())
        payload = fh.read()
    if header.get("version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model version {header.get('version')}")
    flat = np.frombuffer(payload, dtype=_LE).astype(np.float64)
    d = header["in_dim"]
    pos = 0

    def take(*shape):
        nonlocal pos
        size = int(np.prod(shape))
        if pos + size > flat.size:
            raise ModelFormatError("truncated model payload")
        out = flat[pos:pos + size].reshape(shape).copy()
        pos += size
        return out

    blocks = []
    for spec in header["blocks"]:
        K, hid = spec["K"], spec["hidden"]
        warp = WarpParams(take(d, hid), take(hid), take(hid, 2), spec["scale"])
        bank = FrequencyBank(take(K), take(K))
        blocks.append(Block(warp, bank, take(4 * K), spec["lam"]))
    if pos != flat.size:
        raise ModelFormatError("trailing bytes in model payload")
    return CascadeModel(d, blocks)


def write_field_csv(path, X, values, header=None) -> None:
    """One row per point: coordinates, then value, at round-trip precision."""
    X = np.asarray(X, dtype=np.float64)
    data = np.column_stack([X, np.asarray(values, dtype=np.float64)])
    if header is None:
        header = ",".join([f"x{i + 1}" for i in range(X.shape[1])] + ["value"])
    np.savetxt(path, data, delimiter=",", fmt="%.17g", header=header, comments="")


def write_pgm(path, image) -> tuple:
    """Write a 2-D array as a 16-bit binary PGM, min -> 0 and max -> 65535.

    Rows are written in array order. The min/max used for the mapping are
    recorded in a header comment and returned.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("PGM export needs a 2-D array")
    lo, hi = float(img.min()), float(img.max())
    span = hi - lo if hi > lo else 1.0
    levels = np.rint((img - lo) / span * 65535).astype(">u2")
    rows, cols = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n# min={lo!r} max={hi!r}\n{cols} {rows}\n65535\n".encode("ascii"))
        fh.write(levels.tobytes())
    return lo, hi


def read_pgm(path):
    """Read a file written by :func:`write_pgm`; returns ``(levels, lo, hi)``."""
    with open(path, "rb") as fh:
        if fh.readline().strip() != b"P5":
            raise ValueError("not a binary PGM")
        comment = fh.readline().decode("ascii")
        fields = dict(kv.split("=") for kv in comment.lstrip("# ").split())
        cols, rows = map(int, fh.readline().split())
        maxval = int(fh.readline())
        levels = np.frombuffer(fh.read(), dtype=">u2" if maxval > 255 else "u1")
    return levels.reshape(rows, cols).astype(np.int64), float(fields["min"]), float(fields["max"])
