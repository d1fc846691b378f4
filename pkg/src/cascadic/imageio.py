"""PNG and ETEN image I/O.

PNG values map 8-bit ``v`` to ``v / 255``; writing clamps to ``[0, 1]`` and
rounds half up, so any tensor whose values are multiples of ``1/255``
survives a round trip unchanged.
"""

from pathlib import Path

import numpy as np
from PIL import Image

from .tensor import ETEN_MAGIC, as_image, load_eten, save_eten

__all__ = ["read_png", "write_png", "to_uint8", "read_image", "write_eten"]


def read_png(path):
    """Load a PNG as a float64 ``(n1, n2, C)`` array with ``C`` 1 or 3."""
    with Image.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("L" if im.mode in ("1", "I", "I;16", "F") else "RGB")
        arr = np.asarray(im, dtype=np.uint8)
    if arr.ndim == 2:
        arr = arr[..., None]
    return arr.astype(np.float64) / 255.0


def to_uint8(X):
    X = np.clip(np.asarray(X, dtype=np.float64), 0.0, 1.0)
    return np.floor(X * 255.0 + 0.5).astype(np.uint8)


def write_png(path, X):
    """Clamp, quantize and save; single-channel tensors become grayscale PNGs."""
    X = as_image(X, "X")
    if X.shape[2] not in (1, 3):
        raise ValueError(f"PNG output needs 1 or 3 channels, got {X.shape[2]}")
    q = to_uint8(X)
    Image.fromarray(q[..., 0] if q.shape[2] == 1 else q).save(path, format="PNG")


def read_image(path):
    """Load an ETEN order-3 tensor or a PNG, chosen by the file's magic bytes."""
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == ETEN_MAGIC:
        return as_image(load_eten(path), str(path))
    return read_png(path)


def write_eten(path, X):
    save_eten(path, as_image(X, "X"))
