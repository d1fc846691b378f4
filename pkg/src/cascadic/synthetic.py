"""Deterministic synthetic color test scenes in ``[0, 1]``."""

import numpy as np

__all__ = ["SCENES", "make_scene", "checkerboard"]


def _grid(n1, n2):
    y, x = np.mgrid[0:n1, 0:n2]
    return y / n1, x / n2


def shapes(n1=128, n2=128):
    """Piecewise-smooth scene: gradient background, a disk, a bar and a ring."""
    y, x = _grid(n1, n2)
    img = np.empty((n1, n2, 3))
    img[..., 0] = 0.25 + 0.5 * x
    img[..., 1] = 0.2 + 0.4 * y
    img[..., 2] = 0.6 - 0.3 * x * y
    disk = (y - 0.35) ** 2 + (x - 0.3) ** 2 < 0.18**2
    img[disk] = (0.95, 0.85, 0.15)
    bar = (np.abs(y - 0.72) < 0.08) & (x > 0.15) & (x < 0.85)
    img[bar] = (0.1, 0.3, 0.8)
    r = np.hypot(y - 0.3, x - 0.72)
    ring = (r > 0.1) & (r < 0.17)
    img[ring] = (0.85, 0.2, 0.35)
    return img


def texture(n1=128, n2=128):
    """Smooth gradients with low-contrast periodic texture and a few edges."""
    y, x = _grid(n1, n2)
    img = np.empty((n1, n2, 3))
    waves = 0.08 * np.sin(2 * np.pi * 6 * x) * np.cos(2 * np.pi * 5 * y)
    img[..., 0] = 0.5 + 0.3 * np.sin(np.pi * x) + waves
    img[..., 1] = 0.35 + 0.3 * y + 0.5 * waves
    img[..., 2] = 0.45 + 0.2 * np.cos(np.pi * y) - waves
    square = (np.abs(y - 0.5) < 0.2) & (np.abs(x - 0.5) < 0.2)
    img[square, 0] = 0.9
    img[square, 1] *= 0.4
    stripe = (x > 0.8) & (x < 0.86)
    img[stripe] = (0.05, 0.1, 0.2)
    return np.clip(img, 0.0, 1.0)


SCENES = {"shapes": shapes, "texture": texture}


def make_scene(name, n1=128, n2=128):
    try:
        return SCENES[name](n1, n2)
    except KeyError:
        raise ValueError(f"unknown scene {name!r}, choose from {sorted(SCENES)}") from None


def checkerboard(n1, n2, cell=4, channels=3):
    y, x = np.mgrid[0:n1, 0:n2]
    board = ((y // cell + x // cell) % 2).astype(np.float64)
    return np.repeat(board[..., None], channels, axis=2) * 0.8 + 0.1
