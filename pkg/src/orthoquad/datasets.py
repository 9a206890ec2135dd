"""Synthetic dataset generation."""

import numpy as np

__all__ = ["gen_circles"]


def gen_circles(seed=0, n_per=2000, radii=(1.0, 2.0, 3.0), noise=0.2):
    """Concentric noisy circles: uniform angles, radius jittered by Gaussian noise.

    Returns (points, labels) with labels 1..len(radii), one block of n_per
    points per circle, deterministic per seed.
    """
    radii = tuple(float(r) for r in radii)
    if len(set(radii)) != len(radii) or min(radii) <= 0:
        raise ValueError("radii must be distinct and positive")
    rng = np.random.default_rng(seed)
    points = []
    labels = []
    for cls, radius in enumerate(radii, start=1):
        theta = rng.uniform(0.0, 2.0 * np.pi, n_per)
        rho = radius + rng.normal(0.0, noise, n_per) if noise > 0 else np.full(n_per, radius)
        points.append(np.column_stack([rho * np.cos(theta), rho * np.sin(theta)]))
        labels.append(np.full(n_per, cls, dtype=int))
    return np.vstack(points), np.concatenate(labels)
