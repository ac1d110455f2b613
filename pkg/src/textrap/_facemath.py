"""Internal helpers for face-domain work that exploits conjugate symmetry.

For a real tensor, DFT face ``f`` and face ``n3 - f`` are conjugates, so
per-face computations only need faces ``0 .. n3 // 2``; the rest are filled
by mirroring.  Mirroring also guarantees the inverse DFT lands on a real
tensor instead of merely being close to one.
"""

from __future__ import annotations

import numpy as np


def half_indices(n3: int) -> range:
    """Face indices that must be computed explicitly: ``0 .. n3 // 2``."""
    return range(n3 // 2 + 1)


def fill_conjugate(faces: np.ndarray) -> np.ndarray:
    """Fill faces ``n3//2 + 1 ..`` with conjugates of their mirror faces.

    ``faces`` has the face index on its last axis and is modified in place.
    """
    n3 = faces.shape[-1]
    for f in range(1, (n3 - 1) // 2 + 1):
        faces[..., n3 - f] = np.conj(faces[..., f])
    return faces
