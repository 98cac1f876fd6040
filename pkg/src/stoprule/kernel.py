"""Radial kernels K(v) = H(||v||_2^m) with a pluggable profile H.

The exponent m is the dimension of v (callers pass window length k + j + 1),
which lets a single profile H serve every window size. Profiles must be
nonincreasing and continuous with H(0) > 0 and t*H(t) -> 0.

Underflow policy: weights below the smallest positive normal float are
flushed to exactly 0, so the 0/0 := 0 convention in the local-averaging
ratios behaves identically across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["KernelProfile", "kernel_eval", "radial_weights"]

_TINY = float(np.finfo(np.float64).tiny)  # smallest positive normal double


@dataclass(frozen=True)
class KernelProfile:
    """Profile choice: ``gaussian`` H(t) = exp(-t^2), or ``compact-uniform``
    H(t) = 1 for t <= 1 decaying linearly to 0 at t = 2 (compactly supported,
    so isolated queries exercise the 0/0 branch)."""

    kind: str = "gaussian"

    def __post_init__(self):
        if self.kind not in ("gaussian", "compact-uniform"):
            raise ValueError(f"unknown kernel profile {self.kind!r}")

    def profile(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        if self.kind == "gaussian":
            return np.exp(-np.square(t))
        return np.clip(2.0 - t, 0.0, 1.0)


def _flush(w: np.ndarray) -> np.ndarray:
    # subnormals -> exact zero, keeping denominators either 0 or well scaled
    return np.where(w < _TINY, 0.0, w)


def kernel_eval(profile: KernelProfile, v, exponent: int) -> float:
    """K(v) = H(||v||_2^exponent) for a single vector.

    ``exponent`` must equal the dimension of v.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"v must be a vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("kernel argument has non-finite components")
    if exponent != v.size:
        raise ValueError(f"exponent {exponent} must equal the dimension {v.size} of v")
    norm = float(np.linalg.norm(v))
    value = float(profile.profile(np.asarray(norm**exponent)))
    return value if value >= _TINY else 0.0


def radial_weights(
    profile: KernelProfile, sq_dists: np.ndarray, exponent: int, bandwidth: float
) -> np.ndarray:
    """Vectorized K((u - z)/h) from squared distances ||u - z||^2.

    With d the squared distance, ||(u-z)/h||^m = (d / h^2)^(m/2); the result
    is flushed per the underflow policy.
    """
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    scaled = np.asarray(sq_dists, dtype=np.float64) / (bandwidth * bandwidth)
    t = np.power(scaled, exponent / 2.0)
    return _flush(profile.profile(t))
