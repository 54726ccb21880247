"""Pure NumPy fallback for the compiled kernel fill."""
from __future__ import annotations

import numpy as np

_SQRT_HALF = np.sqrt(0.5)
_ROW_CHUNK = 64


def pair_scalars(r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Isotropic and r-hat r-hat coefficients of the pair kernel.

    The block in Cartesian components is ``-1.5 * (a * I - b * n n^T)``.
    """
    e = np.exp(1j * r) / r**3
    a = (1.0 - 1j * r - r * r) * e
    b = (3.0 - 3j * r - r * r) * e
    return a, b


def sublevel_projections(n: np.ndarray) -> np.ndarray:
    """w_m = n . e_m for m = -1, 0, +1 along the last axis."""
    w = np.empty(n.shape[:-1] + (3,), dtype=complex)
    w[..., 0] = (n[..., 0] - 1j * n[..., 1]) * _SQRT_HALF
    w[..., 1] = n[..., 2]
    w[..., 2] = -(n[..., 0] + 1j * n[..., 1]) * _SQRT_HALF
    return w


def fill_kernel(pos: np.ndarray, out: np.ndarray) -> None:
    """Fill ``out`` (3N x 3N) with the pair kernel; diagonal blocks set to 0."""
    n = pos.shape[0]
    if out.shape != (3 * n, 3 * n):
        raise ValueError("output shape must be (3N, 3N)")
    view = out.reshape(n, 3, n, 3)
    eye = np.eye(3)
    for lo in range(0, n, _ROW_CHUNK):
        hi = min(n, lo + _ROW_CHUNK)
        d = pos[lo:hi, None, :] - pos[None, :, :]
        r = np.sqrt(np.einsum("ijk,ijk->ij", d, d))
        for k in range(lo, hi):
            r[k - lo, k] = 1.0
        a, b = pair_scalars(r)
        nhat = d / r[..., None]
        w = sublevel_projections(nhat)
        blocks = -1.5 * (
            a[..., None, None] * eye - b[..., None, None] * (w.conj()[..., :, None] * w[..., None, :])
        )
        for k in range(lo, hi):
            blocks[k - lo, k] = 0.0
        view[lo:hi] = blocks.transpose(0, 2, 1, 3)


def fill_kernel_cartesian(pos: np.ndarray, out: np.ndarray) -> None:
    """Same kernel in per-atom Cartesian components (exactly symmetric)."""
    n = pos.shape[0]
    if out.shape != (3 * n, 3 * n):
        raise ValueError("output shape must be (3N, 3N)")
    view = out.reshape(n, 3, n, 3)
    eye = np.eye(3)
    for lo in range(0, n, _ROW_CHUNK):
        hi = min(n, lo + _ROW_CHUNK)
        d = pos[lo:hi, None, :] - pos[None, :, :]
        r = np.sqrt(np.einsum("ijk,ijk->ij", d, d))
        for k in range(lo, hi):
            r[k - lo, k] = 1.0
        a, b = pair_scalars(r)
        nhat = d / r[..., None]
        blocks = -1.5 * (a[..., None, None] * eye - b[..., None, None] * (nhat[..., :, None] * nhat[..., None, :]))
        for k in range(lo, hi):
            blocks[k - lo, k] = 0.0
        view[lo:hi] = blocks.transpose(0, 2, 1, 3)
