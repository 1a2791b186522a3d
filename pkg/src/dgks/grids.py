"""
Uniform Fourier grids, Legendre-Gauss-Lobatto element grids and the
transfer operators between them.

Fields are plain ndarrays shaped like the grid they live on; the grid object
travels alongside.  Every 3D transfer is applied one axis at a time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class UniformGrid:
    """Periodic uniform grid with nodes at ``lower + j * spacing``.

    ``index`` holds, per axis, the global node indices of a restricted grid
    (``None`` for the global grid itself).
    """

    lower: np.ndarray
    shape: tuple
    spacing: np.ndarray
    index: tuple = None

    @property
    def extents(self) -> np.ndarray:
        return self.spacing * np.asarray(self.shape)

    @property
    def dv(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def axis_nodes(self, axis: int) -> np.ndarray:
        return self.lower[axis] + self.spacing[axis] * np.arange(self.shape[axis])

    def mesh(self):
        return np.meshgrid(*(self.axis_nodes(a) for a in range(3)), indexing="ij")

    def wavevectors(self):
        """Angular wavevectors per axis, broadcastable to the rfft layout."""
        k = [2 * np.pi * np.fft.fftfreq(n, d=h) for n, h in zip(self.shape, self.spacing)]
        k[2] = 2 * np.pi * np.fft.rfftfreq(self.shape[2], d=self.spacing[2])
        return (k[0][:, None, None], k[1][None, :, None], k[2][None, None, :])

    def ksquared(self) -> np.ndarray:
        kx, ky, kz = self.wavevectors()
        return kx ** 2 + ky ** 2 + kz ** 2


def global_grid(extents, shape) -> UniformGrid:
    shape = tuple(int(n) for n in shape)
    ext = np.asarray(extents, float)
    return UniformGrid(np.zeros(3), shape, ext / np.asarray(shape))


def _steps(length, spacing, what):
    n = length / spacing
    if abs(n - round(n)) > 1e-8 * max(1.0, n):
        raise ValueError(f"{what} ({length:g} au) is not a multiple of the grid spacing ({spacing:g} au)")
    return int(round(n))


def extended_grid(grid: UniformGrid, q) -> UniformGrid:
    """Restriction of the global grid to an extended element box."""
    idx, shape = [], []
    for a in range(3):
        start = _steps(q.lower[a] - grid.lower[a], grid.spacing[a], f"extended element corner along {'xyz'[a]}")
        n = _steps(q.size[a], grid.spacing[a], f"extended element edge along {'xyz'[a]}")
        idx.append(np.mod(start + np.arange(n), grid.shape[a]))
        shape.append(n)
    return UniformGrid(np.asarray(q.lower, float), tuple(shape), grid.spacing, tuple(idx))


def restrict_to_extended(values: np.ndarray, qgrid: UniformGrid) -> np.ndarray:
    """Copy global grid values onto a restricted grid (no arithmetic)."""
    return values[np.ix_(*qgrid.index)]


# ---------------------------------------------------------------------------
# LGL
# ---------------------------------------------------------------------------

def lgl_1d(n: int, tol: float = 1e-14):
    """Legendre-Gauss-Lobatto nodes, weights and differentiation matrix.

    Parameters
    ----------
    n : int
        Number of nodes (polynomial degree ``n - 1``), ``n >= 2``.

    Returns
    -------
    x : ndarray, shape (n,)
        Nodes on ``[-1, 1]`` in ascending order, including both endpoints.
    w : ndarray, shape (n,)
        Quadrature weights; exact for polynomials of degree ``2n - 3``.
    D : ndarray, shape (n, n)
        ``D @ f(x) = f'(x)`` for any polynomial of degree ``<= n - 1``.
    """
    if n < 2:
        raise ValueError(f"LGL rule needs at least 2 nodes, got {n}")
    N = n - 1
    # Chebyshev-Gauss-Lobatto initial guess, Newton on (1 - x^2) P_N'(x)
    x = -np.cos(np.pi * np.arange(n) / N)
    P = np.zeros((n, n))
    for _ in range(100):
        xold = x
        P[:, 0] = 1.0
        P[:, 1] = x
        for k in range(2, n):
            P[:, k] = ((2 * k - 1) * x * P[:, k - 1] - (k - 1) * P[:, k - 2]) / k
        x = xold - (x * P[:, N] - P[:, N - 1]) / (n * P[:, N])
        if np.max(np.abs(x - xold)) < tol:
            break
    P[:, 0] = 1.0
    P[:, 1] = x
    for k in range(2, n):
        P[:, k] = ((2 * k - 1) * x * P[:, k - 1] - (k - 1) * P[:, k - 2]) / k
    LN = P[:, N]
    w = 2.0 / (N * n * LN ** 2)

    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    D = (LN[:, None] / LN[None, :]) / diff
    np.fill_diagonal(D, 0.0)
    D[0, 0] = -N * n / 4.0
    D[-1, -1] = N * n / 4.0
    return x, w, D


@dataclass(frozen=True)
class LGLGrid:
    """Tensor LGL grid on an element box ``[lower, upper]``."""

    lower: np.ndarray
    upper: np.ndarray
    n: int
    ref_nodes: np.ndarray
    ref_weights: np.ndarray
    ref_diff: np.ndarray

    @property
    def size(self) -> np.ndarray:
        return self.upper - self.lower

    def axis_nodes(self, axis: int) -> np.ndarray:
        return self.lower[axis] + 0.5 * (self.ref_nodes + 1.0) * self.size[axis]

    def axis_weights(self, axis: int) -> np.ndarray:
        return self.ref_weights * 0.5 * self.size[axis]

    def axis_diff(self, axis: int) -> np.ndarray:
        return self.ref_diff * (2.0 / self.size[axis])

    @property
    def shape(self) -> tuple:
        return (self.n,) * 3

    @property
    def weights(self) -> np.ndarray:
        wx, wy, wz = (self.axis_weights(a) for a in range(3))
        return wx[:, None, None] * wy[None, :, None] * wz[None, None, :]

    def mesh(self):
        return np.meshgrid(*(self.axis_nodes(a) for a in range(3)), indexing="ij")


def lgl_grid(lower, upper, n: int) -> LGLGrid:
    x, w, D = lgl_1d(n)
    return LGLGrid(np.asarray(lower, float), np.asarray(upper, float), int(n), x, w, D)


def apply_along(values: np.ndarray, mat: np.ndarray, axis: int) -> np.ndarray:
    """Apply ``mat`` to axis ``axis`` of ``values`` (trailing 3 axes are space)."""
    ax = values.ndim - 3 + axis
    out = np.tensordot(values, mat, axes=([ax], [1]))
    return np.moveaxis(out, -1, ax)


def lgl_gradient(values: np.ndarray, grid: LGLGrid):
    """Gradient of the nodal polynomial interpolant; leading batch axes allowed."""
    return tuple(apply_along(values, grid.axis_diff(a), a) for a in range(3))


def face_trace(values: np.ndarray, grid: LGLGrid, axis: int, side: int):
    """Restrict nodal values to one face of the element box.

    Returns the 2D trace (batch axes preserved) and the face quadrature
    weights, the tensor product of the tangential 1D weights.
    """
    ax = values.ndim - 3 + axis
    trace = np.take(values, 0 if side < 0 else -1, axis=ax)
    tang = [a for a in range(3) if a != axis]
    w = np.outer(grid.axis_weights(tang[0]), grid.axis_weights(tang[1]))
    return trace, w


# ---------------------------------------------------------------------------
# Interpolation
# ---------------------------------------------------------------------------

def fourier_matrix(n: int, lower: float, period: float, x, deriv: int = 0) -> np.ndarray:
    """Matrix evaluating the trigonometric interpolant of ``n`` periodic
    samples (nodes ``lower + j * period / n``) or its first derivative at ``x``.

    The Nyquist mode is split evenly between ``+-n/2`` so that the interpolant
    of real data is real.
    """
    m = np.fft.fftfreq(n, d=1.0 / n)
    s = (np.asarray(x, float) - lower) / period
    phase = 2 * np.pi * m[None, None, :] * (s[:, None, None] - np.arange(n)[None, :, None] / n)
    if deriv == 0:
        terms = np.cos(phase)
    elif deriv == 1:
        terms = -(2 * np.pi * m / period) * np.sin(phase)
    else:
        raise ValueError("only deriv in {0, 1} is supported")
    return terms.sum(axis=-1) / n


def fourier_interpolate(values: np.ndarray, grid: UniformGrid, targets, deriv_axis=None) -> np.ndarray:
    """Evaluate the trigonometric interpolant of ``values`` on a tensor set of
    target coordinates ``targets = (x, y, z)``.

    Leading batch axes of ``values`` are carried through.  With ``deriv_axis``
    set, the derivative along that axis is evaluated instead.
    """
    out = values
    for a in range(3):
        mat = fourier_matrix(grid.shape[a], grid.lower[a], grid.extents[a], targets[a],
                             deriv=1 if deriv_axis == a else 0)
        out = apply_along(out, mat, a)
    return out


def lagrange_matrix(ref_nodes: np.ndarray, t) -> np.ndarray:
    """Barycentric Lagrange interpolation matrix from ``ref_nodes`` to ``t``."""
    t = np.asarray(t, float)
    diff = ref_nodes[:, None] - ref_nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    bw = 1.0 / diff.prod(axis=1)
    d = t[:, None] - ref_nodes[None, :]
    exact = np.isclose(d, 0.0, atol=1e-14)
    d[exact] = 1.0
    L = bw[None, :] / d
    L /= L.sum(axis=1, keepdims=True)
    rows = exact.any(axis=1)
    L[rows] = exact[rows].astype(float)
    return L


def element_uniform_indices(grid: UniformGrid, lgl: LGLGrid, axis: int):
    """Global uniform node indices inside the closed element interval along
    ``axis`` (wrapped) and their reference coordinates in ``[-1, 1]``."""
    h = grid.spacing[axis]
    i0 = _steps(lgl.lower[axis] - grid.lower[axis], h, "element corner")
    ne = _steps(lgl.size[axis], h, "element edge")
    j = np.arange(ne + 1)
    t = 2.0 * j / ne - 1.0
    return np.mod(i0 + j, grid.shape[axis]), t


def lgl_to_uniform(fields, lgls, grid: UniformGrid) -> np.ndarray:
    """Assemble per-element LGL fields onto the global uniform grid.

    Each uniform node takes the Lagrange-interpolated value from the element
    containing it; nodes on element faces, edges and corners take the mean
    over all incident elements (a self-paired wrap face counts twice).
    """
    total = np.zeros(grid.shape)
    count = np.zeros(grid.shape)
    for f, lgl in zip(fields, lgls):
        idx, vals = [], f
        for a in range(3):
            ia, t = element_uniform_indices(grid, lgl, a)
            vals = apply_along(vals, lagrange_matrix(lgl.ref_nodes, t), a)
            idx.append(ia)
        ix = np.ix_(*idx)
        np.add.at(total, ix, vals)
        np.add.at(count, ix, 1.0)
    return total / count
