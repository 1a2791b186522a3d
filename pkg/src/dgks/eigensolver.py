"""
Planewave Hamiltonian on a periodic uniform grid and a block LOBPCG solver
with the Teter-Payne-Allan kinetic preconditioner.

Orbitals are real (Gamma point).  Internally blocks are stored as rows of a
2D array and kept orthonormal in the plain Euclidean product; returned
orbitals are rescaled so that ``sum |psi|^2 dv = 1``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .grids import UniformGrid

log = logging.getLogger(__name__)


@dataclass
class SpectralHamiltonian:
    """``-1/2 lap + V + sum_l w_l |b_l><b_l|`` on a periodic uniform grid.

    ``projectors`` is a list of ``(weight, values)`` with values on ``grid``.
    """

    grid: UniformGrid
    veff: np.ndarray
    projectors: list = field(default_factory=list)

    def __post_init__(self):
        self.kinetic = 0.5 * self.grid.ksquared()
        if self.projectors:
            self._B = np.stack([b.ravel() for _, b in self.projectors])
            self._w = np.array([w for w, _ in self.projectors], float)
        else:
            self._B = np.zeros((0, self.grid.size))
            self._w = np.zeros(0)

    @property
    def dim(self) -> int:
        return self.grid.size

    def apply_kinetic(self, X: np.ndarray) -> np.ndarray:
        shape = self.grid.shape
        Xk = np.fft.rfftn(X.reshape(-1, *shape), axes=(1, 2, 3))
        return np.fft.irfftn(Xk * self.kinetic, s=shape, axes=(1, 2, 3)).reshape(X.shape)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Apply to a block of flattened vectors, shape ``(nb, dim)``."""
        X = np.atleast_2d(X)
        HX = self.apply_kinetic(X) + X * self.veff.ravel()
        if len(self._w):
            ov = (X @ self._B.T) * self.grid.dv
            HX += (ov * self._w) @ self._B
        return HX

    def kinetic_expectation(self, X: np.ndarray) -> np.ndarray:
        """Per-row ``<x|T|x> / <x|x>``."""
        TX = self.apply_kinetic(X)
        return np.einsum("ij,ij->i", X, TX) / np.einsum("ij,ij->i", X, X)


def apply_hamiltonian(H: SpectralHamiltonian, psi: np.ndarray) -> np.ndarray:
    """``H psi`` for one field (grid-shaped) or a batch of fields."""
    flat = psi.reshape(-1, H.dim)
    return H.apply(flat).reshape(psi.shape)


def tpa_filter(x):
    """Teter-Payne-Allan rational filter ``K(x)``, ``x`` = kinetic ratio."""
    x = np.asarray(x, float)
    num = 27 + 18 * x + 12 * x ** 2 + 8 * x ** 3
    return num / (num + 16 * x ** 4)


def precondition(residual: np.ndarray, kinetic_scale, grid: UniformGrid) -> np.ndarray:
    """Apply the kinetic filter mode by mode.

    ``residual`` has shape ``(nb, dim)``; ``kinetic_scale`` is a scalar or one
    value per row.
    """
    scale = np.broadcast_to(np.asarray(kinetic_scale, float), (len(residual),))
    if np.any(scale <= 0):
        raise ValueError("kinetic scale must be positive")
    shape = grid.shape
    Rk = np.fft.rfftn(residual.reshape(-1, *shape), axes=(1, 2, 3))
    t = 0.5 * grid.ksquared()
    Rk *= tpa_filter(t[None] / scale[:, None, None, None])
    return np.fft.irfftn(Rk, s=shape, axes=(1, 2, 3)).reshape(residual.shape)


@dataclass
class EigenSolution:
    eigenvalues: np.ndarray
    orbitals: np.ndarray
    residuals: np.ndarray
    iterations: int
    converged: bool
    ritz_history: list = field(default_factory=list, repr=False)
    vectors: np.ndarray = field(default=None, repr=False)


def _orthonormalize(X):
    """Rows of X orthonormalized via Cholesky, falling back to SVD."""
    G = X @ X.T
    try:
        L = np.linalg.cholesky(0.5 * (G + G.T))
        return scipy.linalg.solve_triangular(L, X, lower=True)
    except np.linalg.LinAlgError:
        U, _, Vt = np.linalg.svd(X, full_matrices=False)
        return U @ Vt


def _orth_complement(S, X, rtol=1e-8):
    """Orthonormal basis of span(S) orthogonal to the orthonormal rows of X."""
    if len(S) == 0:
        return S
    for _ in range(2):
        S = S - (S @ X.T) @ X
    nrm = np.linalg.norm(S, axis=1)
    keep = nrm > 1e-300
    S = S[keep] / nrm[keep, None]
    if len(S) == 0:
        return S
    _, s, Vt = np.linalg.svd(S, full_matrices=False)
    U = Vt[: int(np.sum(s > rtol * s[0]))]
    for _ in range(2):
        U = U - (U @ X.T) @ X
        U = _orthonormalize(U)
    return U


def random_block(nb: int, dim: int, rng) -> np.ndarray:
    X = rng.uniform(-1.0, 1.0, size=(nb, dim))
    return _orthonormalize(X)


def lobpcg(H: SpectralHamiltonian, nb: int, X0=None, tol: float = 1e-8, max_iter: int = 100,
           precond: bool = True, rng=None) -> EigenSolution:
    """Lowest ``nb`` eigenpairs of ``H`` by block LOBPCG.

    Each iteration performs Rayleigh-Ritz in the span of the current block,
    the preconditioned residuals of unconverged vectors and the previous
    search directions.  Directions that are numerically dependent are
    dropped for that iteration.

    Parameters
    ----------
    X0 : ndarray, shape (nb, *grid.shape) or (nb, dim), optional
        Initial block; seeded random in ``[-1, 1]`` if absent.
    tol : float
        Residual tolerance ``||H psi - E psi||`` for normalized ``psi``.
    max_iter : int
        Number of Rayleigh-Ritz updates allowed.
    """
    if nb < 1:
        raise ValueError("need at least one eigenpair")
    dim = H.dim
    scale = np.sqrt(H.grid.dv)
    if X0 is None:
        rng = np.random.default_rng(0) if rng is None else rng
        X = random_block(nb, dim, rng)
    else:
        X = _orthonormalize(np.asarray(X0, float).reshape(nb, dim) * scale)

    HX = H.apply(X)
    theta, C = scipy.linalg.eigh(0.5 * (X @ HX.T + HX @ X.T))
    X, HX = C.T @ X, C.T @ HX
    history = [theta.copy()]
    k_min2 = min((2 * np.pi / e) ** 2 for e in H.grid.extents)

    P = np.zeros((0, dim))
    it = 0
    while True:
        R = HX - theta[:, None] * X
        res = np.linalg.norm(R, axis=1)
        if np.all(res <= tol):
            break
        if it >= max_iter:
            break
        it += 1
        active = res > tol
        W = R[active]
        if precond:
            ke = np.maximum(H.kinetic_expectation(X[active]), 0.5 * k_min2)
            W = precondition(W, ke, H.grid)
        U = _orth_complement(np.vstack([W, P]), X)
        HU = H.apply(U) if len(U) else np.zeros((0, dim))
        Q = np.vstack([X, U])
        HQ = np.vstack([HX, HU])
        G = Q @ HQ.T
        theta_all, C = scipy.linalg.eigh(0.5 * (G + G.T))
        C = C[:, :nb]
        theta = theta_all[:nb]
        X = C.T @ Q
        HX = C.T @ HQ
        P = C[nb:].T @ U if len(U) else np.zeros((0, dim))
        pn = np.linalg.norm(P, axis=1)
        P = P[pn > 1e-14]
        # keep the block orthonormal against round-off drift
        G = X @ X.T
        if np.max(np.abs(G - np.eye(nb))) > 1e-12:
            L = np.linalg.cholesky(G)
            X = scipy.linalg.solve_triangular(L, X, lower=True)
            HX = scipy.linalg.solve_triangular(L, HX, lower=True)
        history.append(theta.copy())

    theta, C = scipy.linalg.eigh(0.5 * (X @ HX.T + HX @ X.T))
    X, HX = C.T @ X, C.T @ HX
    res = np.linalg.norm(HX - theta[:, None] * X, axis=1)
    orbitals = (X / scale).reshape(nb, *H.grid.shape)
    return EigenSolution(theta, orbitals, res, it, bool(np.all(res <= tol)), history, X)
