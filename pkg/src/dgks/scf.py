"""
Self-consistent field loop shared by the planewave and DG pipelines:
Fermi-Dirac occupations, linear and Anderson density mixing, convergence
bookkeeping.
"""

from __future__ import annotations

import logging
import math
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .hamiltonian import (EffectivePotential, EnergyReport, System, effective_potential, initial_density,
                          total_energy)

log = logging.getLogger(__name__)

KB_AU = 3.166811563e-6     # Boltzmann constant, hartree / K


def fermi_occupations(eigenvalues, n_electrons: float, temperature: float):
    """Occupations ``1 / (1 + exp((E - mu) / kT))`` summing to ``n_electrons``.

    The chemical potential is found by bisection.  At ``T = 0`` the lowest
    states are filled one electron each (the last one fractionally).

    Returns
    -------
    occupations : ndarray
    mu : float
    """
    e = np.asarray(eigenvalues, float)
    if n_electrons > len(e):
        raise ValueError(f"{n_electrons} electrons do not fit in {len(e)} states")
    if temperature < 0:
        raise ValueError("temperature must be nonnegative")
    if temperature == 0:
        order = np.argsort(e, kind="stable")
        f = np.zeros_like(e)
        full = int(math.floor(n_electrons))
        f[order[:full]] = 1.0
        if full < len(e):
            f[order[full]] = n_electrons - full
        top = full if n_electrons > full else max(full - 1, 0)
        mu = float(e[order[top]])
        return f, mu

    kt = KB_AU * temperature
    lo, hi = e.min() - 50 * kt - 1.0, e.max() + 50 * kt + 1.0
    count = lambda m: float(np.sum(expit((m - e) / kt)))  # noqa: E731
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if count(mid) < n_electrons:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, abs(mid)):
            break
    mu = 0.5 * (lo + hi)
    return expit((mu - e) / kt), mu


def _mix_step(rho_in, residual, alpha):
    # shared by every scheme so that depth-0 Anderson equals linear mixing bit for bit
    return rho_in + (1.0 - alpha) * residual


class LinearMixer:
    """``rho_next = alpha rho_in + (1 - alpha) rho_out``."""

    def __init__(self, alpha: float = 0.3):
        if not 0.0 <= alpha < 1.0:
            raise ValueError("mixing parameter must lie in [0, 1)")
        self.alpha = alpha

    def __call__(self, rho_in, rho_out):
        return _mix_step(rho_in, rho_out - rho_in, self.alpha)

    def reset(self):
        pass


class AndersonMixer:
    """Anderson extrapolation over the last ``depth`` (input, residual) pairs
    followed by a linear step on the extrapolated pair."""

    def __init__(self, depth: int = 4, alpha: float = 0.3, ridge: float = 1e-12):
        if depth < 0:
            raise ValueError("Anderson depth must be nonnegative")
        if not 0.0 <= alpha < 1.0:
            raise ValueError("mixing parameter must lie in [0, 1)")
        self.depth = depth
        self.alpha = alpha
        self.ridge = ridge
        self.history = deque(maxlen=max(depth, 1))

    def reset(self):
        self.history.clear()

    def __call__(self, rho_in, rho_out):
        F = rho_out - rho_in
        rho_bar, F_bar = rho_in, F
        if self.depth > 0 and self.history:
            dR = np.stack([rho_in - r for r, _ in self.history]).reshape(len(self.history), -1)
            dF = np.stack([F - f for _, f in self.history]).reshape(len(self.history), -1)
            G = dF @ dF.T
            reg = self.ridge * max(np.linalg.norm(G), 1e-300)
            theta = np.linalg.solve(G + reg * np.eye(len(G)), dF @ F.ravel())
            rho_bar = rho_in - (theta @ dR).reshape(rho_in.shape)
            F_bar = F - (theta @ dF).reshape(F.shape)
        if self.depth > 0:
            self.history.append((rho_in.copy(), F.copy()))
        return _mix_step(rho_bar, F_bar, self.alpha)


def make_mixer(scheme: str = "anderson", alpha: float = 0.3, depth: int = 4):
    if scheme == "linear":
        return LinearMixer(alpha)
    if scheme == "anderson":
        return AndersonMixer(depth, alpha)
    raise ValueError(f"unknown mixing scheme {scheme!r}")


@dataclass
class StepResult:
    """What an eigenstep hands back: eigenvalues and a density builder."""

    eigenvalues: np.ndarray
    density: object             # callable(occupations) -> rho on the global grid
    info: dict = field(default_factory=dict)


@dataclass
class SCFSettings:
    tol: float = 1e-7
    max_iter: int = 60
    mixing: str = "anderson"
    alpha_mix: float = 0.3
    depth: int = 4
    temperature: float = 2000.0
    n_states: int = None


@dataclass
class SCFState:
    iteration: int
    rho_in: np.ndarray
    rho_out: np.ndarray
    veff: EffectivePotential
    eigenvalues: np.ndarray
    occupations: np.ndarray
    mu: float
    residual: float


@dataclass
class SCFResult:
    state: SCFState
    energy: EnergyReport
    history: list
    converged: bool
    step: StepResult = None
    timings: dict = field(default_factory=dict)


def density_residual(rho_a, rho_b, dv: float) -> float:
    """Grid-quadrature L2 norm of the difference."""
    return float(np.sqrt(np.sum((rho_a - rho_b) ** 2) * dv))


def scf_loop(eigenstep, system: System, settings: SCFSettings, rho0=None, callback=None) -> SCFResult:
    """Iterate density -> potential -> eigenstep -> occupations -> density.

    ``eigenstep(veff, converge)`` returns a :class:`StepResult`; ``converge``
    asks it to solve the eigenproblem to tolerance rather than taking a few
    inner iterations (used when the potential does not depend on the
    density, so one pass is the answer).
    """
    N = system.n_electrons
    dv = system.grid.dv
    rho = initial_density(system) if rho0 is None else np.asarray(rho0, float)
    mixer = make_mixer(settings.mixing, settings.alpha_mix, settings.depth)
    history = []
    best = None
    converged = False
    for n in range(1, settings.max_iter + 1):
        t0 = time.perf_counter()
        veff = effective_potential(rho, system)
        step = eigenstep(veff, not system.interacting)
        eigs = np.asarray(step.eigenvalues)
        n_states = settings.n_states or len(eigs)
        f, mu = fermi_occupations(eigs[:n_states], N, settings.temperature)
        rho_out = step.density(f)
        res = density_residual(rho, rho_out, dv)
        energy = total_energy(eigs, f, rho, system)
        state = SCFState(n, rho, rho_out, veff, eigs[:n_states], f, mu, res)
        rec = {"iteration": n, "residual": res, "etot": energy.total, "mu": mu,
               "seconds": time.perf_counter() - t0}
        rec.update({k: v for k, v in step.info.items() if np.isscalar(v)})
        history.append(rec)
        log.info("scf %3d  residual %.3e  etot %.12f  mu %.6f", n, res, energy.total, mu)
        if callback is not None:
            callback(state, step)
        if best is None or res < best[0].residual:
            best = (state, energy, step)
        if not system.interacting or res <= settings.tol:
            converged = True
            best = (state, energy, step)
            break
        rho = mixer(rho, rho_out)
    state, energy, step = best
    if not converged:
        log.warning("SCF did not converge in %d iterations (best residual %.3e)",
                    settings.max_iter, state.residual)
    return SCFResult(state, energy, history, converged, step)
