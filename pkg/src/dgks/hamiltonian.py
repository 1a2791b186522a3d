"""
Model pseudopotential, Hartree and LDA exchange-correlation potentials,
effective potential and total energy.

The pseudopotential keeps the Kleinman-Bylander structure: a local part made
of Gaussian wells and a sum of signed rank-one terms ``gamma |b><b|``.  All
projector shapes are Gaussians (times a coordinate for p-like ones) with a
smooth polynomial taper to exactly zero at the cutoff radius.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Domain
from .grids import UniformGrid

FORMS = ("s", "px", "py", "pz")


@dataclass(frozen=True)
class ProjectorSpec:
    sign: int = 1
    coupling: float = 1.0
    width: float = 1.0
    form: str = "s"
    cutoff: float = 4.0

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError(f"projector sign must be +1 or -1, got {self.sign}")
        if self.width <= 0 or self.cutoff <= 0 or self.coupling < 0:
            raise ValueError("projector width and cutoff must be positive, coupling nonnegative")
        if self.form not in FORMS:
            raise ValueError(f"projector form must be one of {FORMS}, got {self.form!r}")


@dataclass(frozen=True)
class AtomSpec:
    position: np.ndarray
    depth: float = 1.0
    width: float = 1.0
    projectors: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, float))
        if self.depth <= 0 or self.width <= 0:
            raise ValueError("local potential depth and width must be positive")


@dataclass(frozen=True)
class Projector:
    """One normalized projector ``b`` with its signed weight ``gamma * coupling``."""

    atom: int
    center: np.ndarray
    spec: ProjectorSpec
    norm: float

    @property
    def weight(self) -> float:
        return self.spec.sign * self.spec.coupling

    @property
    def cutoff(self) -> float:
        return self.spec.cutoff


# ---------------------------------------------------------------------------
# real-space sampling on tensor grids
# ---------------------------------------------------------------------------

def _gauss_1d_images(x, center, L, width):
    """sum over n in {-1, 0, 1} of exp(-(d + n L)^2 / 2 w^2), d minimal image."""
    d = x - center
    d = d - L * np.round(d / L)
    return sum(np.exp(-(d + n * L) ** 2 / (2 * width ** 2)) for n in (-1, 0, 1))


def check_widths(atoms, domain: Domain):
    Lmin = min(domain.extents)
    for a, at in enumerate(atoms):
        if at.width > Lmin / 6:
            raise ValueError(f"atom {a}: local width {at.width:g} exceeds extent/6 = {Lmin / 6:g}")
        for p in at.projectors:
            if p.cutoff > Lmin / 2:
                raise ValueError(
                    f"atom {a}: projector cutoff {p.cutoff:g} exceeds half the domain extent {Lmin / 2:g}")


def external_potential(atoms, domain: Domain, axes) -> np.ndarray:
    """Sum of Gaussian wells ``-A exp(-|x-R|^2 / 2 sigma^2)`` on a tensor grid.

    ``axes`` are the three 1D coordinate arrays of the grid.  Each well is
    evaluated at its minimal image plus one shell of periodic images.
    """
    out = np.zeros(tuple(len(x) for x in axes))
    for at in atoms:
        g = [_gauss_1d_images(np.asarray(axes[a]), at.position[a], domain.extents[a], at.width)
             for a in range(3)]
        out -= at.depth * g[0][:, None, None] * g[1][None, :, None] * g[2][None, None, :]
    return out


def projector_shape(spec: ProjectorSpec, center, domain: Domain, axes) -> np.ndarray:
    """Unnormalized projector on a tensor grid, zero at and beyond the cutoff."""
    L = np.asarray(domain.extents)
    d = []
    for a in range(3):
        da = np.asarray(axes[a], float) - center[a]
        d.append(da - L[a] * np.round(da / L[a]))
    dx, dy, dz = d[0][:, None, None], d[1][None, :, None], d[2][None, None, :]
    r2 = dx ** 2 + dy ** 2 + dz ** 2
    rc2 = spec.cutoff ** 2
    taper = np.where(r2 < rc2, (1.0 - r2 / rc2) ** 3, 0.0)
    val = np.exp(-r2 / (2 * spec.width ** 2)) * taper
    if spec.form != "s":
        val = val * {"px": dx, "py": dy, "pz": dz}[spec.form]
    return val


def make_projectors(atoms, domain: Domain, grid: UniformGrid) -> list:
    """Projectors normalized to unit discrete norm on the global grid."""
    axes = [grid.axis_nodes(a) for a in range(3)]
    out = []
    for a, at in enumerate(atoms):
        for spec in at.projectors:
            raw = projector_shape(spec, at.position, domain, axes)
            nrm = np.sqrt(np.sum(raw ** 2) * grid.dv)
            out.append(Projector(a, at.position, spec, 1.0 / nrm))
    return out


def projector_fields(projector: Projector, domain: Domain, axes) -> np.ndarray:
    """Sample a normalized projector on any tensor grid given its 1D axes."""
    return projector.norm * projector_shape(projector.spec, projector.center, domain, axes)


# ---------------------------------------------------------------------------
# Hartree and exchange-correlation
# ---------------------------------------------------------------------------

def hartree_potential(rho: np.ndarray, grid: UniformGrid) -> np.ndarray:
    """Periodic solution of ``-lap V = 4 pi (rho - mean rho)`` with zero mean."""
    rk = np.fft.rfftn(rho)
    k2 = grid.ksquared()
    k2[0, 0, 0] = 1.0
    vk = 4 * np.pi * rk / k2
    vk[0, 0, 0] = 0.0
    return np.fft.irfftn(vk, s=grid.shape, axes=(0, 1, 2))


# Perdew-Zunger fit of the Ceperley-Alder correlation energy (unpolarized)
PZ_GAMMA, PZ_BETA1, PZ_BETA2 = -0.1423, 1.0529, 0.3334
PZ_A, PZ_B, PZ_C, PZ_D = 0.0311, -0.048, 0.0020, -0.0116
EX_PREFACTOR = -0.75 * (3.0 / np.pi) ** (1.0 / 3.0)


def lda_pz(rho):
    """Pointwise LDA energy density per electron and potential.

    Returns ``(eps_xc, v_xc)`` with ``v_xc = d(rho eps_xc)/d rho``; both are
    zero where ``rho <= 0``.
    """
    rho = np.asarray(rho, float)
    eps = np.zeros_like(rho)
    v = np.zeros_like(rho)
    m = rho > 1e-30
    r = rho[m]
    ex = EX_PREFACTOR * np.cbrt(r)
    vx = 4.0 / 3.0 * ex

    rs = np.cbrt(3.0 / (4.0 * np.pi * r))
    ec = np.empty_like(r)
    vc = np.empty_like(r)
    hi = rs >= 1.0
    s = np.sqrt(rs[hi])
    den = 1.0 + PZ_BETA1 * s + PZ_BETA2 * rs[hi]
    ec[hi] = PZ_GAMMA / den
    vc[hi] = ec[hi] * (1.0 + 7.0 / 6.0 * PZ_BETA1 * s + 4.0 / 3.0 * PZ_BETA2 * rs[hi]) / den
    lo = ~hi
    x, lnx = rs[lo], np.log(rs[lo])
    ec[lo] = PZ_A * lnx + PZ_B + PZ_C * x * lnx + PZ_D * x
    vc[lo] = PZ_A * lnx + (PZ_B - PZ_A / 3.0) + 2.0 / 3.0 * PZ_C * x * lnx + (2.0 * PZ_D - PZ_C) / 3.0 * x

    eps[m] = ex + ec
    v[m] = vx + vc
    return eps, v


def xc_lda(rho: np.ndarray, dv: float):
    """LDA fields and integrals on a uniform grid.

    Negative density values are clamped to zero first.

    Returns
    -------
    eps_xc, v_xc : ndarray
    e_xc : float
        ``int eps_xc rho``
    e_xc_dc : float
        ``int v_xc rho``
    """
    rho = np.maximum(rho, 0.0)
    eps, v = lda_pz(rho)
    return eps, v, float(np.sum(eps * rho) * dv), float(np.sum(v * rho) * dv)


# ---------------------------------------------------------------------------
# system, effective potential, energies
# ---------------------------------------------------------------------------

@dataclass
class System:
    """Atoms, pseudopotential and global grid with cached local potential."""

    domain: Domain
    grid: UniformGrid
    atoms: list
    n_electrons: float
    hartree: bool = True
    xc: bool = True
    vext: np.ndarray = field(default=None, repr=False)
    projectors: list = field(default=None, repr=False)
    projector_values: list = field(default=None, repr=False)

    def __post_init__(self):
        check_widths(self.atoms, self.domain)
        axes = [self.grid.axis_nodes(a) for a in range(3)]
        if self.vext is None:
            self.vext = external_potential(self.atoms, self.domain, axes)
        if self.projectors is None:
            self.projectors = make_projectors(self.atoms, self.domain, self.grid)
        self.projector_values = [projector_fields(p, self.domain, axes) for p in self.projectors]

    @property
    def interacting(self) -> bool:
        return self.hartree or self.xc

    @property
    def positions(self) -> np.ndarray:
        return np.array([a.position for a in self.atoms]).reshape(-1, 3)


@dataclass
class EffectivePotential:
    total: np.ndarray
    external: np.ndarray
    hartree: np.ndarray
    xc: np.ndarray
    clamped: float = 0.0

    def check(self) -> float:
        return float(np.max(np.abs(self.total - (self.external + self.hartree + self.xc))))


def effective_potential(rho: np.ndarray, system: System) -> EffectivePotential:
    grid = system.grid
    vh = hartree_potential(rho, grid) if system.hartree else np.zeros(grid.shape)
    clamped = float(-np.sum(np.minimum(rho, 0.0)) * grid.dv)
    if system.xc:
        _, vxc, _, _ = xc_lda(rho, grid.dv)
    else:
        vxc = np.zeros(grid.shape)
    return EffectivePotential(system.vext + vh + vxc, system.vext, vh, vxc, clamped)


@dataclass
class EnergyReport:
    band: float
    hartree_dc: float
    exc: float
    xc_dc: float
    total: float

    def identity_residual(self) -> float:
        return abs(self.total - (self.band - self.hartree_dc + self.exc - self.xc_dc))


def total_energy(eigenvalues, occupations, rho: np.ndarray, system: System) -> EnergyReport:
    """Total energy from the band sum and double-counting corrections.

    ``rho`` is the density that generated the Hamiltonian whose eigenvalues
    are given; this makes the error second order in the SCF residual.
    """
    f = np.asarray(occupations, float)
    e = np.asarray(eigenvalues, float)[: len(f)]
    if abs(f.sum() - system.n_electrons) > 1e-8:
        raise ValueError(f"occupations sum to {f.sum():.12g}, expected {system.n_electrons}")
    dv = system.grid.dv
    band = float(np.dot(f, e))
    ehdc = 0.5 * float(np.sum(hartree_potential(rho, system.grid) * rho) * dv) if system.hartree else 0.0
    if system.xc:
        _, _, exc, exdc = xc_lda(rho, dv)
    else:
        exc = exdc = 0.0
    return EnergyReport(band, ehdc, exc, exdc, band - ehdc + exc - exdc)


def kinetic_energies(orbitals: np.ndarray, grid: UniformGrid) -> np.ndarray:
    """``1/2 int |grad psi|^2`` per orbital, computed in Fourier space."""
    ck = np.fft.rfftn(orbitals, axes=(-3, -2, -1))
    k2 = grid.ksquared()
    wt = np.full(k2.shape, 2.0)
    wt[..., 0] = 1.0
    if grid.shape[2] % 2 == 0:
        wt[..., -1] = 1.0
    s = np.sum(wt * k2 * np.abs(ck) ** 2, axis=(-3, -2, -1))
    return 0.5 * s * grid.dv / grid.size


def kohn_sham_functional(orbitals: np.ndarray, occupations, system: System) -> float:
    """Direct evaluation of the energy functional at the given orbitals.

    Independent of eigenvalues; orbitals are normalized to
    ``sum |psi|^2 dv = 1``.
    """
    f = np.asarray(occupations, float)
    psi = orbitals[: len(f)]
    dv = system.grid.dv
    rho = np.einsum("i,ixyz->xyz", f, psi ** 2)
    ekin = float(np.dot(f, kinetic_energies(psi, system.grid)))
    eloc = float(np.sum(system.vext * rho) * dv)
    enl = 0.0
    for p, b in zip(system.projectors, system.projector_values):
        ov = np.tensordot(psi, b, axes=3) * dv
        enl += p.weight * float(np.dot(f, ov ** 2))
    eh = 0.5 * float(np.sum(hartree_potential(rho, system.grid) * rho) * dv) if system.hartree else 0.0
    exc = xc_lda(rho, dv)[2] if system.xc else 0.0
    return ekin + eloc + enl + eh + exc


def initial_density(system: System, width: float = None) -> np.ndarray:
    """Superposition of atom-centred Gaussians scaled to hold ``n_electrons``."""
    grid = system.grid
    axes = [grid.axis_nodes(a) for a in range(3)]
    rho = np.zeros(grid.shape)
    for at in system.atoms:
        w = width or 1.5 * at.width
        w = min(w, min(system.domain.extents) / 6)
        g = [_gauss_1d_images(axes[a], at.position[a], system.domain.extents[a], w) for a in range(3)]
        rho += g[0][:, None, None] * g[1][None, :, None] * g[2][None, None, :]
    if not system.atoms:
        rho[:] = 1.0
    return rho * system.n_electrons / (rho.sum() * grid.dv)
