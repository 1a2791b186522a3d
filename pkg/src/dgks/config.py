"""
Run configuration: YAML ingestion, defaults, validation and the supercell
generator.

The file is plain YAML with the sections below; every key is optional
unless marked.  Lengths are in bohr.

.. code-block:: yaml

    mode: compare              # global | dg | compare
    seed: 0
    workers: 1                 # overridden by DGKS_WORKERS, then by --workers
    output_dir: out

    lattice:                   # either this section or `atoms` + `domain`
      cell: [7.994, 7.994, 7.994]
      basis: [[0.25, 0.25, 0.25], [0.75, 0.75, 0.75]]   # fractional
      repeat: [1, 1, 4]
      displacement: 0.2
      seed: 1
    domain: [7.994, 7.994, 31.976]
    atoms:                     # explicit positions, optionally per-atom species
      - {position: [1.0, 2.0, 3.0], species: default}

    species:
      default:
        depth: 2.0
        width: 1.2
        projectors:
          - {sign: 1, coupling: 1.0, width: 1.0, form: s, cutoff: 3.0}
          - {sign: 1, coupling: 0.5, width: 1.0, form: pz, cutoff: 3.0}
    electrons_per_atom: 1.0    # or `electrons:` for an explicit total
    interactions: {hartree: true, xc: true}

    partition: [1, 1, 4]
    grid:
      points_per_element: [16, 16, 16]
      lgl_order: 20

    dg:
      alpha: 20.0
      buffer: [0.0, 0.0, 0.5]  # per axis, in element widths
      basis_per_atom: 10       # or basis_per_element: 24
      svd_delta: 0.0

    scf:
      tol: 1.0e-7
      max_iter: 60
      mixing: anderson         # anderson | linear
      depth: 4
      alpha_mix: 0.3
      temperature: 2000.0
      extra_states: 4
      global_inner_iters: 10
      basis_inner_iters: 3
"""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field

import numpy as np
import yaml

from .hamiltonian import FORMS, AtomSpec, ProjectorSpec


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str, line: int = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{path}: {message}" if path else f"{where}{message}")
        self.path = path
        self.line = line


DEFAULT_SPECIES = {
    "depth": 2.0,
    "width": 1.2,
    "projectors": [{"sign": 1, "coupling": 1.0, "width": 1.0, "form": "s", "cutoff": 3.0},
                   {"sign": 1, "coupling": 0.5, "width": 1.0, "form": "pz", "cutoff": 3.0}],
}


@dataclass
class Species:
    depth: float
    width: float
    projectors: tuple = ()


@dataclass
class RunConfig:
    domain: tuple
    positions: np.ndarray
    species_of: list
    species: dict
    n_electrons: float
    partition: tuple
    points_per_element: tuple
    lgl_order: int = 20
    hartree: bool = True
    xc: bool = True
    alpha: float = 20.0
    buffer: tuple = (0.0, 0.0, 0.0)
    basis_per_atom: float = None
    basis_per_element: int = None
    svd_delta: float = 0.0
    tol: float = 1e-7
    max_iter: int = 60
    mixing: str = "anderson"
    depth: int = 4
    alpha_mix: float = 0.3
    temperature: float = 2000.0
    extra_states: int = 4
    global_inner_iters: int = 10
    basis_inner_iters: int = 3
    mode: str = "compare"
    seed: int = 0
    workers: int = None
    output_dir: str = "out"
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def n_atoms(self) -> int:
        return len(self.positions)

    @property
    def n_elements(self) -> int:
        return int(np.prod(self.partition))

    @property
    def grid_shape(self) -> tuple:
        return tuple(int(c * p) for c, p in zip(self.partition, self.points_per_element))

    @property
    def element_size(self) -> np.ndarray:
        return np.asarray(self.domain) / np.asarray(self.partition)

    @property
    def buffer_au(self) -> np.ndarray:
        return np.asarray(self.buffer) * self.element_size

    @property
    def n_states(self) -> int:
        return int(np.ceil(self.n_electrons)) + self.extra_states

    def basis_counts(self) -> int:
        """Basis functions per element (the same on every element)."""
        if self.basis_per_element is not None:
            return int(self.basis_per_element)
        return max(1, int(round(self.basis_per_atom * self.n_atoms / self.n_elements)))

    def atom_specs(self) -> list:
        out = []
        for pos, name in zip(self.positions, self.species_of):
            sp = self.species[name]
            out.append(AtomSpec(pos, sp.depth, sp.width, sp.projectors))
        return out

    def replace(self, **changes) -> "RunConfig":
        new = copy.copy(self)
        for k, v in changes.items():
            if not hasattr(new, k):
                raise AttributeError(k)
            setattr(new, k, v)
        return new

    def echo(self) -> dict:
        """Resolved configuration as plain data (round-trips through JSON)."""
        d = asdict(self)
        d.pop("raw")
        d["positions"] = np.asarray(self.positions).tolist()
        d["species"] = {k: {"depth": s.depth, "width": s.width,
                            "projectors": [asdict(p) for p in s.projectors]}
                        for k, s in self.species.items()}
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d


def generate_supercell(cell, basis, repeat, amplitude: float = 0.0, seed: int = 0) -> np.ndarray:
    """Atoms of a periodic supercell with independent uniform displacements.

    Parameters
    ----------
    cell : sequence of 3 float
        Orthorhombic cell lengths.
    basis : array_like, shape (n, 3)
        Fractional coordinates of the atoms of one cell.
    repeat : sequence of 3 int
    amplitude : float
        Each Cartesian coordinate moves by a uniform draw from
        ``[-amplitude, amplitude]``.

    Returns
    -------
    ndarray, shape (n * prod(repeat), 3)
        Positions wrapped into ``[0, repeat * cell)``.
    """
    if amplitude < 0:
        raise ValueError("displacement amplitude must be nonnegative")
    cell = np.asarray(cell, float)
    basis = np.asarray(basis, float).reshape(-1, 3)
    repeat = tuple(int(r) for r in repeat)
    shifts = np.array([(i, j, k) for i in range(repeat[0]) for j in range(repeat[1])
                       for k in range(repeat[2])], float)
    pos = ((shifts[:, None, :] + basis[None]) * cell).reshape(-1, 3)
    if amplitude > 0:
        pos = pos + np.random.default_rng(seed).uniform(-amplitude, amplitude, pos.shape)
    return np.mod(pos, cell * np.asarray(repeat))


# ---------------------------------------------------------------------------
# parsing helpers
# ---------------------------------------------------------------------------

def _get(d, key, path, default=None, required=False):
    if not isinstance(d, dict):
        raise ConfigError(path, "expected a mapping")
    if key not in d:
        if required:
            raise ConfigError(f"{path}.{key}" if path else key, "missing required field")
        return default
    return d[key]


def _num(v, path, positive=False, nonneg=False, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"expected a number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(path, f"expected an integer, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(path, f"must be positive, got {v!r}")
    if nonneg and v < 0:
        raise ConfigError(path, f"must be nonnegative, got {v!r}")
    return int(v) if integer else float(v)


def _vec3(v, path, **kw):
    if not isinstance(v, (list, tuple)) or len(v) != 3:
        raise ConfigError(path, f"expected a list of 3 numbers, got {v!r}")
    return tuple(_num(x, f"{path}[{i}]", **kw) for i, x in enumerate(v))


def _choice(v, options, path):
    if v not in options:
        raise ConfigError(path, f"must be one of {list(options)}, got {v!r}")
    return v


def _species(name, d) -> Species:
    path = f"species.{name}"
    depth = _num(_get(d, "depth", path, DEFAULT_SPECIES["depth"]), f"{path}.depth", positive=True)
    width = _num(_get(d, "width", path, DEFAULT_SPECIES["width"]), f"{path}.width", positive=True)
    projs = []
    raw = _get(d, "projectors", path, DEFAULT_SPECIES["projectors"])
    if not isinstance(raw, list):
        raise ConfigError(f"{path}.projectors", "expected a list")
    for i, p in enumerate(raw):
        pp = f"{path}.projectors[{i}]"
        sign = _num(_get(p, "sign", pp, 1), f"{pp}.sign", integer=True)
        if sign not in (1, -1):
            raise ConfigError(f"{pp}.sign", f"must be +1 or -1, got {sign}")
        projs.append(ProjectorSpec(
            sign=sign,
            coupling=_num(_get(p, "coupling", pp, 1.0), f"{pp}.coupling", nonneg=True),
            width=_num(_get(p, "width", pp, 1.0), f"{pp}.width", positive=True),
            form=_choice(_get(p, "form", pp, "s"), FORMS, f"{pp}.form"),
            cutoff=_num(_get(p, "cutoff", pp, 3.5), f"{pp}.cutoff", positive=True),
        ))
    return Species(depth, width, tuple(projs))


def parse_config(data: dict) -> RunConfig:
    """Build and validate a :class:`RunConfig` from parsed YAML data."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("", "top level must be a mapping")

    species = {"default": _species("default", {})}
    for name, sd in (_get(data, "species", "", {}) or {}).items():
        species[str(name)] = _species(name, sd or {})

    lattice = _get(data, "lattice", "")
    if lattice is not None:
        cell = _vec3(_get(lattice, "cell", "lattice", required=True), "lattice.cell", positive=True)
        basis = _get(lattice, "basis", "lattice", [[0.0, 0.0, 0.0]])
        try:
            basis = np.asarray(basis, float).reshape(-1, 3)
        except (TypeError, ValueError):
            raise ConfigError("lattice.basis", "expected a list of fractional [x, y, z] triples") from None
        repeat = _vec3(_get(lattice, "repeat", "lattice", [1, 1, 1]), "lattice.repeat", positive=True,
                       integer=True)
        amp = _num(_get(lattice, "displacement", "lattice", 0.0), "lattice.displacement", nonneg=True)
        lseed = _num(_get(lattice, "seed", "lattice", 0), "lattice.seed", integer=True)
        positions = generate_supercell(cell, basis, repeat, amp, lseed)
        domain = tuple(c * r for c, r in zip(cell, repeat))
        name = _get(lattice, "species", "lattice", "default")
        species_of = [name] * len(positions)
        default_partition = repeat
        if "domain" in data:
            raise ConfigError("domain", "give either `lattice` or `domain` + `atoms`, not both")
    else:
        domain = _vec3(_get(data, "domain", "", required=True), "domain", positive=True)
        atoms = _get(data, "atoms", "", required=True)
        if not isinstance(atoms, list) or not atoms:
            raise ConfigError("atoms", "expected a nonempty list")
        positions, species_of = [], []
        for i, at in enumerate(atoms):
            if isinstance(at, dict):
                positions.append(_vec3(_get(at, "position", f"atoms[{i}]", required=True),
                                       f"atoms[{i}].position"))
                species_of.append(str(_get(at, "species", f"atoms[{i}]", "default")))
            else:
                positions.append(_vec3(at, f"atoms[{i}]"))
                species_of.append("default")
        positions = np.mod(np.array(positions, float), np.asarray(domain))
        default_partition = (1, 1, 1)
    for i, name in enumerate(species_of):
        if name not in species:
            raise ConfigError(f"atoms[{i}].species", f"unknown species {name!r}")

    if "electrons" in data:
        n_el = _num(data["electrons"], "electrons", positive=True)
    else:
        n_el = _num(_get(data, "electrons_per_atom", "", 1.0), "electrons_per_atom", positive=True) \
            * len(positions)

    inter = _get(data, "interactions", "", {}) or {}
    hartree = bool(_get(inter, "hartree", "interactions", True))
    xc = bool(_get(inter, "xc", "interactions", True))

    partition = _vec3(_get(data, "partition", "", list(default_partition)), "partition", positive=True,
                      integer=True)
    g = _get(data, "grid", "", {}) or {}
    ppe = _get(g, "points_per_element", "grid", [16, 16, 16])
    if isinstance(ppe, (int, float)) and not isinstance(ppe, bool):
        ppe = [ppe] * 3
    ppe = _vec3(ppe, "grid.points_per_element", positive=True, integer=True)
    lgl_order = _num(_get(g, "lgl_order", "grid", 20), "grid.lgl_order", integer=True)
    if lgl_order < 2:
        raise ConfigError("grid.lgl_order", f"must be >= 2, got {lgl_order}")

    dg = _get(data, "dg", "", {}) or {}
    alpha = _num(_get(dg, "alpha", "dg", 20.0), "dg.alpha", positive=True)
    buf = _get(dg, "buffer", "dg", [0.0, 0.0, 0.0])
    if isinstance(buf, (int, float)) and not isinstance(buf, bool):
        buf = [buf] * 3
    buf = _vec3(buf, "dg.buffer", nonneg=True)
    bpa = _get(dg, "basis_per_atom", "dg")
    bpe = _get(dg, "basis_per_element", "dg")
    if bpa is not None and bpe is not None:
        raise ConfigError("dg", "give basis_per_atom or basis_per_element, not both")
    if bpe is not None:
        bpe = _num(bpe, "dg.basis_per_element", positive=True, integer=True)
    else:
        bpa = _num(10 if bpa is None else bpa, "dg.basis_per_atom", positive=True)
    delta = _num(_get(dg, "svd_delta", "dg", 0.0), "dg.svd_delta", nonneg=True)

    s = _get(data, "scf", "", {}) or {}
    cfg = RunConfig(
        domain=tuple(domain), positions=positions, species_of=species_of, species=species,
        n_electrons=n_el, partition=partition, points_per_element=ppe, lgl_order=lgl_order,
        hartree=hartree, xc=xc, alpha=alpha, buffer=buf, basis_per_atom=bpa, basis_per_element=bpe,
        svd_delta=delta,
        tol=_num(_get(s, "tol", "scf", 1e-7), "scf.tol", positive=True),
        max_iter=_num(_get(s, "max_iter", "scf", 60), "scf.max_iter", positive=True, integer=True),
        mixing=_choice(_get(s, "mixing", "scf", "anderson"), ("anderson", "linear"), "scf.mixing"),
        depth=_num(_get(s, "depth", "scf", 4), "scf.depth", nonneg=True, integer=True),
        alpha_mix=_num(_get(s, "alpha_mix", "scf", 0.3), "scf.alpha_mix", nonneg=True),
        temperature=_num(_get(s, "temperature", "scf", 2000.0), "scf.temperature", nonneg=True),
        extra_states=_num(_get(s, "extra_states", "scf", 4), "scf.extra_states", nonneg=True, integer=True),
        global_inner_iters=_num(_get(s, "global_inner_iters", "scf", 10), "scf.global_inner_iters",
                                positive=True, integer=True),
        basis_inner_iters=_num(_get(s, "basis_inner_iters", "scf", 3), "scf.basis_inner_iters",
                               positive=True, integer=True),
        mode=_choice(_get(data, "mode", "", "compare"), ("global", "dg", "compare"), "mode"),
        seed=_num(_get(data, "seed", "", 0), "seed", integer=True),
        workers=None if data.get("workers") is None else _num(data["workers"], "workers", positive=True,
                                                               integer=True),
        output_dir=str(_get(data, "output_dir", "", "out")),
        raw=copy.deepcopy(data),
    )
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> RunConfig:
    """Cross-field checks; raises :class:`ConfigError` naming the field."""
    if not 0.0 <= cfg.alpha_mix < 1.0:
        raise ConfigError("scf.alpha_mix", f"must lie in [0, 1), got {cfg.alpha_mix}")
    L = np.asarray(cfg.domain)
    Lmin = L.min()
    for name, sp in cfg.species.items():
        if name not in cfg.species_of and name != "default":
            continue
        if sp.width > Lmin / 6:
            raise ConfigError(f"species.{name}.width", f"{sp.width:g} exceeds domain extent / 6 = {Lmin / 6:g}")
        for i, p in enumerate(sp.projectors):
            if p.cutoff > Lmin / 2:
                raise ConfigError(f"species.{name}.projectors[{i}].cutoff",
                                  f"{p.cutoff:g} exceeds half the smallest domain extent {Lmin / 2:g}")
    for a in range(3):
        cap = (cfg.partition[a] - 1) / 2.0
        if cfg.buffer[a] > cap + 1e-12:
            raise ConfigError("dg.buffer", f"axis {'xyz'[a]}: buffer {cfg.buffer[a]:g} element widths exceeds "
                                           f"the cap (elements - 1) / 2 = {cap:g}")
        b = cfg.buffer[a] * cfg.points_per_element[a]
        if abs(b - round(b)) > 1e-9:
            raise ConfigError("dg.buffer", f"axis {'xyz'[a]}: buffer {cfg.buffer[a]:g} is not a whole number "
                                           f"of grid spacings ({cfg.points_per_element[a]} per element)")
    if cfg.n_states > int(np.prod(cfg.grid_shape)):
        raise ConfigError("scf.extra_states", "more states requested than grid points")
    J = cfg.basis_counts()
    if J * cfg.n_elements < cfg.n_states:
        raise ConfigError("dg.basis_per_atom" if cfg.basis_per_element is None else "dg.basis_per_element",
                          f"{J} functions per element cannot hold {cfg.n_states} states")
    return cfg


def load_config(path) -> RunConfig:
    """Read and validate a YAML run configuration.

    Raises
    ------
    ConfigError
        With the line number for syntax errors and the field path for
        invalid values.
    """
    with open(path) as fh:
        text = fh.read()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError("", f"cannot parse {path}: {getattr(exc, 'problem', exc)}", line) from None
    return parse_config(data)
