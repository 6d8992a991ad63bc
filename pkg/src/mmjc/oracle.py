"""Brute-force reference computations on an explicitly truncated Hilbert space.

Everything here is dense linear algebra on the full atom x Fock-box basis and
deliberately shares no formulas with the closed-form modules.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from functools import cached_property, reduce
from typing import Sequence

import numpy as np
from scipy import stats

from mmjc.core import ModelParams

log = logging.getLogger(__name__)

MAX_DIMENSION = 100_000
GROUND, EXCITED = 0, 1


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class TruncatedSpace:
    """{ground, excited} x prod_i {o_i..o_i + N_i}; atom index is the slowest.

    ``offsets`` (default all zero) opens a window of Fock space away from the
    vacuum, enough to hold single manifolds at large occupations.
    """

    cutoffs: tuple[int, ...]
    offsets: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "cutoffs", tuple(int(c) for c in self.cutoffs))
        offs = (0,) * len(self.cutoffs) if self.offsets is None else tuple(int(o) for o in self.offsets)
        object.__setattr__(self, "offsets", offs)
        if len(offs) != len(self.cutoffs):
            raise ValueError("need one offset per mode")
        if any(c < 0 for c in self.cutoffs) or any(o < 0 for o in offs):
            raise ValueError("cutoffs and offsets must be non-negative")
        if self.dimension > MAX_DIMENSION:
            raise DimensionError(f"truncated space has dimension {self.dimension} > {MAX_DIMENSION}")

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(c + 1 for c in self.cutoffs)

    @property
    def box_size(self) -> int:
        return int(np.prod(self.dims))

    @property
    def dimension(self) -> int:
        return 2 * self.box_size

    def index(self, atom: int, occupations: Sequence[int]) -> int:
        local = tuple(n - o for n, o in zip(occupations, self.offsets))
        return atom * self.box_size + int(np.ravel_multi_index(local, self.dims))

    def label(self, index: int) -> tuple[int, tuple[int, ...]]:
        atom, rest = divmod(int(index), self.box_size)
        return atom, tuple(int(x) + o for x, o in zip(np.unravel_index(rest, self.dims), self.offsets))

    @cached_property
    def occupation_table(self) -> np.ndarray:
        """(dimension, n_modes) photon numbers of every basis state."""
        box = np.stack(np.unravel_index(np.arange(self.box_size), self.dims), axis=1) + np.array(self.offsets)
        return np.concatenate([box, box])

    @cached_property
    def atom_table(self) -> np.ndarray:
        return np.repeat([GROUND, EXCITED], self.box_size)


def _mode_ops(space: TruncatedSpace):
    """Annihilation operator of every mode, embedded in the photon box."""
    eyes = [np.eye(d) for d in space.dims]
    out = []
    for i, (d, o) in enumerate(zip(space.dims, space.offsets)):
        a = np.diag(np.sqrt(np.arange(o + 1.0, o + d)), 1)
        out.append(reduce(np.kron, eyes[:i] + [a] + eyes[i + 1:], np.eye(1)))
    return out


def _atom_ops():
    sigma_minus = np.array([[0.0, 1.0], [0.0, 0.0]])  # |g><e| with (g, e) ordering
    sigma_z = np.diag([-1.0, 1.0])
    return sigma_minus, sigma_z


def build_hamiltonian(p: ModelParams, space: TruncatedSpace) -> np.ndarray:
    """omega/2 sigma_z + sum Omega_i n_i + g_eff (prod a_i^dag sigma_- + h.c.)."""
    if len(space.cutoffs) != p.n_modes:
        raise ValueError("space and model disagree on the number of modes")
    a = _mode_ops(space)
    sm, sz = _atom_ops()
    box_eye = np.eye(space.box_size)
    # diagonal from the occupation labels: a^dag a is wrong at the bottom of an offset window
    field = np.diag(space.occupation_table[:space.box_size] @ np.asarray(p.omega_modes, dtype=float))
    a_prod = reduce(np.matmul, a)
    coupling = np.prod(p.g) ** (1.0 / p.n_modes)
    h = (0.5 * p.omega_atom * np.kron(sz, box_eye)
         + np.kron(np.eye(2), field)
         + coupling * (np.kron(sm, a_prod.T) + np.kron(sm.T, a_prod)))
    return h


def number_operator(space: TruncatedSpace, mode: int) -> np.ndarray:
    return np.diag(space.occupation_table[:, mode].astype(float))


def excited_projector(space: TruncatedSpace) -> np.ndarray:
    return np.diag((space.atom_table == EXCITED).astype(float))


def hopping_operator(space: TruncatedSpace, mode: int) -> np.ndarray:
    """a_k + a_k^dag on the full space."""
    a = _mode_ops(space)[mode]
    return np.kron(np.eye(2), a + a.T)


def excitation_operator(space: TruncatedSpace, mode: int) -> np.ndarray:
    """n_mode + sigma^+ sigma^-, conserved by the multimode coupling for every mode."""
    occ = space.occupation_table[:, mode] + (space.atom_table == EXCITED)
    return np.diag(occ.astype(float))


def commutator_norm(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a @ b - b @ a)))


class Evolver:
    """exp(-iHt) from one dense eigendecomposition of H."""

    def __init__(self, h: np.ndarray):
        if h.shape[0] > MAX_DIMENSION:
            raise DimensionError(f"dimension {h.shape[0]} > {MAX_DIMENSION}")
        self.energies, self.vectors = np.linalg.eigh(h)

    def unitary(self, t: float) -> np.ndarray:
        return (self.vectors * np.exp(-1j * self.energies * t)) @ self.vectors.conj().T

    def evolve(self, rho0: np.ndarray, t: float) -> np.ndarray:
        u = self.unitary(t)
        return u @ rho0 @ u.conj().T


def evolve_density_matrix(h: np.ndarray, rho0: np.ndarray, t: float) -> np.ndarray:
    return Evolver(h).evolve(rho0, t)


def expectation(rho: np.ndarray, op: np.ndarray) -> float:
    return float(np.real(np.trace(rho @ op)))


def matrix_exponential_propagator(h: np.ndarray, t: float) -> np.ndarray:
    """exp(-iHt) by diagonalisation; used for 2x2 manifold blocks."""
    return Evolver(h).unitary(t)


def manifold_block(p: ModelParams, occupations: Sequence[int]) -> np.ndarray:
    """2x2 block on (|e; n>, |g; n+1>), read off the Hamiltonian on the Fock window n..n+1."""
    space = TruncatedSpace((1,) * len(occupations), tuple(occupations))
    h = build_hamiltonian(p, space)
    idx = [space.index(EXCITED, occupations), space.index(GROUND, [n + 1 for n in occupations])]
    return h[np.ix_(idx, idx)]


def coherent_amplitudes(nbar: float, cutoff: int) -> np.ndarray:
    """sqrt(Poisson pmf) for photon numbers 0..cutoff (truncated, not renormalised)."""
    return np.sqrt(stats.poisson.pmf(np.arange(cutoff + 1), nbar))


def product_state(space: TruncatedSpace, atom: int, mode_amplitudes: Sequence[np.ndarray]) -> np.ndarray:
    """|atom> x prod_i |f_i> with f_i zero-padded up to the space cutoffs."""
    if any(space.offsets):
        raise ValueError("product states need a space anchored at the vacuum")
    padded = []
    for amp, d in zip(mode_amplitudes, space.dims):
        if len(amp) > d:
            raise ValueError("field amplitudes extend beyond the space cutoff")
        v = np.zeros(d)
        v[:len(amp)] = amp
        padded.append(v)
    field = reduce(np.kron, padded, np.ones(1))
    atom_vec = np.zeros(2)
    atom_vec[atom] = 1.0
    return np.kron(atom_vec, field)


def spectator_sector(space: TruncatedSpace, hopping_mode: int, spectator_excitations: Sequence[int]) -> np.ndarray:
    """Basis indices with n_j + sigma^+sigma^- = S_j fixed for every j != hopping_mode."""
    occ = space.occupation_table
    exc = (space.atom_table == EXCITED).astype(int)
    keep = np.ones(space.dimension, dtype=bool)
    others = [j for j in range(len(space.cutoffs)) if j != hopping_mode]
    for j, s in zip(others, spectator_excitations):
        keep &= (occ[:, j] + exc) == s
    return np.flatnonzero(keep)


def mean_field_hamiltonian(p: ModelParams, space: TruncatedSpace, hopping_mode: int,
                           psi: float, mu: float, z: int, kappa: float) -> np.ndarray:
    """Single-site decoupled Hamiltonian in unscaled units.

    The chemical potential couples to the hopping mode's conserved excitation
    number; sum_i n_i + sigma^+ sigma^- is not conserved once n_modes > 1.
    """
    zk = z * kappa
    return (build_hamiltonian(p, space)
            - zk * psi * hopping_operator(space, hopping_mode)
            + zk * psi * psi * np.eye(space.dimension)
            - mu * excitation_operator(space, hopping_mode))


def finite_difference_a2(sp, p: ModelParams, m_k: int, mu_bar: float, psi_step: float = 1e-3,
                         extra_quanta: int = 10) -> float:
    """(E(psi) - E(0)) / (z kappa psi^2) from exact ground energies.

    ``sp`` is a ``ScaledPhaseParams``; the spectator sector it describes is
    diagonalised with the hopping mode truncated at ``m_k + extra_quanta``.
    """
    if not 1e-4 <= psi_step <= 1e-2:
        raise ValueError("psi_step must lie in [1e-4, 1e-2]")
    k = sp.hopping_mode
    spect = sp.spectator_excitations(p.n_modes)
    cutoffs = []
    it = iter(spect)
    for j in range(p.n_modes):
        cutoffs.append(m_k + extra_quanta if j == k else next(it))
    space = TruncatedSpace(tuple(cutoffs))
    sector = spectator_sector(space, k, spect)
    zk = sp.z * sp.kappa
    energies = []
    for psi in (0.0, psi_step):
        h = mean_field_hamiltonian(p, space, k, psi, mu_bar * zk, sp.z, sp.kappa)[np.ix_(sector, sector)]
        e = np.linalg.eigvalsh(h / zk)
        if e[1] - e[0] < 1e-10:
            warnings.warn(f"near-degenerate mean-field ground state (gap {e[1] - e[0]:.3e})", RuntimeWarning)
        energies.append(e[0])
    return (energies[1] - energies[0]) / psi_step**2


def sector_ground_filling(sp, p: ModelParams, mu_bar: float, max_quanta: int = 40) -> int:
    """Hopping-mode quasi-excitation number of the psi = 0 ground state."""
    k = sp.hopping_mode
    spect = sp.spectator_excitations(p.n_modes)
    it = iter(spect)
    cutoffs = [max_quanta if j == k else next(it) for j in range(p.n_modes)]
    space = TruncatedSpace(tuple(cutoffs))
    sector = spectator_sector(space, k, spect)
    zk = sp.z * sp.kappa
    h = mean_field_hamiltonian(p, space, k, 0.0, mu_bar * zk, sp.z, sp.kappa)[np.ix_(sector, sector)]
    e, v = np.linalg.eigh(h)
    ground = sector[np.argmax(np.abs(v[:, 0]))]
    atom, occ = space.label(ground)
    return occ[k] + atom
