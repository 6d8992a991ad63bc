"""Exact manifold-by-manifold dynamics from product coherent (or Fock) fields.

Every bare product state |atom; n> lies in a single two-dimensional manifold,
so its evolution is a Rabi oscillation with transfer probability

    T(t) = M^2 sin^2(Q t) / Q^2,

where M^2 = g_eff^2 prod(n_i + 1) for an excited atom and g_eff^2 prod(n_i)
for a ground atom (the ground state with any empty mode is stationary).
Observables of the mixture over photon numbers only need, per distinct value
of that integer product, the total probability and a few weighted moments.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import special, stats

from mmjc.core import ManifoldIndex, ModelParams, coupling_element, detuning
from mmjc.spectrum import manifold_eigensystem

log = logging.getLogger(__name__)

GROUND, EXCITED = "ground", "excited"
EXACT_TERM_LIMIT = 10**7


class TruncationWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class CoherentField:
    """Product of single-mode coherent states with Poisson photon statistics.

    Each mode is truncated at ``ceil(nbar + cutoff_sigmas * sqrt(nbar + 1))``,
    extended if needed until the discarded Poisson tail is below
    ``tail_mass_bound``. Explicit ``cutoffs`` override the policy.
    """

    nbar: tuple[float, ...]
    cutoff_sigmas: float = 6.0
    tail_mass_bound: float = 1e-10
    cutoffs: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "nbar", tuple(float(x) for x in self.nbar))
        if any(not (x >= 0) or not math.isfinite(x) for x in self.nbar):
            raise ValueError(f"mean photon numbers must be finite and >= 0, got {self.nbar}")
        if self.cutoffs is not None:
            cut = tuple(int(c) for c in self.cutoffs)
            if len(cut) != len(self.nbar) or any(c < 0 for c in cut):
                raise ValueError("need one non-negative cutoff per mode")
            object.__setattr__(self, "cutoffs", cut)

    @property
    def n_modes(self) -> int:
        return len(self.nbar)

    def mode_cutoffs(self) -> tuple[int, ...]:
        if self.cutoffs is not None:
            return self.cutoffs
        out = []
        for nb in self.nbar:
            c = math.ceil(nb + self.cutoff_sigmas * math.sqrt(nb + 1.0))
            while stats.poisson.sf(c, nb) > self.tail_mass_bound:
                c += 1
            out.append(c)
        return tuple(out)

    def mode_distribution(self, i: int) -> np.ndarray:
        """|R_n|^2 of mode i for n = 0..cutoff, not renormalised."""
        nb = self.nbar[i]
        n = np.arange(self.mode_cutoffs()[i] + 1)
        if nb == 0.0:
            return (n == 0).astype(float)
        return np.exp(-nb + n * math.log(nb) - special.gammaln(n + 1))

    def amplitudes(self, i: int) -> np.ndarray:
        """Real, non-negative R_n of mode i."""
        return np.sqrt(self.mode_distribution(i))

    def retained_mass(self) -> float:
        return float(np.prod([self.mode_distribution(i).sum() for i in range(self.n_modes)]))

    def box_size(self) -> int:
        return math.prod(c + 1 for c in self.mode_cutoffs())


@dataclass(frozen=True)
class FockField:
    """A single photon-number product state |n_1..n_n>."""

    occupations: tuple[int, ...]

    @property
    def n_modes(self) -> int:
        return len(self.occupations)


@dataclass(frozen=True)
class AtomFieldState:
    atom_init: str
    field: CoherentField | FockField

    def __post_init__(self):
        if self.atom_init not in (GROUND, EXCITED):
            raise ValueError(f"atom_init must be {GROUND!r} or {EXCITED!r}")


@dataclass(frozen=True)
class ManifoldPropagator:
    """exp(-iHt) on (|e; n>, |g; n+1>)."""

    U: np.ndarray
    K: float
    Q: float
    delta: float
    coupling: float
    t: float


def propagator(p: ModelParams, m: ManifoldIndex, t: float) -> ManifoldPropagator:
    pair = manifold_eigensystem(p, m)
    d, q, big_m = detuning(p), pair.Q, pair.coupling
    c, s = math.cos(q * t), math.sin(q * t)
    u = np.array([[c - 1j * (0.5 * d / q) * s, -1j * (big_m / q) * s],
                  [-1j * (big_m / q) * s, c + 1j * (0.5 * d / q) * s]])
    return ManifoldPropagator(np.exp(-1j * pair.K * t) * u, pair.K, q, d, big_m, t)


class _Buckets(NamedTuple):
    """Photon-number mixture grouped by the integer coupling product."""

    key: np.ndarray  # prod(n_i + 1) or prod(n_i), ascending
    weight: np.ndarray  # total probability per key
    corr_shift: np.ndarray  # sum of prob * (prod after transfer - prod before)
    mass: float
    mean_n: np.ndarray  # static <n_i> over the truncated box
    mean_prod: float  # static <prod n_i>


def _field_buckets(field, atom_init: str) -> _Buckets:
    if isinstance(field, FockField):
        occ = np.array(field.occupations, dtype=np.int64)
        step = 1 if atom_init == EXCITED else -1
        key = int(np.prod(occ + 1)) if atom_init == EXCITED else int(np.prod(occ))
        before = int(np.prod(occ))
        after = int(np.prod(occ + step)) if key else before
        keys = np.array([key] if key else [], dtype=np.int64)
        return _Buckets(keys, np.ones(len(keys)), np.full(len(keys), float(after - before)), 1.0,
                        occ.astype(float), float(before))
    if field.box_size() > EXACT_TERM_LIMIT:
        raise ValueError(f"box of {field.box_size()} terms exceeds the exact-summation limit; "
                         "use sampler=\"monte_carlo\"")
    key = np.ones(1, dtype=np.int64)
    before = np.ones(1, dtype=np.int64)
    after = np.ones(1, dtype=np.int64)
    prob = np.ones(1)
    mean_n = []
    for i in range(field.n_modes):
        pm = field.mode_distribution(i)
        n = np.arange(len(pm), dtype=np.int64)
        mass_i = pm.sum()
        mean_n.append(float(np.dot(n, pm)))
        if atom_init == EXCITED:
            k_i, a_i = n + 1, n + 1
        else:
            k_i, a_i = n, n - 1
        key = np.multiply.outer(key, k_i).ravel()
        before = np.multiply.outer(before, n).ravel()
        after = np.multiply.outer(after, a_i).ravel()
        prob = np.multiply.outer(prob, pm).ravel()
        mean_n[-1] /= mass_i  # rescaled below by the full mass
    mass = float(prob.sum())
    mean_n = np.array(mean_n) * mass
    # a ground atom with some empty mode never transfers; key 0 marks it
    shift = np.where(key > 0, after - before, 0).astype(float)
    uniq, inv = np.unique(key, return_inverse=True)
    weight = np.bincount(inv, weights=prob)
    corr = np.bincount(inv, weights=prob * shift)
    mean_prod = float(np.dot(prob, before.astype(float)))
    keep = uniq > 0
    return _Buckets(uniq[keep], weight[keep], corr[keep], mass, mean_n, mean_prod)


def _sample_buckets(field: CoherentField, atom_init: str, samples: int, seed: int) -> _Buckets:
    """Buckets from photon numbers drawn from the untruncated product Poisson law."""
    rng = np.random.default_rng(seed)
    n = rng.poisson(field.nbar, size=(samples, field.n_modes)).astype(np.int64)
    before = np.prod(n, axis=1)
    if atom_init == EXCITED:
        key, after = np.prod(n + 1, axis=1), np.prod(n + 1, axis=1)
    else:
        key, after = before, np.prod(n - 1, axis=1)
    shift = np.where(key > 0, after - before, 0).astype(float)
    uniq, inv = np.unique(key, return_inverse=True)
    weight = np.bincount(inv, minlength=len(uniq)) / samples
    corr = np.bincount(inv, weights=shift, minlength=len(uniq)) / samples
    keep = uniq > 0
    return _Buckets(uniq[keep], weight[keep], corr[keep], 1.0, n.mean(axis=0), float(before.mean()))


def _check_mass(field, mass: float):
    if isinstance(field, FockField):
        return
    floor = (1.0 - field.tail_mass_bound) ** field.n_modes
    if mass < floor:
        warnings.warn(f"truncated field retains probability {mass:.12f} < {floor:.12f}", TruncationWarning)


def _rabi(p: ModelParams, key: np.ndarray):
    """(M^2 / Q^2, Q) per coupling product."""
    g2 = p.g_eff**2
    m2 = g2 * key.astype(float)
    q = np.sqrt(0.25 * detuning(p) ** 2 + m2)
    return m2 / q**2, q


def _phase_sums(freq: np.ndarray, coeffs: np.ndarray, times: np.ndarray, block: int = 512) -> np.ndarray:
    """S[t, r] = sum_k coeffs[k, r] exp(i freq_k t).

    On a uniform grid the phases of one block are reused for every block by
    a single complex rotation, so only ``block`` rows of exponentials are
    ever evaluated.
    """
    out = np.empty((len(times), coeffs.shape[1]), dtype=complex)
    if len(times) == 0:
        return out
    steps = np.diff(times)
    uniform = len(times) > 2 * block and np.allclose(steps, steps[0], rtol=0, atol=1e-13 * max(1.0, abs(times[-1])))
    if uniform:
        dt = steps[0]
        base = np.exp(1j * np.multiply.outer(np.arange(block) * dt, freq))
        for lo in range(0, len(times), block):
            hi = min(lo + block, len(times))
            shift = np.exp(1j * freq * (times[0] + lo * dt))
            out[lo:hi] = (base[:hi - lo] * shift) @ coeffs
    else:
        for lo in range(0, len(times), block):
            out[lo:lo + block] = np.exp(1j * np.multiply.outer(times[lo:lo + block], freq)) @ coeffs
    return out


def _transfer(p: ModelParams, b: _Buckets, times: np.ndarray, second_moment: bool = False):
    """sum w T, sum c T, the P1 envelope and (optionally) sum w T^2 at every time.

    Uses sin^2 x = (1 - cos 2x) / 2 and sin^4 x = (3 - 4 cos 2x + cos 4x) / 8.
    """
    amp, q = _rabi(p, b.key)
    cols = np.stack([b.weight * amp, b.corr_shift * amp], axis=1)
    s2 = _phase_sums(2.0 * q, cols, times)
    tw = 0.5 * (cols[:, 0].sum() - s2[:, 0].real)
    tc = 0.5 * (cols[:, 1].sum() - s2[:, 1].real)
    envelope = 0.5 * np.abs(s2[:, 0])
    tw2 = None
    if second_moment:
        wa2 = (b.weight * amp**2)[:, None]
        s4 = _phase_sums(4.0 * q, wa2, times)[:, 0]
        tw2 = (3.0 * wa2.sum() - 4.0 * _phase_sums(2.0 * q, wa2, times)[:, 0].real + s4.real) / 8.0
    return tw, tc, envelope, tw2


class DynamicsTable(NamedTuple):
    gt: np.ndarray
    P1: np.ndarray
    n_mean: np.ndarray  # shape (len(gt), n_modes)
    g_n: np.ndarray
    envelope: np.ndarray  # half-amplitude of the P1 oscillation about its local mean
    retained_mass: float
    stderr: np.ndarray | None  # Monte Carlo standard error of P1, None when exact


def dynamics_sweep(p: ModelParams, s: AtomFieldState, t_grid: Sequence[float], sampler: str = "auto",
                   samples: int = 10**6, seed: int = 0) -> DynamicsTable:
    """P1, mode occupations and the n-mode coherence on a grid of g_eff * t.

    ``sampler`` is ``"exact"`` (sum over the truncated photon-number box),
    ``"monte_carlo"`` (``samples`` draws, seeded) or ``"auto"``, which sums
    exactly unless the box exceeds ``EXACT_TERM_LIMIT`` terms.
    """
    gt = np.asarray(t_grid, dtype=float)
    if gt.ndim != 1 or gt.size == 0:
        raise ValueError("empty sweep: time grid has no points")
    if np.any(np.diff(gt) < 0):
        raise ValueError("time grid must be monotone non-decreasing")
    if s.field.n_modes != p.n_modes:
        raise ValueError("field and model disagree on the number of modes")
    if sampler not in ("auto", "exact", "monte_carlo"):
        raise ValueError(f"unknown sampler {sampler!r}")
    mc = isinstance(s.field, CoherentField) and (
        sampler == "monte_carlo" or (sampler == "auto" and s.field.box_size() > EXACT_TERM_LIMIT))
    if mc:
        log.info("Monte Carlo summation with %d samples (seed %d)", samples, seed)
        b = _sample_buckets(s.field, s.atom_init, samples, seed)
    else:
        b = _field_buckets(s.field, s.atom_init)
        _check_mass(s.field, b.mass)
    times = gt / p.g_eff
    tw, tc, envelope, tw2 = _transfer(p, b, times, second_moment=mc)
    stderr = np.sqrt(np.maximum(tw2 - tw**2, 0.0) / (samples - 1)) if mc else None
    sign = 1.0 if s.atom_init == EXCITED else -1.0
    p1 = b.mass - tw if s.atom_init == EXCITED else tw
    n_mean = b.mean_n[None, :] + sign * tw[:, None]
    prod_mean = b.mean_prod + tc
    with np.errstate(divide="ignore", invalid="ignore"):
        g_n = prod_mean / np.prod(n_mean, axis=1)
    return DynamicsTable(gt, p1, n_mean, g_n, envelope, b.mass, stderr)


def excited_probability(p: ModelParams, s: AtomFieldState, t: float) -> float:
    """Probability that the atom is excited at time t (t in units of 1/energy)."""
    return float(dynamics_sweep(p, s, [t * p.g_eff]).P1[0])


def mode_occupation(p: ModelParams, s: AtomFieldState, i: int, t: float) -> float:
    if not 0 <= i < p.n_modes:
        raise IndexError(f"mode {i} out of range")
    return float(dynamics_sweep(p, s, [t * p.g_eff]).n_mean[0, i])


def coherence_n(p: ModelParams, s: AtomFieldState, t: float) -> float:
    """<prod n_i> / prod <n_i> at zero delay; nan if some <n_i> vanishes."""
    return float(dynamics_sweep(p, s, [t * p.g_eff]).g_n[0])


class MonteCarloEstimate(NamedTuple):
    mean: float
    stderr: float


def monte_carlo_p1(p: ModelParams, s: AtomFieldState, t: float, samples: int = 10**6,
                   seed: int = 0) -> MonteCarloEstimate:
    """P1 at time t from ``samples`` product-Poisson draws."""
    if not isinstance(s.field, CoherentField):
        raise TypeError("Monte Carlo sampling needs a coherent field")
    tab = dynamics_sweep(p, s, [t * p.g_eff], sampler="monte_carlo", samples=samples, seed=seed)
    return MonteCarloEstimate(float(tab.P1[0]), float(tab.stderr[0]))


def fock_transfer_coupling(p: ModelParams, occupations: Sequence[int], atom_init: str) -> float:
    """Rabi coupling M felt by |atom_init; occupations>; 0 if the state is stationary."""
    occ = tuple(occupations)
    if atom_init == EXCITED:
        return coupling_element(p, ManifoldIndex(occ))
    if min(occ) == 0:
        return 0.0
    return coupling_element(p, ManifoldIndex(tuple(n - 1 for n in occ)))
