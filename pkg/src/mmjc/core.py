"""Shared model types. Units: hbar = 1, every energy in the same (arbitrary) unit."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence


class ParameterError(ValueError):
    """Raised for physically invalid model parameters."""


@dataclass(frozen=True)
class ModelParams:
    """Two-level atom coupled to ``n_modes`` cavity modes.

    ``g`` and ``omega_modes`` hold one entry per mode; ``omega_atom`` is the
    atomic transition frequency. The detuning is always derived, never stored.
    """

    n_modes: int
    g: tuple[float, ...]
    omega_modes: tuple[float, ...]
    omega_atom: float

    def __post_init__(self):
        object.__setattr__(self, "g", tuple(float(x) for x in self.g))
        object.__setattr__(self, "omega_modes", tuple(float(x) for x in self.omega_modes))
        object.__setattr__(self, "omega_atom", float(self.omega_atom))

    @classmethod
    def equal(cls, n_modes: int, g: float, omega_mode: float, delta: float) -> "ModelParams":
        """Equal couplings and mode frequencies, atom placed at detuning ``delta``."""
        return validate_params(cls(
            n_modes, (g,) * n_modes, (omega_mode,) * n_modes, n_modes * omega_mode + delta))

    @property
    def delta(self) -> float:
        return detuning(self)

    @property
    def g_eff(self) -> float:
        return effective_coupling(self)

    def with_detuning(self, delta: float) -> "ModelParams":
        """Same modes and couplings, atomic frequency moved to give detuning ``delta``."""
        return validate_params(ModelParams(
            self.n_modes, self.g, self.omega_modes, sum(self.omega_modes) + delta))

    def scaled(self, s: float) -> "ModelParams":
        return ModelParams(self.n_modes, tuple(s * x for x in self.g),
                           tuple(s * x for x in self.omega_modes), s * self.omega_atom)


@dataclass(frozen=True)
class ManifoldIndex:
    """Occupations (n_1..n_n) labelling the manifold {|e; n>, |g; n+1>}."""

    occupations: tuple[int, ...]

    def __post_init__(self):
        occ = tuple(int(x) for x in self.occupations)
        if any(x < 0 for x in occ):
            raise ParameterError(f"negative occupation in manifold index {occ}")
        object.__setattr__(self, "occupations", occ)

    def __len__(self):
        return len(self.occupations)

    def check(self, p: ModelParams) -> "ManifoldIndex":
        if len(self.occupations) != p.n_modes:
            raise ParameterError(
                f"manifold index has {len(self.occupations)} entries, model has {p.n_modes} modes")
        return self


def validate_params(p: ModelParams) -> ModelParams:
    if p.n_modes < 1:
        raise ParameterError("need at least one mode")
    if len(p.g) != p.n_modes or len(p.omega_modes) != p.n_modes:
        raise ParameterError(
            f"expected {p.n_modes} couplings and mode frequencies, "
            f"got {len(p.g)} and {len(p.omega_modes)}")
    if any(not (x > 0) or not math.isfinite(x) for x in p.g):
        raise ParameterError(f"non-positive coupling in g={p.g}")
    if any(not (x > 0) or not math.isfinite(x) for x in p.omega_modes):
        raise ParameterError(f"non-positive mode frequency in omega_modes={p.omega_modes}")
    if not (p.omega_atom > 0) or not math.isfinite(p.omega_atom):
        raise ParameterError(f"non-positive atomic frequency omega_atom={p.omega_atom}")
    return p


def detuning(p: ModelParams) -> float:
    """Atomic frequency minus the summed mode frequencies."""
    return p.omega_atom - math.fsum(p.omega_modes)


def effective_coupling(p: ModelParams) -> float:
    """Geometric mean of the per-mode couplings."""
    if len(set(p.g)) == 1:
        return p.g[0]
    return math.exp(math.fsum(math.log(x) for x in p.g) / p.n_modes)


def log_occupation_product(occupations: Sequence[int]) -> float:
    """log prod(n_i + 1), safe for occupations whose product overflows."""
    return math.fsum(math.log1p(n) for n in occupations)


def coupling_element(p: ModelParams, m: ManifoldIndex) -> float:
    """Off-diagonal element g_eff * sqrt(prod(n_i + 1)) of a manifold block."""
    prod = math.prod(n + 1 for n in m.occupations)  # exact integer
    if prod < 2**1000:
        return effective_coupling(p) * math.sqrt(prod)
    return math.exp(math.log(effective_coupling(p)) + 0.5 * log_occupation_product(m.occupations))
