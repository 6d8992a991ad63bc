"""Closed-form dressed states of one excitation manifold.

A manifold with occupations n = (n_1..n_n) is spanned by |e; n> and |g; n+1>.
In that ordered basis the block is

    [[K + D/2, M], [M, K - D/2]],   M = g_eff * sqrt(prod(n_i + 1)),

with D the detuning, so lambda_pm = K +- Q and Q = sqrt(D^2/4 + M^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from mmjc.core import ManifoldIndex, ModelParams, coupling_element, detuning


@dataclass(frozen=True)
class DressedPair:
    """Eigenvalues and eigenvector coefficients of one manifold.

    ``A_*`` weighs the excited bare state, ``B_*`` the ground bare state.
    Signs follow the closed form (B > 0, A_plus < 0 < A_minus); as a vector in
    the ``(|e; n>, |g; n+1>)`` basis the dressed state is ``(-A, B)``.
    """

    lambda_plus: float
    lambda_minus: float
    K: float
    Q: float
    A_plus: float
    A_minus: float
    B_plus: float
    B_minus: float
    coupling: float

    def vector(self, branch: int) -> np.ndarray:
        """Dressed state of branch +1/-1 in the (excited, ground) bare basis."""
        if branch > 0:
            return np.array([-self.A_plus, self.B_plus])
        return np.array([-self.A_minus, self.B_minus])

    @property
    def splitting(self) -> float:
        return 2.0 * self.Q


def manifold_eigensystem(p: ModelParams, m: ManifoldIndex) -> DressedPair:
    m.check(p)
    delta = detuning(p)
    big_m = coupling_element(p, m)
    K = 0.5 * (p.omega_atom - delta) + math.fsum(w * n for w, n in zip(p.omega_modes, m.occupations))
    Q = math.hypot(0.5 * delta, big_m)
    # Q +- D/2 without cancellation; their product is M^2
    if delta >= 0:
        q_up = Q + 0.5 * delta
        q_dn = big_m * big_m / q_up
    else:
        q_dn = Q - 0.5 * delta
        q_up = big_m * big_m / q_dn
    return DressedPair(
        lambda_plus=K + Q,
        lambda_minus=K - Q,
        K=K,
        Q=Q,
        A_plus=-math.sqrt(q_up / (2.0 * Q)),
        A_minus=math.sqrt(q_dn / (2.0 * Q)),
        B_plus=big_m / math.sqrt(2.0 * Q * q_up),
        B_minus=big_m / math.sqrt(2.0 * Q * q_dn),
        coupling=big_m,
    )


class SpectrumRow(NamedTuple):
    delta_over_g: float
    occupations: tuple[int, ...]
    E_plus: float
    E_minus: float


def eigenspectrum_sweep(p_template: ModelParams, manifolds: Sequence[ManifoldIndex],
                        delta_over_g_grid: Iterable[float]) -> list[SpectrumRow]:
    """Dressed energies with the optical energy removed, in units of g_eff.

    The atomic frequency of ``p_template`` is moved along the grid; mode
    frequencies and couplings are kept. Each branch is reported as
    ``(lambda - sum(Omega_i n_i) - (omega - Delta)/2) / g_eff`` so the pair sits
    symmetrically about zero. Rows are ordered by manifold, then grid point.
    """
    grid = [float(x) for x in delta_over_g_grid]
    if not grid:
        raise ValueError("empty sweep: delta_over_g grid has no points")
    if not manifolds:
        raise ValueError("empty sweep: no manifolds given")
    g = p_template.g_eff
    rows = []
    for m in manifolds:
        m.check(p_template)
        for x in grid:
            p = p_template.with_detuning(x * g)
            pair = manifold_eigensystem(p, m)
            offset = pair.K
            rows.append(SpectrumRow(x, m.occupations, (pair.lambda_plus - offset) / g,
                                    (pair.lambda_minus - offset) / g))
    return rows
