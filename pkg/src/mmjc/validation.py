"""Cross-validation of every closed-form result against the brute-force oracle.

Each check draws random instances from a seeded generator and reports the
largest deviation it saw next to its tolerance.
"""

from __future__ import annotations

import inspect
import math
import warnings
from typing import Callable, NamedTuple

import numpy as np
from scipy import linalg

from mmjc import meanfield as mf
from mmjc import oracle
from mmjc.core import ManifoldIndex, ModelParams
from mmjc.dynamics import EXCITED, GROUND, AtomFieldState, CoherentField, dynamics_sweep, propagator
from mmjc.spectrum import manifold_eigensystem


class CheckResult(NamedTuple):
    name: str
    max_deviation: float
    tolerance: float
    cases: int

    @property
    def passed(self) -> bool:
        return bool(self.max_deviation < self.tolerance)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status}  {self.name}: max deviation {self.max_deviation:.3e} "
                f"(tolerance {self.tolerance:.1e}, {self.cases} cases)")


def _log_uniform(rng, lo, hi, size=None):
    return np.exp(rng.uniform(math.log(lo), math.log(hi), size))


def random_instance(rng: np.random.Generator, max_occupation: int = 20,
                    lo: float = 0.1, hi: float = 100.0) -> tuple[ModelParams, ManifoldIndex]:
    n = int(rng.integers(1, 5))
    p = ModelParams(n, tuple(_log_uniform(rng, lo, hi, n)), tuple(_log_uniform(rng, lo, hi, n)),
                    float(_log_uniform(rng, lo, hi)))
    return p, ManifoldIndex(tuple(int(x) for x in rng.integers(0, max_occupation + 1, n)))


def check_eigenvalues(cases: int = 500, seed: int = 1, tol: float = 1e-10) -> CheckResult:
    """Closed-form lambda_pm against dense diagonalisation of the oracle's manifold block.

    Errors are relative to the block's spectral radius.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        p, m = random_instance(rng)
        ref = np.linalg.eigvalsh(oracle.manifold_block(p, m.occupations))
        d = manifold_eigensystem(p, m)
        scale = np.max(np.abs(ref))
        worst = max(worst, abs(d.lambda_minus - ref[0]) / scale, abs(d.lambda_plus - ref[1]) / scale)
    return CheckResult("eigenvalues vs dense manifold block", worst, tol, cases)


def check_dressed_algebra(cases: int = 500, seed: int = 1, tol: float = 1e-12) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        d = manifold_eigensystem(*random_instance(rng))
        worst = max(worst, abs(d.A_plus**2 + d.B_plus**2 - 1), abs(d.A_minus**2 + d.B_minus**2 - 1),
                    abs(d.A_plus * d.A_minus + d.B_plus * d.B_minus))
    return CheckResult("dressed-state normalisation and orthogonality", worst, tol, cases)


def _random_time(rng, p):
    return float(rng.choice([-1.0, 1.0]) * _log_uniform(rng, 1e-3, 10.0) / p.g_eff)


def check_propagator_unitarity(cases: int = 500, seed: int = 2, tol: float = 1e-12) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    eye = np.eye(2)
    for _ in range(cases):
        p, m = random_instance(rng)
        t = _random_time(rng, p)
        u = propagator(p, m, t).U
        back = propagator(p, m, -t).U
        worst = max(worst, np.max(np.abs(u.conj().T @ u - eye)), np.max(np.abs(u @ back - eye)))
    return CheckResult("propagator unitarity and time reversal", worst, tol, cases)


def check_propagator_expm(cases: int = 500, seed: int = 2, tol: float = 1e-10) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        p, m = random_instance(rng)
        t = _random_time(rng, p)
        ref = linalg.expm(-1j * t * oracle.manifold_block(p, m.occupations))
        worst = max(worst, np.max(np.abs(propagator(p, m, t).U - ref)))
    return CheckResult("propagator vs matrix exponential", worst, tol, cases)


def check_hamiltonian(cases: int = 20, seed: int = 3, tol: float = 1e-12) -> CheckResult:
    """Hermiticity and conservation of n_j + sigma^+ sigma^- on full truncated spaces."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        n = int(rng.integers(1, 4))
        p = ModelParams(n, tuple(_log_uniform(rng, 0.1, 10, n)), tuple(_log_uniform(rng, 0.1, 10, n)),
                        float(_log_uniform(rng, 0.1, 10)))
        space = oracle.TruncatedSpace(tuple(int(c) for c in rng.integers(2, 6, n)))
        h = oracle.build_hamiltonian(p, space)
        worst = max(worst, np.max(np.abs(h - h.conj().T)))
        for j in range(n):
            worst = max(worst, oracle.commutator_norm(h, oracle.excitation_operator(space, j)))
    return CheckResult("oracle Hamiltonian hermitian and excitation-conserving", worst, tol, cases)


def check_dynamics(times: int = 20, seed: int = 4, tol: float = 1e-8, instances: int = 2) -> CheckResult:
    """P1, <n_i> and g2 against full density-matrix evolution, two modes, nbar <= 3.

    The oracle space has cutoff 15 per mode; the field is supported on
    n <= 12 so nothing reaches the truncation edge.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    space = oracle.TruncatedSpace((15, 15))
    ops = (oracle.excited_projector(space), oracle.number_operator(space, 0), oracle.number_operator(space, 1))
    nn = ops[1] @ ops[2]
    checked = 0
    for _ in range(instances):
        p = ModelParams(2, tuple(_log_uniform(rng, 0.3, 3, 2)), tuple(_log_uniform(rng, 1, 10, 2)),
                        float(_log_uniform(rng, 1, 30)))
        nbar = tuple(float(x) for x in rng.uniform(0.2, 3.0, 2))
        field = CoherentField(nbar, cutoffs=(12, 12))
        ev = oracle.Evolver(oracle.build_hamiltonian(p, space))
        ts = np.sort(rng.uniform(0.0, 20.0, times)) / p.g_eff
        amps = [oracle.coherent_amplitudes(x, 12) for x in nbar]
        for atom, atom_idx in ((GROUND, oracle.GROUND), (EXCITED, oracle.EXCITED)):
            psi = oracle.product_state(space, atom_idx, amps)
            rho0 = np.outer(psi, psi)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                tab = dynamics_sweep(p, AtomFieldState(atom, field), ts * p.g_eff, sampler="exact")
            for j, t in enumerate(ts):
                rho = ev.evolve(rho0, t)
                p1, n0, n1 = (oracle.expectation(rho, o) for o in ops)
                g2 = oracle.expectation(rho, nn) / (n0 * n1)
                worst = max(worst, abs(p1 - tab.P1[j]), abs(n0 - tab.n_mean[j, 0]),
                            abs(n1 - tab.n_mean[j, 1]), abs(g2 - tab.g_n[j]))
                checked += 1
    return CheckResult("dynamics vs density-matrix evolution", worst, tol, checked)


def random_phase_instance(rng: np.random.Generator, min_gap: float = 0.5, min_a2: float = 1e-3):
    """(sp, p, m_k, mu_bar) with mu_bar inside the filling window, away from poles and a2 = 0."""
    while True:
        n = int(rng.integers(1, 5))
        g_scaled = float(_log_uniform(rng, 2, 30))
        sp = mf.ScaledPhaseParams(3, 1.0 / 3.0, int(rng.integers(0, n)),
                                  tuple(int(x) for x in rng.integers(0, 3, n - 1)))
        g = _log_uniform(rng, 0.5, 2.0, n)
        g = g * g_scaled / np.prod(g) ** (1.0 / n)
        om = rng.uniform(20.0, 60.0, n)
        p = ModelParams(n, tuple(g), tuple(om), float(om.sum() + rng.uniform(-2, 2) * g_scaled))
        m = int(rng.integers(0, 5))
        so = mf.SecondOrder(sp, p, m)
        lo = so.lower_pole if m > 0 else so.upper_pole - 3 * g_scaled
        mu = lo + rng.uniform(0.2, 0.8) * (so.upper_pole - lo)
        if min(abs(gap + dm * mu) for _, gap, dm in so.terms) < min_gap:
            continue
        if abs(so.a2(mu)) < min_a2:
            continue
        return sp, p, m, float(mu)


def check_landau(cases: int = 100, seed: int = 5, tol: float = 1e-4, psi: float = 1e-3) -> CheckResult:
    """a2 against (E(psi) - E(0)) / (z kappa psi^2) from exact diagonalisation, relative."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        sp, p, m, mu = random_phase_instance(rng)
        a2 = mf.landau_a2(sp, p, m, mu)
        worst = max(worst, abs(oracle.finite_difference_a2(sp, p, m, mu, psi) - a2) / abs(a2))
    return CheckResult("Landau a2 vs finite-difference ground energy", worst, tol, cases)


def random_lobe_instance(rng: np.random.Generator):
    """(sp, p, m_k) for which the filling-m_k lobe exists."""
    while True:
        n = int(rng.choice([3, 4]))
        sp = mf.ScaledPhaseParams(3, float(_log_uniform(rng, 1e-3, 1e-1)) / 3.0, int(rng.integers(0, n)))
        g = _log_uniform(rng, 0.5, 2.0, n)
        om = rng.uniform(5.0, 20.0, n)
        p = ModelParams(n, tuple(g), tuple(om), float(om.sum() + rng.uniform(-3, 3)))
        m = int(rng.integers(1, 5))
        try:
            mf.lobe_boundary(sp, p, m)
        except mf.NoLobeError:
            continue
        return sp, p, m


def check_boundaries(cases: int = 50, seed: int = 6, tol: float = 1e-8) -> CheckResult:
    """Every mu_pm from the closed-form evaluator zeroes a2."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        sp, p, m = random_lobe_instance(rng)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", mf.FormulaMismatchWarning)
            up, lo = mf.lobe_boundary_closed_form(sp, p, m)
        worst = max(worst, abs(mf.landau_a2(sp, p, m, up)), abs(mf.landau_a2(sp, p, m, lo)))
    return CheckResult("closed-form lobe boundaries zero a2", worst, tol, cases)


CHECKS: dict[str, Callable[..., CheckResult]] = {
    "eigenvalues": check_eigenvalues,
    "dressed_algebra": check_dressed_algebra,
    "propagator_unitarity": check_propagator_unitarity,
    "propagator_expm": check_propagator_expm,
    "hamiltonian": check_hamiltonian,
    "dynamics": check_dynamics,
    "landau": check_landau,
    "boundaries": check_boundaries,
}


def run_all(tolerance_scale: float = 1.0, quick: bool = False,
            tolerances: dict[str, float] | None = None) -> list[CheckResult]:
    """Run every check; ``tolerance_scale`` multiplies each default tolerance.

    ``tolerances`` maps check names to explicit tolerances, overriding the
    scaled default. ``quick`` shrinks the instance counts for smoke runs.
    """
    tolerances = dict(tolerances or {})
    unknown = set(tolerances) - set(CHECKS)
    if unknown:
        raise ValueError(f"unknown checks in tolerances: {sorted(unknown)}")
    out = []
    for name, fn in CHECKS.items():
        kwargs = {}
        if quick:
            kwargs = {"dynamics": {"times": 5, "instances": 1}, "landau": {"cases": 20},
                      "boundaries": {"cases": 10}, "hamiltonian": {"cases": 5}}.get(name, {"cases": 50})
        tol = tolerances.get(name, inspect.signature(fn).parameters["tol"].default * tolerance_scale)
        out.append(fn(tol=float(tol), **kwargs))
    return out
