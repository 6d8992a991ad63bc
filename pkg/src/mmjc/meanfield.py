"""Mean-field Mott-insulator / superfluid boundaries of the coupled-cavity lattice.

Only the hopping mode ``k`` tunnels. Filling ``m`` counts the quasi-excitations
carried by that mode, n_k + sigma^+ sigma^-. The other modes keep fixed
spectator occupations s_j, so filling ``m >= 1`` is the lower dressed state of
the manifold with occupations (k: m - 1, j: s_j), and filling 0 is the bare
state |g; n_k = 0, n_j = s_j + 1>.

All energies are divided by z * kappa; barred names (``mu_bar``,
``delta_bar``) are scaled.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy import optimize

from mmjc.core import ManifoldIndex, ModelParams, ParameterError
from mmjc.spectrum import manifold_eigensystem

POLE_EPS = 1e-12
ROOT_TOL = 1e-8


class PoleError(ArithmeticError):
    """mu_bar sits on a pole of the second-order energy."""


class NoLobeError(ArithmeticError):
    """No Mott lobe of the requested filling at these parameters."""


class NoBracketError(ArithmeticError):
    pass


class FormulaMismatchWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class ScaledPhaseParams:
    z: int = 3
    kappa: float = 1.0
    hopping_mode: int = 0
    spectator_occupations: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if int(self.z) != self.z or self.z < 1:
            raise ParameterError(f"coordination number must be a positive integer, got {self.z}")
        if not self.kappa > 0:
            raise ParameterError(f"hopping kappa must be positive, got {self.kappa}")
        if self.hopping_mode < 0:
            raise ParameterError("hopping_mode must be non-negative")
        if any(s < 0 for s in self.spectator_occupations):
            raise ParameterError("spectator occupations must be non-negative")
        object.__setattr__(self, "spectator_occupations", tuple(int(s) for s in self.spectator_occupations))

    @property
    def zk(self) -> float:
        return self.z * self.kappa

    def spectators(self, n_modes: int) -> tuple[int, ...]:
        """Spectator occupations for an ``n_modes`` model, defaulting to 0."""
        if self.hopping_mode >= n_modes:
            raise ParameterError(f"hopping_mode {self.hopping_mode} out of range for {n_modes} modes")
        if not self.spectator_occupations:
            return (0,) * (n_modes - 1)
        if len(self.spectator_occupations) != n_modes - 1:
            raise ParameterError(f"need {n_modes - 1} spectator occupations, got {len(self.spectator_occupations)}")
        return self.spectator_occupations

    def spectator_excitations(self, n_modes: int) -> tuple[int, ...]:
        """Conserved n_j + sigma^+ sigma^- of each spectator mode."""
        return tuple(s + 1 for s in self.spectators(n_modes))

    def manifold(self, n_modes: int, m: int) -> ManifoldIndex:
        """Manifold whose lower dressed state has hopping filling ``m >= 1``."""
        spect = iter(self.spectators(n_modes))
        return ManifoldIndex(tuple(m - 1 if j == self.hopping_mode else next(spect) for j in range(n_modes)))


class DressedLevel(NamedTuple):
    energy: float  # unscaled
    ground_amp: float  # on |g; n_k = m>
    excited_amp: float  # on |e; n_k = m - 1>


LOWER, BOTH = "lower", "both"


def filling_levels(sp: ScaledPhaseParams, p: ModelParams, m: int) -> list[DressedLevel]:
    """States of hopping filling ``m``: the lower dressed state first, then the upper one."""
    if m < 0:
        raise ValueError("filling must be non-negative")
    if m == 0:
        spect = sp.spectators(p.n_modes)
        others = [w for j, w in enumerate(p.omega_modes) if j != sp.hopping_mode]
        e0 = -0.5 * p.omega_atom + math.fsum(w * (s + 1) for w, s in zip(others, spect))
        return [DressedLevel(e0, 1.0, 0.0)]
    pair = manifold_eigensystem(p, sp.manifold(p.n_modes, m))
    lo_e, lo_g = pair.vector(-1)
    hi_e, hi_g = pair.vector(+1)
    return [DressedLevel(pair.lambda_minus, lo_g, lo_e), DressedLevel(pair.lambda_plus, hi_g, hi_e)]


def lower_state(sp: ScaledPhaseParams, p: ModelParams, m: int) -> DressedLevel:
    return filling_levels(sp, p, m)[0]


def scaled_lambda(sp: ScaledPhaseParams, p: ModelParams, m: int) -> float:
    return lower_state(sp, p, m).energy / sp.zk


def critical_mu(sp: ScaledPhaseParams, p: ModelParams, n_k: int) -> float:
    """Scaled chemical potential at which filling n_k gives way to n_k + 1."""
    return scaled_lambda(sp, p, n_k + 1) - scaled_lambda(sp, p, n_k)


def _raise_element(lo: DressedLevel, hi: DressedLevel, m: int) -> float:
    """<hi| a_k^dag |lo> for ``lo`` at filling m and ``hi`` at filling m + 1."""
    # ground component holds m photons in mode k, excited component m - 1
    return lo.ground_amp * hi.ground_amp * math.sqrt(m + 1) + lo.excited_amp * hi.excited_amp * math.sqrt(m)


def hopping_element(sp: ScaledPhaseParams, p: ModelParams, m: int) -> float:
    """<m + 1| a_k^dag |m> between lower dressed states."""
    return _raise_element(lower_state(sp, p, m), lower_state(sp, p, m + 1), m)


class Coefficients(NamedTuple):
    f1: float
    f2: float
    dl1: float  # scaled lambda_m - lambda_{m-1}; nan for m = 0
    dl2: float  # scaled lambda_m - lambda_{m+1}


def coefficients(sp: ScaledPhaseParams, p: ModelParams, m_k: int) -> Coefficients:
    """Lower-branch matrix elements and gaps entering the closed-form boundary."""
    lam = scaled_lambda(sp, p, m_k)
    dl2 = lam - scaled_lambda(sp, p, m_k + 1)
    f2 = hopping_element(sp, p, m_k)
    if m_k == 0:
        return Coefficients(0.0, f2, math.nan, dl2)
    return Coefficients(hopping_element(sp, p, m_k - 1), f2, lam - scaled_lambda(sp, p, m_k - 1), dl2)


class SecondOrder:
    """psi^2 coefficient of the energy shift of the lower state at filling m_k.

    Intermediate states are every dressed state with filling m_k +- 1
    (``branches="both"``), or only the lower ones (``branches="lower"``), which
    is the truncation the closed-form boundary is built on.
    """

    def __init__(self, sp: ScaledPhaseParams, p: ModelParams, m_k: int, branches: str = BOTH):
        if branches not in (LOWER, BOTH):
            raise ValueError(f"branches must be {LOWER!r} or {BOTH!r}")
        if m_k < 0:
            raise ValueError("filling must be non-negative")
        self.m_k = m_k
        self.branches = branches
        here = lower_state(sp, p, m_k)
        zk = sp.zk
        terms = []  # (weight, scaled gap, filling change)
        for lvl in self._pick(filling_levels(sp, p, m_k + 1)):
            terms.append((_raise_element(here, lvl, m_k) ** 2, (here.energy - lvl.energy) / zk, +1))
        if m_k > 0:
            for lvl in self._pick(filling_levels(sp, p, m_k - 1)):
                terms.append((_raise_element(lvl, here, m_k - 1) ** 2, (here.energy - lvl.energy) / zk, -1))
        self.terms = terms
        self.lower_pole = here.energy / zk - scaled_lambda(sp, p, m_k - 1) if m_k > 0 else -math.inf
        self.upper_pole = scaled_lambda(sp, p, m_k + 1) - here.energy / zk

    def _pick(self, levels):
        return levels[:1] if self.branches == LOWER else levels

    def __call__(self, mu_bar: float) -> float:
        out = 0.0
        for w, gap, dm in self.terms:
            den = gap + dm * mu_bar
            if abs(den) < POLE_EPS:
                raise PoleError(f"mu_bar={mu_bar!r} on a pole of the second-order energy (filling {self.m_k})")
            out += w / den
        return out

    def a2(self, mu_bar: float) -> float:
        return 1.0 + self(mu_bar)


def second_order_energy(sp: ScaledPhaseParams, p: ModelParams, m_k: int, mu_bar: float,
                        branches: str = BOTH) -> float:
    """Scaled psi^2 coefficient of the second-order energy shift of filling m_k."""
    return SecondOrder(sp, p, m_k, branches)(mu_bar)


def landau_a2(sp: ScaledPhaseParams, p: ModelParams, m_k: int, mu_bar: float, branches: str = BOTH) -> float:
    """a2 > 0: Mott insulator (psi = 0 stable); a2 < 0: superfluid."""
    return SecondOrder(sp, p, m_k, branches).a2(mu_bar)


def _quadratic_roots(c: Coefficients) -> tuple[float, float]:
    """Roots of a2 = 0 written as mu^2 - b mu - c0 = 0, in the closed form."""
    ff = c.f1**2 - c.f2**2
    b = ff + c.dl1 - c.dl2
    s = c.dl1 + c.dl2
    disc = ff**2 + s**2 + 2.0 * (c.f1**2 + c.f2**2) * s
    if disc < 0:
        raise NoLobeError(f"negative discriminant {disc:.3e}")
    root = math.sqrt(disc)
    # cancellation-free pair: product of roots is -c0
    c0 = c.dl1 * c.dl2 + c.f1**2 * c.dl2 + c.f2**2 * c.dl1
    big = 0.5 * (b + math.copysign(root, b))
    if big == 0.0:
        return 0.0, 0.0
    small = -c0 / big
    return max(big, small), min(big, small)


def discriminant(sp: ScaledPhaseParams, p: ModelParams, m_k: int) -> float:
    c = coefficients(sp, p, m_k)
    ff = c.f1**2 - c.f2**2
    s = c.dl1 + c.dl2
    return ff**2 + s**2 + 2.0 * (c.f1**2 + c.f2**2) * s


def _brent(f, a, b):
    return optimize.brentq(f, a, b, xtol=1e-15, rtol=8.9e-16, maxiter=400)


def boundary_by_root_finding(sp: ScaledPhaseParams, p: ModelParams, m_k: int,
                             branches: str = BOTH) -> tuple[float, float]:
    """Zeros of a2 inside the Mott window, located numerically.

    The window is bounded by the two lower-branch poles, where a2 tends to
    -inf; the other poles lie outside it. The peak of a2 is located first and
    a root is bracketed on each side of it.
    """
    so = SecondOrder(sp, p, m_k, branches)
    lo_pole, hi_pole = so.lower_pole, so.upper_pole
    if not lo_pole < hi_pole:
        raise NoLobeError("poles out of order: filling is never the ground state")
    if m_k == 0:
        lo = hi_pole - 1.0
        while so.a2(lo) <= 0:
            lo = hi_pole - 2.0 * (hi_pole - lo)
            if hi_pole - lo > 1e12:
                raise NoBracketError("no lower bracket for the filling-0 boundary")
        pad = 4.0 * max((hi_pole - lo) * 1e-14, POLE_EPS, 4e-16 * abs(hi_pole))
        return _brent(so.a2, lo, hi_pole - pad), -math.inf
    width = hi_pole - lo_pole
    pad = 4.0 * max(width * 1e-13, POLE_EPS, 4e-16 * max(abs(lo_pole), abs(hi_pole)))
    if width <= 8.0 * pad:
        raise NoLobeError("Mott window narrower than the pole padding")
    # sample on a grid clustered toward both poles, then polish the maximum
    u = 0.5 - 0.5 * np.cos(np.linspace(0.0, math.pi, 257))
    xs = lo_pole + pad + (width - 2 * pad) * u
    vals = np.array([so.a2(x) for x in xs])
    i = int(np.argmax(vals))
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, len(xs) - 1)]
    res = optimize.minimize_scalar(lambda x: -so.a2(x), bounds=(a, b), method="bounded",
                                   options={"xatol": 1e-15 * (1.0 + abs(xs[i]))})
    peak, top = (res.x, -res.fun) if -res.fun > vals[i] else (xs[i], vals[i])
    if top <= 0:
        raise NoLobeError(f"a2 never positive between the poles (max {top:.3e})")
    if so.a2(lo_pole + pad) >= 0 or so.a2(hi_pole - pad) >= 0:
        raise NoBracketError("a2 does not change sign inside the Mott window")
    return _brent(so.a2, peak, hi_pole - pad), _brent(so.a2, lo_pole + pad, peak)


def lobe_boundary_closed_form(sp: ScaledPhaseParams, p: ModelParams, m_k: int,
                              branches: str = BOTH) -> tuple[float, float]:
    """(mu_plus, mu_minus) of the Mott lobe with filling m_k at the model's detuning.

    Evaluates the closed-form quadratic solution of a2 = 0 in which only
    lower-branch intermediate states appear. Every root is checked against
    ``landau_a2(..., branches)``; when the check fails the numerically located
    zeros of that a2 are returned instead and a ``FormulaMismatchWarning`` is
    emitted. For m_k = 0 only the upper boundary exists and mu_minus is -inf.
    """
    c = coefficients(sp, p, m_k)
    if m_k == 0:
        roots = (-c.dl2 - c.f2**2, -math.inf)
    else:
        try:
            roots = _quadratic_roots(c)
        except NoLobeError:
            roots = None
        if roots is not None and not (c.dl1 < roots[1] <= roots[0] < -c.dl2):
            roots = None
        if roots is None:
            if branches == LOWER:
                raise NoLobeError(f"no real boundary for filling {m_k} at this detuning")
            return boundary_by_root_finding(sp, p, m_k, branches)
    so = SecondOrder(sp, p, m_k, branches)
    bad = [r for r in roots if math.isfinite(r) and abs(so.a2(r)) >= ROOT_TOL]
    if bad:
        worst = max(abs(so.a2(r)) for r in bad)
        warnings.warn(f"closed-form boundary misses a2 = 0 at filling {m_k} (|a2| up to {worst:.2e}); "
                      f"using root-finder boundary", FormulaMismatchWarning, stacklevel=2)
        return boundary_by_root_finding(sp, p, m_k, branches)
    return roots


def lobe_boundary(sp: ScaledPhaseParams, p: ModelParams, m_k: int, branches: str = BOTH) -> tuple[float, float]:
    """Authoritative (mu_plus, mu_minus): zeros of a2, without the closed-form detour."""
    if branches == LOWER:
        return lobe_boundary_closed_form(sp, p, m_k, LOWER)
    return boundary_by_root_finding(sp, p, m_k, branches)


def _lobe_exists(sp, p, m_k, branches) -> bool:
    try:
        lobe_boundary(sp, p, m_k, branches)
    except NoLobeError:
        return False
    return True


def lobe_width(sp: ScaledPhaseParams, p: ModelParams, m_k: int, branches: str = BOTH) -> float:
    """mu_plus - mu_minus, or 0 where the lobe is absent."""
    try:
        up, lo = lobe_boundary(sp, p, m_k, branches)
    except NoLobeError:
        return 0.0
    return up - lo


def lobe_tip(sp: ScaledPhaseParams, p: ModelParams, m_k: int,
             delta_range: tuple[float, float] | None = None, n_scan: int = 401,
             branches: str = BOTH) -> float:
    """Largest scaled detuning at which the Mott lobe of filling m_k closes.

    Scans ``delta_range`` (default +-20 g_eff / (z kappa)) for the last
    detuning where the lobe exists and bisects the existence edge down to
    adjacent floats, returning the point on the lobe side.
    """
    if m_k < 1:
        raise ValueError("the filling-0 lobe has no tip")
    if delta_range is None:
        span = 20.0 * p.g_eff / sp.zk
        delta_range = (-span, span)
    at = lambda d: p.with_detuning(d * sp.zk)  # noqa: E731
    grid = np.linspace(*delta_range, n_scan)
    exists = [_lobe_exists(sp, at(d), m_k, branches) for d in grid]
    idx = [i for i in range(n_scan - 1) if exists[i] and not exists[i + 1]]
    if not idx:
        raise NoBracketError(f"lobe {m_k} does not close inside delta_bar range {delta_range}")
    inside, outside = float(grid[idx[-1]]), float(grid[idx[-1] + 1])
    while True:
        mid = 0.5 * (inside + outside)
        if mid in (inside, outside):
            break
        if _lobe_exists(sp, at(mid), m_k, branches):
            inside = mid
        else:
            outside = mid
    return inside


def ground_filling(sp: ScaledPhaseParams, p: ModelParams, mu_bar: float, max_filling: int = 64) -> int:
    """Filling that minimises the unperturbed grand energy lambda_m - mu m."""
    lam = np.array([scaled_lambda(sp, p, m) for m in range(max_filling + 1)])
    return int(np.argmin(lam - mu_bar * np.arange(max_filling + 1)))


SUPERFLUID = "SF"
POLE = "POLE"


def mott_label(m: int) -> str:
    return f"MI{m}"


class _Column:
    """Per-detuning cache: lower energies and second-order objects by filling."""

    def __init__(self, sp, p, max_filling, branches):
        self.lam = np.array([scaled_lambda(sp, p, m) for m in range(max_filling + 1)])
        self.fill = np.arange(max_filling + 1)
        self._so = {}
        self.sp, self.p, self.branches = sp, p, branches

    def label(self, mu_bar: float) -> str:
        m = int(np.argmin(self.lam - mu_bar * self.fill))
        if m not in self._so:
            self._so[m] = SecondOrder(self.sp, self.p, m, self.branches)
        try:
            a2 = self._so[m].a2(mu_bar)
        except PoleError:
            return POLE
        return mott_label(m) if a2 > 0 else SUPERFLUID


def classify(sp: ScaledPhaseParams, p: ModelParams, mu_bar: float, max_filling: int = 64,
             branches: str = BOTH) -> str:
    return _Column(sp, p, max_filling, branches).label(mu_bar)


class PhaseDiagram(NamedTuple):
    delta_bar: np.ndarray
    mu_bar: np.ndarray
    labels: list[list[str]]  # labels[i][j] at (delta_bar[i], mu_bar[j])
    boundaries: list[tuple[int, float, float, float]]  # (m_k, delta_bar, mu_plus, mu_minus)
    formula_mismatches: int  # boundary points where the closed form missed a2 = 0


def phase_diagram(sp: ScaledPhaseParams, p_template: ModelParams, delta_grid: Sequence[float],
                  mu_grid: Sequence[float], fillings: Sequence[int] = (0, 1, 2, 3),
                  max_filling: int = 64, branches: str = BOTH) -> PhaseDiagram:
    """Label every (delta_bar, mu_bar) cell and trace lobe boundaries per filling.

    A cell is MI<m> when the psi = 0 ground filling m has a2 > 0 and SF
    otherwise; cells on a pole are labelled POLE.
    """
    d = np.asarray(delta_grid, dtype=float)
    mu = np.asarray(mu_grid, dtype=float)
    if d.size == 0 or mu.size == 0:
        raise ValueError("empty sweep: phase-diagram grids need at least one point")
    if np.any(np.diff(d) <= 0) or np.any(np.diff(mu) <= 0):
        raise ValueError("phase-diagram grids must be strictly increasing")
    labels, bounds = [], []
    mismatches = 0
    for dbar in d:
        p = p_template.with_detuning(float(dbar) * sp.zk)
        col = _Column(sp, p, max_filling, branches)
        labels.append([col.label(float(x)) for x in mu])
        for m in fillings:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", FormulaMismatchWarning)
                try:
                    up, lo = lobe_boundary_closed_form(sp, p, m, branches)
                except NoLobeError:
                    continue
            mismatches += sum(issubclass(w.category, FormulaMismatchWarning) for w in caught)
            bounds.append((m, float(dbar), up, lo))
    if mismatches:
        warnings.warn(f"{mismatches} boundary points fell back to the root-finder", FormulaMismatchWarning)
    bounds.sort(key=lambda r: (r[0], r[1]))
    return PhaseDiagram(d, mu, labels, bounds, mismatches)
