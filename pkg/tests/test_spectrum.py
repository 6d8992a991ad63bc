import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmjc import oracle
from mmjc.core import ManifoldIndex, ModelParams
from mmjc.spectrum import eigenspectrum_sweep, manifold_eigensystem

positive = st.floats(0.1, 100.0)


@st.composite
def instances(draw):
    n = draw(st.integers(1, 4))
    g = draw(st.lists(positive, min_size=n, max_size=n))
    om = draw(st.lists(positive, min_size=n, max_size=n))
    omega = draw(positive)
    occ = draw(st.lists(st.integers(0, 20), min_size=n, max_size=n))
    return ModelParams(n, tuple(g), tuple(om), omega), ManifoldIndex(tuple(occ))


def test_vacuum_manifold_on_resonance():
    p = ModelParams.equal(3, 1.0, 10.0, 0.0)
    d = manifold_eigensystem(p, ManifoldIndex((0, 0, 0)))
    assert d.Q == 1.0
    assert d.lambda_plus == d.K + 1 and d.lambda_minus == d.K - 1
    r = 1 / math.sqrt(2)
    assert (d.A_plus, d.A_minus) == pytest.approx((-r, r), abs=1e-15)
    assert (d.B_plus, d.B_minus) == pytest.approx((r, r), abs=1e-15)


def test_detuned_vacuum_half_splitting():
    d = manifold_eigensystem(ModelParams.equal(3, 1.0, 10.0, 2.0), ManifoldIndex((0, 0, 0)))
    assert d.Q == pytest.approx(math.sqrt(2), rel=1e-15)


def test_excited_manifold_half_splitting():
    d = manifold_eigensystem(ModelParams.equal(3, 1.0, 10.0, 0.0), ManifoldIndex((5, 2, 2)))
    assert d.Q == pytest.approx(math.sqrt(54), rel=1e-15)


def test_centroid_formula():
    p = ModelParams(2, (1.0, 2.0), (3.0, 7.0), 11.0)
    d = manifold_eigensystem(p, ManifoldIndex((2, 1)))
    assert d.K == pytest.approx((11.0 - 1.0) / 2 + 3 * 2 + 7 * 1, rel=1e-15)


@settings(max_examples=200)
@given(instances())
def test_matches_dense_block(inst):
    p, m = inst
    block = oracle.manifold_block(p, m.occupations)
    ref = np.linalg.eigvalsh(block)
    d = manifold_eigensystem(p, m)
    scale = np.max(np.abs(ref))
    assert abs(d.lambda_minus - ref[0]) / scale < 1e-10
    assert abs(d.lambda_plus - ref[1]) / scale < 1e-10
    for branch, lam in ((1, d.lambda_plus), (-1, d.lambda_minus)):
        v = d.vector(branch)
        assert np.max(np.abs(block @ v - lam * v)) / scale < 1e-10


@given(instances())
def test_dressed_algebra(inst):
    d = manifold_eigensystem(*inst)
    assert abs(d.A_plus**2 + d.B_plus**2 - 1) < 1e-12
    assert abs(d.A_minus**2 + d.B_minus**2 - 1) < 1e-12
    assert abs(d.A_plus * d.A_minus + d.B_plus * d.B_minus) < 1e-12
    assert d.B_plus > 0 and d.B_minus > 0 and d.Q > 0


@given(instances(), st.floats(0.01, 100.0))
def test_energies_scale_linearly(inst, s):
    p, m = inst
    a, b = manifold_eigensystem(p, m), manifold_eigensystem(p.scaled(s), m)
    assert b.lambda_plus == pytest.approx(s * a.lambda_plus, rel=1e-12, abs=1e-12 * s * a.Q)
    assert b.lambda_minus == pytest.approx(s * a.lambda_minus, rel=1e-12, abs=1e-12 * s * a.Q)


@given(instances(), st.floats(0.0, 0.99))
def test_q_even_in_detuning_and_minimal_at_resonance(inst, frac):
    p, m = inst
    x = frac * sum(p.omega_modes)
    qs = [manifold_eigensystem(p.with_detuning(d), m).Q for d in (x, -x, 0.0)]
    assert qs[0] == pytest.approx(qs[1], rel=1e-14)
    assert qs[2] <= qs[0]


def test_fig1_splitting_grows_with_first_occupation():
    p = ModelParams.equal(3, 1.0, 10.0, 0.0)
    ms = [ManifoldIndex((n, 1, 1)) for n in (5, 10, 15)]
    rows = eigenspectrum_sweep(p, ms, [0.0])
    split = [r.E_plus - r.E_minus for r in rows]
    assert split[0] < split[1] < split[2]
    for r, m in zip(rows, ms):
        assert r.E_plus - r.E_minus == pytest.approx(2 * math.sqrt(math.prod(n + 1 for n in m.occupations)),
                                                     rel=1e-14)


def test_sweep_centred_and_never_crossing():
    p = ModelParams(3, (0.5, 1.0, 2.0), (10.0, 11.0, 12.0), 33.0)
    ms = [ManifoldIndex((5, 0, 0)), ManifoldIndex((10, 0, 0))]
    grid = np.linspace(-10, 10, 41)
    rows = eigenspectrum_sweep(p, ms, grid)
    assert [r.occupations for r in rows[:41]] == [(5, 0, 0)] * 41
    assert [r.delta_over_g for r in rows[41:]] == list(grid)
    for r in rows:
        assert r.E_plus == pytest.approx(-r.E_minus, rel=1e-12)
        floor = 2 * math.sqrt(math.prod(n + 1 for n in r.occupations))
        assert r.E_plus - r.E_minus >= floor * (1 - 1e-14)


def test_sweep_rejects_empty():
    p = ModelParams.equal(1, 1.0, 1.0, 0.0)
    with pytest.raises(ValueError, match="empty sweep"):
        eigenspectrum_sweep(p, [ManifoldIndex((0,))], [])
    with pytest.raises(ValueError, match="empty sweep"):
        eigenspectrum_sweep(p, [], [0.0])
