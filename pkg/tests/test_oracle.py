import itertools

import numpy as np
import pytest

from mmjc import meanfield as mf
from mmjc import oracle
from mmjc.core import ManifoldIndex, ModelParams
from mmjc.spectrum import manifold_eigensystem

P2 = ModelParams(2, (0.7, 1.4), (3.0, 5.0), 8.5)


def test_index_maps_are_inverse_bijections():
    space = oracle.TruncatedSpace((2, 3, 1), offsets=(0, 4, 1))
    seen = set()
    for i in range(space.dimension):
        atom, occ = space.label(i)
        assert space.index(atom, occ) == i
        seen.add((atom, occ))
    assert len(seen) == space.dimension == 2 * 3 * 4 * 2
    assert space.occupation_table[5].tolist() == list(space.label(5)[1])


def test_dimension_limit():
    with pytest.raises(oracle.DimensionError):
        oracle.TruncatedSpace((99, 99, 9))


def test_hamiltonian_hermitian_and_block_diagonal():
    space = oracle.TruncatedSpace((4, 5))
    h = oracle.build_hamiltonian(P2, space)
    assert np.max(np.abs(h - h.conj().T)) < 1e-14
    for i, j in zip(*np.nonzero(h)):
        if i == j:
            continue
        (ai, ni), (aj, nj) = space.label(i), space.label(j)
        assert ai != aj
        step = 1 if ai == oracle.GROUND else -1
        assert all(x - y == step for x, y in zip(ni, nj))


def test_excitation_conserved_per_mode():
    space = oracle.TruncatedSpace((3, 3, 2))
    p = ModelParams(3, (1.0, 2.0, 0.5), (1.0, 2.0, 3.0), 5.0)
    h = oracle.build_hamiltonian(p, space)
    for j in range(3):
        assert oracle.commutator_norm(h, oracle.excitation_operator(space, j)) < 1e-12


def test_full_space_contains_manifold_spectrum():
    space = oracle.TruncatedSpace((4, 4))
    e = np.linalg.eigvalsh(oracle.build_hamiltonian(P2, space))
    for occ in itertools.product(range(4), range(4)):
        d = manifold_eigensystem(P2, ManifoldIndex(occ))
        for lam in (d.lambda_plus, d.lambda_minus):
            assert np.min(np.abs(e - lam)) < 1e-10 * max(1.0, abs(lam))


def test_manifold_block_matches_offset_window():
    occ = (7, 3)
    block = oracle.manifold_block(P2, occ)
    d = manifold_eigensystem(P2, ManifoldIndex(occ))
    assert np.allclose(np.linalg.eigvalsh(block), [d.lambda_minus, d.lambda_plus], rtol=1e-13)


def test_basis_permutation_invariance():
    space = oracle.TruncatedSpace((3, 3))
    h = oracle.build_hamiltonian(P2, space)
    perm = np.random.default_rng(0).permutation(space.dimension)
    hp = h[np.ix_(perm, perm)]
    assert np.allclose(np.linalg.eigvalsh(h), np.linalg.eigvalsh(hp), atol=1e-12)
    psi = oracle.product_state(space, oracle.EXCITED, [oracle.coherent_amplitudes(1.0, 3)] * 2)
    rho, rho_p = np.outer(psi, psi), np.outer(psi[perm], psi[perm])
    n0 = oracle.number_operator(space, 0)
    a = oracle.expectation(oracle.evolve_density_matrix(h, rho, 2.3), n0)
    b = oracle.expectation(oracle.evolve_density_matrix(hp, rho_p, 2.3), n0[np.ix_(perm, perm)])
    assert a == pytest.approx(b, abs=1e-12)


def test_trace_and_purity_conserved():
    space = oracle.TruncatedSpace((5, 5))
    psi = oracle.product_state(space, oracle.GROUND, [oracle.coherent_amplitudes(1.2, 5)] * 2)
    rho0 = np.outer(psi, psi)
    ev = oracle.Evolver(oracle.build_hamiltonian(P2, space))
    for t in (0.0, 0.7, 13.0):
        rho = ev.evolve(rho0, t)
        assert abs(np.trace(rho) - np.trace(rho0)) < 1e-10
        assert abs(np.trace(rho @ rho) - np.trace(rho0 @ rho0)) < 1e-10


def test_matrix_exponential_agrees_with_eigendecomposition():
    h = oracle.build_hamiltonian(P2, oracle.TruncatedSpace((2, 2)))
    assert np.allclose(oracle.matrix_exponential_propagator(h, 1.9), oracle.Evolver(h).unitary(1.9), atol=1e-12)


SP = mf.ScaledPhaseParams(3, 1.0 / 3.0)
P3 = ModelParams.equal(3, 10.0, 40.0, 0.0)


def _mid(m, sp=SP, p=P3):
    so = mf.SecondOrder(sp, p, m)
    return 0.5 * (so.lower_pole + so.upper_pole)


def test_deep_mott_finite_difference_near_one():
    sp = mf.ScaledPhaseParams(3, 1e-5)  # smaller kappa drowns the difference in roundoff
    assert oracle.finite_difference_a2(sp, P3, 2, _mid(2, sp)) == pytest.approx(1.0, abs=2e-3)


def test_richardson_step_dependence():
    mu = _mid(2)
    assert mf.ground_filling(SP, P3, mu) == 2
    vals = [oracle.finite_difference_a2(SP, P3, 2, mu, h) for h in (4e-3, 2e-3, 1e-3)]
    d1, d2 = vals[0] - vals[1], vals[1] - vals[2]
    # O(psi^2) error: halving the step quarters the change
    assert d2 == pytest.approx(d1 / 4, rel=0.05)
    assert vals[2] == pytest.approx(mf.landau_a2(SP, P3, 2, mu), rel=1e-4)


def test_psi_step_range():
    with pytest.raises(ValueError, match="psi_step"):
        oracle.finite_difference_a2(SP, P3, 1, _mid(1), psi_step=0.1)


def test_degenerate_ground_state_warns():
    mu = mf.critical_mu(SP, P3, 1)  # fillings 1 and 2 degenerate
    with pytest.warns(RuntimeWarning, match="near-degenerate"):
        oracle.finite_difference_a2(SP, P3, 1, mu)
