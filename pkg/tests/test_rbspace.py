import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rbeig.eigensolve import EigenSolveError, solve_detailed
from rbeig.parameter import sample, theta
from rbeig.rbspace import ReducedBasis, ReducedModel


@pytest.fixture(scope="module")
def snap(coarse_op, beam_domain):
    """Eigenvectors at a few parameters: realistic basis material."""
    cols = [solve_detailed(coarse_op, theta(mu), 6).vectors for mu in sample(beam_domain, 5, 21).points]
    return np.hstack(cols)


@pytest.fixture
def basis(coarse_op, snap):
    return ReducedBasis.from_columns(coarse_op, snap[:, :12], eps_proj=1e-6)


def from_scratch(op, Z):
    return np.array([Z.T @ (Aq @ Z) for Aq in op.blocks])


def test_orthonormal_and_consistent(coarse_op, basis, beam_domain):
    assert basis.orthonormality_error() <= 1e-10
    assert np.abs(basis.blocks - from_scratch(coarse_op, basis.Z)).max() <= 1e-10 * np.abs(basis.blocks).max()
    for mu in sample(beam_domain, 5, 2).points:
        th = theta(mu)
        full = basis.Z.T @ (coarse_op.stiffness(th) @ basis.Z)
        assert np.abs(basis.reduced_stiffness(th) - full).max() <= 1e-10 * np.abs(full).max()
    assert np.all(basis.blocks == np.transpose(basis.blocks, (0, 2, 1)))


def test_bordered_update_matches_recompute(coarse_op, basis, snap):
    before = basis.blocks.copy()
    assert basis.extend(snap[:, 20])
    after = basis.blocks
    assert np.array_equal(after[:, :-1, :-1], before)
    ref = from_scratch(coarse_op, basis.Z)
    assert np.abs(after - ref).max() <= 1e-10 * np.abs(ref).max()


def test_extend_rejects_span_member(basis):
    N = basis.N
    v = basis.Z @ np.arange(1.0, N + 1)
    assert not basis.extend(v)
    assert basis.N == N


def test_extend_appends_orthonormal_verbatim(coarse_op, basis, rng):
    v = rng.standard_normal(coarse_op.n_dofs)
    v -= basis.Z @ (basis.MZ.T @ v)
    v -= basis.Z @ (basis.MZ.T @ v)
    v /= np.sqrt(v @ (coarse_op.mass @ v))
    assert basis.extend(v)
    assert np.allclose(basis.Z[:, -1], v, rtol=0, atol=1e-12)


def test_project(coarse_op, basis, rng):
    c, r = basis.project(basis.Z[:, 2])
    assert np.allclose(c, np.eye(basis.N)[2], atol=1e-12) and r <= 1e-7
    v = rng.standard_normal(coarse_op.n_dofs)
    v -= basis.Z @ (basis.MZ.T @ v)
    v -= basis.Z @ (basis.MZ.T @ v)
    c, r = basis.project(v)
    assert np.abs(c).max() <= 1e-10 * np.abs(v).max()
    assert r == pytest.approx(np.sqrt(v @ (coarse_op.mass @ v)), rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_pythagoras(coarse_op, snap, seed):
    basis = ReducedBasis.from_columns(coarse_op, snap[:, :12], eps_proj=1e-6)
    v = np.random.default_rng(seed).standard_normal(coarse_op.n_dofs)
    c, r = basis.project(v)
    total = v @ (coarse_op.mass @ v)
    assert c @ c + r**2 == pytest.approx(total, rel=1e-10)


def test_invariant_subspace(coarse_op, beam_domain):
    mu = beam_domain.reference
    sol = solve_detailed(coarse_op, theta(mu), 6)
    b = ReducedBasis.from_columns(coarse_op, sol.vectors)
    red = b.solve_at(mu)
    assert np.allclose(red.values, sol.values, rtol=1e-10)
    one = ReducedBasis.from_columns(coarse_op, sol.vectors[:, :1])
    assert one.solve_at(mu).values[0] == pytest.approx(sol.values[0], rel=1e-10)


def test_min_max_and_monotonicity(coarse_op, snap, beam_domain):
    pts = sample(beam_domain, 20, 31).points
    detailed = [solve_detailed(coarse_op, theta(mu), 6).values for mu in pts]
    b = ReducedBasis(coarse_op)
    prev = None
    for k in range(snap.shape[1]):
        b.extend(snap[:, k])
        if b.N < 6:
            continue
        cur = np.array([b.solve_at(mu, 6).values for mu in pts])
        for lam_red, lam in zip(cur, detailed):
            assert np.all(lam <= lam_red + 1e-10 * lam)
        if prev is not None:
            assert np.all(cur <= prev * (1 + 1e-12))
        prev = cur


def test_drift_stays_small_over_many_extensions(coarse_op, rng):
    b = ReducedBasis(coarse_op, capacity=4)
    # nearly dependent candidates stress the re-orthogonalization
    base = rng.standard_normal((coarse_op.n_dofs, 20))
    for k in range(300):
        v = base @ rng.standard_normal(20) + 1e-3 * rng.standard_normal(coarse_op.n_dofs)
        b.extend(v, 1e-10)
    assert b.N == 300
    assert b.orthonormality_error() <= 1e-8


def test_listeners_and_provenance(coarse_op, snap):
    seen = []
    b = ReducedBasis(coarse_op)
    b.listeners.append(lambda basis, idx: seen.append(idx))
    b.extend(snap[:, 0], info={"mu_index": 3})
    b.extend(snap[:, 1])
    assert seen == [0, 1]
    assert b.provenance[0] == {"mu_index": 3}


def test_solve_errors_and_truncation(basis, beam_domain):
    with pytest.raises(EigenSolveError):
        basis.solve_at(beam_domain.reference, basis.N + 1)
    t = basis.truncated(5)
    assert t.N == 5 and np.array_equal(t.blocks, basis.blocks[:, :5, :5])
    with pytest.raises(ValueError):
        basis.truncated(basis.N + 1)


def test_reduced_model_matches_basis(basis, beam_domain):
    m = ReducedModel(basis.blocks.copy(), basis.Z.copy())
    mu = sample(beam_domain, 1, 4).points[0]
    a, b = basis.solve_at(mu, 4), m.solve_at(mu, 4)
    assert np.array_equal(a.values, b.values)
    assert m.truncated(6).N == 6
    assert np.allclose(a.lift(0), basis.Z @ a.coeffs[:, 0])
