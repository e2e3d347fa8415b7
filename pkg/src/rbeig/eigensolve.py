"""Smallest eigenpairs of symmetric definite pencils, detailed and reduced."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DEFAULT_TOL = 1e-10
# below this size the detailed pencil is solved densely
DENSE_LIMIT = 400
# dense fallback when Lanczos breaks down (e.g. a fully degenerate pencil)
DENSE_FALLBACK_LIMIT = 4000


class EigenSolveError(RuntimeError):
    pass


@dataclass
class EigenSolution:
    values: np.ndarray  # ascending
    vectors: np.ndarray  # columns, M-orthonormal
    residuals: np.ndarray = None

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class Group:
    first: int  # 0-based lowest index of the group
    multiplicity: int

    @property
    def indices(self):
        return tuple(range(self.first, self.first + self.multiplicity))

    @property
    def last(self):
        return self.first + self.multiplicity - 1


@dataclass
class SpectrumStructure:
    groups: list
    tol: float

    def group_of(self, index):
        for g in self.groups:
            if g.first <= index <= g.last:
                return g
        raise IndexError(index)


def _fix_signs(V):
    """Deterministic sign: the largest-magnitude entry of each column is positive."""
    if V.size == 0:
        return V
    idx = np.argmax(np.abs(V), axis=0)
    s = np.sign(V[idx, np.arange(V.shape[1])])
    s[s == 0] = 1.0
    return V * s


def m_orthonormalize(V, M, passes=2):
    """Modified Gram-Schmidt in the ``M`` inner product, repeated ``passes`` times."""
    V = np.array(V, dtype=float, copy=True)
    for _ in range(passes):
        for k in range(V.shape[1]):
            for j in range(k):
                V[:, k] -= (V[:, j] @ (M @ V[:, k])) * V[:, j]
            nrm = np.sqrt(V[:, k] @ (M @ V[:, k]))
            if nrm == 0:
                raise EigenSolveError("linearly dependent vectors in orthonormalization")
            V[:, k] /= nrm
    return V


def relative_residuals(A, M, values, V):
    AV = A @ V
    MV = M @ V
    R = AV - MV * values
    return np.linalg.norm(R, axis=0) / (np.abs(values) * np.linalg.norm(MV, axis=0))


def _rayleigh_ritz(A, M, V, count):
    V = m_orthonormalize(V, M)
    Ah = V.T @ (A @ V)
    Ah = 0.5 * (Ah + Ah.T)
    w, X = sla.eigh(Ah)
    Vr = V @ X[:, :count]
    # one cheap clean-up pass keeps ||V^T M V - I|| at roundoff level
    G = Vr.T @ (M @ Vr)
    L = np.linalg.cholesky(0.5 * (G + G.T))
    Vr = sla.solve_triangular(L, Vr.T, lower=True).T
    return w[:count], Vr


def _dense(A, M, count):
    Ad = A.toarray() if sp.issparse(A) else np.asarray(A)
    Md = M.toarray() if sp.issparse(M) else np.asarray(M)
    return sla.eigh(Ad, Md, subset_by_index=[0, count - 1])


def solve_pencil(A, M, count, tol=DEFAULT_TOL, v0=None):
    """Smallest ``count`` eigenpairs of ``A x = lam M x`` (A, M sparse SPD)."""
    n = A.shape[0]
    if count > n:
        raise EigenSolveError(f"requested {count} eigenpairs from a pencil of size {n}")
    if count < 1:
        raise EigenSolveError("count must be >= 1")
    if n <= DENSE_LIMIT or count >= n - 1:
        w, V = _dense(A, M, count)
    else:
        if v0 is None:
            # fixed start vector: reruns are bitwise reproducible
            v0 = np.cos(np.arange(n) * 0.7) + 1.5
        ncv = min(n, max(2 * count + 1, count + 20))
        try:
            w, V = spla.eigsh(A, k=count, M=M, sigma=0.0, which="LM", v0=v0, ncv=ncv, tol=0)
            order = np.argsort(w)
            w, V = _rayleigh_ritz(A, M, V[:, order], count)
        except (spla.ArpackNoConvergence, spla.ArpackError, np.linalg.LinAlgError) as exc:
            if n > DENSE_FALLBACK_LIMIT:
                raise EigenSolveError(f"shift-invert Lanczos failed: {exc}") from exc
            w, V = _dense(A, M, count)
    V = _fix_signs(V)
    res = relative_residuals(A, M, w, V)
    if np.any(w <= 0):
        raise EigenSolveError("non-positive eigenvalue: pencil is not definite")
    if np.max(res) > tol:
        raise EigenSolveError(f"eigen residual {np.max(res):.3e} exceeds tolerance {tol:.1e}")
    return EigenSolution(w, V, res)


def solve_detailed(op, theta, count, tol=DEFAULT_TOL):
    """Smallest ``count`` eigenpairs of ``sum_q theta_q A_q x = lam M x``."""
    theta = np.asarray(theta, dtype=float)
    if np.any(theta <= 0):
        raise EigenSolveError("affine coefficients must be positive")
    return solve_pencil(op.stiffness(theta), op.mass, count, tol)


def solve_detailed_past(op, theta, index, eps_lambda, tol=DEFAULT_TOL, extra=3):
    """Solve until the last eigenvalue exceeds ``lam[index] * (1 + eps_lambda)``.

    Guarantees the whole cluster of ``index`` (0-based) is resolved.
    """
    count = min(op.n_dofs, index + 1 + extra)
    while True:
        sol = solve_detailed(op, theta, count, tol)
        if sol.values[-1] > sol.values[index] * (1 + eps_lambda) or count == op.n_dofs:
            return sol
        count = min(op.n_dofs, count + extra + 2)


def solve_reduced(A_red, M_red=None, count=None):
    """Dense smallest eigenpairs of a reduced pencil; ``M_red=None`` means identity."""
    A_red = np.asarray(A_red, dtype=float)
    N = A_red.shape[0]
    count = N if count is None else count
    if count > N:
        raise EigenSolveError(f"requested {count} eigenpairs from a reduced space of size {N}")
    try:
        w, X = sla.eigh(A_red, M_red, subset_by_index=[0, count - 1], check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise EigenSolveError("reduced mass matrix is not SPD (basis lost orthonormality)") from exc
    return EigenSolution(w, _fix_signs(X))


def cluster_spectrum(values, tol):
    """Group consecutive eigenvalues with relative gap ``(l_{j+1} - l_j) / l_{j+1} < tol``."""
    values = np.asarray(values)
    groups = []
    start = 0
    for j in range(1, len(values) + 1):
        if j == len(values) or abs(values[j] - values[j - 1]) / abs(values[j]) >= tol:
            groups.append(Group(start, j - start))
            start = j
    return SpectrumStructure(groups, tol)
