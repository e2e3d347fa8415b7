"""A-posteriori eigenvalue error estimation with offline/online split.

Offline: Riesz representers of ``a_q(zeta_n, .)`` and ``m(zeta_n, .)`` in the
reference energy product and their Gram blocks.  Online: residual dual norms
from the Gram blocks at ``O(Q^2 N^2)`` cost, cluster-aware relative gaps and
the relative-error estimator.  The ``oracle_*`` functions use detailed
eigenpairs and are meant for verification only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .eigensolve import cluster_spectrum
from .parameter import coercivity_lower_bound, theta as _theta

R_CAP = 8


class EstimatorError(RuntimeError):
    pass


class OfflineEstimatorData:
    """Gram blocks ``G[q, p, n, m] = a_ref(xi_n^q, xi_m^p)``; slot ``q = 0`` is the mass term.

    Call :meth:`attach` to keep the data in sync with a growing basis: each
    new column costs ``Q + 1`` back-substitutions and one border update.
    """

    def __init__(self, op, mu_ref, capacity=64, keep_representers=True):
        self.op = op
        self.mu_ref = np.asarray(mu_ref, dtype=float)
        self.theta_ref = _theta(self.mu_ref)
        A_ref = op.stiffness(self.theta_ref).tocsc()
        try:
            self._lu = spla.splu(A_ref)
        except RuntimeError as exc:
            raise EstimatorError(f"reference stiffness factorization failed: {exc}") from exc
        self.Q = op.Q
        self._xi = np.zeros((capacity, self.Q + 1, op.n_dofs))  # column-major so borders are contiguous
        self._G = np.zeros((self.Q + 1, self.Q + 1, capacity, capacity))
        self.N = 0
        self._online = None

    @classmethod
    def from_gram(cls, gram, mu_ref):
        """Online-only instance (no factorization, no representers)."""
        self = cls.__new__(cls)
        self.op = None
        self.mu_ref = np.asarray(mu_ref, dtype=float)
        self.theta_ref = _theta(self.mu_ref)
        self.Q = gram.shape[0] - 1
        self._G = np.ascontiguousarray(gram)
        self._xi = None
        self._lu = None
        self.N = gram.shape[2]
        self._online = None
        return self

    @property
    def gram(self):
        return self._G[:, :, : self.N, : self.N]

    @property
    def representers(self):
        return np.moveaxis(self._xi[: self.N], 0, -1)

    def solve_ref(self, rhs):
        return self._lu.solve(np.asarray(rhs, dtype=float))

    def _grow(self):
        cap = self._G.shape[2]
        if self.N < cap:
            return
        new = 2 * cap
        xi = np.zeros((new,) + self._xi.shape[1:])
        G = np.zeros((self.Q + 1, self.Q + 1, new, new))
        xi[:cap] = self._xi
        G[:, :, :cap, :cap] = self._G
        self._xi, self._G = xi, G

    def add_column(self, zeta):
        """Border update for one new basis column."""
        self._grow()
        n = self.N
        ops = [self.op.mass] + list(self.op.blocks)
        rhs = np.column_stack([B @ zeta for B in ops])  # (n_dofs, Q + 1)
        xi_new = self._lu.solve(rhs)
        self._xi[n] = xi_new.T
        Q1 = self.Q + 1
        T = (self._xi[: n + 1].reshape(-1, self._xi.shape[2]) @ rhs).reshape(n + 1, Q1, Q1)
        # T[m, q, p] = xi_m^q . (A_p zeta_new)
        self._G[:, :, : n + 1, n] = T.transpose(1, 2, 0)
        self._G[:, :, n, : n + 1] = T.transpose(2, 1, 0)
        diag = self._G[:, :, n, n].copy()
        self._G[:, :, n, n] = 0.5 * (diag + diag.T)
        self.N += 1
        self._online = None

    def attach(self, basis):
        """Build for all current columns and follow future extensions."""
        self.N = 0
        for k in range(basis.N):
            self.add_column(basis.Z[:, k])

        def on_change(b, index):
            if index is None:
                self.N = 0
                for k in range(b.N):
                    self.add_column(b.Z[:, k])
            else:
                self.add_column(b.Z[:, index])

        basis.listeners.append(on_change)
        return self

    def truncated(self, N):
        return OfflineEstimatorData.from_gram(self._G[:, :, :N, :N].copy(), self.mu_ref)

    def _online_arrays(self):
        if self._online is None:
            N, Q = self.N, self.Q
            G = self.gram
            self._online = (
                np.ascontiguousarray(G[1:, 1:]).reshape(Q * Q, N * N),
                np.ascontiguousarray(G[1:, 0]).reshape(Q, N * N),
                np.ascontiguousarray(G[0, 0]),
            )
        return self._online

    def g(self, mu=None, theta=None):
        th = _theta(mu) if theta is None else np.asarray(theta)
        return float(np.min(th / self.theta_ref))


def offline_build(op, basis, mu_ref, follow=False):
    """Representers and Gram blocks for ``basis``; ``follow=True`` tracks later extensions."""
    data = OfflineEstimatorData(op, mu_ref, capacity=max(8, basis.N))
    if follow:
        return data.attach(basis)
    for k in range(basis.N):
        data.add_column(basis.Z[:, k])
    return data


def residual_dual_norm(data, theta, coeffs, values):
    """``||r_i||`` in the dual of the reference energy norm for reduced pairs (columns of ``coeffs``).

    Evaluated from the Gram blocks only (cost independent of the detailed size).
    """
    theta = np.asarray(theta, dtype=float)
    U = np.asarray(coeffs, dtype=float)
    squeeze = U.ndim == 1
    if squeeze:
        U = U[:, None]
    lam = np.atleast_1d(np.asarray(values, dtype=float))
    N = U.shape[0]
    if N != data.N:
        raise EstimatorError(f"coefficient length {N} does not match offline data N = {data.N}")
    G11, G10, G00 = data._online_arrays()
    Gtt = (np.outer(theta, theta).ravel() @ G11).reshape(N, N)
    H = (theta @ G10).reshape(N, N)
    scale = np.einsum("ni,ni->i", U, Gtt @ U)
    sq = scale - 2.0 * lam * np.einsum("ni,ni->i", U, H @ U) + lam**2 * np.einsum("ni,ni->i", U, G00 @ U)
    sq = np.where(sq < 1e-14 * np.maximum(scale, 1e-300), 0.0, sq)
    out = np.sqrt(np.maximum(sq, 0.0))
    return out[0] if squeeze else out


def distances(values, eps_lambda, K, r_cap=R_CAP):
    """Clusters ``K_hat_i`` and relative gaps ``d_i`` for the first ``K`` reduced eigenvalues.

    ``values`` must hold at least ``K + 1`` ascending reduced eigenvalues.
    Indices are 0-based.  Returns ``(clusters, d, r)``.
    """
    lam = np.asarray(values, dtype=float)
    avail = len(lam)
    if avail < K + 1:
        raise EstimatorError(f"need at least K+1 = {K + 1} reduced eigenvalues, have {avail}")
    r = 1

    def rel(j, i):
        return abs(lam[j] - lam[i]) / lam[j]

    # grow r while the (K + r)-th value still clusters with the K-th
    while rel(K + r - 1, K - 1) < eps_lambda:
        r += 1
        if r > r_cap:
            raise EstimatorError(f"cluster at index K exceeds the r cap ({r_cap})")
        if K + r > avail:
            raise EstimatorError(
                f"cluster at index K needs {K + r} reduced eigenvalues but N = {avail}; enlarge N_init"
            )
    top = K + r
    clusters, d = [], np.empty(K)
    for i in range(K):
        members = tuple(j for j in range(top) if rel(j, i) < eps_lambda)
        clusters.append(members)
        cand = [rel(l, i) for l in range(i + 1, top) if l not in members]
        if not cand:
            raise EstimatorError(f"no reduced eigenvalue separated from index {i}")
        d[i] = min(cand)
    return clusters, d, r


@dataclass
class EstimateReport:
    dual_norms: np.ndarray
    clusters: list
    d: np.ndarray
    g: float
    eta: np.ndarray
    r: int
    values: np.ndarray


def eta(data, mu, reduced, K, eps_lambda, theta=None, r_cap=R_CAP):
    """Relative-error estimators ``||r_i||^2 / (g d_i lam_i)`` for ``i < K``."""
    th = _theta(mu) if theta is None else np.asarray(theta)
    clusters, d, r = distances(reduced.values, eps_lambda, K, r_cap)
    lam = reduced.values[:K]
    norms = residual_dual_norm(data, th, reduced.coeffs[:, :K], lam)
    g = data.g(theta=th)
    with np.errstate(divide="ignore"):
        e = np.where(d > 0, norms**2 / (g * d * lam), np.nan)
    return EstimateReport(norms, clusters, d, g, e, r, lam)


def estimate(model, data, mu, K, eps_lambda, r_cap=R_CAP):
    """Reduced solve at ``mu`` plus the estimator; returns ``(reduced, report)``."""
    th = _theta(mu)
    count = min(model.N, K + r_cap)
    reduced = model.solve_at(theta=th, count=count)
    return reduced, eta(data, mu, reduced, K, eps_lambda, theta=th, r_cap=r_cap)


# --- detailed-scale diagnostics -------------------------------------------------


def detailed_residual(op, theta, u, lam):
    return op.stiffness(theta) @ u - lam * (op.mass @ u)


def reference_dual_norm_direct(data, op, theta, u, lam):
    """``||e_hat||_{a_ref}`` from a detailed Riesz solve (oracle for the decomposition)."""
    r = detailed_residual(op, theta, u, lam)
    e = data.solve_ref(r)
    return float(np.sqrt(max(r @ e, 0.0)))


def energy_dual_norm(op, theta, r):
    """Dual norm of a residual vector w.r.t. the parameter-dependent energy norm."""
    A = op.stiffness(theta).tocsc()
    e = spla.spsolve(A, r)
    return float(np.sqrt(max(r @ e, 0.0)))


@dataclass
class OracleBound:
    error: float  # lam_red - lam_{k_i}
    bound: float
    first_order: float  # ||r||^2 / d
    squared_gap_bound: float  # same two-term form with d^2 in the leading term
    dtilde: float


def _check_range(detailed, lam_red):
    if detailed.values[-1] <= lam_red:
        raise ValueError("detailed spectrum must extend beyond the reduced eigenvalue")


def oracle_bound(detailed, lam_red, index, r_energy, cluster_tol=1e-8):
    """Two-term eigenvalue bound using the detailed spectrum.

    ``index`` is the 0-based position of the reduced eigenvalue; it is
    compared with the first eigenvalue of the detailed cluster it falls in.
    ``r_energy`` is the residual dual norm in the parameter energy norm.
    """
    _check_range(detailed, lam_red)
    group = cluster_spectrum(detailed.values, cluster_tol).group_of(index)
    lam = detailed.values
    tail = lam[group.last + 1 :]
    if len(tail) == 0:
        raise ValueError("need detailed eigenvalues past the cluster")
    dt = float(np.min(np.abs(tail - lam_red) / tail))
    lam_k = lam[group.first]
    if dt == 0:
        return OracleBound(lam_red - lam_k, np.inf, np.inf, np.inf, dt)
    first = r_energy**2 / dt
    bound = first * (1.0 + r_energy / (dt**2 * np.sqrt(lam_k)))
    return OracleBound(lam_red - lam_k, bound, first, bound / dt, dt)


def oracle_eigenvector_bound(op, theta, detailed, u_red, lam_red, index, r_energy, cluster_tol=1e-8):
    """Returns ``(||u_red - Pi_i u_red||_a^2, ||r||^2 / dhat^2)`` with ``Pi_i`` onto the detailed eigenspace."""
    _check_range(detailed, lam_red)
    group = cluster_spectrum(detailed.values, cluster_tol).group_of(index)
    U = detailed.vectors[:, list(group.indices)]
    w = u_red - U @ (U.T @ (op.mass @ u_red))
    lhs = float(w @ (op.stiffness(theta) @ w))
    lam = detailed.values
    others = np.array([lam[l] for l in range(len(lam)) if l < group.first or l > group.last])
    dhat = float(np.min(np.abs(others - lam_red) / others))
    return max(lhs, 0.0), (r_energy**2 / dhat**2 if dhat > 0 else np.inf)


def g_ratio_oracle(op, mu, mu_ref):
    """``g(mu) / lambda_min(a(mu), a_ref)`` via a dense generalized eigensolve (small meshes)."""
    A = op.stiffness(_theta(mu)).toarray()
    Ar = op.stiffness(_theta(mu_ref)).toarray()
    lmin = sla.eigh(A, Ar, eigvals_only=True, subset_by_index=[0, 0])[0]
    return coercivity_lower_bound(mu, mu_ref) / lmin
