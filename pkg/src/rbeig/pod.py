"""Proper orthogonal decomposition of eigenfunction snapshots (method of snapshots)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .eigensolve import DEFAULT_TOL, EigenSolveError, cluster_spectrum, solve_detailed_past
from .parameter import theta
from .rbspace import ReducedBasis

RANK_TOL = 1e-12


class PODError(RuntimeError):
    pass


@dataclass
class SnapshotSet:
    vectors: np.ndarray  # (n_dofs, S), each M-normalized
    provenance: list  # dicts: mu_index, index, cluster
    points: np.ndarray
    n_solves: int = 0
    eigenvalues: list = field(default_factory=list)  # detailed spectra per point

    def __len__(self):
        return self.vectors.shape[1]


def collect_snapshots(op, points, K, eps_lambda, extended=True, tol=DEFAULT_TOL):
    """First ``K`` eigenfunctions per parameter, plus the rest of the cluster at ``K`` if ``extended``."""
    points = np.asarray(points, dtype=float)
    if len(points) == 0:
        raise PODError("empty POD training set")
    cols, prov, spectra = [], [], []
    for m, mu in enumerate(points):
        try:
            sol = solve_detailed_past(op, theta(mu), K - 1, eps_lambda, tol)
        except EigenSolveError as exc:
            raise PODError(f"detailed solve failed at mu[{m}] = {mu}: {exc}") from exc
        lam = sol.values
        take = K
        if extended:
            while take < len(lam) and abs(lam[take] - lam[K - 1]) / lam[K - 1] <= eps_lambda:
                take += 1
        structure = cluster_spectrum(lam, eps_lambda)
        for j in range(take):
            cols.append(sol.vectors[:, j])
            prov.append({"mu_index": m, "index": j, "cluster": structure.group_of(j).first})
        spectra.append(lam)
    return SnapshotSet(np.column_stack(cols), prov, points, len(points), spectra)


@dataclass
class PODResult:
    basis: ReducedBasis
    singular_values: np.ndarray  # correlation eigenvalues, descending
    trace: float


def correlation_matrix(vectors, M):
    C = vectors.T @ (M @ vectors)
    return 0.5 * (C + C.T)


def pod_compress(op, snapshots, N, clip=False):
    """L2-optimal ``N``-dimensional space for the snapshot set.

    ``clip=True`` lowers ``N`` to the numerical rank instead of raising.
    """
    V = snapshots.vectors if isinstance(snapshots, SnapshotSet) else np.asarray(snapshots)
    S = V.shape[1]
    if N > S and not clip:
        raise PODError(f"N = {N} exceeds the snapshot count {S}")
    C = correlation_matrix(V, op.mass)
    sig, W = sla.eigh(C)
    sig, W = sig[::-1], W[:, ::-1]
    trace = float(np.trace(C))
    rank = int(np.count_nonzero(sig > RANK_TOL * trace))
    if clip:
        N = min(N, rank)
    if N > rank:
        raise PODError(f"N = {N} exceeds the numerical rank {rank} of the snapshot set")
    modes = V @ (W[:, :N] / np.sqrt(sig[:N]))
    infos = [{"source": "pod", "mode": n, "sigma": float(sig[n])} for n in range(N)]
    basis = ReducedBasis(op, capacity=max(8, N))
    for n in range(N):
        if not basis.extend(modes[:, n], 0.0, infos[n]):
            raise PODError(f"POD mode {n} is numerically dependent")
    return PODResult(basis, sig, trace)


def projection_error(basis, vectors):
    """``sum_v ||v - Pi_N v||_M^2`` over the columns of ``vectors``."""
    M = basis.op.mass
    R = vectors - basis.Z @ (basis.MZ.T @ vectors)
    return float(np.einsum("ij,ij->", R, M @ R))


def subspace_projection_error(Q, M, vectors):
    """Projection error onto ``span(Q)`` for any full-rank ``Q`` (oracle helper)."""
    G = Q.T @ (M @ Q)
    c = np.linalg.solve(G, Q.T @ (M @ vectors))
    R = vectors - Q @ c
    return float(np.einsum("ij,ij->", R, M @ R))
