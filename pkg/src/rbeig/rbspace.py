"""M-orthonormal reduced basis with incrementally maintained reduced blocks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eigensolve import EigenSolveError, m_orthonormalize, solve_reduced
from .parameter import theta as _theta

DRIFT_TOL = 1e-8


@dataclass
class ReducedEigenSolution:
    values: np.ndarray
    coeffs: np.ndarray  # (N, count), orthonormal columns
    basis: "ReducedBasis"

    def lift(self, i=None):
        if i is None:
            return self.basis.Z @ self.coeffs
        return self.basis.Z @ self.coeffs[:, i]


class ReducedBasis:
    """Columns ``zeta_1..zeta_N`` with ``Z^T M Z = I`` and blocks ``Z^T A_q Z``.

    The reduced mass matrix is the identity and is never stored.
    """

    def __init__(self, op, capacity=64):
        self.op = op
        self._Z = np.zeros((op.n_dofs, capacity))
        self._MZ = np.zeros((op.n_dofs, capacity))
        self._blocks = np.zeros((op.Q, capacity, capacity))
        self.N = 0
        self.provenance = []
        self.listeners = []

    @property
    def Z(self):
        return self._Z[:, : self.N]

    @property
    def MZ(self):
        return self._MZ[:, : self.N]

    @property
    def blocks(self):
        return self._blocks[:, : self.N, : self.N]

    def _grow(self):
        cap = self._Z.shape[1]
        if self.N < cap:
            return
        new = 2 * cap
        Z = np.zeros((self._Z.shape[0], new))
        MZ = np.zeros_like(Z)
        B = np.zeros((self.op.Q, new, new))
        Z[:, :cap] = self._Z
        MZ[:, :cap] = self._MZ
        B[:, :cap, :cap] = self._blocks
        self._Z, self._MZ, self._blocks = Z, MZ, B

    def project(self, v):
        """M-orthogonal projection: coefficients ``Z^T M v`` and ``||v - Pi v||_M``."""
        v = np.asarray(v, dtype=float)
        c = self.MZ.T @ v
        r = v - self.Z @ c
        return c, float(np.sqrt(max(r @ (self.op.mass @ r), 0.0)))

    def _orthogonal_part(self, v):
        w = np.array(v, dtype=float, copy=True)
        for _ in range(2):
            if self.N:
                w -= self.Z @ (self.MZ.T @ w)
        return w

    def extend(self, candidate, eps_proj=1e-6, info=None):
        """Append the normalized M-orthogonal part of ``candidate`` if it is >= ``eps_proj``."""
        candidate = np.asarray(candidate, dtype=float)
        _, res = self.project(candidate)
        if res < eps_proj:
            return False
        w = self._orthogonal_part(candidate)
        Mw = self.op.mass @ w
        w /= np.sqrt(w @ Mw)
        Mw = self.op.mass @ w
        self._append(w, Mw, info)
        if self.N > 1:
            drift = np.max(np.abs(self.MZ[:, :-1].T @ w))
            if drift > DRIFT_TOL:
                self.reorthonormalize()
        return True

    def _append(self, w, Mw, info):
        self._grow()
        n = self.N
        self._Z[:, n] = w
        self._MZ[:, n] = Mw
        for q, Aq in enumerate(self.op.blocks):
            col = self._Z[:, : n + 1].T @ (Aq @ w)
            self._blocks[q, : n + 1, n] = col
            self._blocks[q, n, : n + 1] = col
        self.N += 1
        self.provenance.append(dict(info or {}))
        for cb in self.listeners:
            cb(self, n)

    def reorthonormalize(self):
        """Full MGS pass over all columns, then recompute every reduced block."""
        Z = m_orthonormalize(self.Z, self.op.mass)
        n = self.N
        self._Z[:, :n] = Z
        self._MZ[:, :n] = self.op.mass @ Z
        for q, Aq in enumerate(self.op.blocks):
            B = Z.T @ (Aq @ Z)
            self._blocks[q, :n, :n] = 0.5 * (B + B.T)
        for cb in self.listeners:
            cb(self, None)

    def orthonormality_error(self):
        return float(np.max(np.abs(self.MZ.T @ self.Z - np.eye(self.N)))) if self.N else 0.0

    def reduced_stiffness(self, th):
        th = np.asarray(th, dtype=float)
        return np.tensordot(th, self.blocks, axes=1)

    def solve_at(self, mu=None, count=None, theta=None):
        """Reduced eigenpairs at ``mu`` (or at given affine coefficients ``theta``)."""
        th = _theta(mu) if theta is None else theta
        count = self.N if count is None else count
        if count > self.N:
            raise EigenSolveError(f"requested {count} reduced eigenpairs but N = {self.N}")
        sol = solve_reduced(self.reduced_stiffness(th), None, count)
        return ReducedEigenSolution(sol.values, sol.vectors, self)

    def truncated(self, N):
        """Nested sub-basis of the first ``N`` columns."""
        if N > self.N:
            raise ValueError(f"cannot truncate a basis of size {self.N} to {N}")
        out = ReducedBasis(self.op, capacity=max(N, 1))
        out._Z[:, :N] = self._Z[:, :N]
        out._MZ[:, :N] = self._MZ[:, :N]
        out._blocks[:, :N, :N] = self._blocks[:, :N, :N]
        out.N = N
        out.provenance = list(self.provenance[:N])
        return out

    @classmethod
    def from_columns(cls, op, columns, infos=None, eps_proj=0.0):
        basis = cls(op, capacity=max(8, columns.shape[1]))
        infos = infos or [None] * columns.shape[1]
        for k in range(columns.shape[1]):
            basis.extend(columns[:, k], eps_proj, infos[k])
        return basis


class ReducedModel:
    """Online-only view: reduced blocks without detailed matrices (loaded containers)."""

    def __init__(self, blocks, Z=None):
        self._blocks = np.asarray(blocks)
        self.Z = Z
        self.N = self._blocks.shape[1]

    @property
    def blocks(self):
        return self._blocks

    reduced_stiffness = ReducedBasis.reduced_stiffness

    def solve_at(self, mu=None, count=None, theta=None):
        th = _theta(mu) if theta is None else theta
        count = self.N if count is None else count
        if count > self.N:
            raise EigenSolveError(f"requested {count} reduced eigenpairs but N = {self.N}")
        sol = solve_reduced(self.reduced_stiffness(th), None, count)
        return ReducedEigenSolution(sol.values, sol.vectors, self)

    def truncated(self, N):
        return ReducedModel(self._blocks[:, :N, :N], None if self.Z is None else self.Z[:, :N])
