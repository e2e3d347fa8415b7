"""P1 assembly of the affine plane-strain stiffness blocks and the mass matrix."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh

SHEAR = "shear"
DILATATION = "dilatation"

# Voigt strain (exx, eyy, 2 exy)
_D_SHEAR = np.diag([2.0, 2.0, 1.0])  # 2 eps(u):eps(v)
_D_DIL = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 0.0]])  # div u div v


@dataclass
class AffineOperator:
    """Parameter-independent stiffness blocks ``A_q`` and the mass matrix ``M``.

    Block ``2 s`` is the shear block of subdomain ``s`` and block ``2 s + 1``
    its dilatation block, matching the coefficient order of
    :func:`rbeig.parameter.theta`.
    """

    blocks: list
    tags: list  # (subdomain, kind) per block
    mass: sp.csr_matrix
    mesh: Mesh = field(repr=False, default=None)

    @property
    def n_dofs(self):
        return self.mass.shape[0]

    @property
    def Q(self):
        return len(self.blocks)

    def stiffness(self, theta):
        """Sparse ``sum_q theta_q A_q``."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.Q,):
            raise ValueError(f"expected {self.Q} coefficients, got {theta.shape}")
        A = self.blocks[0] * theta[0]
        for t, Aq in zip(theta[1:], self.blocks[1:]):
            A = A + t * Aq
        return A.tocsr()


def p1_gradients(mesh: Mesh):
    """Barycentric gradients (n_tri, 3, 2) and triangle areas."""
    p = mesh.vertices[mesh.triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    if np.any(np.abs(det) <= 1e-300):
        raise ValueError("degenerate triangle (zero area)")
    inv = np.empty((len(det), 2, 2))
    inv[:, 0, 0] = d2[:, 1] / det
    inv[:, 0, 1] = -d2[:, 0] / det
    inv[:, 1, 0] = -d1[:, 1] / det
    inv[:, 1, 1] = d1[:, 0] / det
    # grad(lambda_1), grad(lambda_2) are the rows of inv(J)
    g12 = inv
    g0 = -(g12[:, 0] + g12[:, 1])
    grads = np.stack([g0, g12[:, 0], g12[:, 1]], axis=1)
    return grads, 0.5 * det


def strain_matrices(grads):
    """Voigt strain-displacement matrices (n_tri, 3, 6), local dofs (v0x, v0y, v1x, ...)."""
    n = len(grads)
    B = np.zeros((n, 3, 6))
    B[:, 0, 0::2] = grads[:, :, 0]
    B[:, 1, 1::2] = grads[:, :, 1]
    B[:, 2, 0::2] = grads[:, :, 1]
    B[:, 2, 1::2] = grads[:, :, 0]
    return B


def _local_dofs(mesh: Mesh):
    idx = mesh.dof_map[mesh.triangles]  # (n_tri, 3, 2)
    return idx.reshape(len(mesh.triangles), 6)


def scatter(mesh: Mesh, element_matrices, mask=None):
    """Sum element matrices into the free-dof matrix, dropping clamped rows/columns."""
    dofs = _local_dofs(mesh)
    Ke = element_matrices
    if mask is not None:
        dofs, Ke = dofs[mask], Ke[mask]
    Ke = 0.5 * (Ke + np.swapaxes(Ke, 1, 2))
    rows = np.repeat(dofs, 6, axis=1).ravel()
    cols = np.tile(dofs, (1, 6)).ravel()
    vals = Ke.ravel()
    keep = (rows >= 0) & (cols >= 0)
    n = mesh.n_dofs
    A = sp.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, n)).tocsr()
    A.sum_duplicates()
    # bitwise symmetric regardless of the duplicate summation order
    return ((A + A.T) * 0.5).tocsr()


def element_mass(areas):
    base = (np.ones((3, 3)) + np.eye(3)) / 12.0
    Me = np.zeros((len(areas), 6, 6))
    for c in (0, 1):
        Me[:, c::2, c::2] = areas[:, None, None] * base
    return Me


def assemble(mesh: Mesh) -> AffineOperator:
    """Assemble shear/dilatation blocks per subdomain and the L2 mass matrix."""
    grads, areas = p1_gradients(mesh)
    if np.any(areas <= 0):
        raise ValueError("degenerate or inverted triangle")
    B = strain_matrices(grads)
    Ks = areas[:, None, None] * np.einsum("tki,kl,tlj->tij", B, _D_SHEAR, B)
    Kd = areas[:, None, None] * np.einsum("tki,kl,tlj->tij", B, _D_DIL, B)
    blocks, tags = [], []
    for s in range(mesh.n_subdomains):
        mask = mesh.subdomain == s
        blocks.append(scatter(mesh, Ks, mask))
        tags.append((s, SHEAR))
        blocks.append(scatter(mesh, Kd, mask))
        tags.append((s, DILATATION))
    mass = scatter(mesh, element_mass(areas))
    return AffineOperator(blocks, tags, mass, mesh)


def plane_strain_matrix(E, nu):
    """Voigt constitutive matrix of isotropic plane strain."""
    lam = E * nu / ((1 + nu) * (1 - 2 * nu))
    mu = E / (2 * (1 + nu))
    return np.array([[lam + 2 * mu, lam, 0.0], [lam, lam + 2 * mu, 0.0], [0.0, 0.0, mu]])


def assemble_direct(mesh: Mesh, E, nu):
    """Single-pass stiffness ``a(., .; mu)`` with per-subdomain ``E``, ``nu``."""
    grads, areas = p1_gradients(mesh)
    B = strain_matrices(grads)
    D = np.stack([plane_strain_matrix(E[s], nu[s]) for s in mesh.subdomain])
    Ke = areas[:, None, None] * np.einsum("tki,tkl,tlj->tij", B, D, B)
    return scatter(mesh, Ke)
