import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import dblquad

from rbeig.fem import DILATATION, SHEAR, assemble, assemble_direct
from rbeig.mesh import GeometryError, GeometrySpec, Mesh, Rectangle, beam3, build_mesh, wallslab
from rbeig.parameter import theta


def unit_square(h=0.5):
    return GeometrySpec((Rectangle((0.0, 1.0), (0.0, 1.0), 0),), (((0.0, 0.0), (0.0, 1.0)),), h)


def test_unit_square_counts():
    m = build_mesh(unit_square())
    assert len(m.vertices) == 9
    assert len(m.triangles) == 8
    assert m.dirichlet.sum() == 3
    assert m.n_dofs == 12
    assert np.all(m.signed_areas() > 0)


def test_dof_map_is_a_bijection_onto_free_dofs():
    m = build_mesh(unit_square(0.25))
    free = m.dof_map[~m.dirichlet]
    assert np.all(m.dof_map[m.dirichlet] == -1)
    assert sorted(free.ravel()) == list(range(m.n_dofs))


def test_beam_preset(coarse_mesh):
    m = coarse_mesh
    assert m.n_subdomains == 3
    assert set(np.unique(m.subdomain)) == {0, 1, 2}
    assert np.all(m.signed_areas() > 0)
    # clamped exactly on x = 0 and x = 3
    x = m.vertices[:, 0]
    assert np.array_equal(m.dirichlet, np.isclose(x, 0.0) | np.isclose(x, 3.0))
    # interface x = 1 carries vertices shared by triangles of subdomains 0 and 1
    iface = np.flatnonzero(np.isclose(x, 1.0))
    for v in iface:
        owners = set(m.subdomain[np.any(m.triangles == v, axis=1)])
        assert owners == {0, 1}


def test_beam_desk_size():
    assert build_mesh(beam3()).n_dofs == 2990


def test_wallslab_connected_three_subdomains():
    m = build_mesh(wallslab(0.2))
    assert m.n_subdomains == 3
    assert np.all(m.signed_areas() > 0)
    # the thin layer is resolved by at least one cell row
    c = m.vertices[m.triangles].mean(axis=1)
    layer = m.subdomain == 1
    assert np.all((c[layer, 1] > 2.8) & (c[layer, 1] < 3.0))
    assert layer.any()


@pytest.mark.parametrize(
    "spec",
    [
        # overlapping rectangles
        GeometrySpec(
            (Rectangle((0.0, 1.0), (0.0, 1.0), 0), Rectangle((0.5, 1.5), (0.0, 1.0), 1)), (((0.0, 0.0), (0.0, 1.0)),), 0.25
        ),
        # empty Dirichlet set
        GeometrySpec((Rectangle((0.0, 1.0), (0.0, 1.0), 0),), (), 0.25),
        # mesh_h larger than the smallest side
        GeometrySpec((Rectangle((0.0, 1.0), (0.0, 0.1), 0),), (((0.0, 0.0), (0.0, 0.1)),), 0.5),
        # disconnected union
        GeometrySpec(
            (Rectangle((0.0, 1.0), (0.0, 1.0), 0), Rectangle((2.0, 3.0), (0.0, 1.0), 1)), (((0.0, 0.0), (0.0, 1.0)),), 0.25
        ),
        # Dirichlet segment off the boundary
        GeometrySpec((Rectangle((0.0, 1.0), (0.0, 1.0), 0),), (((0.5, 0.0), (0.5, 1.0)),), 0.25),
    ],
)
def test_invalid_geometry(spec):
    with pytest.raises(GeometryError):
        build_mesh(spec)


def test_geometry_dict_round_trip():
    g = wallslab()
    assert GeometrySpec.from_dict(g.to_dict()) == g


def test_beam_has_six_blocks(coarse_op):
    assert coarse_op.Q == 6
    assert coarse_op.tags == [(0, SHEAR), (0, DILATATION), (1, SHEAR), (1, DILATATION), (2, SHEAR), (2, DILATATION)]


def test_blocks_exactly_symmetric(coarse_op):
    for A in coarse_op.blocks + [coarse_op.mass]:
        assert abs(A - A.T).max() == 0.0


def test_blocks_psd_mass_pd(coarse_op, rng):
    for _ in range(100):
        v = rng.standard_normal(coarse_op.n_dofs)
        for A in coarse_op.blocks:
            q = v @ (A @ v)
            assert q >= -1e-12 * abs(v @ (sum(coarse_op.blocks) @ v))
        assert v @ (coarse_op.mass @ v) > 0


def test_block_support_matches_subdomain(coarse_mesh, coarse_op):
    m = coarse_mesh
    for (s, _), A in zip(coarse_op.tags, coarse_op.blocks):
        verts = np.unique(m.triangles[m.subdomain == s])
        allowed = np.zeros(m.n_dofs, bool)
        d = m.dof_map[verts].ravel()
        allowed[d[d >= 0]] = True
        rows = np.flatnonzero(np.diff(sp.csr_matrix(A).indptr))
        assert allowed[rows].all()


def test_rigid_translation_has_no_energy():
    # no Dirichlet vertex touches the interior patch [1, 2] x [0, 1] of a beam clamped at 0 and 3
    m = build_mesh(beam3(0.25))
    op = assemble(m)
    inside = np.flatnonzero((m.vertices[:, 0] >= 1 - 1e-12) & (m.vertices[:, 0] <= 2 + 1e-12))
    v = np.zeros(m.n_dofs)
    v[m.dof_map[inside, 0]] = 1.0
    for s, A in zip(op.tags, op.blocks):
        if s[0] == 1:
            assert abs(v @ (A @ v)) < 1e-12


def test_single_element_mass_matches_quadrature():
    m = Mesh(
        vertices=np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
        triangles=np.array([[0, 1, 2]]),
        subdomain=np.array([0]),
        dirichlet=np.zeros(3, bool),
        dof_map=np.arange(6).reshape(3, 2),
    )
    M = assemble(m).mass.toarray()
    phi = [lambda x, y: 1 - x - y, lambda x, y: x, lambda x, y: y]
    for a in range(3):
        for b in range(3):
            ref, _ = dblquad(lambda y, x: phi[a](x, y) * phi[b](x, y), 0, 1, 0, lambda x: 1 - x)
            assert M[2 * a, 2 * b] == pytest.approx(ref, rel=1e-12)
            assert M[2 * a + 1, 2 * b + 1] == pytest.approx(ref, rel=1e-12)
            assert M[2 * a, 2 * b + 1] == 0.0
    # area / 6 on the diagonal, area / 12 off it
    assert M[0, 0] == pytest.approx(1 / 12)
    assert M[0, 2] == pytest.approx(1 / 24)


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_partition_property(coarse_mesh, coarse_op, seed):
    r = np.random.default_rng(seed)
    E = r.uniform(10, 100, 3)
    nu = r.uniform(0.1, 0.4, 3)
    mu = np.column_stack([E, nu]).ravel()
    A = coarse_op.stiffness(theta(mu))
    B = assemble_direct(coarse_mesh, E, nu)
    assert abs(A - B).max() <= 1e-12 * abs(B).max()


def test_unit_coefficients_give_shear_only(coarse_mesh, coarse_op):
    # E = 1, nu = 0: the dilatation coefficient vanishes
    th = theta(np.tile([1.0, 0.0], 3))
    A = coarse_op.stiffness(th)
    B = assemble_direct(coarse_mesh, np.ones(3), np.zeros(3))
    assert abs(A - B).max() <= 1e-12 * abs(B).max()


def test_stiffness_rejects_wrong_length(coarse_op):
    with pytest.raises(ValueError):
        coarse_op.stiffness(np.ones(5))
