import numpy as np
import pytest

from heatda.elements import evaluate, gradient_at
from heatda.mesh import TriMesh, build_structured_mesh
from heatda.spaces import (
    BoundaryViolationError, DegenerateMeshError, SpaceKind, SpaceTimeField, TimeBasis, TimeGrid,
    build_dofmap, dirichlet_stiffness, nodal_interpolate, ritz_project, time_derivative, zeros,
)


def test_dofmap_counts(mesh4):
    full = build_dofmap(mesh4, SpaceKind.FULL)
    dirichlet = build_dofmap(mesh4, SpaceKind.DIRICHLET)
    assert full.n_dofs == 25
    assert dirichlet.n_dofs == 9
    free = dirichlet.vertex_to_dof[dirichlet.vertex_to_dof >= 0]
    assert sorted(free.tolist()) == list(range(9))
    assert np.all(dirichlet.vertex_to_dof[mesh4.boundary_vertex_flags] == -1)


def test_time_grid():
    grid = TimeGrid.for_mesh(0.5, 16)
    assert grid.n_slabs == 8
    assert np.allclose(np.diff(grid.nodes), grid.tau, atol=1e-14)
    assert grid.index_of(0.25) == 4
    with pytest.raises(ValueError):
        grid.index_of(0.3)
    with pytest.raises(ValueError):
        TimeGrid.for_mesh(0.3, 8)


def test_field_shape_checked(mesh4):
    grid = TimeGrid(1.0, 4)
    dm = build_dofmap(mesh4, SpaceKind.FULL)
    with pytest.raises(ValueError):
        SpaceTimeField(TimeBasis.P1, dm, grid, np.zeros((4, dm.n_dofs)))
    assert zeros(TimeBasis.P0, dm, grid).coeffs.shape == (4, 25)


def test_interpolate_zero_and_affine():
    mesh = build_structured_mesh(2)
    grid = TimeGrid(1.0, 2)
    u = nodal_interpolate(lambda t, x, y: 0.0 * x, mesh, grid, SpaceKind.FULL)
    assert not np.any(u.coeffs)
    v = nodal_interpolate(lambda t, x, y: x, mesh, grid, SpaceKind.FULL)
    for row in v.coeffs:
        assert np.array_equal(row, mesh.vertices[:, 0])


def test_p0_interpolation_uses_midpoints(mesh4):
    grid = TimeGrid(1.0, 4)
    z = nodal_interpolate(lambda t, x, y: t + 0.0 * x, mesh4, grid, SpaceKind.FULL, TimeBasis.P0)
    assert np.allclose(z.coeffs[:, 0], grid.midpoints)


def test_dirichlet_interpolation_checks_boundary(mesh4):
    grid = TimeGrid(1.0, 2)
    with pytest.raises(BoundaryViolationError):
        nodal_interpolate(lambda t, x, y: 1.0 + 0.0 * x, mesh4, grid, SpaceKind.DIRICHLET)
    u = nodal_interpolate(lambda t, x, y: x * (1 - x) * y * (1 - y), mesh4, grid, SpaceKind.DIRICHLET)
    assert u.coeffs.shape == (3, 9)


def test_interpolation_is_projection(mesh4, rng):
    values = rng.standard_normal(mesh4.n_vertices)
    grid = TimeGrid(1.0, 1)
    u = nodal_interpolate(lambda t, x, y: evaluate(mesh4, values, np.column_stack([x, y])),
                          mesh4, grid, SpaceKind.FULL)
    assert np.allclose(u.coeffs[0], values, atol=1e-13)


def test_ritz_of_discrete_function_is_identity(mesh4):
    dm = build_dofmap(mesh4, SpaceKind.DIRICHLET)
    hat = np.zeros(mesh4.n_vertices)
    hat[dm.dof_vertices[4]] = 1.0

    def f(x, y):
        pts = np.column_stack([np.ravel(x), np.ravel(y)])
        return evaluate(mesh4, hat, pts).reshape(np.shape(x))

    def grad_f(x, y):
        pts = np.column_stack([np.ravel(x), np.ravel(y)])
        g = gradient_at(mesh4, hat, pts)
        return g[:, 0].reshape(np.shape(x)), g[:, 1].reshape(np.shape(x))

    coeffs = ritz_project(f, grad_f, mesh4)
    assert np.allclose(coeffs, hat[dm.dof_vertices], atol=1e-12)


def test_ritz_requires_boundary_zero(mesh4):
    with pytest.raises(BoundaryViolationError):
        ritz_project(lambda x, y: 1.0 + 0.0 * x, lambda x, y: (0.0 * x, 0.0 * y), mesh4)


def test_degenerate_mesh():
    mesh = TriMesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]))
    with pytest.raises(DegenerateMeshError):
        dirichlet_stiffness(mesh)


def test_time_derivative(mesh4):
    grid = TimeGrid(1.0, 4)
    dm = build_dofmap(mesh4, SpaceKind.FULL)
    const = SpaceTimeField(TimeBasis.P1, dm, grid, np.ones((5, dm.n_dofs)))
    assert not np.any(time_derivative(const).coeffs)

    slope = 3.0
    lin = nodal_interpolate(lambda t, x, y: slope * t + x, mesh4, grid, SpaceKind.FULL)
    d = time_derivative(lin)
    assert d.basis == TimeBasis.P0
    assert np.allclose(d.coeffs, slope, atol=1e-12)
    # телескопическая сумма
    assert np.allclose(grid.tau * d.coeffs.sum(axis=0), lin.coeffs[-1] - lin.coeffs[0], atol=1e-12)

    with pytest.raises(ValueError):
        time_derivative(d)


def test_field_arithmetic_requires_same_space(mesh4):
    grid = TimeGrid(1.0, 2)
    a = zeros(TimeBasis.P1, build_dofmap(mesh4, SpaceKind.FULL), grid)
    b = zeros(TimeBasis.P1, build_dofmap(mesh4, SpaceKind.DIRICHLET), grid)
    with pytest.raises(ValueError):
        a - b
    assert np.array_equal((2.0 * (a + a)).coeffs, a.coeffs)
