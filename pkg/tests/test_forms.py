import math

import numpy as np
import pytest

from heatda.checks import check_integration_by_parts, check_symmetry
from heatda.elements import assemble_mass, assemble_stiffness
from heatda.forms import (
    NormKind, NormWindow, Variant, build_stabilizers, constraint_form_G, error_norm,
    jump_stabilizer_matrix, jump_time_integral_matrix, triple_norm,
)
from heatda.mesh import Region, build_structured_mesh
from heatda.spaces import SpaceKind, SpaceTimeField, TimeBasis, TimeGrid, build_dofmap, nodal_interpolate, zeros

OMEGA = Region(0.25, 0.75, 0.25, 0.75)


def _affine(mesh):
    return 0.3 + 1.2 * mesh.vertices[:, 0] - 0.7 * mesh.vertices[:, 1]


def test_jump_vanishes_on_affine(mesh8):
    u = _affine(mesh8)
    assert abs(u @ (jump_stabilizer_matrix(mesh8) @ u)) < 1e-12


def test_jump_matches_face_loop():
    mesh = build_structured_mesh(2)
    u = np.zeros(mesh.n_vertices)
    u[4] = 1.0  # центральная вершина
    expected = 0.0
    for f in mesh.internal_faces:
        gl = mesh.basis_gradients[f.left].T @ u[mesh.triangles[f.left]]
        gr = mesh.basis_gradients[f.right].T @ u[mesh.triangles[f.right]]
        expected += mesh.h * f.length * float(np.dot(gl - gr, f.normal)) ** 2
    got = float(u @ (jump_stabilizer_matrix(mesh) @ u))
    assert got == pytest.approx(expected, abs=1e-13)
    assert got > 0


def test_integration_by_parts_identity():
    ok, detail = check_integration_by_parts()
    assert ok, detail


def test_form_symmetry():
    ok, detail = check_symmetry()
    assert ok, detail


def _random_pair(variant, mesh, grid, rng):
    pair = build_stabilizers(variant, mesh, grid)
    u = SpaceTimeField(TimeBasis.P1, pair.primal, grid, rng.standard_normal((grid.n_slabs + 1, pair.primal.n_dofs)))
    z = SpaceTimeField(TimeBasis.P0, pair.dual, grid, rng.standard_normal((grid.n_slabs, pair.dual.n_dofs)))
    return pair, u, z


def test_constraint_form_constant_u(mesh4, rng):
    grid = TimeGrid(1.0, 3)
    pair, _, z = _random_pair(Variant.UNSTABLE, mesh4, grid, rng)
    u = SpaceTimeField(TimeBasis.P1, pair.primal, grid, np.full((4, pair.primal.n_dofs), 2.5))
    assert abs(constraint_form_G(u, z, mesh4)) < 1e-12


def test_constraint_form_bilinear(mesh4, rng):
    grid = TimeGrid(1.0, 3)
    pair, u1, z = _random_pair(Variant.UNSTABLE, mesh4, grid, rng)
    _, u2, _ = _random_pair(Variant.UNSTABLE, mesh4, grid, rng)
    lhs = constraint_form_G(u1 + u2, z, mesh4)
    rhs = constraint_form_G(u1, z, mesh4) + constraint_form_G(u2, z, mesh4)
    assert lhs == pytest.approx(rhs, abs=1e-12 * max(1.0, abs(lhs)))


def test_constraint_form_grid_mismatch(mesh4, rng):
    _, u, _ = _random_pair(Variant.UNSTABLE, mesh4, TimeGrid(1.0, 3), rng)
    _, _, z = _random_pair(Variant.UNSTABLE, mesh4, TimeGrid(1.0, 4), rng)
    with pytest.raises(ValueError):
        constraint_form_G(u, z, mesh4)


def test_unstable_kernel_is_affine_constant(mesh8):
    grid = TimeGrid(1.0, 4)
    pair = build_stabilizers(Variant.UNSTABLE, mesh8, grid)
    u = SpaceTimeField(TimeBasis.P1, pair.primal, grid, np.tile(_affine(mesh8), (5, 1)))
    assert abs(pair.s(u)) < 1e-12
    assert pair.seminorm(u) < 1e-6


def test_stable_seminorm_separates_dt(mesh8):
    grid = TimeGrid(0.5, 4)
    pair = build_stabilizers(Variant.STABLE, mesh8, grid)
    u = nodal_interpolate(lambda t, x, y: t * np.sin(np.pi * x) * np.sin(np.pi * y), mesh8, grid, SpaceKind.DIRICHLET)
    assert abs(pair.s(u)) < 1e-14
    assert pair.seminorm(u) > 0


def test_unstable_stabilizer_decomposition(mesh4, rng):
    grid = TimeGrid(1.0, 4)
    pair, u, _ = _random_pair(Variant.UNSTABLE, mesh4, grid, rng)
    jump_part = u.flat @ (jump_time_integral_matrix(mesh4, grid, pair.primal) @ u.flat)
    U, tau = u.coeffs, grid.tau
    M = assemble_mass(mesh4)
    dU = np.diff(U, axis=0)
    dt_part = mesh4.h**2 / tau * float(np.sum(dU * (M @ dU.T).T))
    assert pair.s(u) == pytest.approx(jump_part + dt_part, rel=1e-13)


def test_jump_dual_variant_uses_jump_on_w(mesh4):
    grid = TimeGrid(1.0, 2)
    pair = build_stabilizers(Variant.UNSTABLE_JUMP_DUAL, mesh4, grid)
    z = nodal_interpolate(lambda t, x, y: x * (1 - x) * y * (1 - y), mesh4, grid, SpaceKind.DIRICHLET, TimeBasis.P0)
    J = pair.dual.restrict(jump_stabilizer_matrix(mesh4))
    expected = grid.tau * sum(float(row @ (J @ row)) for row in z.coeffs)
    assert pair.s_star(z) == pytest.approx(expected, rel=1e-13)
    # положительно определена на W_h
    assert np.all(np.linalg.eigvalsh(J.toarray()) > 0)


def test_dual_norm_is_stiffness_norm(mesh4, rng):
    grid = TimeGrid(1.0, 2)
    pair, _, z = _random_pair(Variant.UNSTABLE, mesh4, grid, rng)
    K = pair.dual.restrict(assemble_stiffness(mesh4))
    expected = math.sqrt(grid.tau * sum(float(r @ (K @ r)) for r in z.coeffs))
    assert pair.dual_norm(z) == pytest.approx(expected, rel=1e-13)


def test_triple_norm_properties(mesh4, rng):
    grid = TimeGrid(1.0, 2)
    pair, u1, z1 = _random_pair(Variant.UNSTABLE, mesh4, grid, rng)
    _, u2, z2 = _random_pair(Variant.UNSTABLE, mesh4, grid, rng)
    assert triple_norm(zeros(TimeBasis.P1, pair.primal, grid), zeros(TimeBasis.P0, pair.dual, grid), pair, OMEGA) == 0
    lhs = triple_norm(u1 + u2, z1 + z2, pair, OMEGA)
    assert lhs <= triple_norm(u1, z1, pair, OMEGA) + triple_norm(u2, z2, pair, OMEGA) + 1e-12


# ========== Нормы ошибок ==========

class _ConstantInTime:
    def u(self, t, x, y):
        return np.sin(np.pi * x) * np.sin(np.pi * y)

    def grad(self, t, x, y):
        return np.pi * np.cos(np.pi * x) * np.sin(np.pi * y), np.pi * np.sin(np.pi * x) * np.cos(np.pi * y)

    def dt(self, t, x, y):
        return 0.0 * x


def test_error_norm_zero(mesh4):
    grid = TimeGrid(1.0, 4)
    e = zeros(TimeBasis.P1, build_dofmap(mesh4, SpaceKind.FULL), grid)
    for kind in NormKind:
        assert error_norm(e, NormWindow(0.25, 0.75, Region.full(), kind), mesh4, grid) == 0.0


def test_l2h1_of_sine_constant_in_time():
    mesh, grid = build_structured_mesh(16), TimeGrid(0.5, 4)
    T = grid.T
    value = error_norm(_ConstantInTime(), NormWindow(0.0, T, Region.full(), NormKind.L2H1), mesh, grid)
    assert value == pytest.approx(math.sqrt(T * (0.25 + math.pi**2 / 2)), rel=1e-4)
    cint = error_norm(_ConstantInTime(), NormWindow(0.0, T, Region.full(), NormKind.CINT_L2), mesh, grid)
    assert cint == pytest.approx(0.5, rel=1e-4)


def test_h1hm1_vanishes_for_constant_in_time(mesh8):
    grid = TimeGrid(1.0, 4)
    e = nodal_interpolate(lambda t, x, y: np.sin(np.pi * x) * np.sin(np.pi * y), mesh8, grid, SpaceKind.FULL)
    w = NormWindow(0.25, 1.0, Region.full(), NormKind.H1HM1)
    assert error_norm(e, w, mesh8, grid) == 0.0
    assert error_norm(_ConstantInTime(), w, mesh8, grid) == 0.0


def test_discrete_and_exact_norms_agree_for_linear_in_time(mesh8):
    # поле, линейное по t и по пространству, представимо точно: обе ветви совпадают
    grid = TimeGrid(1.0, 4)

    class Linear:
        def u(self, t, x, y):
            return 2.0 * t + x - y

        def grad(self, t, x, y):
            return 1.0 + 0.0 * x, -1.0 + 0.0 * y

        def dt(self, t, x, y):
            return 2.0 + 0.0 * x

    lin = Linear()
    e = nodal_interpolate(lin.u, mesh8, grid, SpaceKind.FULL)
    for kind in (NormKind.L2L2, NormKind.L2H1, NormKind.CINT_L2, NormKind.H1HM1):
        w = NormWindow(0.25, 0.75, Region(0.25, 0.75, 0.0, 1.0), kind)
        assert error_norm(e, w, mesh8, grid) == pytest.approx(error_norm(lin, w, mesh8, grid), rel=1e-10)


def test_misaligned_window_rejected(mesh8):
    grid = TimeGrid(1.0, 4)
    e = zeros(TimeBasis.P1, build_dofmap(mesh8, SpaceKind.FULL), grid)
    with pytest.raises(ValueError):
        error_norm(e, NormWindow(0.3, 0.75, Region.full(), NormKind.L2L2), mesh8, grid)
    with pytest.raises(ValueError):
        error_norm(e, NormWindow(0.25, 0.75, Region(0.1, 0.5, 0.0, 1.0), NormKind.L2L2), mesh8, grid)
