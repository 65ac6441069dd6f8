import numpy as np
import pytest
from scipy import sparse

import heatda.solver as solver
from heatda import config
from heatda.assembly import DataSpec, assemble_system
from heatda.forms import Variant, build_stabilizers
from heatda.mesh import Region, build_structured_mesh
from heatda.solver import SolverError, resolve_method, solve, solve_linear, space_time_preconditioner
from heatda.spaces import TimeGrid


def _bordered(rng, n_u=6, n_z=4):
    X = rng.standard_normal((n_u, n_u))
    P = X @ X.T + n_u * np.eye(n_u)
    Y = rng.standard_normal((n_z, n_z))
    C = Y @ Y.T + n_z * np.eye(n_z)
    B = rng.standard_normal((n_z, n_u))
    A = sparse.bmat([[sparse.csr_matrix(P), sparse.csr_matrix(B.T)], [sparse.csr_matrix(B), sparse.csr_matrix(-C)]])
    return A.tocsr(), rng.standard_normal(n_u + n_z)


def test_direct_and_iterative_agree(rng):
    A, b = _bordered(rng)
    x_d, rep_d = solve_linear(A, b, 6, "direct")
    x_i, rep_i = solve_linear(A, b, 6, "iterative")
    assert np.allclose(x_d, x_i, atol=1e-8)
    assert rep_d.iterations is None and rep_i.iterations > 0
    assert rep_i.relative_residual <= 1e-9


def test_zero_rhs(rng):
    A, _ = _bordered(rng)
    for method in ("direct", "iterative"):
        x, rep = solve_linear(A, np.zeros(10), 6, method)
        assert not np.any(x)
        assert rep.relative_residual == 0.0


def test_singular_system_reported():
    A = sparse.diags([1.0, 1.0, 0.0], format="csr")
    with pytest.raises(SolverError) as exc:
        solve_linear(A, np.ones(3), 2, "direct")
    assert exc.value.reason == "singular"


def test_unknown_method(rng):
    A, b = _bordered(rng)
    with pytest.raises(ValueError):
        solve_linear(A, b, 6, "cholesky")


def _stable_system(n=8):
    mesh = build_structured_mesh(n)
    grid = TimeGrid(1.0, n)
    pair = build_stabilizers(Variant.STABLE, mesh, grid)
    return assemble_system(mesh, grid, pair, Region(0.25, 0.75, 0.25, 0.75), DataSpec("S1"))


def _unstable_system(variant=Variant.UNSTABLE, n=4):
    mesh = build_structured_mesh(n)
    grid = TimeGrid(1.0, n)
    pair = build_stabilizers(variant, mesh, grid)
    return assemble_system(mesh, grid, pair, Region(0.25, 0.75, 0.25, 0.75), DataSpec("U1"))


def test_stable_residual_and_determinism():
    system = _stable_system()
    u1, z1, rep = solve(system, "direct")
    u2, z2, _ = solve(system, "direct")
    assert rep.relative_residual <= 1e-10
    assert np.array_equal(u1.coeffs, u2.coeffs) and np.array_equal(z1.coeffs, z2.coeffs)
    assert u1.coeffs.shape == (9, 49) and z1.coeffs.shape == (8, 49)


@pytest.mark.parametrize("make", [lambda: _stable_system(4), _unstable_system,
                                  lambda: _unstable_system(Variant.UNSTABLE_JUMP_DUAL)])
def test_iterative_path_on_assembled_system(make):
    system = make()
    u_d, z_d, _ = solve(system, "direct")
    u_i, z_i, rep = solve(system, "iterative")
    assert rep.method == "iterative" and rep.iterations > 0
    x_i = np.concatenate([u_i.flat, z_i.flat])
    true_res = np.linalg.norm(system.matrix @ x_i - system.rhs) / np.linalg.norm(system.rhs)
    assert rep.relative_residual == pytest.approx(true_res, rel=1e-12) and true_res <= 1e-9
    scale = max(1.0, np.abs(u_d.coeffs).max())
    assert np.allclose(u_d.coeffs, u_i.coeffs, atol=1e-7 * scale)
    assert np.allclose(z_d.coeffs, z_i.coeffs, atol=1e-7 * scale)


@pytest.mark.parametrize("variant", [Variant.UNSTABLE, Variant.UNSTABLE_JUMP_DUAL])
def test_space_time_preconditioner_inverts_diagonal_blocks(variant, rng):
    system = _unstable_system(variant)
    blocks = sparse.block_diag([system.P, system.pair.S_star], format="csr")
    x = rng.standard_normal(system.dimension)
    y = space_time_preconditioner(system).matvec(blocks @ x)
    assert np.allclose(y, x, rtol=0.0, atol=1e-8 * np.abs(x).max())


def test_space_time_preconditioner_is_symmetric_positive(rng):
    system = _stable_system(4)
    M = space_time_preconditioner(system)
    a, b = rng.standard_normal((2, system.dimension))
    assert a @ M.matvec(b) == pytest.approx(b @ M.matvec(a), rel=1e-9)
    assert a @ M.matvec(a) > 0


@pytest.mark.parametrize("exc", [MemoryError(), SystemError("gstrf was called with invalid arguments")])
def test_factorization_resource_failure(monkeypatch, rng, exc):
    A, b = _bordered(rng)

    def exhausted(*args, **kwargs):
        raise exc

    monkeypatch.setattr(solver, "splu", exhausted)
    with pytest.raises(SolverError) as err:
        solve_linear(A, b, 6, "direct")
    assert err.value.reason == "resource"


def test_auto_falls_back_to_minres_on_resource_failure(monkeypatch):
    system = _stable_system(4)
    real = solver.splu

    def no_room_for_full_system(A, *args, **kwargs):
        if A.shape[0] == system.dimension:
            raise MemoryError()
        return real(A, *args, **kwargs)

    monkeypatch.setattr(solver, "splu", no_room_for_full_system)
    _, _, rep = solve(system, "auto")
    assert rep.method == "iterative" and rep.relative_residual <= 1e-9
    with pytest.raises(SolverError) as err:
        solve(system, "direct")
    assert err.value.reason == "resource"


def test_auto_switches_by_dimension(monkeypatch):
    monkeypatch.setattr(config, "DIRECT_MAX_DIM", 100)
    assert resolve_method("auto", 100) == "direct"
    assert resolve_method("auto", 101) == "iterative"
    assert resolve_method("direct", 10**7) == "direct"
    with pytest.raises(ValueError):
        resolve_method("lu", 10)
