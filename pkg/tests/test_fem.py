import warnings

import numpy as np
import pytest

from helmuq.cutoffs import RadialProfile
from helmuq.fem import (AffineHelmholtz, FeSpace, PointEvaluator, SolveError,
                        assemble, field_errors, solve)
from helmuq.mesh import TriMesh, auto_n_radial, mesh_annulus, mesh_disk, \
    StarObstacle
from helmuq.pml import PmlProfile
from helmuq.randomfield import ParamVector, RandomFieldSpec
from helmuq.scattering import LoadSpec


def patch_square():
    verts = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
    tris = np.array([[0, 1, 2], [0, 2, 3]])
    return TriMesh(verts, tris, np.zeros(4, np.int8))


def inert_spec():
    # zero mean and zero fluctuation: mass term drops out entirely
    return RandomFieldSpec(n0=0.0, xi_n=0.0,
                           fluc_profile=RadialProfile("fluc", 3.0, 3.5))


def far_pml():
    return PmlProfile(100.0, 101.0)  # never active on test geometries


def unit_spec():
    return RandomFieldSpec(n0=1.0, xi_n=0.0,
                           fluc_profile=RadialProfile("fluc", 3.0, 3.5))


def test_patch_stiffness_flux_pattern():
    # hand-assembled oracle: for the 2-triangle unit square, K x1 equals the
    # boundary flux integrals +-1/2 at the right/left vertices
    space = FeSpace(patch_square(), degree=1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        system = assemble(space, far_pml(), inert_spec(), ParamVector.zeros(0),
                          k=1.0, load=LoadSpec.volume(lambda x: np.ones(len(x))))
    k_mat = system.matrix.toarray().real
    flux = k_mat @ space.mesh.vertices[:, 0]
    assert np.allclose(flux, [-0.5, 0.5, 0.5, -0.5], atol=1e-14)
    # constant-1 load integrates the P1 basis: column sums |T|/3 per element
    rhs_oracle = np.array([1 / 3, 1 / 6, 1 / 3, 1 / 6])
    assert np.allclose(system.rhs.real, rhs_oracle, atol=1e-14)


def test_assembled_matrix_complex_symmetric():
    mesh = mesh_disk(5.0, 32, 10)
    space = FeSpace(mesh, degree=2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        system = assemble(space, PmlProfile(4.52, 5.0, 3.0), unit_spec(),
                          ParamVector.zeros(0), k=2.0)
    diff = (system.matrix - system.matrix.T).tocoo()
    assert diff.nnz == 0 or np.max(np.abs(diff.data)) == 0.0
    assert np.linalg.norm(system.rhs) == 0.0


def test_zero_load_zero_solution():
    mesh = mesh_disk(5.0, 32, 10)
    space = FeSpace(mesh, degree=2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        system = assemble(space, PmlProfile(4.52, 5.0, 3.0), unit_spec(),
                          ParamVector.zeros(0), k=12.0)
    field = solve(system, 1e-10)
    assert np.all(field.coefficients == 0.0)


def test_solve_1x1():
    import scipy.sparse as sp

    space = FeSpace(patch_square(), degree=1)
    system_matrix = sp.csr_matrix(np.array([[2 + 1j]]))
    from helmuq.fem import AssembledSystem

    space.dirichlet_mask[:] = True
    space.dirichlet_mask[0] = False
    system = AssembledSystem(matrix=system_matrix,
                             rhs=np.array([4 + 2j]), space=space)
    field = solve(system, 1e-10)
    assert field.coefficients[0] == pytest.approx(2.0)


def test_solve_against_dense_oracle():
    rng = np.random.default_rng(0)
    n = 50
    import scipy.sparse as sp

    dense = np.zeros((n, n), complex)
    for _ in range(300):
        i, j = rng.integers(0, n, 2)
        v = rng.normal() + 1j * rng.normal()
        dense[i, j] += v
        dense[j, i] += v
    dense += np.diag(10.0 + 1j + np.arange(n))
    rhs = rng.normal(size=n) + 1j * rng.normal(size=n)

    mesh = mesh_disk(2.0, 16, 4)  # target space: only sizes must line up
    space = FeSpace(mesh, degree=1)
    space.dirichlet_mask[:] = True
    space.dirichlet_mask[:n] = False
    from helmuq.fem import AssembledSystem

    system = AssembledSystem(matrix=sp.csr_matrix(dense), rhs=rhs, space=space)
    field = solve(system, 1e-8)
    oracle = np.linalg.solve(dense, rhs)
    assert np.linalg.norm(field.coefficients[:n] - oracle) < 1e-8 * np.linalg.norm(oracle)


def test_solve_reports_residual_on_breakdown():
    import scipy.sparse as sp

    mesh = mesh_disk(2.0, 16, 4)
    space = FeSpace(mesh, degree=1)
    space.dirichlet_mask[:] = True
    space.dirichlet_mask[:2] = False
    from helmuq.fem import AssembledSystem

    singular = sp.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]], dtype=complex))
    system = AssembledSystem(matrix=singular, rhs=np.array([1.0, 0.0 + 0j]),
                             space=space)
    with pytest.raises(SolveError):
        solve(system, 1e-10)


def test_solve_rejects_bad_tol():
    mesh = mesh_disk(2.0, 16, 4)
    space = FeSpace(mesh, degree=1)
    from helmuq.fem import AssembledSystem
    import scipy.sparse as sp

    system = AssembledSystem(matrix=sp.eye(4, format="csr", dtype=complex),
                             rhs=np.ones(4, complex), space=space)
    with pytest.raises(ValueError):
        solve(system, 1e-3)


def test_dirichlet_dofs_are_zero():
    mesh = mesh_disk(3.0, 32, 8, knots=())
    space = FeSpace(mesh, degree=2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        system = assemble(space, far_pml(), unit_spec(), ParamVector.zeros(0),
                          k=3.0, load=LoadSpec.volume(lambda x: np.ones(len(x))))
    field = solve(system, 1e-10)
    assert np.max(np.abs(field.coefficients[space.dirichlet_mask])) == 0.0
    assert np.max(np.abs(field.coefficients)) > 0.0
    # Galerkin residual on free dofs meets the contract
    res = system.matrix @ field.coefficients[space.free_dofs] - system.rhs
    assert np.linalg.norm(res) <= 1e-10 * np.linalg.norm(system.rhs)


def test_p2_reproduces_quadratics():
    mesh = mesh_disk(2.0, 24, 6)
    space = FeSpace(mesh, degree=2)
    field = space.interpolate(lambda p: p[:, 0] ** 2)
    rng = np.random.default_rng(4)
    pts = rng.uniform(-1.0, 1.0, (30, 2)) * 0.7
    vals, grads = field.evaluate_many(pts)
    assert np.max(np.abs(vals - pts[:, 0] ** 2)) < 1e-12
    assert np.max(np.abs(grads[:, 0] - 2 * pts[:, 0])) < 1e-11
    assert np.max(np.abs(grads[:, 1])) < 1e-11


def test_partition_of_unity_evaluation():
    mesh = mesh_disk(2.0, 16, 5)
    for degree in (1, 2):
        space = FeSpace(mesh, degree=degree)
        field = space.interpolate(lambda p: np.ones(len(p)))
        value, grad = field.evaluate(np.array([0.3, -0.4]))
        assert value == pytest.approx(1.0, abs=1e-13)
        assert np.max(np.abs(grad)) < 1e-12


def test_interpolation_convergence_order():
    k = 3.0
    fn = lambda p: np.sin(k * p[:, 0])
    rng = np.random.default_rng(11)
    pts = rng.uniform(-0.9, 0.9, (200, 2))
    for degree, expected in ((1, 2.0), (2, 3.0)):
        errs, hs = [], []
        for n_theta in (16, 32, 64):
            mesh = mesh_disk(1.5, n_theta, max(2, n_theta // 4), knots=())
            space = FeSpace(mesh, degree=degree)
            field = space.interpolate(fn)
            vals, _ = field.evaluate_many(pts)
            errs.append(np.max(np.abs(vals - fn(pts))))
            hs.append(mesh.h_max)
        slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
        assert abs(slope - expected) < 0.8  # interpolation error ~ h^{m+1}


def test_point_evaluator_matches_evaluate_many():
    mesh = mesh_disk(2.0, 24, 6)
    space = FeSpace(mesh, degree=2)
    field = space.interpolate(lambda p: np.exp(1j * p[:, 0]) * p[:, 1])
    pts = np.array([[0.3, 0.1], [-0.7, 0.9], [1.1, -0.2]])
    ev = PointEvaluator(space, pts)
    direct, _ = field.evaluate_many(pts)
    assert np.allclose(ev.apply(field), direct)


def test_mesh_threshold_warning():
    mesh = mesh_disk(5.0, 32, 10)
    space = FeSpace(mesh, degree=2)
    with pytest.warns(UserWarning, match="pollution"):
        assemble(space, PmlProfile(4.52, 5.0, 3.0), unit_spec(),
                 ParamVector.zeros(0), k=48.0)


def test_quadrature_degree_precondition():
    mesh = mesh_disk(5.0, 32, 10)
    space = FeSpace(mesh, degree=2)
    from helmuq.mesh import quad_rule

    with pytest.raises(ValueError):
        assemble(space, PmlProfile(4.52, 5.0, 3.0), unit_spec(),
                 ParamVector.zeros(0), k=2.0, quad=quad_rule(4))


def test_affine_matches_direct_assembly():
    bf = StarObstacle.butterfly()
    mesh = mesh_annulus(bf, 5.0, 64, auto_n_radial(bf, 5.0, 64))
    space = FeSpace(mesh, degree=2)
    spec = RandomFieldSpec()
    prof = PmlProfile(4.52, 5.0, 3.0)
    k = 4.0
    rng = np.random.default_rng(9)
    y = ParamVector(rng.uniform(-0.5, 0.5, 5))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        affine = AffineHelmholtz(space, prof, spec, k, s_max=5)
        direct = assemble(space, prof, spec, y, k)
    combined = affine.system_for(y)
    diff = (combined.matrix - direct.matrix).tocoo()
    scale = np.max(np.abs(direct.matrix.data))
    assert diff.nnz == 0 or np.max(np.abs(diff.data)) < 1e-12 * scale


def test_field_errors_zero_for_exact_interpolant():
    mesh = mesh_disk(2.0, 32, 8)
    space = FeSpace(mesh, degree=2)
    fn = lambda p: p[:, 0] ** 2 + 1j * p[:, 1]
    grad = lambda p: np.stack([2 * p[:, 0], 1j * np.ones(len(p))], axis=1)
    field = space.interpolate(fn)
    errs = field_errors(field, fn, grad, r_max=1.5)
    assert errs["rel_l2"] < 1e-13
    assert errs["rel_h1semi"] < 1e-12
