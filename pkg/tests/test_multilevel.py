import numpy as np
import pytest
import scipy.sparse

from nodethin import (
    DensityProfile,
    MlOperators,
    MlSettings,
    MovingFrontParams,
    build_operators,
    generate_disk_nodes,
    laplacian_config,
    mlmfsub,
    mlpre,
    mlsolver,
    mlvcyc,
    laplace_problem,
    poisson_problem,
    relax,
    solve_problem,
)
from nodethin.errors import DivergenceError, SmootherError, ValidationError


def gauss_seidel_oracle(u, f, L, sweeps):
    """Textbook forward Gauss-Seidel, one entry at a time."""
    u = np.array(u, dtype=float)
    n = u.size
    for _ in range(sweeps):
        for i in range(n):
            u[i] += (f[i] - L[i] @ u) / L[i, i]
    return u


def vcycle_oracle(u1, f1, Ls, Is, Rs, nu1, nu2):
    """Straight-line dense transcription of the V-cycle recursion."""
    p = len(Ls)
    if p == 1:
        return np.linalg.solve(Ls[0], f1)
    u1 = gauss_seidel_oracle(u1, f1, Ls[0], nu1)
    r = {2: Rs[0] @ (f1 - Ls[0] @ u1)}
    e = {}
    for j in range(2, p):
        e[j] = gauss_seidel_oracle(np.zeros(len(r[j])), r[j], Ls[j - 1], nu1)
        r[j + 1] = Rs[j - 1] @ (r[j] - Ls[j - 1] @ e[j])
    e[p] = np.linalg.solve(Ls[p - 1], r[p])
    for j in range(p - 1, 1, -1):
        e[j] = e[j] + Is[j - 1] @ e[j + 1]
        e[j] = gauss_seidel_oracle(e[j], r[j], Ls[j - 1], nu2)
    u1 = u1 + Is[0] @ e[2]
    return gauss_seidel_oracle(u1, f1, Ls[0], nu2)


class TestRelax:
    def test_hand_computed_sweep(self):
        # 1-D Dirichlet Laplacian on three nodes; one sweep from zero:
        # u0 = 1, then u1 = (0 - u0 - 0)/(-2) = 0.5, then u2 = 2
        L = np.array([[1.0, 0.0, 0.0], [1.0, -2.0, 1.0], [0.0, 0.0, 1.0]])
        f = np.array([1.0, 0.0, 2.0])
        u = relax(np.zeros(3), f, L, 1)
        assert np.allclose(u, [1.0, 0.5, 2.0], atol=1e-15)

    def test_matches_textbook_loop(self, rng):
        n = 40
        A = rng.normal(size=(n, n))
        A += np.diag(np.abs(A).sum(axis=1))  # diagonally dominant
        f = rng.normal(size=n)
        u0 = rng.normal(size=n)
        got = relax(u0, f, A, 3)
        ref = gauss_seidel_oracle(u0, f, A, 3)
        assert np.allclose(got, ref, rtol=1e-13, atol=1e-13)

    def test_residual_decreases(self, rng):
        n = 60
        A = rng.normal(size=(n, n))
        A += np.diag(3.0 * np.abs(A).sum(axis=1))
        f = rng.normal(size=n)
        u = rng.normal(size=n)
        norms = [np.linalg.norm(f - A @ u)]
        for _ in range(50):
            u = relax(u, f, A, 1)
            norms.append(np.linalg.norm(f - A @ u))
        floor = 1e-12 * norms[0]  # below this, rounding noise dominates
        assert all(b <= a for a, b in zip(norms, norms[1:]) if a > floor)
        assert norms[-1] < 1e-8 * norms[0]

    def test_zero_diagonal_rejected(self):
        L = np.array([[0.0, 1.0], [1.0, 1.0]])
        with pytest.raises(SmootherError):
            relax(np.zeros(2), np.ones(2), L, 1)


@pytest.fixture(scope="module")
def small_ops():
    domain, boundary = generate_disk_nodes(
        DensityProfile(0.05, 0.05, 0.1, 0.2), seed=3
    )
    hierarchy = mlmfsub(domain, boundary, n_min=12, mf=MovingFrontParams(c=1.5, k=10))
    return build_operators(hierarchy, laplacian_config(2))


class TestVcycle:
    def test_matches_dense_transcription(self, small_ops, rng):
        ops = small_ops
        assert ops.depth >= 3
        n = len(ops.hierarchy.levels[0])
        assert n <= 400
        Ls = [M.toarray() for M in ops.L]
        Is = [M.toarray() for M in ops.I]
        Rs = [M.toarray() for M in ops.R]
        for _ in range(3):
            u0 = rng.normal(size=n)
            f = rng.normal(size=n)
            got = mlvcyc(u0, f, ops, 2, 1)
            ref = vcycle_oracle(u0, f, Ls, Is, Rs, 2, 1)
            scale = np.abs(ref).max()
            assert np.abs(got - ref).max() <= 1e-12 * scale

    def test_linearity(self, small_ops, rng):
        ops = small_ops
        n = len(ops.hierarchy.levels[0])
        u0 = rng.normal(size=n)
        f = rng.normal(size=n)
        a = mlvcyc(3.0 * u0, 3.0 * f, ops, 2, 1)
        b = 3.0 * mlvcyc(u0, f, ops, 2, 1)
        assert np.allclose(a, b, rtol=1e-11, atol=1e-11 * np.abs(b).max())

    def test_single_level_is_direct_solve(self, rng):
        domain, boundary = generate_disk_nodes(
            DensityProfile(0.08, 0.08, 0.1, 0.2), seed=1
        )
        hierarchy = mlmfsub(
            domain, boundary, n_min=len(boundary), mf=MovingFrontParams(c=1.5, k=5)
        )
        assert hierarchy.depth == 1
        ops = build_operators(hierarchy, laplacian_config(2))
        n = len(hierarchy.levels[0])
        f = rng.normal(size=n)
        u = mlvcyc(rng.normal(size=n), f, ops, 2, 1)
        assert np.linalg.norm(f - ops.L[0] @ u) <= 1e-9 * np.linalg.norm(f)


class TestMlsolver:
    def test_exact_start_empty_history(self, small_ops, rng):
        ops = small_ops
        import scipy.sparse.linalg as spla

        n = len(ops.hierarchy.levels[0])
        f = rng.normal(size=n)
        u_star = spla.spsolve(ops.L[0].tocsc(), f)
        u, report = mlsolver(u_star, ops.L[0] @ u_star, ops, MlSettings())
        assert report.iterations == 0
        assert report.residual_history == []
        assert report.status == "converged"
        assert np.array_equal(u, u_star)

    def test_maxiter_status(self, small_ops, rng):
        ops = small_ops
        n = len(ops.hierarchy.levels[0])
        f = rng.normal(size=n)
        _, report = mlsolver(np.zeros(n), f, ops, MlSettings(i_max=2, tol=1e-30))
        assert report.status == "maxiter"
        assert report.iterations == 2
        assert len(report.residual_history) == 2

    def test_divergence_raises_with_report(self):
        # two-level toy where smoothing diverges and the coarse correction
        # is disabled, so each cycle amplifies the residual
        L1 = scipy.sparse.csr_matrix(np.array([[1.0, 2.0], [2.0, 1.0]]))
        L2 = scipy.sparse.csr_matrix(np.array([[1.0]]))
        R = scipy.sparse.csr_matrix(np.array([[1.0, 0.0]]))
        I = scipy.sparse.csr_matrix(np.array([[0.0], [0.0]]))
        from nodethin.multilevel import _GaussSeidel
        import scipy.sparse.linalg as spla

        ops = MlOperators(
            hierarchy=None,
            L=[L1, L2],
            I=[I],
            R=[R],
            coarsest_lu=spla.splu(L2.tocsc()),
            smoothers=[_GaussSeidel(L1)],
        )
        with pytest.raises(DivergenceError) as err:
            mlsolver(np.zeros(2), np.array([1.0, 1.0]), ops, MlSettings(i_max=50))
        assert err.value.report.status == "diverged"
        assert err.value.report.residual_history[-1] > 1e6

    def test_settings_validation(self):
        with pytest.raises(ValidationError):
            MlSettings(nu1=-1)
        with pytest.raises(ValidationError):
            MlSettings(i_max=0)
        with pytest.raises(ValidationError):
            MlSettings(tol=0.0)

    def test_residual_csv_shape(self, small_ops, rng):
        ops = small_ops
        n = len(ops.hierarchy.levels[0])
        _, report = mlsolver(
            np.zeros(n), rng.normal(size=n), ops, MlSettings(i_max=3, tol=1e-30)
        )
        lines = report.residual_csv().strip().splitlines()
        assert lines[0] == "iteration,relres,convfactor"
        assert len(lines) == 4


class TestPoissonSolve:
    def test_small_disk_convergence(self):
        prob = poisson_problem()
        domain, boundary = generate_disk_nodes(prob.default_profile, seed=12)
        u, report, ops = solve_problem(prob, domain, boundary, m_l=2, n_min=60)
        assert report.residual_history[-1] <= 1e-10
        assert report.iterations <= 50
        # geometric convergence: factors roughly constant after the start
        # (stop before the residual hits the rounding floor, where the
        # factor becomes noise)
        hist = report.residual_history
        stop = next(i for i, rr in enumerate(hist) if rr <= 1e-10) + 1
        tail = report.convergence_factors[2:stop]
        assert max(tail) / min(tail) < 5.0
        # the exponential peak is under-resolved at its tip at this density,
        # so only boundedness is asserted here; discretization accuracy is
        # covered on the smooth problem below and by the convergence study
        assert report.max_relative_error < 1.0

    def test_laplace_accuracy(self):
        prob = laplace_problem()
        domain, boundary = generate_disk_nodes(prob.default_profile, seed=12)
        u, report, ops = solve_problem(prob, domain, boundary, m_l=4, n_min=60)
        assert report.residual_history[-1] <= 1e-8
        assert report.max_relative_error < 1e-2
