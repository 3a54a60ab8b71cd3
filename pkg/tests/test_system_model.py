import numpy as np
import pytest

from periodic_hyp import system_model as sm
from periodic_hyp.errors import (
    DomainError,
    DominanceError,
    HyperbolicityError,
    SignatureError,
    SourceOriginError,
)


def make_scalar_spec(lam=1.0, c=0.5, radius=0.1, L=1.0):
    """u_t + lam u_x = -c u."""
    return sm.SystemSpec(
        n=1, m=0,
        A=lambda u: lam * np.ones(np.shape(u)[:-1] + (1, 1)),
        F=lambda u: -c * np.asarray(u),
        domain_radius=radius, L=L,
    )


def make_2x2_spec(alpha=0.0, radius=0.1):
    """Speeds -1/+1 with off-diagonal coupling alpha * u entering A."""
    def A(u):
        u = np.asarray(u, dtype=float)
        out = np.zeros(u.shape[:-1] + (2, 2))
        out[..., 0, 0] = -1.0
        out[..., 1, 1] = 1.0
        out[..., 0, 1] = alpha * u[..., 0]
        out[..., 1, 0] = alpha * u[..., 1]
        return out

    return sm.SystemSpec(
        n=2, m=1, A=A, F=lambda u: np.zeros(np.shape(u)),
        domain_radius=radius, L=1.0,
    )


class TestEigenDecompose:
    def test_diagonal_matrix(self):
        es = sm.eigen_decompose(np.diag([-1.0, 1.0]), m=1)
        assert np.allclose(es.lambdas, [-1.0, 1.0])
        assert np.allclose(es.left, np.eye(2))
        assert np.allclose(es.right, np.eye(2))
        assert np.allclose(es.mus, [-1.0, 1.0])

    def test_symmetric_offdiagonal(self):
        # hand eigen-solve of [[0,1],[1,0]]: lambda = -1 with (1,-1)/sqrt 2,
        # lambda = +1 with (1,1)/sqrt 2; rows of left equal the transposes.
        es = sm.eigen_decompose(np.array([[0.0, 1.0], [1.0, 0.0]]), m=1)
        s = 1.0 / np.sqrt(2.0)
        assert np.allclose(es.lambdas, [-1.0, 1.0])
        assert np.allclose(es.right[:, 0], [s, -s])
        assert np.allclose(es.right[:, 1], [s, s])
        assert np.allclose(es.left, es.right.T)

    def test_defective_matrix_raises(self):
        with pytest.raises(HyperbolicityError):
            sm.eigen_decompose(np.array([[0.0, 1.0], [0.0, 0.0]]), m=1)

    def test_wrong_signature_raises(self):
        with pytest.raises(SignatureError):
            sm.eigen_decompose(np.diag([-1.0, 1.0]), m=0)

    def test_complex_eigenvalues_raise(self):
        with pytest.raises(HyperbolicityError):
            sm.eigen_decompose(np.array([[0.0, -1.0], [1.0, 0.0]]), m=1)

    def test_repeated_eigenvalue_raises(self):
        with pytest.raises(HyperbolicityError):
            sm.eigen_decompose(np.diag([2.0, 2.0]), m=0)

    @pytest.mark.parametrize("seed", range(5))
    def test_biorthonormality_random(self, seed):
        rng = np.random.default_rng(seed)
        n = rng.integers(2, 5)
        lam = np.sort(rng.uniform(0.5, 2.0, n))
        lam[: n // 2] *= -1.0
        lam = np.sort(lam)
        m = int((lam < 0).sum())
        R = rng.normal(size=(n, n)) + 2 * np.eye(n)
        A = R @ np.diag(lam) @ np.linalg.inv(R)
        es = sm.eigen_decompose(A, m=m)
        assert np.abs(es.left @ es.right - np.eye(n)).max() <= 1e-10
        assert np.abs(np.linalg.norm(es.right, axis=0) - 1).max() <= 1e-10
        assert np.abs(es.left @ A - es.lambdas[:, None] * es.left).max() <= 1e-8
        assert np.abs(A @ es.right - es.lambdas[None, :] * es.right).max() <= 1e-8


class TestValidation:
    def test_scalar_damped_valid(self):
        rep = sm.validate_hyperbolicity(make_scalar_spec())
        assert rep.ok
        assert rep.mu_max == pytest.approx(1.0)
        assert rep.a0_diagonal
        assert not rep.needs_time_rescaling

    def test_fast_scalar_no_rescaling(self):
        rep = sm.validate_hyperbolicity(make_scalar_spec(lam=2.0))
        assert rep.mu_max == pytest.approx(0.5)
        assert not rep.needs_time_rescaling

    def test_nondiagonal_origin_reported_not_raised(self):
        spec = sm.SystemSpec(
            n=2, m=1,
            A=lambda u: np.array([[0.0, 1.0], [1.0, 0.0]]),
            F=lambda u: np.zeros(2),
            domain_radius=0.05, L=1.0,
        )
        rep = sm.validate_hyperbolicity(spec)
        assert not rep.a0_diagonal
        assert not rep.ok

    def test_nonzero_source_origin_raises(self):
        spec = make_scalar_spec()
        bad = sm.SystemSpec(
            n=1, m=0, A=spec.A, F=lambda u: np.asarray(u) + 0.001,
            domain_radius=0.1, L=1.0,
        )
        with pytest.raises(SourceOriginError):
            sm.validate_hyperbolicity(bad)

    def test_signature_flip_raises(self):
        # speed crosses zero inside the ball
        spec = sm.SystemSpec(
            n=1, m=0,
            A=lambda u: np.reshape(0.05 + np.asarray(u)[..., 0],
                                   np.shape(u)[:-1] + (1, 1)),
            F=lambda u: np.zeros(np.shape(u)),
            domain_radius=0.1, L=1.0,
        )
        with pytest.raises((SignatureError, HyperbolicityError)):
            sm.validate_hyperbolicity(spec)

    def test_origin_diagonalizer(self):
        A0 = np.array([[0.0, 1.0], [1.0, 0.0]])
        spec = sm.SystemSpec(
            n=2, m=1, A=lambda u: A0, F=lambda u: np.zeros(2),
            domain_radius=0.05, L=1.0,
        )
        R = sm.origin_diagonalizer(spec)
        D = np.linalg.inv(R) @ A0 @ R
        assert np.abs(D - np.diag(np.diag(D))).max() <= 1e-12


class TestRescaleTime:
    def test_slow_system_rescaled(self):
        spec = make_scalar_spec(lam=0.5, c=1.0)
        out = sm.rescale_time(spec)
        # mu_max was 2: A and F are both doubled, making the new mu_max 1
        assert out.A_at(np.zeros((1, 1)))[0, 0, 0] == pytest.approx(1.0)
        u = np.array([0.01])
        assert out.F_at(u[None, :])[0, 0] == pytest.approx(2.0 * (-1.0 * 0.01))
        assert sm.measured_mu_max(out) == pytest.approx(1.0)

    def test_identity_when_mu_max_at_most_one(self):
        spec = make_scalar_spec(lam=1.0)
        assert sm.rescale_time(spec) is spec

    def test_identity_for_fast_mixed_speeds(self):
        spec = sm.SystemSpec(
            n=2, m=1, A=lambda u: np.diag([-2.0, 4.0]),
            F=lambda u: np.zeros(2), domain_radius=0.05, L=1.0,
        )
        assert sm.rescale_time(spec) is spec


class TestMinimalK:
    @pytest.mark.parametrize(
        "g0, expected",
        [
            ([[-1.0, 0.2], [0.0, -1.0]], 0.0),
            ([[0.1, 0.3], [0.0, -1.0]], 0.4),
            ([[0.0, 0.0], [0.0, 0.0]], 0.0),
        ],
    )
    def test_values(self, g0, expected):
        assert sm.minimal_K(np.array(g0)) == pytest.approx(expected)


class TestCouplingB:
    def test_zero_at_origin(self):
        spec = make_2x2_spec(alpha=1.0)
        B = sm.coupling_B(spec, np.zeros(2))
        assert np.abs(B).max() == 0.0

    def test_diagonal_A_gives_zero(self):
        spec = make_scalar_spec()
        assert sm.coupling_B(spec, np.array([0.05])).max() == 0.0

    def test_against_independent_eigensolve(self):
        spec = make_2x2_spec(alpha=1.0)
        u = np.array([0.01, 0.0])
        B = sm.coupling_B(spec, u)
        assert B[0, 0] == 0.0 and B[1, 1] == 0.0
        # independent: rows of inv(V) for the exact matrix at u
        Au = spec.A_at(u[None, :])[0]
        w, V = np.linalg.eig(Au)
        order = np.argsort(w.real)
        V = V[:, order].real
        Lt = np.linalg.inv(V)
        expected = -Lt / np.diag(Lt)[:, None]
        expected[np.arange(2), np.arange(2)] = 0.0
        assert np.allclose(B, expected, atol=1e-12)

    def test_linear_growth_bound(self):
        # |B(u)| <= C |u|: halving |u| at least halves the max entry
        spec = make_2x2_spec(alpha=1.0)
        maxes = []
        for r in (1e-2, 5e-3, 2.5e-3):
            u = np.array([r, 0.5 * r]) / np.linalg.norm([1.0, 0.5])
            maxes.append(np.abs(sm.coupling_B(spec, u)).max())
        assert maxes[0] >= 1.9 * maxes[1]
        assert maxes[1] >= 1.9 * maxes[2]


class TestGtilde:
    def test_scalar_damped(self):
        spec = make_scalar_spec(lam=1.0, c=0.5)
        gt = sm.gtilde_matrix(spec, K=0.0)
        assert gt[0, 0] == pytest.approx(-0.5, abs=1e-9)

    def test_two_family_signs(self):
        spec = sm.SystemSpec(
            n=2, m=1, A=lambda u: np.diag([-1.0, 1.0]),
            F=lambda u: -np.asarray(u), domain_radius=0.05, L=1.0,
        )
        gt = sm.gtilde_matrix(spec, K=0.1)
        assert np.allclose(np.diag(gt), [1.1, -1.1], atol=1e-9)

    def test_too_small_K_raises(self):
        spec = sm.SystemSpec(
            n=2, m=1, A=lambda u: np.diag([-1.0, 1.0]),
            F=lambda u: np.array([0.1 * u[0] + 0.3 * u[1], -1.0 * u[1]]),
            gradF=lambda u: np.array([[0.1, 0.3], [0.0, -1.0]]),
            domain_radius=0.05, L=1.0,
        )
        with pytest.raises(DominanceError):
            sm.gtilde_matrix(spec, K=0.2)

    def test_dominance_transfer(self):
        # whenever K exceeds the minimal shift strictly, the scaled matrix
        # satisfies the two strict dominance conditions (checked internally)
        rng = np.random.default_rng(7)
        for _ in range(20):
            n = int(rng.integers(1, 5))
            m = int(rng.integers(0, n + 1))
            lam = np.concatenate([
                -np.sort(rng.uniform(0.5, 2.0, m))[::-1],
                np.sort(rng.uniform(0.5, 2.0, n - m)),
            ])
            lam = np.sort(lam)
            g0 = rng.normal(scale=0.5, size=(n, n))
            spec = sm.SystemSpec(
                n=n, m=m, A=lambda u, lam=lam: np.diag(lam),
                F=lambda u, g0=g0: g0 @ np.asarray(u),
                gradF=lambda u, g0=g0: g0,
                domain_radius=0.05, L=1.0,
            )
            K = sm.minimal_K(g0) + rng.uniform(1e-6, 0.5)
            sm.gtilde_matrix(spec, K)  # must not raise


class TestGNonlinear:
    def test_zero_at_origin(self):
        spec = make_scalar_spec()
        assert np.abs(sm.g_nonlinear(spec, np.zeros(1))).max() == 0.0

    def test_linear_system_identically_zero(self):
        spec = sm.SystemSpec(
            n=2, m=1, A=lambda u: np.diag([-1.0, 1.0]),
            F=lambda u: -np.asarray(u), domain_radius=0.05, L=1.0,
        )
        for u in ([0.01, -0.02], [0.03, 0.01]):
            assert np.abs(sm.g_nonlinear(spec, np.array(u))).max() <= 1e-12

    def test_quadratic_source_scalar(self):
        # f(u) = -u + u^2 with unit speed: remainder is exactly u^2
        spec = sm.SystemSpec(
            n=1, m=0, A=lambda u: np.ones(np.shape(u)[:-1] + (1, 1)),
            F=lambda u: -np.asarray(u) + np.asarray(u) ** 2,
            domain_radius=0.1, L=1.0,
        )
        val = sm.g_nonlinear(spec, np.array([0.01]))
        assert val[0] == pytest.approx(1e-4, abs=1e-12)

    def test_outside_domain_raises(self):
        spec = make_scalar_spec(radius=0.05)
        with pytest.raises(DomainError):
            sm.g_nonlinear(spec, np.array([0.1]))

    def test_quadratic_smallness_halving(self):
        # ||remainder(u)|| / |u|^2 stays within a factor 2 across halvings
        def F(u):
            u = np.asarray(u)
            out = -u.copy()
            out[..., 0] += u[..., 0] * u[..., 1]
            out[..., 1] += u[..., 1] ** 2 - 0.5 * u[..., 0] ** 2
            return out

        spec = sm.SystemSpec(
            n=2, m=1, A=lambda u: np.diag([-1.0, 1.0]), F=F,
            domain_radius=0.05, L=1.0,
        )
        direction = np.array([0.6, 0.8])
        ratios = []
        for r in (1e-2, 5e-3, 2.5e-3):
            val = sm.g_nonlinear(spec, r * direction)
            ratios.append(np.linalg.norm(val) / r**2)
        assert max(ratios) <= 2.0 * min(ratios)

    def test_gradient_vanishes_at_origin(self):
        # central differences with step 1e-5 on each component
        def F(u):
            u = np.asarray(u)
            out = -u.copy()
            out[..., 0] += u[..., 0] * u[..., 1]
            return out

        spec = sm.SystemSpec(
            n=2, m=1, A=lambda u: np.diag([-1.0, 1.0]), F=F,
            domain_radius=0.05, L=1.0,
        )
        h = 1e-5
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            grad = (sm.g_nonlinear(spec, e) - sm.g_nonlinear(spec, -e)) / (2 * h)
            assert np.abs(grad).max() <= 1e-8


class TestFdGradient:
    def test_matches_analytic(self):
        def F(u):
            return np.array([u[0] ** 2 - u[1], np.sin(u[0]) + u[1] ** 3])

        u = np.array([0.3, -0.2])
        J = sm.fd_gradient(F, u, 2)
        expected = np.array([[2 * 0.3, -1.0], [np.cos(0.3), 3 * 0.04]])
        assert np.abs(J - expected).max() <= 1e-10


class TestSourceLinearization:
    def test_default_shift_and_fields(self):
        spec = make_scalar_spec(lam=2.0, c=0.5)
        lin = sm.source_linearization(spec)
        assert lin.g0[0, 0] == pytest.approx(-0.5, abs=1e-9)
        assert lin.K == pytest.approx(1e-6)  # strictly dominant: minimal is 0
        assert lin.gtilde[0, 0] == pytest.approx(0.5 * (-0.5 - 1e-6), abs=1e-9)
        assert lin.mu_max == pytest.approx(0.5)

    def test_explicit_shift(self):
        spec = sm.SystemSpec(
            n=2, m=1, A=lambda u: np.diag([-1.0, 1.0]),
            F=lambda u: -np.asarray(u), domain_radius=0.05, L=1.0,
        )
        lin = sm.source_linearization(spec, K=0.1)
        assert np.allclose(np.diag(lin.gtilde), [1.1, -1.1], atol=1e-9)
