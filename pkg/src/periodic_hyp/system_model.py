"""Quasilinear system description and its derived algebraic objects.

A system is u_t + A(u) u_x = F(u) on x in [0, L], posed near u = 0. The
coefficient matrix must be hyperbolic with a fixed signature: m negative
speeds (families 1..m, moving left) and n - m positive speeds (families
m+1..n, moving right). This module builds the eigenstructure, the
interaction coefficients B_ij, the shifted source linearization, and the
superlinear source remainder used by the periodic solver, and validates
the structural hypotheses on a sampled neighborhood of the origin.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.stats import qmc

from .errors import (
    DegenerateEigenbasisError,
    DomainError,
    DominanceError,
    HyperbolicityError,
    SignatureError,
    SourceOriginError,
)

# Validation tolerances (see HypothesisReport)
_IMAG_TOL = 1e-9
_ZERO_EIG_TOL = 1e-12
_GAP_TOL = 1e-10
_ORIGIN_TOL = 1e-12


def _batch_wrap(fn: Callable, n: int, out_shape: tuple) -> Callable:
    """Return a batched version of ``fn``: (N, n) states -> (N, *out_shape).

    Probes whether ``fn`` already broadcasts over a leading batch axis; if
    not, falls back to a Python loop.
    """
    probe = np.zeros((2, n))
    try:
        out = np.asarray(fn(probe), dtype=float)
        if out.shape == (2, *out_shape):
            return lambda U: np.asarray(fn(U), dtype=float)
    except Exception:
        pass

    def looped(U):
        U = np.asarray(U, dtype=float)
        flat = U.reshape(-1, n)
        out = np.empty((flat.shape[0], *out_shape))
        for i, u in enumerate(flat):
            out[i] = np.asarray(fn(u), dtype=float)
        return out.reshape(U.shape[:-1] + out_shape)

    return looped


def fd_gradient(F: Callable, u: np.ndarray, n: int) -> np.ndarray:
    """4th-order central finite-difference Jacobian of F at u.

    Step 1e-5 * max(1, |u|), adequate against the 1e-8 validation
    tolerances used elsewhere.
    """
    u = np.asarray(u, dtype=float)
    h = 1e-5 * max(1.0, float(np.linalg.norm(u)))
    J = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        f_m2 = np.asarray(F(u - 2 * h * e), dtype=float)
        f_m1 = np.asarray(F(u - h * e), dtype=float)
        f_p1 = np.asarray(F(u + h * e), dtype=float)
        f_p2 = np.asarray(F(u + 2 * h * e), dtype=float)
        J[:, j] = (f_m2 - 8 * f_m1 + 8 * f_p1 - f_p2) / (12 * h)
    return J


@dataclass
class SystemSpec:
    """The tuple (n, m, A, F, neighborhood radius, L) defining the system.

    Parameters
    ----------
    n : state dimension.
    m : number of negative speeds; families 1..m move left.
    A : callable, state (n,) -> (n, n) coefficient matrix. May accept a
        leading batch axis; if it does not, evaluations fall back to a loop.
    F : callable, state (n,) -> (n,) source term, F(0) = 0.
    gradF : optional callable, state -> (n, n) Jacobian of F. Defaults to
        4th-order central finite differences.
    domain_radius : radius of the validated neighborhood of u = 0.
    L : spatial interval length.
    """

    n: int
    m: int
    A: Callable
    F: Callable
    domain_radius: float
    L: float
    gradF: Optional[Callable] = None
    _A_batch: Callable = field(init=False, repr=False)
    _F_batch: Callable = field(init=False, repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("state dimension n must be positive")
        if not 0 <= self.m <= self.n:
            raise ValueError("m must lie in [0, n]")
        if self.domain_radius <= 0 or self.L <= 0:
            raise ValueError("domain_radius and L must be positive")
        self._A_batch = _batch_wrap(self.A, self.n, (self.n, self.n))
        self._F_batch = _batch_wrap(self.F, self.n, (self.n,))

    def A_at(self, states: np.ndarray) -> np.ndarray:
        """A evaluated on states of shape (..., n); returns (..., n, n)."""
        return self._A_batch(np.asarray(states, dtype=float))

    def F_at(self, states: np.ndarray) -> np.ndarray:
        """F evaluated on states of shape (..., n); returns (..., n)."""
        return self._F_batch(np.asarray(states, dtype=float))

    def gradF_at(self, u: np.ndarray) -> np.ndarray:
        if self.gradF is not None:
            return np.asarray(self.gradF(np.asarray(u, dtype=float)), dtype=float)
        return fd_gradient(self.F, u, self.n)

    def contains(self, states: np.ndarray) -> bool:
        """True if every state lies in the closed validated ball."""
        states = np.asarray(states, dtype=float)
        r = np.linalg.norm(states.reshape(-1, self.n), axis=-1)
        return bool(np.all(r <= self.domain_radius * (1 + 1e-12)))


@dataclass
class EigenStructure:
    """Eigenvalues and biorthonormal eigenvectors at one state.

    lambdas are sorted negatives-first ascending, then positives ascending.
    Rows of ``left`` are l_i, columns of ``right`` are r_i, normalized so
    that l_i . r_j = delta_ij and |r_i| = 1, with the largest-magnitude
    entry of each r_i positive. mus = 1 / lambdas.
    """

    lambdas: np.ndarray
    left: np.ndarray
    right: np.ndarray
    mus: np.ndarray


@dataclass
class SourceLinearization:
    """Source Jacobian at the origin and its shifted, speed-scaled form."""

    g0: np.ndarray
    K: float
    gtilde: np.ndarray
    mu_max: float


@dataclass
class HypothesisReport:
    """Outcome of sampling the structural hypotheses over the neighborhood."""

    samples: int
    signature: tuple
    mu_max: float
    a0_diagonal: bool
    a0_offdiag_max: float
    f0_norm: float
    needs_time_rescaling: bool

    @property
    def ok(self) -> bool:
        return self.a0_diagonal and not self.needs_time_rescaling


def eigen_fields(spec: SystemSpec, states: np.ndarray):
    """Batched eigenstructure at states of shape (..., n).

    Returns (lambdas, left, right) with shapes (..., n), (..., n, n),
    (..., n, n). Diagonal coefficient matrices take a fast path. Raises
    HyperbolicityError / SignatureError if any sampled state violates
    the hypotheses.
    """
    states = np.asarray(states, dtype=float)
    n, m = spec.n, spec.m
    A_vals = spec.A_at(states)

    diag = np.einsum("...ii->...i", A_vals)
    off = A_vals - diag[..., None] * np.eye(n)
    if not np.any(off):
        lam_raw = diag
        order = np.argsort(lam_raw, axis=-1)
        lam = np.take_along_axis(lam_raw, order, axis=-1)
        # permuted identity columns: right[..., :, i] = e_{order[i]}
        right = (order[..., None, :] == np.arange(n)[..., :, None]).astype(float)
        left = np.swapaxes(right, -1, -2)
    else:
        w, v = np.linalg.eig(A_vals)
        scale = max(1.0, float(np.abs(w).max()))
        if np.abs(w.imag).max() > _IMAG_TOL * scale:
            raise HyperbolicityError("complex eigenvalue encountered")
        lam_raw = w.real
        order = np.argsort(lam_raw, axis=-1)
        lam = np.take_along_axis(lam_raw, order, axis=-1)
        right = np.take_along_axis(v.real, order[..., None, :], axis=-1)
        right = right / np.linalg.norm(right, axis=-2, keepdims=True)
        idx = np.argmax(np.abs(right), axis=-2)
        vals = np.take_along_axis(right, idx[..., None, :], axis=-2)[..., 0, :]
        right = right * np.where(vals < 0, -1.0, 1.0)[..., None, :]
        try:
            left = np.linalg.inv(right)
        except np.linalg.LinAlgError as exc:
            raise HyperbolicityError("defective eigenbasis") from exc

    scale = max(1.0, float(np.abs(lam).max()))
    if np.abs(lam).min() < _ZERO_EIG_TOL * scale:
        raise HyperbolicityError("zero eigenvalue encountered")
    if n > 1 and np.diff(lam, axis=-1).min() < _GAP_TOL * scale:
        raise HyperbolicityError("repeated eigenvalue (not strictly hyperbolic)")
    neg = int((lam < 0).sum(axis=-1).min()) if lam.size else 0
    neg_max = int((lam < 0).sum(axis=-1).max()) if lam.size else 0
    if neg != m or neg_max != m:
        raise SignatureError(
            f"signature is not ({m}, {n - m}) at every sampled state"
        )
    return lam, left, right


def eigen_decompose(A_val: np.ndarray, m: int) -> EigenStructure:
    """Eigenstructure of a single coefficient matrix with m negative speeds."""
    A_val = np.asarray(A_val, dtype=float)
    n = A_val.shape[0]
    spec = SystemSpec(
        n=n, m=m, A=lambda u: A_val, F=lambda u: np.zeros(n),
        domain_radius=1.0, L=1.0,
    )
    lam, left, right = eigen_fields(spec, np.zeros((1, n)))
    return EigenStructure(
        lambdas=lam[0], left=left[0], right=right[0], mus=1.0 / lam[0]
    )


def neighborhood_samples(spec: SystemSpec, samples: int) -> np.ndarray:
    """Low-discrepancy states covering the validated ball, origin included.

    Halton points mapped to the cube of the ball radius; points outside the
    ball are pulled radially just inside its surface.
    """
    n = spec.n
    r = spec.domain_radius
    pts = qmc.Halton(d=n, scramble=False).random(samples)
    cube = (2.0 * pts - 1.0) * r
    nrm = np.linalg.norm(cube, axis=1)
    factor = np.minimum(1.0, 0.999999 * r / np.maximum(nrm, 1e-300))
    cube *= factor[:, None]
    cube[0] = 0.0
    return cube


def measured_mu_max(spec: SystemSpec, samples: int = 256) -> float:
    """max_i sup |1 / lambda_i| over the sampled neighborhood."""
    pts = neighborhood_samples(spec, samples)
    lam, _, _ = eigen_fields(spec, pts)
    return float(np.abs(1.0 / lam).max())


def validate_hyperbolicity(spec: SystemSpec, samples: int = 256) -> HypothesisReport:
    """Check the structural hypotheses on a sampled neighborhood of u = 0.

    Raises SignatureError if the signature flips inside the neighborhood,
    HyperbolicityError on complex/zero/repeated eigenvalues, and
    SourceOriginError if F(0) != 0. A non-diagonal A(0) does not raise;
    it is reported (see ``origin_diagonalizer`` for the opt-in fix).
    """
    f0 = np.asarray(spec.F_at(np.zeros((1, spec.n)))[0], dtype=float)
    f0_norm = float(np.abs(f0).max()) if f0.size else 0.0
    if f0_norm > _ORIGIN_TOL:
        raise SourceOriginError(f"F(0) = {f0} is nonzero beyond tolerance")

    A0 = spec.A_at(np.zeros((1, spec.n)))[0]
    off = A0 - np.diag(np.diag(A0))
    a0_offdiag_max = float(np.abs(off).max()) if off.size else 0.0
    a0_diagonal = a0_offdiag_max <= _ORIGIN_TOL

    pts = neighborhood_samples(spec, samples)
    lam, _, _ = eigen_fields(spec, pts)
    mu_max = float(np.abs(1.0 / lam).max())

    return HypothesisReport(
        samples=samples,
        signature=(spec.m, spec.n - spec.m),
        mu_max=mu_max,
        a0_diagonal=a0_diagonal,
        a0_offdiag_max=a0_offdiag_max,
        f0_norm=f0_norm,
        needs_time_rescaling=mu_max > 1.0,
    )


def origin_diagonalizer(spec: SystemSpec) -> np.ndarray:
    """Constant similarity transform R with R^-1 A(0) R diagonal.

    Returned for explicit opt-in: conjugating also transforms F and the
    boundary maps, so the change of variables is never applied silently.
    """
    A0 = spec.A_at(np.zeros((1, spec.n)))[0]
    es = eigen_decompose(A0, spec.m)
    return es.right


def rescale_time(spec: SystemSpec, samples: int = 256) -> SystemSpec:
    """Return an equivalent system with max |1/lambda| = 1.

    If the measured mu_max exceeds 1, both A and F are multiplied by
    sigma = mu_max, which is the change of variables t -> t / sigma.
    Caller contract: the boundary period must be divided by sigma and the
    forcing signals reparametrized h(sigma * t') by the caller. Identity
    when mu_max <= 1 already.
    """
    mu_max = measured_mu_max(spec, samples)
    if mu_max <= 1.0:
        return spec
    sigma = mu_max
    A_old, F_old, gradF_old = spec.A, spec.F, spec.gradF
    gradF_new = None if gradF_old is None else (lambda u: sigma * np.asarray(gradF_old(u)))
    return SystemSpec(
        n=spec.n,
        m=spec.m,
        A=lambda u: sigma * np.asarray(A_old(u)),
        F=lambda u: sigma * np.asarray(F_old(u)),
        gradF=gradF_new,
        domain_radius=spec.domain_radius,
        L=spec.L,
    )


def minimal_K(g0: np.ndarray) -> float:
    """Least nonnegative shift making the source linearization dominated.

    Any K strictly above the returned value satisfies the weak diagonal
    dominance condition (-g_ii) - sum_{j != i} |g_ij| > -K.
    """
    g0 = np.atleast_2d(np.asarray(g0, dtype=float))
    n = g0.shape[0]
    rows = [g0[i, i] + sum(abs(g0[i, j]) for j in range(n) if j != i) for i in range(n)]
    return max(0.0, max(rows))


def coupling_B(spec: SystemSpec, u: np.ndarray) -> np.ndarray:
    """Interaction coefficients B_ij(u) = -l_ij / l_ii off the diagonal."""
    _, left, _ = eigen_fields(spec, np.asarray(u, dtype=float)[None, :])
    return _coupling_from_left(left)[0]


def _coupling_from_left(left: np.ndarray) -> np.ndarray:
    """Batched B from left eigenvector rows; zero diagonal by construction."""
    n = left.shape[-1]
    lii = np.einsum("...ii->...i", left)
    if np.abs(lii).min() < 1e-12:
        raise DegenerateEigenbasisError(
            "vanishing diagonal left-eigenvector entry; state outside the valid neighborhood"
        )
    B = -left / lii[..., :, None]
    B[..., np.arange(n), np.arange(n)] = 0.0
    return B


def source_linearization(spec: SystemSpec, K: Optional[float] = None,
                         samples: int = 256) -> SourceLinearization:
    """Assemble g0, the shift K (default: minimal + 1e-6), gtilde, mu_max."""
    g0 = spec.gradF_at(np.zeros(spec.n))
    if K is None:
        K = minimal_K(g0) + 1e-6
    gt = gtilde_matrix(spec, K)
    return SourceLinearization(g0=g0, K=float(K), gtilde=gt,
                               mu_max=measured_mu_max(spec, samples))


def gtilde_matrix(spec: SystemSpec, K: float) -> np.ndarray:
    """Speed-scaled, K-shifted source linearization.

    gtilde_ij = mu_i(0) g_ij(0) for j != i and mu_i(0) (g_ii(0) - K) on the
    diagonal. Raises DominanceError unless the result is strictly
    diagonally dominant with the sign pattern required of the two families
    (positive diagonal for left-moving rows, negative for right-moving).
    """
    if K < 0:
        raise ValueError("K must be nonnegative")
    n, m = spec.n, spec.m
    g0 = spec.gradF_at(np.zeros(n))
    lam0, _, _ = eigen_fields(spec, np.zeros((1, n)))
    mu0 = 1.0 / lam0[0]
    gt = mu0[:, None] * g0
    gt[np.arange(n), np.arange(n)] = mu0 * (np.diag(g0) - K)
    check_dominance(gt, m)
    return gt


def check_dominance(gtilde: np.ndarray, m: int) -> None:
    """Raise DominanceError unless the strict dominance signs hold."""
    n = gtilde.shape[0]
    for i in range(n):
        off = sum(abs(gtilde[i, j]) for j in range(n) if j != i)
        diag = gtilde[i, i] if i < m else -gtilde[i, i]
        if not diag > off:
            raise DominanceError(
                f"row {i}: need {'' if i < m else '-'}gtilde_ii > {off:.3e}, got {diag:.3e}"
                " (K too small)"
            )


def g_nonlinear(spec: SystemSpec, u: np.ndarray) -> np.ndarray:
    """Superlinear source remainder; vanishes with its gradient at u = 0."""
    u = np.asarray(u, dtype=float)
    if not spec.contains(u):
        raise DomainError("state outside the validated neighborhood")
    return g_nonlinear_batch(spec, u[None, :])[0]


def g_nonlinear_batch(spec: SystemSpec, states: np.ndarray) -> np.ndarray:
    """Batched superlinear remainder on states of shape (..., n).

    remainder_i = mu_i(u) f_i(u) - sum_j mu_i(0) g_ij(0) u_j
                  - sum_j B_ij(u) mu_i(u) f_j(u).
    """
    states = np.asarray(states, dtype=float)
    n = spec.n
    lam, left, _ = eigen_fields(spec, states)
    mu = 1.0 / lam
    B = _coupling_from_left(left)
    Fv = spec.F_at(states)
    g0 = spec.gradF_at(np.zeros(n))
    lam0, _, _ = eigen_fields(spec, np.zeros((1, n)))
    mu0 = 1.0 / lam0[0]
    linear = np.einsum("i,ij,...j->...i", mu0, g0, states)
    coupled = mu * np.einsum("...ij,...j->...i", B, Fv)
    return mu * Fv - linear - coupled
