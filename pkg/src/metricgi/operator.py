"""Linear maps between l^p spaces and their Moore-Penrose metric inverse.

T^M is the bounded homogeneous map that sends b to the minimal-norm best
approximate solution of Tx = b:

    y* = pi_R(T)(b)           nearest point of the range, q-norm
    x0 = any solution of T x0 = y*
    x* = x0 - pi_N(T)(x0)     remove the nearest kernel element, p-norm

It is nonlinear unless p = q = 2, so it is never stored as a matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from .lp_space import PNormSpace, abs_power, lp_norm, norm_gradient
from .subspace import (
    DEFAULT_TOL,
    RANK_TOL,
    ConvergenceError,
    Estimate,
    Subspace,
    _as_rng,
    _multistart,
    metric_project,
)


class PNormOperator:
    """A dense matrix acting from l^p(n) to l^q(m)."""

    def __init__(self, matrix, domain: PNormSpace, codomain: PNormSpace, rank_tol: float = RANK_TOL):
        matrix = np.array(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape != (codomain.dim, domain.dim):
            raise ValueError(
                f"matrix shape {matrix.shape} does not match spaces "
                f"({codomain.dim}, {domain.dim})"
            )
        if not np.all(np.isfinite(matrix)):
            raise ValueError("matrix has non-finite entries")
        matrix.setflags(write=False)
        self.matrix = matrix
        self.domain = domain
        self.codomain = codomain
        self.rank_tol = rank_tol

    @classmethod
    def from_matrix(cls, matrix, p: float, q: float) -> "PNormOperator":
        matrix = np.asarray(matrix, dtype=float)
        m, n = matrix.shape
        return cls(matrix, PNormSpace(n, p), PNormSpace(m, q))

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def p(self) -> float:
        return self.domain.p

    @property
    def q(self) -> float:
        return self.codomain.p

    @property
    def hilbert(self) -> bool:
        return self.p == 2.0 and self.q == 2.0

    def __call__(self, x) -> np.ndarray:
        return self.matrix @ np.asarray(x, dtype=float)

    def __add__(self, other: "PNormOperator") -> "PNormOperator":
        self._check_compatible(other)
        return PNormOperator(self.matrix + other.matrix, self.domain, self.codomain, self.rank_tol)

    def __sub__(self, other: "PNormOperator") -> "PNormOperator":
        self._check_compatible(other)
        return PNormOperator(self.matrix - other.matrix, self.domain, self.codomain, self.rank_tol)

    def scaled(self, c: float) -> "PNormOperator":
        return PNormOperator(c * self.matrix, self.domain, self.codomain, self.rank_tol)

    def _check_compatible(self, other):
        if other.domain != self.domain or other.codomain != self.codomain:
            raise ValueError("operators act between different spaces")

    @cached_property
    def svd(self):
        return np.linalg.svd(self.matrix, full_matrices=True)

    @cached_property
    def rank(self) -> int:
        s = self.svd[1]
        if s.size == 0 or s[0] == 0.0:
            return 0
        return int(np.sum(s > self.rank_tol * s[0]))

    @cached_property
    def kernel(self) -> Subspace:
        _, _, vt = self.svd
        return Subspace(vt[self.rank:].T, self.domain)

    @cached_property
    def range(self) -> Subspace:
        u = self.svd[0]
        return Subspace(u[:, : self.rank], self.codomain)

    @cached_property
    def range_solver(self) -> np.ndarray:
        """Matrix solving T x = y exactly for y in the range (pseudoinverse)."""
        u, s, vt = self.svd
        r = self.rank
        return (vt[:r].T / s[:r]) @ u[:, :r].T

    def metric_inverse(self, tol: float = DEFAULT_TOL) -> "MetricInverse":
        cache = self.__dict__.setdefault("_mgi_cache", {})
        if tol not in cache:
            cache[tol] = MetricInverse(self, tol)
        return cache[tol]

    def as_map(self) -> "HomogeneousMap":
        return HomogeneousMap.linear(self.matrix, self.domain, self.codomain, "T")

    def __repr__(self):
        m, n = self.shape
        return f"PNormOperator({m}x{n}, p={self.p}, q={self.q}, rank={self.rank})"


def kernel(T: PNormOperator, tol: float = RANK_TOL) -> Subspace:
    """N(T) from the SVD, threshold ``tol * sigma_max``."""
    if tol == T.rank_tol:
        return T.kernel
    return PNormOperator(T.matrix, T.domain, T.codomain, tol).kernel


def range_space(T: PNormOperator, tol: float = RANK_TOL) -> Subspace:
    """R(T) from the SVD, threshold ``tol * sigma_max``."""
    if tol == T.rank_tol:
        return T.range
    return PNormOperator(T.matrix, T.domain, T.codomain, tol).range


@dataclass
class HomogeneousMap:
    """A map with H(lam x) = lam H(x), evaluated by an arbitrary procedure.

    ``linearize(x)``, when given, returns ``(H(x), pullback)`` where
    ``pullback(u)`` is the transposed Jacobian applied to u; norm estimation
    uses it for exact gradients and falls back to finite differences.
    """

    apply: Callable[[np.ndarray], np.ndarray]
    domain: PNormSpace
    codomain: PNormSpace
    label: str = ""
    linearize: Optional[Callable] = field(default=None, repr=False)

    def __call__(self, x) -> np.ndarray:
        return self.apply(np.asarray(x, dtype=float))

    @classmethod
    def linear(cls, matrix, domain, codomain, label="") -> "HomogeneousMap":
        matrix = np.asarray(matrix, dtype=float)

        def lin(x):
            return matrix @ x, lambda u: matrix.T @ u

        return cls(lambda x: matrix @ x, domain, codomain, label, lin)

    @classmethod
    def identity(cls, space) -> "HomogeneousMap":
        return cls.linear(np.eye(space.dim), space, space, "I")

    def then(self, other: "HomogeneousMap", label: str = "") -> "HomogeneousMap":
        """The composition ``other o self``."""
        lin = None
        if self.linearize is not None and other.linearize is not None:

            def lin(x):
                y, pb1 = self.linearize(x)
                z, pb2 = other.linearize(y)
                return z, lambda u: pb1(pb2(u))

        return HomogeneousMap(
            lambda x: other(self(x)), self.domain, other.codomain,
            label or f"{other.label}*{self.label}", lin,
        )

    def matrix(self) -> np.ndarray:
        """Columns H(e_j); only meaningful when H is additive."""
        n = self.domain.dim
        return np.column_stack([self(e) for e in np.eye(n)])


def _projection_jacobian_t(G: Subspace, residual: np.ndarray) -> Callable:
    """Transposed Jacobian of pi_G at a point with the given residual.

    Differentiating the optimality condition ``Q^T psi(x - Q t) = 0`` gives
    ``J = Q (Q^T W Q)^-1 Q^T W`` with ``W = diag(|r|^(p-2))``.
    """
    q = G.q
    p = G.space.p
    if G.dim == 0:
        return lambda u: np.zeros_like(u)
    if G.dim == G.space.dim:
        return lambda u: u
    if p == 2.0:
        return lambda u: q @ (q.T @ u)
    mag = np.abs(residual)
    top = float(np.max(mag)) if mag.size else 0.0
    if top == 0.0:
        w = np.ones_like(residual)
    else:
        w = abs_power(np.maximum(mag / top, 1e-12), p - 2.0)
        w = w / np.max(w)
    k = q.T @ (w[:, None] * q)
    return lambda u: w * (q @ np.linalg.solve(k, q.T @ u))


class MetricInverse:
    """T^M for a fixed operator; call it like a function."""

    def __init__(self, T: PNormOperator, tol: float = DEFAULT_TOL):
        self.T = T
        self.tol = tol
        self.range = T.range
        self.kernel = T.kernel
        self.solver = T.range_solver

    def certified(self, b):
        """Return ``(x*, range_certificate, kernel_certificate)``."""
        b = self.T.codomain.check(b)
        rc = metric_project(self.range, b, tol=self.tol)
        if not rc.converged:
            raise ConvergenceError(
                f"range projection stalled at defect {rc.annihilator_defect:.3e}", rc
            )
        x0 = self.solver @ rc.projection
        kc = metric_project(self.kernel, x0, tol=self.tol)
        if not kc.converged:
            raise ConvergenceError(
                f"kernel projection stalled at defect {kc.annihilator_defect:.3e}", kc
            )
        return kc.residual, rc, kc

    def __call__(self, b) -> np.ndarray:
        return self.certified(b)[0]

    def linearize(self, b):
        x, rc, kc = self.certified(b)
        jr = _projection_jacobian_t(self.range, rc.residual)
        jk = _projection_jacobian_t(self.kernel, kc.residual)
        solver = self.solver

        def pullback(u):
            u1 = u - jk(u)
            return jr(solver.T @ u1)

        return x, pullback

    def as_map(self) -> HomogeneousMap:
        T = self.T
        return HomogeneousMap(self, T.codomain, T.domain, "T^M", self.linearize)


def mgi_apply(T: PNormOperator, b, tol: float = DEFAULT_TOL) -> np.ndarray:
    """T^M b: the minimal p-norm minimiser of ||T x - b||_q."""
    return T.metric_inverse(tol)(b)


def mgi_map(T: PNormOperator, tol: float = DEFAULT_TOL) -> HomogeneousMap:
    return T.metric_inverse(tol).as_map()


@dataclass
class AxiomReport:
    """Worst relative residuals of the four defining equations of T^M.

    ``residuals[0..3]`` correspond to T G T = T, G T G = G, G T = I - pi_N
    and T G = pi_R, for the candidate inverse G.
    """

    residuals: tuple
    samples: int
    tol: float
    passed: bool

    @property
    def worst(self) -> float:
        return max(self.residuals)


def _rel(a, b, p):
    den = max(lp_norm(a, p), lp_norm(b, p))
    if den < 1e-300:
        return 0.0
    return lp_norm(a - b, p) / den


def mgi_axiom_check(
    T: PNormOperator,
    samples: int = 20,
    tol: float = 1e-6,
    rng=None,
    inverse: Optional[Callable] = None,
    solver_tol: float = DEFAULT_TOL,
) -> AxiomReport:
    """Evaluate the four defining equations of T^M on random samples.

    ``inverse`` defaults to T^M itself; pass another homogeneous map (for
    instance a perturbation expression) to test whether it is T's metric
    generalized inverse.
    """
    rng = _as_rng(rng)
    G = inverse if inverse is not None else T.metric_inverse(solver_tol)
    p, q = T.p, T.q
    worst = [0.0, 0.0, 0.0, 0.0]
    for _ in range(samples):
        x = rng.standard_normal(T.domain.dim)
        y = rng.standard_normal(T.codomain.dim)
        tx = T(x)
        gtx = G(tx)
        gy = G(y)
        worst[0] = max(worst[0], _rel(T(gtx), tx, q))
        worst[1] = max(worst[1], _rel(G(T(gy)), gy, p))
        kc = metric_project(T.kernel, x, tol=solver_tol)
        worst[2] = max(worst[2], _rel(gtx, kc.residual, p))
        rc = metric_project(T.range, y, tol=solver_tol)
        worst[3] = max(worst[3], _rel(T(gy), rc.projection, q))
    return AxiomReport(tuple(worst), samples, tol, max(worst) <= tol)


def _fd_linearize(H: HomogeneousMap):
    def lin(x):
        hx = H(x)
        h = 1e-7 * max(np.linalg.norm(x), 1e-300)

        def pullback(u):
            cols = [(H(x + h * e) - H(x - h * e)) / (2 * h) for e in np.eye(len(x))]
            return np.column_stack(cols).T @ u

        return hx, pullback

    return lin


def homogeneous_norm(
    H: HomogeneousMap, restarts: int = 8, rng=None, seeds=(), axes: bool = True
) -> Estimate:
    """Lower-bound estimate of sup{||H x|| : ||x|| = 1} by multi-start ascent.

    ``seeds`` are extra starting points tried before the coordinate
    directions (skipped when ``axes`` is false) and ``restarts`` random points.
    """
    p_in, p_out = H.domain.p, H.codomain.p
    lin = H.linearize or _fd_linearize(H)

    def fun_grad(c):
        nc = lp_norm(c, p_in)
        hc, pullback = lin(c)
        nh = lp_norm(hc, p_out)
        if nh == 0.0:
            return 0.0, np.zeros_like(c)
        g = pullback(norm_gradient(hc, p_out)) / nc - nh * norm_gradient(c, p_in) / nc**2
        return nh / nc, g

    v, c, n = _multistart(fun_grad, H.domain.dim, _as_rng(rng), restarts, seeds, axes=axes)
    return Estimate(float(v), c / lp_norm(c, p_in), n)


def operator_norm(
    T: PNormOperator, restarts: int = 8, rng=None, seeds=(), axes: bool = True
) -> Estimate:
    """||T|| from l^p to l^q; exact (sigma_max) when p = q = 2."""
    if T.hilbert:
        u, s, vt = T.svd
        if s.size == 0 or s[0] == 0.0:
            return Estimate(0.0, np.eye(T.domain.dim)[0])
        return Estimate(float(s[0]), vt[0].copy())
    if not np.any(T.matrix):
        return Estimate(0.0, np.eye(T.domain.dim)[0])
    return homogeneous_norm(T.as_map(), restarts, rng, seeds, axes)


def mgi_norm(
    T: PNormOperator, restarts: int = 8, rng=None, seeds=(), tol: float = DEFAULT_TOL,
    axes: bool = True,
) -> Estimate:
    """||T^M||; exact (1 / smallest nonzero singular value) when p = q = 2."""
    if T.rank == 0:
        return Estimate(0.0, np.eye(T.codomain.dim)[0])
    if T.hilbert:
        u, s, _ = T.svd
        return Estimate(float(1.0 / s[T.rank - 1]), u[:, T.rank - 1].copy())
    return homogeneous_norm(mgi_map(T, tol), restarts, rng, seeds, axes)


@dataclass
class QuasiAdditivityReport:
    """Worst relative defect of H(x + z) = H(x) + H(z) over samples z in M."""

    defect: float
    samples: int
    tol: float
    passed: bool


def quasi_additivity_check(
    H: HomogeneousMap, M: Subspace, samples: int = 20, tol: float = 1e-8, rng=None
) -> QuasiAdditivityReport:
    """Sample-test quasi-additivity of H on M.

    z is drawn from M with magnitudes spread over two decades relative to x.
    """
    rng = _as_rng(rng)
    p_out = H.codomain.p
    worst = 0.0
    if M.dim == 0:
        return QuasiAdditivityReport(0.0, samples, tol, True)
    for _ in range(samples):
        x = rng.standard_normal(M.space.dim)
        z = M.q @ rng.standard_normal(M.dim)
        z *= 10.0 ** rng.uniform(-1, 1) * np.linalg.norm(x) / np.linalg.norm(z)
        hx, hz, hxz = H(x), H(z), H(x + z)
        den = max(lp_norm(hx, p_out) + lp_norm(hz, p_out), 1e-300)
        worst = max(worst, lp_norm(hxz - hx - hz, p_out) / den)
    return QuasiAdditivityReport(worst, samples, tol, worst <= tol)


def reduced_min_modulus(T: PNormOperator, restarts: int = 8, rng=None, tol: float = DEFAULT_TOL) -> Estimate:
    """Estimate gamma(T) = inf{||T x|| : D(x, N(T)) = 1}.

    Multi-start minimisation of ``||T W c|| / D(W c, N(T))`` with W an
    orthonormal basis of the row space.  The value returned is attained at
    the witness, so it bounds gamma(T) from above.  Exact for p = q = 2
    (smallest nonzero singular value); +inf for T = 0.
    """
    r = T.rank
    if r == 0:
        return Estimate(float("inf"), np.zeros(T.domain.dim))
    _, s, vt = T.svd
    if T.hilbert:
        return Estimate(float(s[r - 1]), vt[r - 1].copy())
    w = vt[:r].T
    N = T.kernel
    p, q = T.p, T.q
    a = T.matrix

    def fun_grad(c):
        x = w @ c
        tx = a @ x
        ntx = lp_norm(tx, q)
        if N.dim == 0:
            resid = x
        else:
            resid = metric_project(N, x, tol=tol).residual
        d = lp_norm(resid, p)
        g = w.T @ (a.T @ norm_gradient(tx, q) / d - ntx * norm_gradient(resid, p) / d**2)
        return ntx / d, g

    v, c, n = _multistart(fun_grad, r, _as_rng(rng), restarts, maximize=False)
    x = w @ c
    dist = lp_norm(x if N.dim == 0 else metric_project(N, x, tol=tol).residual, p)
    return Estimate(float(v), x / dist, n)


def condition_number(T: PNormOperator, restarts: int = 8, rng=None, tol: float = DEFAULT_TOL) -> Estimate:
    """kappa = ||T^M|| ||T||; exact for p = q = 2, otherwise an estimate."""
    rng = _as_rng(rng)
    nt = operator_norm(T, restarts, rng)
    nm = mgi_norm(T, restarts, rng, tol=tol)
    return Estimate(nt.value * nm.value, nm.witness, nt.starts + nm.starts)
