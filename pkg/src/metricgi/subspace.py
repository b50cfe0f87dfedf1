"""Subspaces of l^p spaces, metric projection and the gap between subspaces.

The metric projection onto a subspace G is the (nonlinear) nearest-point map
in the p-norm.  It is computed by a damped Newton method and certified by the
orthogonal-decomposition characterisation: g = pi_G(x) exactly when the dual
functional F(x - g) annihilates G.  The size of that annihilation residual is
the stopping criterion, not the step length.

For p > 2 Newton runs on the primal problem ``min_t sum |x - B t|^p``.  For
p < 2 the primal Hessian blows up at vanishing residual coordinates, so Newton
runs on the dual problem over the annihilator, whose exponent p' exceeds 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .lp_space import PNormSpace, abs_power, lp_norm, norm_gradient, signed_power

DEFAULT_TOL = 1e-10
RANK_TOL = 1e-10
# relative distance below which a point counts as lying in the subspace
_ROUNDING = 64 * np.finfo(float).eps


class ConvergenceError(RuntimeError):
    """A projection solve ended without meeting its certificate tolerance."""

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


def numerical_rank(a: np.ndarray, tol: float = RANK_TOL) -> int:
    """Rank of ``a`` counting singular values above ``tol * sigma_max``."""
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(0 if rng is None else rng)


class Subspace:
    """A linear subspace of a :class:`PNormSpace` given by a basis matrix.

    Parameters
    ----------
    basis : array_like, shape (dim, k)
        Columns spanning the subspace.  They must be linearly independent
        (singular values above ``rank_tol`` times the largest).  ``k = 0`` is
        the zero subspace.
    space : PNormSpace
        Ambient space.

    Attributes
    ----------
    basis : ndarray (dim, k)
        The basis as given.
    q : ndarray (dim, k)
        Euclidean-orthonormal basis of the same subspace.
    annihilator : ndarray (dim, dim - k)
        Orthonormal coordinate functionals spanning G^perp.
    """

    def __init__(self, basis, space: PNormSpace, rank_tol: float = RANK_TOL):
        basis = np.asarray(basis, dtype=float)
        if basis.ndim == 1:
            basis = basis.reshape(-1, 1)
        if basis.shape[0] != space.dim:
            raise ValueError(
                f"basis has {basis.shape[0]} rows, space has dimension {space.dim}"
            )
        if not np.all(np.isfinite(basis)):
            raise ValueError("basis has non-finite entries")
        k = basis.shape[1]
        if k:
            u, s, _ = np.linalg.svd(basis, full_matrices=True)
            if s[0] == 0.0 or s[-1] <= rank_tol * s[0]:
                raise ValueError("basis columns are not linearly independent")
        else:
            u = np.eye(space.dim)
        self.space = space
        self.basis = basis
        self.q = u[:, :k]
        self.annihilator = u[:, k:]

    @classmethod
    def span(cls, vectors, space: PNormSpace, tol: float = RANK_TOL) -> "Subspace":
        """Subspace spanned by the columns of ``vectors`` (any rank)."""
        vectors = np.asarray(vectors, dtype=float)
        if vectors.ndim == 1:
            vectors = vectors.reshape(-1, 1)
        if vectors.size == 0:
            return cls.zero(space)
        u, s, _ = np.linalg.svd(vectors, full_matrices=False)
        r = int(np.sum(s > tol * s[0])) if s[0] > 0 else 0
        return cls(u[:, :r], space)

    @classmethod
    def zero(cls, space: PNormSpace) -> "Subspace":
        return cls(np.zeros((space.dim, 0)), space)

    @classmethod
    def full(cls, space: PNormSpace) -> "Subspace":
        return cls(np.eye(space.dim), space)

    @property
    def dim(self) -> int:
        return self.q.shape[1]

    def contains(self, x, tol: float = 1e-10) -> bool:
        x = np.asarray(x, dtype=float)
        nx = np.linalg.norm(x)
        if nx == 0.0:
            return True
        return float(np.linalg.norm(self.annihilator.T @ x)) <= tol * nx

    def annihilates(self, f) -> float:
        """Normalised size of the functional ``f`` on G (0 when f is in G^perp)."""
        return _annihilator_defect(self.q, np.asarray(f, dtype=float), self.space.p)

    def __repr__(self):
        return f"Subspace(dim={self.dim}, ambient={self.space.dim}, p={self.space.p})"


@dataclass
class ProjectionCertificate:
    """Result of a metric projection together with its optimality evidence.

    ``annihilator_defect`` is ``max_i |F(residual) . b_i| / (||F(residual)||
    ||b_i||)`` over an orthonormal basis of G; it vanishes exactly at the
    nearest point.
    """

    projection: np.ndarray
    residual: np.ndarray
    annihilator_defect: float
    iterations: int
    converged: bool
    distance: float
    tol: float = DEFAULT_TOL


def _annihilator_defect(q: np.ndarray, f: np.ndarray, p: float) -> float:
    if q.shape[1] == 0:
        return 0.0
    nf = lp_norm(f, p / (p - 1.0) if p != 2.0 else 2.0)
    if nf == 0.0:
        return 0.0
    col_norms = np.array([lp_norm(q[:, j], p) for j in range(q.shape[1])])
    return float(np.max(np.abs(q.T @ f) / col_norms) / nf)


def _backward_defect(q, s, r, p):
    """Distance of r from F^-1(G^perp), via the dual point s in G^perp.

    ``psi_p'(s)`` has dual functional proportional to s; report how far r is
    from it (relative) together with how well s annihilates G.
    """
    pd = p / (p - 1.0)
    target = signed_power(s, pd - 1.0)
    nr = lp_norm(r, p)
    if nr == 0.0:
        return 0.0
    mismatch = lp_norm(r - target, p) / nr
    return max(mismatch, _annihilator_defect(q, s, p))


def _newton(fun, grad_hess, z0, check, max_iter):
    """Damped Newton with Armijo backtracking.

    ``check(z)`` returns ``(defect, done)``; iteration stops once ``done``,
    when the iterate stops moving, or after eight steps in a row that fail to
    shrink the gradient.  A full step that halves the gradient norm is
    accepted even if f does not decrease measurably, since close to the
    optimum f only changes at rounding level.
    """
    z = z0
    f = fun(z)
    defect, done = check(z)
    g, h = grad_hess(z)
    gnorm = float(np.linalg.norm(g))
    stale = 0
    it = 0
    while not done and it < max_iter and stale < 8:
        it += 1
        ridge = 1e-15 * max(float(np.max(np.abs(np.diag(h)))), 1e-300)
        try:
            d = -np.linalg.solve(h + ridge * np.eye(len(z)), g)
        except np.linalg.LinAlgError:
            d = -np.linalg.lstsq(h, g, rcond=None)[0]
        slope = float(g @ d)
        if not slope < 0.0:
            d = -g
            slope = -float(g @ g)
        z_new = z + d
        f_new = fun(z_new)
        g_new, h_new = grad_hess(z_new)
        if not (f_new <= f + 1e-4 * slope or np.linalg.norm(g_new) <= 0.5 * gnorm):
            step = 0.5
            while step >= 1e-12:
                z_new = z + step * d
                f_new = fun(z_new)
                if f_new <= f + 1e-4 * step * slope:
                    break
                step *= 0.5
            if step < 1e-12:
                break
            g_new, h_new = grad_hess(z_new)
        moved = np.max(np.abs(z_new - z)) > 4 * np.finfo(float).eps * np.max(np.abs(z_new))
        gnorm_new = float(np.linalg.norm(g_new))
        stale = stale + 1 if gnorm_new >= gnorm else 0
        z, f, g, h, gnorm = z_new, f_new, g_new, h_new, gnorm_new
        defect, done = check(z)
        if not moved:
            break
    return z, defect, it


def metric_project(
    G: Subspace,
    x,
    tol: float = DEFAULT_TOL,
    start=None,
    max_iter: int = 200,
) -> ProjectionCertificate:
    """Nearest point of G to x in the p-norm, with an optimality certificate.

    Parameters
    ----------
    G : Subspace
    x : array_like
        Point of the ambient space of G.
    tol : float
        Required annihilator defect.
    start : array_like, optional
        Initial guess for the projection (its Euclidean projection onto G is
        used).  Without it the Euclidean projection of x is the starting
        point, and p = 2 is solved in closed form.
    max_iter : int
        Newton iteration budget.  Running out yields ``converged=False``.

    Notes
    -----
    By quasi-additivity, pi_G(x) = QQ^T x + pi_G(w) with w = x - QQ^T x, so
    only w is optimised.  The residual is parametrised as ``w + Q u``, which
    keeps it accurate even when x lies very close to G.
    """
    space = G.space
    x = space.check(x)
    p = space.p
    k, n = G.dim, space.dim
    if k == 0:
        return ProjectionCertificate(np.zeros(n), x.copy(), 0.0, 0, True, lp_norm(x, p), tol)
    if k == n:
        return ProjectionCertificate(x.copy(), np.zeros(n), 0.0, 0, True, 0.0, tol)
    q, a = G.q, G.annihilator
    w = a @ (a.T @ x)
    scale = lp_norm(w, p)
    if scale <= _ROUNDING * lp_norm(x, p):
        # x lies in G to working precision; its residual would be pure noise
        return ProjectionCertificate(x.copy(), np.zeros(n), 0.0, 0, True, 0.0, tol)

    ws = w / scale
    if _annihilator_defect(q, signed_power(x / scale, p - 1.0), p) <= tol:
        # 0 already satisfies the optimality condition
        return ProjectionCertificate(
            np.zeros(n), x.copy(), _annihilator_defect(q, signed_power(x / scale, p - 1.0), p),
            0, True, lp_norm(x, p), tol,
        )
    u0 = np.zeros(k) if start is None else q.T @ (x - np.asarray(start, dtype=float)) / scale
    # stop two digits below the requested tolerance: downstream compositions
    # (T^M, Phi) lose a little accuracy on every projection they chain
    target = tol * 1e-2

    def primal_check(u):
        d = _annihilator_defect(q, signed_power(ws + q @ u, p - 1.0), p)
        return d, d <= target

    if p == 2.0 and start is None:
        u, it = u0, 0
    elif p >= 2.0:

        def fun(u):
            return float(np.sum(abs_power(ws + q @ u, p))) / p

        def grad_hess(u):
            r = ws + q @ u
            g = q.T @ signed_power(r, p - 1.0)
            h = (p - 1.0) * (q.T * abs_power(r, p - 2.0)) @ q
            return g, h

        u, _, it = _newton(fun, grad_hess, u0, primal_check, max_iter)
    else:
        # dual problem: min_c ||A c||_p'^p' / p' - c . A^T w over G^perp
        pd = p / (p - 1.0)
        aw = a.T @ ws

        def fun(c):
            return float(np.sum(abs_power(a @ c, pd))) / pd - float(c @ aw)

        def grad_hess(c):
            s = a @ c
            g = a.T @ signed_power(s, pd - 1.0) - aw
            h = (pd - 1.0) * (a.T * abs_power(s, pd - 2.0)) @ a
            return g, h

        def dual_check(c):
            s = a @ c
            r = ws + q @ (q.T @ signed_power(s, pd - 1.0))
            d = _annihilator_defect(q, signed_power(r, p - 1.0), p)
            if d > target:
                d = min(d, _backward_defect(q, s, r, p))
            return d, d <= target

        c0 = a.T @ signed_power(ws + q @ u0, p - 1.0)
        c, _, it = _newton(fun, grad_hess, c0, dual_check, max_iter)
        dual_s = a @ c
        u = q.T @ signed_power(dual_s, pd - 1.0)

    rs = ws + q @ u
    resid = scale * rs
    proj = x - resid
    defect = _annihilator_defect(q, signed_power(rs, p - 1.0), p)
    if p < 2.0 and defect > tol:
        # F amplifies rounding in tiny residual coordinates by |r_i|^(p-2);
        # fall back to the backward error against the dual iterate, whose
        # functional lies in G^perp exactly
        defect = min(defect, _backward_defect(q, dual_s, rs, p))
    return ProjectionCertificate(proj, resid, defect, it, defect <= tol, lp_norm(resid, p), tol)


def god_decompose(G: Subspace, x, tol: float = DEFAULT_TOL, start=None):
    """Split x = x1 + x2 with x1 in G and F(x2) annihilating G.

    Raises
    ------
    ConvergenceError
        If the projection does not reach ``tol``.
    """
    cert = metric_project(G, x, tol=tol, start=start)
    if not cert.converged:
        raise ConvergenceError(
            f"metric projection stalled at defect {cert.annihilator_defect:.3e}", cert
        )
    return cert.projection, cert.residual


def project(G: Subspace, x, tol: float = DEFAULT_TOL) -> np.ndarray:
    """pi_G(x); raises :class:`ConvergenceError` if uncertified."""
    return god_decompose(G, x, tol)[0]


def distance(G: Subspace, x, tol: float = DEFAULT_TOL) -> float:
    """D(x, G) = ||x - pi_G(x)||_p."""
    return lp_norm(god_decompose(G, x, tol)[1], G.space.p)


@dataclass
class Estimate:
    """A one-sided numerical estimate of a sup or inf, with the point attaining it."""

    value: float
    witness: np.ndarray = field(repr=False)
    starts: int = 0

    def __float__(self):
        return float(self.value)


def _multistart(fun_grad, dim, rng, restarts, seeds=(), maximize=True, axes=True):
    """Run BFGS from seeds, coordinate directions (if ``axes``) and random points.

    ``fun_grad(c)`` returns the value and gradient of a scale-invariant
    objective.  Returns ``(best_value, best_point, n_starts)``.
    """
    sign = -1.0 if maximize else 1.0

    def obj(c):
        v, g = fun_grad(c)
        return sign * v, sign * g

    starts = [np.asarray(s, dtype=float) for s in seeds]
    if axes:
        starts += list(np.eye(dim))
    starts += [rng.standard_normal(dim) for _ in range(restarts)]
    best_v, best_c = None, None
    for c0 in starts:
        nc = np.linalg.norm(c0)
        if nc == 0.0:
            continue
        c0 = c0 / nc
        v0, _ = fun_grad(c0)
        c, v = c0, v0
        if dim > 1:
            res = optimize.minimize(obj, c0, jac=True, method="BFGS", options={"gtol": 1e-10})
            cand = res.x / np.linalg.norm(res.x)
            vc, _ = fun_grad(cand)
            # keep the better of start and end: BFGS may stop on a bad line search
            if (vc >= v0) if maximize else (vc <= v0):
                c, v = cand, vc
        if best_v is None or (v > best_v if maximize else v < best_v):
            best_v, best_c = v, c
    if best_v is None:
        raise ValueError("no nonzero starting point")
    return best_v, best_c, len(starts)


def gap(M: Subspace, N: Subspace, restarts: int = 16, rng=None, tol: float = DEFAULT_TOL) -> Estimate:
    """Estimate delta(M, N) = sup{D(x, N) : x in M, ||x|| = 1}.

    Multi-start ascent over the unit sphere of M (random starts plus the basis
    directions).  Every candidate value is an attained distance, so the
    estimate is a lower bound of the supremum.  delta({0}, N) = 0.
    """
    if M.space != N.space:
        raise ValueError("subspaces live in different spaces")
    p = M.space.p
    if M.dim == 0:
        return Estimate(0.0, np.zeros(M.space.dim))
    if N.dim == N.space.dim:
        return Estimate(0.0, M.q[:, 0].copy())
    b = M.q

    def fun_grad(c):
        x = b @ c
        nx = lp_norm(x, p)
        if N.dim == 0:
            return 1.0, np.zeros_like(c)
        cert = metric_project(N, x, tol=tol)
        d = lp_norm(cert.residual, p)
        g = b.T @ (norm_gradient(cert.residual, p) / nx - d * norm_gradient(x, p) / nx**2)
        return d / nx, g

    v, c, n_starts = _multistart(fun_grad, M.dim, _as_rng(rng), restarts)
    w = b @ c
    w = w / lp_norm(w, p)
    return Estimate(float(min(max(v, 0.0), 1.0)), w, n_starts)


def sym_gap(M: Subspace, N: Subspace, restarts: int = 16, rng=None, tol: float = DEFAULT_TOL) -> Estimate:
    """max(delta(M, N), delta(N, M))."""
    rng = _as_rng(rng)
    a = gap(M, N, restarts, rng, tol)
    b = gap(N, M, restarts, rng, tol)
    return a if a.value >= b.value else b


def subspaces_equal(M: Subspace, N: Subspace, tol: float = RANK_TOL) -> bool:
    """Rank test: M = N iff rank [M | N] = dim M = dim N."""
    if M.dim != N.dim:
        return False
    if M.dim == 0:
        return True
    return numerical_rank(np.hstack([M.q, N.q]), tol) == M.dim


def contained_in(M: Subspace, N: Subspace, tol: float = RANK_TOL) -> bool:
    """Rank test for M subset N."""
    if M.dim == 0:
        return True
    if N.dim == 0:
        return False
    return numerical_rank(np.hstack([N.q, M.q]), tol) == N.dim
