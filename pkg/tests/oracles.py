"""Brute-force reference computations, independent of the package solvers.

Distances to subspaces of R^2 and R^3 use either the closed form for
hyperplanes (``|a.x| / ||a||_p'``) or a batched golden-section search along
a line.  Suprema and infima over unit spheres use dense point grids.
"""

import numpy as np

INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


def lp(x, p, axis=-1):
    return np.sum(np.abs(x) ** p, axis=axis) ** (1.0 / p)


def conjugate(p):
    return p / (p - 1.0)


def hyperplane_distance(a, xs, p):
    """Distance from each row of xs to {y : a . y = 0} in the p-norm."""
    return np.abs(xs @ a) / lp(a, conjugate(p))


def line_distance(d, xs, p, iters=120):
    """min_t ||x - t d||_p for each row x, by golden-section search on t."""
    xs = np.atleast_2d(xs)
    bound = 2.0 * lp(xs, p) / lp(d, p) + 1e-300
    lo, hi = -bound, bound.copy()

    def f(t):
        return lp(xs - t[:, None] * d[None, :], p)

    a = hi - INVPHI * (hi - lo)
    b = lo + INVPHI * (hi - lo)
    fa, fb = f(a), f(b)
    for _ in range(iters):
        left = fa < fb
        hi = np.where(left, b, hi)
        lo = np.where(left, lo, a)
        a_new = hi - INVPHI * (hi - lo)
        b_new = lo + INVPHI * (hi - lo)
        # reuse the retained point
        a, b = np.where(left, a_new, b), np.where(left, a, b_new)
        fa_keep, fb_keep = fa, fb
        fa = np.where(left, f(a), fb_keep)
        fb = np.where(left, fa_keep, f(b))
    t = 0.5 * (lo + hi)
    return f(t), t


def subspace_distance(basis, xs, p):
    """Distance from rows of xs to span(basis columns); ambient dim <= 3."""
    basis = np.atleast_2d(np.asarray(basis, dtype=float))
    xs = np.atleast_2d(xs)
    dim, k = basis.shape
    if k == 0:
        return lp(xs, p)
    if k == dim:
        return np.zeros(len(xs))
    if k == dim - 1:
        u, _, _ = np.linalg.svd(basis, full_matrices=True)
        return hyperplane_distance(u[:, -1], xs, p)
    if k == 1:
        return line_distance(basis[:, 0], xs, p)[0]
    raise ValueError("oracle covers ambient dimension <= 3 only")


def sphere_grid(dim, count=10_000):
    """About ``count`` points spread over the Euclidean unit sphere of R^dim."""
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        th = np.linspace(0.0, 2.0 * np.pi, count, endpoint=False)
        return np.column_stack([np.cos(th), np.sin(th)])
    if dim == 3:
        # Fibonacci lattice
        i = np.arange(count) + 0.5
        z = 1.0 - 2.0 * i / count
        r = np.sqrt(1.0 - z * z)
        phi = np.pi * (1.0 + np.sqrt(5.0)) * i
        return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    raise ValueError("grid covers dimension <= 3 only")


def grid_gap(m_basis, n_basis, p, count=10_000):
    """max over a sphere grid of M of D(x, N) / ||x||_p."""
    # an orthonormal basis keeps the grid evenly spread over M
    m_basis = np.linalg.qr(np.atleast_2d(m_basis))[0]
    cs = sphere_grid(m_basis.shape[1], count)
    xs = cs @ m_basis.T
    return float(np.max(subspace_distance(n_basis, xs, p) / lp(xs, p)))


def grid_gamma(a, kernel_basis, p, q, count=10_000):
    """min over a sphere grid of R^n of ||a x||_q / D(x, N(a))."""
    # the ratio is homogeneous, so any spread of directions will do; whitening
    # by the singular values widens the narrow valley of an ill-conditioned a
    _, s, vt = np.linalg.svd(a)
    scale = np.ones(a.shape[1])
    live = s > s[0] * 1e-10
    scale[: live.sum()] = 1.0 / s[live]
    xs = sphere_grid(a.shape[1], count) @ (vt.T * scale).T
    d = subspace_distance(kernel_basis, xs, p)
    keep = d > 1e-6 * lp(xs, p)
    return float(np.min(lp(xs[keep] @ a.T, q) / d[keep]))


def grid_norm(a, p, q, count=10_000):
    """max over a sphere grid of ||a x||_q / ||x||_p."""
    xs = sphere_grid(a.shape[1], count)
    return float(np.max(lp(xs @ a.T, q) / lp(xs, p)))


def pinv_solution(a, b):
    """Minimal Euclidean-norm least-squares solution from numpy's SVD pseudoinverse."""
    return np.linalg.pinv(a) @ b
