"""Operator equations Tx = b, their solution sets and perturbation bounds.

Three bound checkers build the comparison point x for a perturbed solution
z, verify x solves (or best-approximately solves) the unperturbed problem,
and compare the relative error ``||z - x|| / ||x||`` (or ``/ ||z||``) with the
condition-number bound.  Norm ingredients are estimates at p != 2 or q != 2,
so each record carries a small slack.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .lp_space import dual_map, lp_norm
from .operator import (
    HomogeneousMap,
    PNormOperator,
    condition_number,
    homogeneous_norm,
    mgi_map,
    mgi_norm,
    operator_norm,
    quasi_additivity_check,
)
from .perturbation import PreconditionError
from .subspace import DEFAULT_TOL, Subspace, _as_rng, metric_project, subspaces_equal

# relative slack on the bound side when norm ingredients are estimated
ESTIMATED_SLACK = 1e-3
EXACT_SLACK = 1e-9
WITNESS_TOL = 1e-6


class InconsistentSystemError(ValueError):
    """b is not in the range of T."""


@dataclass
class AffineSolutionSet:
    """``particular + directions``, with the optimality certificates.

    Attributes
    ----------
    particular : ndarray
        Minimal-norm representative.
    directions : Subspace
        The kernel of the operator.
    residual_defect : float
        How far F_q(T particular - b) is from annihilating R(T); zero for a
        consistent system.
    kernel_defect : float
        How far F_p(particular) is from annihilating the kernel.
    """

    particular: np.ndarray
    directions: Subspace
    residual_defect: float = 0.0
    kernel_defect: float = 0.0

    def sample(self, rng=None, count: int = 1) -> np.ndarray:
        """Members with Gaussian kernel coefficients scaled to ||particular||."""
        rng = _as_rng(rng)
        k = self.directions.dim
        out = np.tile(self.particular, (count, 1))
        if k:
            scale = max(np.linalg.norm(self.particular), 1.0)
            out += scale * rng.standard_normal((count, k)) @ self.directions.q.T / np.sqrt(k)
        return out


def _membership_tol(T: PNormOperator) -> float:
    return 1e3 * np.finfo(float).eps * max(T.shape)


def solve_consistent(T: PNormOperator, b, tol: float = DEFAULT_TOL) -> AffineSolutionSet:
    """Solution set of Tx = b for b in R(T).

    Raises
    ------
    InconsistentSystemError
        If b has a component outside R(T); use :func:`bas_solve` instead.
    """
    b = T.codomain.check(b)
    if not T.range.contains(b, _membership_tol(T)):
        raise InconsistentSystemError(
            "b is not in the range of T; use bas_solve for best approximate solutions"
        )
    x, rc, kc = T.metric_inverse(tol).certified(b)
    return AffineSolutionSet(x, T.kernel, 0.0, kc.annihilator_defect)


def bas_solve(T: PNormOperator, b, tol: float = DEFAULT_TOL) -> AffineSolutionSet:
    """Set of best approximate solutions, minimising ||Tx - b||_q."""
    b = T.codomain.check(b)
    x, rc, kc = T.metric_inverse(tol).certified(b)
    return AffineSolutionSet(x, T.kernel, rc.annihilator_defect, kc.annihilator_defect)


@dataclass
class BoundRecord:
    """One perturbation bound evaluated on one instance.

    ``holds`` means ``lower - slack <= lhs <= rhs + slack`` and the witness
    was valid; ``lower`` is -inf for one-sided bounds.
    """

    name: str
    lhs: float
    rhs: float
    slack: float
    witness_residual: float
    lower: float = float("-inf")
    ingredients: dict = field(default_factory=dict)
    holds: bool = field(init=False)

    def __post_init__(self):
        self.holds = bool(
            self.witness_residual <= WITNESS_TOL
            and self.lhs <= self.rhs + self.slack
            and self.lhs >= self.lower - self.slack
        )


@dataclass
class Ingredients:
    kappa: float
    eps_T: float
    eps_b: float
    A_norm: float
    T_norm: float
    TM_norm: float
    dT_norm: float
    exact: bool

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _rel_slack(T: PNormOperator) -> float:
    return EXACT_SLACK if T.hilbert else ESTIMATED_SLACK


def _require_qa(T: PNormOperator, samples: int, rng) -> None:
    rep = quasi_additivity_check(mgi_map(T), T.range, samples=samples, rng=rng)
    if not rep.passed:
        raise PreconditionError(
            f"T^M is not quasi-additive on R(T) (sampled defect {rep.defect:.3e})"
        )


def _shared(cache, key, estimator, T, restarts, rng, seeds) -> float:
    """Norm of T or T^M, reusing a full estimate from an earlier call.

    With a cached value only the new seeds are refined, and the larger of the
    two lower bounds is kept.
    """
    if cache is None or key not in cache:
        value = estimator(T, restarts, rng, seeds=seeds).value
    elif T.hilbert or not seeds:
        return cache[key]
    else:
        value = max(cache[key], estimator(T, 0, rng, seeds=seeds, axes=False).value)
    if cache is not None:
        cache[key] = value
    return value


def _ingredients(
    T: PNormOperator,
    dT: PNormOperator,
    b,
    db,
    restarts: int,
    rng,
    T_seeds=(),
    TM_seeds=(),
    dT_seeds=(),
    A_seeds=(),
    cache: Optional[dict] = None,
) -> Ingredients:
    """Norms entering the bounds; T^M dT is materialized (it is linear here)."""
    p, q = T.p, T.q
    nT = _shared(cache, "T", operator_norm, T, restarts, rng, T_seeds)
    nM = _shared(cache, "TM", mgi_norm, T, restarts, rng, TM_seeds)
    nd = operator_norm(dT, restarts, rng, seeds=dT_seeds).value
    inv = T.metric_inverse()
    a = np.column_stack([inv(dT(e)) for e in np.eye(T.domain.dim)])
    if p == 2.0:
        nA = float(np.linalg.norm(a, 2))
    elif np.any(a):
        nA = homogeneous_norm(
            HomogeneousMap.linear(a, T.domain, T.domain), restarts, rng, seeds=A_seeds
        ).value
    else:
        nA = 0.0
    nb = lp_norm(b, q)
    eps_b = lp_norm(db, q) / nb if db is not None else 0.0
    return Ingredients(nM * nT, nd / nT, eps_b, nA, nT, nM, nd, T.hilbert)


def _check_common(T, dT, b):
    T._check_compatible(dT)
    b = T.codomain.check(b)
    if not np.any(b):
        raise PreconditionError("b must be nonzero")
    return b


def check_thm_consistent_same_rhs(
    T: PNormOperator,
    dT: PNormOperator,
    b,
    z,
    tol: float = WITNESS_TOL,
    restarts: int = 4,
    rng=None,
    qa_samples: int = 10,
    cache: Optional[dict] = None,
):
    """Bounds for Tx = b against the perturbed equation (T + dT) z = b.

    The comparison point is ``x = z + T^M dT z``.  Returns two records:
    ``||z - x|| / ||z|| <= kappa eps_T`` and
    ``||z - x|| / ||x|| <= kappa eps_T / (1 - ||T^M dT||)``.
    """
    rng = _as_rng(rng)
    b = _check_common(T, dT, b)
    z = T.domain.check(z)
    Tb = T + dT
    mt = _membership_tol(T)
    nb = lp_norm(b, T.q)
    if lp_norm(Tb(z) - b, T.q) > tol * nb:
        raise PreconditionError("z does not solve the perturbed equation")
    if not (T.range.contains(b, mt) and Tb.range.contains(b, mt)):
        raise PreconditionError("b must lie in the ranges of both T and T + dT")
    _require_qa(T, qa_samples, rng)
    dz = dT(z)
    x = z + T.metric_inverse()(dz)
    witness = lp_norm(T(x) - b, T.q) / nb
    ing = _ingredients(
        T, dT, b, None, restarts, rng,
        T_seeds=(x, z), TM_seeds=(dz,), dT_seeds=(z,), A_seeds=(z,), cache=cache,
    )
    if ing.A_norm >= 1.0:
        raise PreconditionError(f"||T^M dT|| ~ {ing.A_norm:.4g} is not below one")
    p = T.p
    diff = lp_norm(z - x, p)
    rel = _rel_slack(T)
    rhs1 = ing.kappa * ing.eps_T
    rhs2 = rhs1 / (1.0 - ing.A_norm)
    r1 = BoundRecord("same_rhs_vs_z", diff / lp_norm(z, p), rhs1, rel * max(rhs1, 1e-300),
                     witness, ingredients=ing.as_dict())
    r2 = BoundRecord("same_rhs_vs_x", diff / lp_norm(x, p), rhs2, rel * max(rhs2, 1e-300),
                     witness, ingredients=ing.as_dict())
    return r1, r2


def check_thm_consistent_perturbed_rhs(
    T: PNormOperator,
    dT: PNormOperator,
    b,
    db,
    z,
    tol: float = WITNESS_TOL,
    restarts: int = 4,
    rng=None,
    qa_samples: int = 10,
    cache: Optional[dict] = None,
) -> BoundRecord:
    """Two-sided bound for Tx = b against (T + dT) z = b + db.

    The comparison point is ``x = T^M b + (I - T^M T) z``, evaluated as
    ``z - T^M (T z - b)``, which is the same point when T^M is
    quasi-additive on R(T).  Extra ingredients: ``kernel_defect`` (F_p(z - x)
    should annihilate N(T)), ``form_difference`` between the two
    expressions of x, and ``collapse`` = ||x - T^M b|| / ||x||, which is zero
    when z is minimal-norm and the kernel is unchanged.
    """
    rng = _as_rng(rng)
    b = _check_common(T, dT, b)
    db = T.codomain.check(db)
    z = T.domain.check(z)
    Tb = T + dT
    nb = lp_norm(b, T.q)
    if lp_norm(Tb(z) - b - db, T.q) > tol * max(lp_norm(b + db, T.q), 1e-300):
        raise PreconditionError("z does not solve the perturbed equation")
    if not T.range.contains(b, _membership_tol(T)):
        raise PreconditionError("b must lie in the range of T")
    _require_qa(T, qa_samples, rng)
    inv = T.metric_inverse()
    p = T.p
    tmb = inv(b)
    x = z - inv(T(z) - b)
    other = tmb + z - inv(T(z))
    witness = lp_norm(T(x) - b, T.q) / nb
    nx = lp_norm(x, p)
    ing = _ingredients(
        T, dT, b, db, restarts, rng,
        T_seeds=(x, z), TM_seeds=(db - dT(x), db, b), dT_seeds=(x, z), A_seeds=(z - x, x), cache=cache,
    )
    if ing.A_norm >= 1.0:
        raise PreconditionError(f"||T^M dT|| ~ {ing.A_norm:.4g} is not below one")
    diff = z - x
    lhs = lp_norm(diff, p) / nx
    upper = ing.kappa * (ing.eps_b + ing.eps_T) / (1.0 - ing.A_norm)
    lower = (
        lp_norm(inv(db), p) / (lp_norm(tmb, p) + 2.0 * lp_norm(z, p)) - ing.kappa * ing.eps_T
    ) / (1.0 + ing.A_norm)
    extra = ing.as_dict()
    extra["kernel_defect"] = T.kernel.annihilates(dual_map(diff, p)) if np.any(diff) else 0.0
    extra["form_difference"] = lp_norm(x - other, p) / nx
    extra["collapse"] = lp_norm(x - tmb, p) / nx
    rel = _rel_slack(T)
    return BoundRecord(
        "perturbed_rhs", lhs, upper, rel * max(upper, 1e-300), witness, lower, extra
    )


def check_thm_bas(
    T: PNormOperator,
    dT: PNormOperator,
    b,
    db,
    z,
    tol: float = WITNESS_TOL,
    restarts: int = 4,
    rng=None,
    qa_samples: int = 10,
    cache: Optional[dict] = None,
) -> BoundRecord:
    """Bound between best approximate solutions of Tx = b and T-bar z = b-bar.

    Requires R(T + dT) = R(T) and N(T + dT) = N(T).  The comparison point
    ``x = T^M b + (I - T^M T) z`` is certified as a best approximate
    solution of the unperturbed problem.  When z is the minimal-norm best
    approximate solution of the perturbed problem, x coincides with T^M b
    (``collapse`` ingredient) and the record bounds the relative change of
    the minimal-norm solution.
    """
    rng = _as_rng(rng)
    b = _check_common(T, dT, b)
    db = T.codomain.check(db)
    z = T.domain.check(z)
    Tb = T + dT
    bb = b + db
    if not subspaces_equal(Tb.kernel, T.kernel):
        raise PreconditionError("hypothesis N(T + dT) = N(T) fails")
    if not subspaces_equal(Tb.range, T.range):
        raise PreconditionError("hypothesis R(T + dT) = R(T) fails")
    q, p = T.q, T.p
    proj_b = metric_project(T.range, b).projection
    if not np.any(proj_b):
        raise PreconditionError("the range component of b vanishes")
    proj_bb = metric_project(Tb.range, bb).projection
    if lp_norm(Tb(z) - proj_bb, q) > tol * max(lp_norm(proj_bb, q), 1e-300):
        raise PreconditionError("z is not a best approximate solution of the perturbed problem")
    _require_qa(T, qa_samples, rng)
    inv = T.metric_inverse()
    tmb = inv(b)
    x = z - inv(T(z) - b)
    nx = lp_norm(x, p)
    # x is a best approximate solution iff T x is the metric projection of b
    witness = lp_norm(T(x) - proj_b, q) / max(lp_norm(proj_b, q), 1e-300)
    ing = _ingredients(
        T, dT, b, db, restarts, rng,
        T_seeds=(x, z), TM_seeds=(db - dT(x), b), dT_seeds=(x, z), A_seeds=(z - x, x), cache=cache,
    )
    if ing.A_norm >= 1.0:
        raise PreconditionError(f"||T^M dT|| ~ {ing.A_norm:.4g} is not below one")
    lhs = lp_norm(z - x, p) / nx
    rhs = ing.kappa / (1.0 - ing.A_norm) * (
        (lp_norm(bb, q) + lp_norm(b, q)) / lp_norm(proj_b, q) + ing.eps_T
    )
    extra = ing.as_dict()
    extra["collapse"] = lp_norm(x - tmb, p) / nx
    rel = _rel_slack(T)
    return BoundRecord("bas", lhs, rhs, rel * rhs, witness, ingredients=extra)


__all__ = [
    "AffineSolutionSet",
    "BoundRecord",
    "InconsistentSystemError",
    "solve_consistent",
    "bas_solve",
    "check_thm_consistent_same_rhs",
    "check_thm_consistent_perturbed_rhs",
    "check_thm_bas",
    "condition_number",
]
