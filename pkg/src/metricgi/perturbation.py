"""Perturbations T -> T + dT and the expression for the perturbed inverse.

With A the (linear, under quasi-additivity) map T^M dT, the candidate

    Phi = (I + A)^-1 T^M

is T-bar's metric generalized inverse exactly when dT leaves the range and
kernel of T in place.  :func:`simplest_expression_check` tests the three
equivalent conditions independently and reports whether they agree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
import numpy as np

from .lp_space import lp_norm
from .operator import (
    AxiomReport,
    HomogeneousMap,
    PNormOperator,
    QuasiAdditivityReport,
    homogeneous_norm,
    mgi_axiom_check,
    mgi_map,
    mgi_norm,
    operator_norm,
    quasi_additivity_check,
    reduced_min_modulus,
)
from .subspace import (
    DEFAULT_TOL,
    Subspace,
    _as_rng,
    contained_in,
    gap,
    subspaces_equal,
    sym_gap,
)


class PreconditionError(ValueError):
    """A hypothesis needed by an operation does not hold for the given data."""


class PerturbationKind(str, Enum):
    SCALAR_MULTIPLE = "scalar_multiple"
    RANGE_KERNEL_PRESERVING = "range_kernel_preserving"
    RANK_CHANGING = "rank_changing"
    GENERIC = "generic"


@dataclass(frozen=True)
class PerturbationSpec:
    """How to draw dT for a given T.

    Attributes
    ----------
    kind : PerturbationKind
        Structure of the perturbation.
    magnitude : float
        Size parameter eps >= 0.  Its meaning depends on ``kind``: the
        factor for scalar multiples, a bound on the estimated ||T^M dT|| for
        range/kernel preserving perturbations, and a relative spectral norm
        for the other two (see :func:`generate_perturbation`).
    seed : int
        Seed of the generator's random stream.
    """

    kind: PerturbationKind
    magnitude: float
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", PerturbationKind(self.kind))
        if not (self.magnitude >= 0.0 and np.isfinite(self.magnitude)):
            raise ValueError(f"magnitude must be finite and nonnegative, got {self.magnitude}")


def _spectral(a: np.ndarray) -> float:
    return float(np.linalg.norm(a, 2)) if a.size else 0.0


def generate_perturbation(T: PNormOperator, spec: PerturbationSpec) -> PNormOperator:
    """Draw dT acting between the same spaces as T.

    * scalar_multiple: ``eps * T``.
    * range_kernel_preserving: ``T V K V^T`` with V an orthonormal basis of
      the row space and K random, so R(dT) is in R(T) and N(T) in N(dT);
      scaled so the estimated ||T^M dT|| equals eps.
    * rank_changing: a rank-one ``u v^T`` whose column u has a component
      outside R(T), with spectral norm eps times the smallest nonzero
      singular value of T; needs rank(T) < m.
    * generic: Gaussian entries scaled to ``||dT||_2 = eps ||T||_2``.
    """
    rng = np.random.default_rng(spec.seed)
    eps = float(spec.magnitude)
    m, n = T.shape
    a = T.matrix
    kind = spec.kind
    if kind is PerturbationKind.SCALAR_MULTIPLE:
        return T.scaled(eps)
    if eps == 0.0:
        return T.scaled(0.0)
    if kind is PerturbationKind.RANGE_KERNEL_PRESERVING:
        r = T.rank
        if r == 0:
            return T.scaled(0.0)
        v = T.svd[2][:r].T
        k = rng.standard_normal((r, r))
        d0 = PNormOperator(a @ v @ k @ v.T, T.domain, T.codomain, T.rank_tol)
        if T.hilbert:
            # T^M dT0 = V K V^T
            size = _spectral(k)
        else:
            size = homogeneous_norm(d0.as_map().then(mgi_map(T)), restarts=4, rng=rng).value
        return d0.scaled(eps / size)
    if kind is PerturbationKind.RANK_CHANGING:
        if T.rank >= m:
            raise ValueError("rank_changing needs a range that is not the whole codomain")
        u_full = T.svd[0]
        outside = u_full[:, T.rank:] @ rng.standard_normal(m - T.rank)
        inside = u_full[:, : T.rank] @ rng.standard_normal(T.rank) if T.rank else 0.0
        u = outside / np.linalg.norm(outside) + 0.5 * inside / max(np.linalg.norm(inside), 1.0)
        v = rng.standard_normal(n)
        bump = np.outer(u, v)
        # relative to the smallest nonzero singular value, so that T^M dT stays small
        floor = T.svd[1][T.rank - 1] if T.rank else 1.0
        return PNormOperator(
            bump * (eps * floor / _spectral(bump)), T.domain, T.codomain, T.rank_tol
        )
    if kind is PerturbationKind.GENERIC:
        g = rng.standard_normal((m, n))
        return PNormOperator(g * (eps * _spectral(a) / _spectral(g)), T.domain, T.codomain, T.rank_tol)
    raise ValueError(f"unknown perturbation kind {kind!r}")


@dataclass
class FixedPointResult:
    value: np.ndarray
    iterations: int
    converged: bool


class PerturbationExpression:
    """Phi = (I + T^M dT)^-1 T^M for a fixed pair (T, dT).

    Construction sample-tests quasi-additivity of T^M on R(dT), materializes
    A = T^M dT column by column and requires both its estimated norm and its
    spectral radius to be below one.  Otherwise :class:`PreconditionError`.

    Attributes
    ----------
    A : ndarray (n, n)
        The matrix of T^M dT.
    qa_report : QuasiAdditivityReport
    norm_estimate : float
        Lower-bound estimate of the p-norm of A.
    spectral_radius : float
    """

    def __init__(
        self,
        T: PNormOperator,
        dT: PNormOperator,
        tol: float = DEFAULT_TOL,
        qa_tol: float = 1e-8,
        qa_samples: int = 20,
        rng=None,
    ):
        T._check_compatible(dT)
        rng = _as_rng(rng)
        self.T, self.dT, self.tol = T, dT, tol
        self.inverse = T.metric_inverse(tol)
        self.qa_report: QuasiAdditivityReport = quasi_additivity_check(
            self.inverse.as_map(), dT.range if dT.rank else Subspace.zero(T.codomain),
            samples=qa_samples, tol=qa_tol, rng=rng,
        )
        if not self.qa_report.passed:
            raise PreconditionError(
                "T^M is not quasi-additive on R(dT): sampled defect "
                f"{self.qa_report.defect:.3e} exceeds {qa_tol:.1e}"
            )
        n = T.domain.dim
        cols = [self.inverse(dT(e)) for e in np.eye(n)]
        self.A = np.column_stack(cols) if cols else np.zeros((n, n))
        a_map = HomogeneousMap.linear(self.A, T.domain, T.domain, "T^M dT")
        if T.p == 2.0:
            self.norm_estimate = _spectral(self.A)
        else:
            self.norm_estimate = homogeneous_norm(a_map, restarts=4, rng=rng).value
        eig = np.linalg.eigvals(self.A) if n else np.zeros(0)
        self.spectral_radius = float(np.max(np.abs(eig))) if n else 0.0
        if self.norm_estimate >= 1.0 or self.spectral_radius >= 1.0:
            raise PreconditionError(
                f"||T^M dT|| ~ {self.norm_estimate:.4g}, spectral radius "
                f"{self.spectral_radius:.4g}: I + T^M dT is not a small perturbation of I"
            )
        self._lu = np.eye(n) + self.A

    def __call__(self, y) -> np.ndarray:
        return np.linalg.solve(self._lu, self.inverse(y))

    def alternative(self, y, max_iter: int = 2000) -> FixedPointResult:
        """T^M (I + dT T^M)^-1 y by iterating u <- y - dT T^M u."""
        y = np.asarray(y, dtype=float)
        u = y.copy()
        steps = []
        for k in range(1, max_iter + 1):
            nxt = y - self.dT(self.inverse(u))
            steps.append(np.linalg.norm(nxt - u))
            u = nxt
            if steps[-1] <= 1e-14 * max(np.linalg.norm(u), np.linalg.norm(y), 1e-300):
                return FixedPointResult(self.inverse(u), k, True)
            # rounding floor: no decrease over the last 20 steps
            if k > 40 and min(steps[-20:]) >= min(steps[:-20]):
                return FixedPointResult(self.inverse(u), k, steps[-1] <= 1e-10 * np.linalg.norm(u))
        return FixedPointResult(self.inverse(u), max_iter, False)

    def as_map(self) -> HomogeneousMap:
        T = self.T
        return HomogeneousMap(self, T.codomain, T.domain, "Phi")


def phi_apply(T: PNormOperator, dT: PNormOperator, y, tol: float = 1e-8, rng=None) -> np.ndarray:
    """Evaluate Phi y, cross-checked against the fixed-point form.

    Raises
    ------
    PreconditionError
        If the quasi-additivity test or the smallness test fails, or the
        two forms of Phi disagree by more than ``tol * ||y||``.
    """
    phi = PerturbationExpression(T, dT, rng=rng)
    y = T.codomain.check(y)
    value = phi(y)
    alt = phi.alternative(y)
    if not alt.converged:
        raise PreconditionError("fixed-point iteration for the second form did not contract")
    diff = lp_norm(value - alt.value, T.p)
    if diff > tol * max(lp_norm(y, T.q), 1e-300):
        raise PreconditionError(f"the two forms of Phi differ by {diff:.3e}")
    return value


@dataclass
class EquivalenceVerdict:
    """Outcome of testing the three equivalent conditions on (T, dT).

    ``statement_1``: Phi passes T-bar's four axioms.  ``statement_2``: R and
    N are unchanged (rank tests).  ``statement_3``: R(dT) in R(T) and N(T) in
    N(dT).  ``range_gap`` and ``kernel_gap`` are symmetric gap estimates kept
    as evidence only.
    """

    cond_ranges_equal: bool
    cond_kernels_equal: bool
    range_included: bool
    kernel_included: bool
    range_gap: float
    kernel_gap: float
    phi_axiom_report: AxiomReport
    smallness: float
    spectral_radius: float
    qa_defect: float
    statement_1: bool = field(init=False)
    statement_2: bool = field(init=False)
    statement_3: bool = field(init=False)
    consistent: bool = field(init=False)

    def __post_init__(self):
        self.statement_1 = self.phi_axiom_report.passed
        self.statement_2 = self.cond_ranges_equal and self.cond_kernels_equal
        self.statement_3 = self.range_included and self.kernel_included
        self.consistent = self.statement_1 == self.statement_2 == self.statement_3


def simplest_expression_check(
    T: PNormOperator,
    dT: PNormOperator,
    tol: float = 1e-6,
    samples: int = 20,
    rng=None,
    gap_restarts: int = 2,
    solver_tol: float = DEFAULT_TOL,
) -> EquivalenceVerdict:
    """Test statements (1)-(3) for T-bar = T + dT and report agreement.

    Raises :class:`PreconditionError` when Phi cannot be formed.
    """
    rng = _as_rng(rng)
    phi = PerturbationExpression(T, dT, tol=solver_tol, rng=rng)
    Tb = T + dT
    ranges_equal = subspaces_equal(Tb.range, T.range)
    kernels_equal = subspaces_equal(Tb.kernel, T.kernel)
    range_gap = sym_gap(Tb.range, T.range, gap_restarts, rng, solver_tol).value
    kernel_gap = sym_gap(Tb.kernel, T.kernel, gap_restarts, rng, solver_tol).value
    range_included = contained_in(dT.range, T.range) if dT.rank else True
    kernel_included = contained_in(T.kernel, dT.kernel) if dT.rank else True
    report = mgi_axiom_check(Tb, samples, tol, rng, inverse=phi, solver_tol=solver_tol)
    return EquivalenceVerdict(
        ranges_equal, kernels_equal, range_included, kernel_included,
        range_gap, kernel_gap, report, phi.norm_estimate, phi.spectral_radius,
        phi.qa_report.defect,
    )


@dataclass
class GammaStabilityReport:
    """Lower bound on the reduced minimum modulus of T + dT.

    ``holds`` tests ``gamma_bar >= rhs - slack * gamma`` with
    ``rhs = gamma (1 - 2 gap) - ||dT||``; ``product`` is ``||T^M|| gamma``,
    which is at least one.
    """

    gamma: float
    gamma_bar: float
    dT_norm: float
    kernel_gap: float
    hypothesis: bool
    rhs: float
    slack: float
    holds: bool
    existence: bool
    product: float


def gamma_stability_check(
    T: PNormOperator,
    dT: PNormOperator,
    slack: float = 1e-3,
    restarts: int = 4,
    rng=None,
    axiom_samples: int = 5,
    tol: float = DEFAULT_TOL,
) -> GammaStabilityReport:
    """Estimate both sides of the gamma stability inequality."""
    if T.rank == 0:
        raise PreconditionError("T must be nonzero")
    rng = _as_rng(rng)
    Tb = T + dT
    g = reduced_min_modulus(T, restarts, rng, tol)
    gb = reduced_min_modulus(Tb, restarts, rng, tol)
    # the sup estimate of ||dT|| is seeded with the gamma witnesses
    nd = operator_norm(dT, restarts, rng, seeds=(g.witness, gb.witness)).value
    kg = gap(T.kernel, Tb.kernel, restarts, rng, tol).value
    ratio = nd / g.value
    hypothesis = ratio < 1.0 and kg < 0.5 * (1.0 - ratio)
    rhs = g.value * (1.0 - 2.0 * kg) - nd
    slack_abs = slack * g.value
    holds = gb.value >= rhs - slack_abs
    existence = mgi_axiom_check(Tb, axiom_samples, 1e-6, rng, solver_tol=tol).passed
    nm = mgi_norm(T, restarts, rng, seeds=(T(g.witness),), tol=tol).value
    return GammaStabilityReport(
        g.value, gb.value, nd, kg, hypothesis, rhs, slack_abs, holds, existence, nm * g.value
    )


__all__ = [
    "PreconditionError",
    "PerturbationKind",
    "PerturbationSpec",
    "generate_perturbation",
    "PerturbationExpression",
    "phi_apply",
    "EquivalenceVerdict",
    "simplest_expression_check",
    "GammaStabilityReport",
    "gamma_stability_check",
]
