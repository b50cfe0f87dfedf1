"""Seeded experiment suites and report writing.

Each suite loops over the cells of the configuration (dims x exponents x
ranks) and runs ``trials`` independent trials per cell.  Every trial draws
its own generator from ``SeedSequence([seed, suite, cell, trial])``, so
results do not depend on execution order.  A trial whose hypotheses fail is
recorded as SKIPPED with the reason; it never counts as a pass.
"""

from __future__ import annotations

import csv
import io
import json
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .config import ExperimentConfig, config_as_dict
from .equations import (
    check_thm_bas,
    check_thm_consistent_perturbed_rhs,
    check_thm_consistent_same_rhs,
)
from .operator import PNormOperator, mgi_apply, mgi_axiom_check
from .perturbation import (
    PerturbationExpression,
    PerturbationKind,
    PerturbationSpec,
    PreconditionError,
    gamma_stability_check,
    generate_perturbation,
    simplest_expression_check,
)
from .lp_space import PNormSpace
from .subspace import RANK_TOL, ConvergenceError, metric_project

PASS, FAIL, SKIPPED = "PASS", "FAIL", "SKIPPED"
SUITE_ORDER = ("axioms", "perturbation", "gamma_gap", "equations")
CSV_COLUMNS = (
    "suite", "m", "n", "p", "q", "rank", "trial", "verdict",
    "worst_residual", "lhs", "rhs", "slack",
)
EXIT_OK, EXIT_FAILED, EXIT_ALL_SKIPPED = 0, 1, 3
KIND_CYCLE = (
    PerturbationKind.SCALAR_MULTIPLE,
    PerturbationKind.RANGE_KERNEL_PRESERVING,
    PerturbationKind.RANK_CHANGING,
    PerturbationKind.GENERIC,
)


@dataclass
class TrialRecord:
    suite: str
    m: int
    n: int
    p: float
    q: float
    rank: int
    trial: int
    verdict: str
    worst_residual: Optional[float] = None
    lhs: Optional[float] = None
    rhs: Optional[float] = None
    slack: Optional[float] = None
    reason: str = ""
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {k: _jsonable(v) for k, v in self.__dict__.items()}


@dataclass
class SuiteReport:
    config: ExperimentConfig
    records: list
    wall_clock: float = 0.0

    def counts(self, suite: Optional[str] = None) -> dict:
        rows = [r for r in self.records if suite is None or r.suite == suite]
        return {v: sum(r.verdict == v for r in rows) for v in (PASS, FAIL, SKIPPED)}

    def worst_residual(self, suite: Optional[str] = None) -> Optional[float]:
        vals = [
            r.worst_residual for r in self.records
            if (suite is None or r.suite == suite) and r.worst_residual is not None
            and r.verdict != SKIPPED
        ]
        return max(vals) if vals else None

    @property
    def suites(self) -> list:
        return [s for s in SUITE_ORDER if any(r.suite == s for r in self.records)]

    @property
    def exit_status(self) -> int:
        c = self.counts()
        if c[FAIL]:
            return EXIT_FAILED
        if not c[PASS]:
            return EXIT_ALL_SKIPPED
        return EXIT_OK

    def to_json(self) -> str:
        doc = {
            "schema": 1,
            "config": config_as_dict(self.config),
            "suites": {
                s: {**self.counts(s), "worst_residual": _jsonable(self.worst_residual(s))}
                for s in self.suites
            },
            "totals": self.counts(),
            "records": [r.as_dict() for r in self.records],
        }
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.records:
            w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])
        return buf.getvalue()


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if np.isfinite(v) else repr(v)
    return v


def random_operator(
    m: int, n: int, rank: int, p: float, q: float, rng, rank_tol: float = RANK_TOL
) -> PNormOperator:
    """Gaussian factors L (m x r) R^T (r x n): rank r with probability one."""
    a = rng.standard_normal((m, rank)) @ rng.standard_normal((rank, n))
    return PNormOperator(a, PNormSpace(n, p), PNormSpace(m, q), rank_tol)


def _pinv_error(T: PNormOperator, rng, samples: int = 5) -> float:
    pinv = np.linalg.pinv(T.matrix)
    worst = 0.0
    for _ in range(samples):
        b = rng.standard_normal(T.shape[0])
        ref = pinv @ b
        worst = max(worst, np.linalg.norm(mgi_apply(T, b) - ref) / max(np.linalg.norm(ref), 1e-300))
    return float(worst)


def trial_axioms(T: PNormOperator, trial: int, rng, cfg: ExperimentConfig) -> dict:
    tol = cfg.tolerances
    rep = mgi_axiom_check(T, 20, tol.verify_tol, rng, solver_tol=tol.solver_tol)
    details = {"residuals": list(rep.residuals)}
    ok = rep.passed
    if T.hilbert:
        err = _pinv_error(T, rng)
        details["pinv_error"] = err
        ok = ok and err <= 1e-8
    return dict(verdict=PASS if ok else FAIL, worst_residual=rep.worst, details=details)


def _form_gap(phi: PerturbationExpression, rng, samples: int = 3) -> float:
    worst = 0.0
    for _ in range(samples):
        y = rng.standard_normal(phi.T.codomain.dim)
        alt = phi.alternative(y)
        if not alt.converged:
            return float("inf")
        worst = max(worst, np.linalg.norm(phi(y) - alt.value) / np.linalg.norm(y))
    return float(worst)


def trial_perturbation(T: PNormOperator, trial: int, rng, cfg: ExperimentConfig) -> dict:
    """One perturbation kind per trial, cycling through the four kinds."""
    tol = cfg.tolerances
    kind = KIND_CYCLE[trial % len(KIND_CYCLE)]
    eps = {
        PerturbationKind.SCALAR_MULTIPLE: rng.uniform(0.05, 0.5),
        PerturbationKind.RANGE_KERNEL_PRESERVING: rng.uniform(0.05, 0.5),
        PerturbationKind.RANK_CHANGING: rng.uniform(0.1, 0.5),
        # generic size is relative to ||T||; divide by the 2-norm condition number
        PerturbationKind.GENERIC: rng.uniform(0.01, 0.3) / np.divide(*T.svd[1][[0, T.rank - 1]]),
    }[kind]
    details = {"kind": kind.value, "magnitude": float(eps)}
    if kind is PerturbationKind.RANK_CHANGING and T.rank >= T.shape[0]:
        return dict(verdict=SKIPPED, reason="rank_changing needs rank(T) < m", details=details)
    dT = generate_perturbation(T, PerturbationSpec(kind, eps, int(rng.integers(2**31))))
    v = simplest_expression_check(
        T, dT, tol.verify_tol, rng=rng, solver_tol=tol.solver_tol
    )
    details.update(
        statements=[v.statement_1, v.statement_2, v.statement_3],
        consistent=v.consistent,
        smallness=v.smallness,
        spectral_radius=v.spectral_radius,
        qa_defect=v.qa_defect,
        range_gap=v.range_gap,
        kernel_gap=v.kernel_gap,
        axiom_residuals=list(v.phi_axiom_report.residuals),
    )
    ok = v.consistent
    if v.statement_1:
        gap = _form_gap(PerturbationExpression(T, dT, tol.solver_tol, rng=rng), rng)
        details["form_gap"] = gap
        ok = ok and gap <= 1e-8
    return dict(verdict=PASS if ok else FAIL, worst_residual=v.phi_axiom_report.worst, details=details)


def _factor_perturbation(T: PNormOperator, eps: float, rng) -> PNormOperator:
    """dT = T-bar - T with T-bar = (L + dL)(R + dR)^T, so the rank is kept."""
    u, s, vt = T.svd
    r = T.rank
    left = u[:, :r] * np.sqrt(s[:r])
    right = vt[:r].T * np.sqrt(s[:r])
    dl = rng.standard_normal(left.shape)
    dr = rng.standard_normal(right.shape)
    # shrink the factor steps until ||dT||_2 meets the target
    target = eps * s[r - 1]
    t = 1.0
    for _ in range(60):
        d = (left + t * dl) @ (right + t * dr).T - T.matrix
        if np.linalg.norm(d, 2) <= target:
            break
        t *= 0.7
    return PNormOperator(d, T.domain, T.codomain, T.rank_tol)


def trial_gamma_gap(T: PNormOperator, trial: int, rng, cfg: ExperimentConfig) -> dict:
    """Even trials: dT = eps T.  Odd trials: rank-preserving factor perturbation."""
    tol = cfg.tolerances
    if trial % 2 == 0:
        # eps ||T|| < gamma(T) keeps the hypothesis satisfiable
        s = T.svd[1]
        eps = float(rng.uniform(0.01, 0.5) * s[T.rank - 1] / s[0])
        dT = T.scaled(eps)
        kind = "scalar_multiple"
    else:
        eps = float(rng.uniform(0.01, 0.2))
        dT = _factor_perturbation(T, eps, rng)
        kind = "factor"
    rep = gamma_stability_check(T, dT, tol.slack, rng=rng, tol=tol.solver_tol)
    details = {
        "kind": kind,
        "epsilon": eps,
        "gamma": rep.gamma,
        "gamma_bar": rep.gamma_bar,
        "dT_norm": rep.dT_norm,
        "kernel_gap": rep.kernel_gap,
        "hypothesis": rep.hypothesis,
        "existence": rep.existence,
        "product": rep.product,
    }
    if not rep.hypothesis:
        return dict(verdict=SKIPPED, reason="hypothesis of the gamma bound not met", details=details)
    ok = rep.holds and rep.existence and rep.product >= 1.0 - 1e-6
    if kind == "scalar_multiple":
        scale_err = abs(rep.gamma_bar - (1.0 + eps) * rep.gamma) / rep.gamma
        details["scale_error"] = scale_err
        if T.hilbert:
            ok = ok and scale_err <= 1e-10
    return dict(
        verdict=PASS if ok else FAIL,
        lhs=rep.rhs, rhs=rep.gamma_bar, slack=rep.slack, details=details,
    )


def _range_perturbation(T: PNormOperator, eps: float, rng) -> PNormOperator:
    """dT with R(dT) in R(T) and ||dT||_2 = eps * sigma_min(T)."""
    q = T.range.q
    g = q @ (q.T @ rng.standard_normal(T.shape))
    return PNormOperator(
        g * (eps * T.svd[1][T.rank - 1] / np.linalg.norm(g, 2)), T.domain, T.codomain, T.rank_tol
    )


def trial_equations(T: PNormOperator, trial: int, rng, cfg: ExperimentConfig) -> dict:
    """All three bound checkers on one instance; trial % 10 == 0 is unperturbed."""
    tol = cfg.tolerances
    m, n = T.shape
    degenerate = trial % 10 == 0
    zero = T.scaled(0.0)
    cache: dict = {}
    kw = dict(tol=tol.verify_tol, rng=rng, cache=cache)
    # consistent, same right-hand side: b = T-bar z
    dT = zero if degenerate else _range_perturbation(T, rng.uniform(0.01, 0.3), rng)
    z = rng.standard_normal(n)
    r1, r2 = check_thm_consistent_same_rhs(T, dT, (T + dT)(z), z, **kw)
    # consistent, perturbed right-hand side
    if degenerate:
        z = mgi_apply(T, T(rng.standard_normal(n)))
        b = T(z)
        db = np.zeros(m)
    else:
        x0 = rng.standard_normal(n)
        b = T(x0)
        z = x0 + rng.uniform(0.01, 0.2) * rng.standard_normal(n)
        db = (T + dT)(z) - b
    r3 = check_thm_consistent_perturbed_rhs(T, dT, b, db, z, **kw)
    # best approximate solutions with range and kernel preserved
    b = rng.standard_normal(m)
    if degenerate:
        # b = T z + w with F_q(w) annihilating R(T), so z is the minimal-norm
        # best approximate solution and T z - b lies in the kernel of T^M
        w = metric_project(T.range, b, tol.solver_tol).residual
        z_min = mgi_apply(T, rng.standard_normal(m))
        b = T(z_min) + w
        dT3, db = zero, np.zeros(m)
    else:
        spec = PerturbationSpec("range_kernel_preserving", rng.uniform(0.01, 0.3), int(rng.integers(2**31)))
        dT3 = generate_perturbation(T, spec)
        db = rng.uniform(0.01, 0.2) * np.linalg.norm(b) * rng.standard_normal(m) / np.sqrt(m)
    Tb3 = T + dT3
    z = mgi_apply(Tb3, b + db)
    if degenerate:
        z = z_min
    if trial % 2 == 1 and T.kernel.dim:
        z = z + T.kernel.q @ rng.standard_normal(T.kernel.dim)
    r4 = check_thm_bas(T, dT3, b, db, z, **kw)
    records = [r1, r2, r3, r4]
    tight = max(records, key=lambda r: r.lhs / r.rhs if r.rhs > 0 else (np.inf if r.lhs > 0 else 0.0))
    details = {
        "degenerate": degenerate,
        "records": [
            {"name": r.name, "lhs": r.lhs, "rhs": r.rhs, "lower": r.lower, "slack": r.slack,
             "holds": r.holds, "witness_residual": r.witness_residual, "ingredients": r.ingredients}
            for r in records
        ],
        "tightest": tight.name,
    }
    ok = all(r.holds for r in records)
    if degenerate:
        ok = ok and all(r.lhs == 0.0 for r in records)
    return dict(
        verdict=PASS if ok else FAIL,
        worst_residual=max(r.witness_residual for r in records),
        lhs=tight.lhs, rhs=tight.rhs, slack=tight.slack, details=details,
    )


TRIALS: dict = {
    "axioms": trial_axioms,
    "perturbation": trial_perturbation,
    "gamma_gap": trial_gamma_gap,
    "equations": trial_equations,
}


def run_trial(suite: str, cfg: ExperimentConfig, cell_index: int, cell, trial: int) -> TrialRecord:
    m, n, p, q, r = cell
    ss = np.random.SeedSequence([cfg.seed, SUITE_ORDER.index(suite), cell_index, trial])
    rng = np.random.default_rng(ss)
    T = random_operator(m, n, r, p, q, rng, cfg.tolerances.rank_tol)
    base = dict(suite=suite, m=m, n=n, p=p, q=q, rank=r, trial=trial)
    if T.rank != r:
        return TrialRecord(**base, verdict=SKIPPED, reason=f"drawn operator has numerical rank {T.rank}")
    try:
        out = TRIALS[suite](T, trial, rng, cfg)
    except PreconditionError as exc:
        return TrialRecord(**base, verdict=SKIPPED, reason=str(exc))
    except ConvergenceError as exc:
        return TrialRecord(**base, verdict=FAIL, reason=f"solver: {exc}")
    return TrialRecord(**base, **out)


def run_suite(
    cfg: ExperimentConfig,
    write: bool = True,
    progress: Optional[Callable[[TrialRecord], None]] = None,
) -> SuiteReport:
    """Run the configured suite(s); write report.json and summary.csv if asked."""
    start = time.perf_counter()
    suites = SUITE_ORDER if cfg.suite == "all" else (cfg.suite,)
    records = []
    for suite in suites:
        for ci, cell in enumerate(cfg.cells()):
            for t in range(cfg.trials):
                rec = run_trial(suite, cfg, ci, cell, t)
                records.append(rec)
                if progress is not None:
                    progress(rec)
    report = SuiteReport(cfg, records, time.perf_counter() - start)
    if write:
        write_report(report, cfg.output_dir)
    return report


def write_report(report: SuiteReport, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report.to_json())
    with open(os.path.join(out_dir, "summary.csv"), "w", encoding="utf-8", newline="") as fh:
        fh.write(report.to_csv())
