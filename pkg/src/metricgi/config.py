"""Experiment configuration and its ``key = value`` file format.

One assignment per line, ``#`` starts a comment, values are Python literals
(numbers, strings, lists and tuples in brackets).  ``suite`` and
``output_dir`` also accept bare words.  Example::

    suite = perturbation
    dims = [(5, 4), (6, 6)]
    exponents = [(2, 2), (2, 3)]
    ranks = [1, 2]          # empty list: every rank 1..min(m, n)
    trials = 20
    seed = 42
    verify_tol = 1e-6
"""

from __future__ import annotations

import ast
import math
import re
from dataclasses import dataclass, field, fields, replace

SUITES = ("axioms", "perturbation", "gamma_gap", "equations", "all")
DIM_CAP = 10


class ConfigError(ValueError):
    """Invalid configuration text or values."""


@dataclass(frozen=True)
class Tolerances:
    """solver_tol: projection certificates; verify_tol: axiom and witness
    checks; rank_tol: relative singular value threshold; slack: relative
    allowance on estimated bound ingredients."""

    solver_tol: float = 1e-10
    verify_tol: float = 1e-6
    rank_tol: float = 1e-10
    slack: float = 1e-3


@dataclass(frozen=True)
class ExperimentConfig:
    suite: str = "all"
    dims: tuple = ((5, 4),)
    exponents: tuple = ((2.0, 2.0),)
    ranks: tuple = ()
    trials: int = 20
    seed: int = 42
    tolerances: Tolerances = field(default_factory=Tolerances)
    output_dir: str = "results"
    dim_cap: int = DIM_CAP

    def __post_init__(self):
        _validate(self)

    def ranks_for(self, m: int, n: int) -> tuple:
        top = min(m, n)
        if not self.ranks:
            return tuple(range(1, top + 1))
        return tuple(r for r in self.ranks if r <= top)

    def cells(self):
        """(m, n, p, q, rank) in a fixed order."""
        for m, n in self.dims:
            for p, q in self.exponents:
                for r in self.ranks_for(m, n):
                    yield m, n, p, q, r

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw) if kw else self


_TOL_KEYS = tuple(f.name for f in fields(Tolerances))
_TOP_KEYS = tuple(f.name for f in fields(ExperimentConfig) if f.name != "tolerances")
_BARE = {"suite", "output_dir"}
_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_real(v) -> bool:
    return (isinstance(v, (int, float)) and not isinstance(v, bool)) and math.isfinite(v)


def _validate(c: ExperimentConfig) -> None:
    if c.suite not in SUITES:
        raise ConfigError(f"suite must be one of {', '.join(SUITES)}; got {c.suite!r}")
    if not _is_int(c.dim_cap) or c.dim_cap < 1:
        raise ConfigError("dim_cap must be a positive integer")
    dims = tuple(tuple(d) for d in _as_list(c.dims, "dims"))
    if not dims:
        raise ConfigError("dims must not be empty")
    for d in dims:
        if len(d) != 2 or not all(_is_int(v) for v in d):
            raise ConfigError(f"dims entries must be integer pairs (m, n); got {d!r}")
        if min(d) < 1 or max(d) > c.dim_cap:
            raise ConfigError(f"dims entry {d!r} outside 1..{c.dim_cap}")
    exps = tuple(tuple(e) for e in _as_list(c.exponents, "exponents"))
    if not exps:
        raise ConfigError("exponents must not be empty")
    for e in exps:
        if len(e) != 2 or not all(_is_real(v) for v in e):
            raise ConfigError(f"exponents entries must be real pairs (p, q); got {e!r}")
        if not e[0] > 1:
            raise ConfigError(f"p must exceed 1 (got {e[0]!r})")
        if not e[1] > 1:
            raise ConfigError(f"q must exceed 1 (got {e[1]!r})")
    exps = tuple((float(p), float(q)) for p, q in exps)
    ranks = tuple(_as_list(c.ranks, "ranks"))
    if not all(_is_int(r) and r >= 1 for r in ranks):
        raise ConfigError("ranks must be positive integers")
    for m, n in dims:
        if ranks and not any(r <= min(m, n) for r in ranks):
            raise ConfigError(f"no rank in {list(ranks)} fits dims ({m}, {n})")
    if not _is_int(c.trials) or c.trials < 1:
        raise ConfigError(f"trials must be a positive integer; got {c.trials!r}")
    if not _is_int(c.seed) or c.seed < 0:
        raise ConfigError(f"seed must be a nonnegative integer; got {c.seed!r}")
    for name in _TOL_KEYS:
        v = getattr(c.tolerances, name)
        if not _is_real(v) or v <= 0:
            raise ConfigError(f"{name} must be a positive real; got {v!r}")
    if not isinstance(c.output_dir, str) or not c.output_dir:
        raise ConfigError("output_dir must be a nonempty path")
    object.__setattr__(c, "dims", dims)
    object.__setattr__(c, "exponents", exps)
    object.__setattr__(c, "ranks", ranks)


def _as_list(v, name):
    if isinstance(v, (list, tuple)):
        return v
    raise ConfigError(f"{name} must be a list")


def _strip_comment(line: str) -> str:
    quote = None
    for i, ch in enumerate(line):
        if quote:
            if ch == quote:
                quote = None
        elif ch in "'\"":
            quote = ch
        elif ch == "#":
            return line[:i]
    return line


def parse_config(text: str) -> ExperimentConfig:
    """Parse configuration text; missing keys take their defaults.

    Raises
    ------
    ConfigError
        On syntax errors (with the line number), unknown or repeated keys,
        and out-of-range values.
    """
    values: dict = {}
    tols: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        key, sep, rhs = line.partition("=")
        key, rhs = key.strip(), rhs.strip()
        if not sep or not _KEY.match(key) or not rhs:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        if key not in _TOP_KEYS and key not in _TOL_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values or key in tols:
            raise ConfigError(f"line {lineno}: key {key!r} given twice")
        try:
            value = ast.literal_eval(rhs)
        except (ValueError, SyntaxError):
            if key in _BARE and re.match(r"^[\w./-]+$", rhs):
                value = rhs
            else:
                raise ConfigError(f"line {lineno}: cannot parse value {rhs!r}") from None
        if key in _TOL_KEYS:
            if _is_int(value):
                value = float(value)
            tols[key] = value
        else:
            values[key] = value
    try:
        return ExperimentConfig(tolerances=Tolerances(**tols), **values)
    except TypeError as exc:  # pragma: no cover - keys are checked above
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def serialize_config(c: ExperimentConfig) -> str:
    """Text that :func:`parse_config` maps back to an equal config."""
    lines = [
        f"suite = {c.suite!r}",
        f"dims = {[tuple(d) for d in c.dims]!r}",
        f"exponents = {[tuple(e) for e in c.exponents]!r}",
        f"ranks = {list(c.ranks)!r}",
        f"trials = {c.trials!r}",
        f"seed = {c.seed!r}",
    ]
    lines += [f"{k} = {getattr(c.tolerances, k)!r}" for k in _TOL_KEYS]
    lines += [f"output_dir = {c.output_dir!r}", f"dim_cap = {c.dim_cap!r}"]
    return "\n".join(lines) + "\n"


def config_as_dict(c: ExperimentConfig) -> dict:
    return {
        "suite": c.suite,
        "dims": [list(d) for d in c.dims],
        "exponents": [list(e) for e in c.exponents],
        "ranks": list(c.ranks),
        "trials": c.trials,
        "seed": c.seed,
        "tolerances": {k: getattr(c.tolerances, k) for k in _TOL_KEYS},
        "output_dir": c.output_dir,
        "dim_cap": c.dim_cap,
    }
