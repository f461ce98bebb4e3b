"""Experiment configuration: TOML in, validated dataclasses out.

Grammar (all sections optional except ``[problem]`` with ``n``)::

    [problem]       n, T, depth, nx, G0, G0_tilde, G1      (intervals as [lo, hi])
    [coefficients]  a0, beta0, and entries such as a21, b11, c12, beta1.
                    An entry is a number or an inline table
                    {value, region, outside, t_slope}; region is "G0",
                    "G0_tilde", "G1" or [lo, hi].
    [solver]        scheme ("transpose" | "direct"), cg_tol, cg_max_iter, eps
    [carleman]      mu, C0_cal, C2_cal, l, lambda_multipliers, single_d
    [observability] rank_tol, kernel_tol, sweep_T
    [data]          terminal ("sine" | "zero" | "random"), terminal_modes,
                    initial_components, samples, seed
    [output]        directory, formats

``serialize`` writes every field in a fixed order, so
``serialize(parse_config(text))`` is a canonical form and re-parsing it
reproduces the same config.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, fields

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .grid import Grid1D, SubdomainMask
from .model import CascadeCoefficients, PiecewiseField
from .tree import ScenarioTree, build_tree

REGIONS = ("G0", "G0_tilde", "G1")
_ENTRY = re.compile(r"^([abc])([1-9])([1-9])$")
_BETA = re.compile(r"^beta([1-9])$")


@dataclass
class EntrySpec:
    value: float
    region: str | tuple | None = None
    outside: float = 0.0
    t_slope: float = 0.0

    @property
    def is_constant(self) -> bool:
        return self.region is None and self.t_slope == 0.0


@dataclass
class ProblemConfig:
    n: int
    T: float = 1.0
    depth: int = 10
    nx: int = 31
    G0: tuple = (0.3, 0.8)
    G0_tilde: tuple = (0.35, 0.75)
    G1: tuple = (0.45, 0.65)


@dataclass
class CoefficientConfig:
    a0: float = 0.5
    beta0: float = 0.1
    entries: dict = field(default_factory=dict)


@dataclass
class SolverConfig:
    scheme: str = "transpose"
    cg_tol: float = 1e-10
    cg_max_iter: int = 500
    eps: list = field(default_factory=lambda: [1e-2, 1e-3, 1e-4])


@dataclass
class CarlemanConfig:
    mu: float = 2.0
    C0_cal: float = 1.0
    C2_cal: float = 1.0
    l: int | None = None
    lambda_multipliers: list = field(default_factory=lambda: [1.0, 2.0, 4.0])
    single_d: list = field(default_factory=lambda: [3.0, 5.0])


@dataclass
class ObservabilityConfig:
    rank_tol: float = 1e-10
    kernel_tol: float | None = None
    sweep_T: list = field(default_factory=lambda: [0.25, 0.5, 1.0, 2.0])


@dataclass
class DataConfig:
    terminal: str = "sine"
    terminal_modes: list | None = None
    initial_components: list | None = None
    samples: int = 10
    seed: int = 42


@dataclass
class OutputConfig:
    directory: str = "out"
    formats: list = field(default_factory=lambda: ["csv", "jsonl"])


@dataclass
class ExperimentConfig:
    problem: ProblemConfig
    coefficients: CoefficientConfig = field(default_factory=CoefficientConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    carleman: CarlemanConfig = field(default_factory=CarlemanConfig)
    observability: ObservabilityConfig = field(default_factory=ObservabilityConfig)
    data: DataConfig = field(default_factory=DataConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    # builders

    def grid(self) -> Grid1D:
        return Grid1D(self.problem.nx)

    def tree(self, T: float | None = None) -> ScenarioTree:
        return build_tree(self.problem.depth, self.problem.T if T is None else T)

    def interval(self, region) -> tuple:
        if isinstance(region, str):
            return tuple(getattr(self.problem, region))
        return tuple(region)

    def mask(self, name: str, grid: Grid1D | None = None) -> SubdomainMask:
        lo, hi = self.interval(name)
        return SubdomainMask(grid or self.grid(), lo, hi, name)

    def coefficients_model(self) -> CascadeCoefficients:
        mats = {"a": {}, "b": {}, "c": {}}
        beta = [1.0] * self.problem.n
        for key, entry in self.coefficients.entries.items():
            if entry.is_constant:
                f = entry.value
            else:
                lo, hi = self.interval(entry.region) if entry.region is not None else (0.0, 1.0)
                f = PiecewiseField(entry.value, lo, hi, entry.outside, entry.t_slope)
            m = _BETA.match(key)
            if m:
                beta[int(m.group(1)) - 1] = f
                continue
            kind, i, j = _ENTRY.match(key).groups()
            if entry.is_constant and entry.value == 0.0:
                continue
            mats[kind][(int(i) - 1, int(j) - 1)] = f
        return CascadeCoefficients(
            self.problem.n, mats["a"], mats["b"], mats["c"], beta, self.coefficients.a0, self.coefficients.beta0
        )

    @property
    def l_exponent(self) -> int:
        return 3 * (self.problem.n + 1) if self.carleman.l is None else self.carleman.l

    def terminal_data(self, grid: Grid1D | None = None, seed: int | None = None) -> np.ndarray:
        """Deterministic terminal datum of shape (n, nx)."""
        grid = grid or self.grid()
        n = self.problem.n
        kind = self.data.terminal
        if kind == "zero":
            return np.zeros((n, grid.nx))
        if kind == "random":
            rng = np.random.default_rng(self.data.seed if seed is None else seed)
            return rng.standard_normal((n, grid.nx))
        modes = self.data.terminal_modes or [1] * n
        return np.stack([np.sin(k * np.pi * grid.x) for k in modes])

    def initial_samples(self, grid: Grid1D | None = None, seed: int | None = None) -> list[np.ndarray]:
        """``samples`` standard normal z0 from ``default_rng(seed)``, restricted to ``initial_components``."""
        grid = grid or self.grid()
        n = self.problem.n
        rng = np.random.default_rng(self.data.seed if seed is None else seed)
        keep = np.zeros((n, 1))
        for c in self.data.initial_components or range(1, n + 1):
            keep[c - 1] = 1.0
        return [rng.standard_normal((n, grid.nx)) * keep for _ in range(self.data.samples)]


# parsing


def _locate(text: str, section: str, key: str | None = None) -> int | None:
    current = None
    for no, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if s.startswith("[") and not s.startswith("[["):
            current = s.strip("[] ")
            if key is None and current == section:
                return no
            continue
        if key is not None and current == section and re.match(rf"^{re.escape(key)}\s*=", s):
            return no
    return None


class _Problems:
    def __init__(self, text: str):
        self.text = text
        self.items = []

    def add(self, section: str, key: str | None, msg: str):
        name = section if key is None else f"{section}.{key}"
        self.items.append((name, _locate(self.text, section, key), msg))


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _interval(v) -> bool:
    return isinstance(v, list) and len(v) == 2 and all(_is_number(x) for x in v)


def _take(raw: dict, section: str, cls, probs: _Problems, checks: dict) -> object:
    """Build dataclass ``cls`` from ``raw[section]``; ``checks`` maps key -> (predicate, message)."""
    table = raw.get(section, {})
    if not isinstance(table, dict):
        probs.add(section, None, "must be a table")
        return None
    names = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in table.items():
        if key not in names:
            probs.add(section, key, "unknown key")
            continue
        pred, msg = checks.get(key, (lambda v: True, ""))
        if not pred(value):
            probs.add(section, key, msg)
            continue
        kwargs[key] = tuple(value) if isinstance(value, list) and key.startswith("G") else value
    return kwargs


def _positive(v) -> bool:
    return _is_number(v) and v > 0


def _positive_list(v) -> bool:
    return isinstance(v, list) and len(v) > 0 and all(_positive(x) for x in v)


def _parse_entry(key: str, value, probs: _Problems) -> EntrySpec | None:
    if _is_number(value):
        return EntrySpec(float(value))
    if not isinstance(value, dict):
        probs.add("coefficients", key, "must be a number or an inline table")
        return None
    allowed = {"value", "region", "outside", "t_slope"}
    bad = set(value) - allowed
    if bad:
        probs.add("coefficients", key, f"unknown fields {sorted(bad)}")
        return None
    if not _is_number(value.get("value")):
        probs.add("coefficients", key, "needs a numeric 'value'")
        return None
    region = value.get("region")
    if region is not None:
        if isinstance(region, str):
            if region not in REGIONS:
                probs.add("coefficients", key, f"region must be one of {REGIONS} or [lo, hi]")
                return None
        elif _interval(region) and 0.0 <= region[0] < region[1] <= 1.0:
            region = (float(region[0]), float(region[1]))
        else:
            probs.add("coefficients", key, "region must be a name or an interval inside [0, 1]")
            return None
    for extra in ("outside", "t_slope"):
        if extra in value and not _is_number(value[extra]):
            probs.add("coefficients", key, f"'{extra}' must be a number")
            return None
    return EntrySpec(float(value["value"]), region, float(value.get("outside", 0.0)), float(value.get("t_slope", 0.0)))


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate; raises ConfigError listing every problem with its line number."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError([("syntax", int(m.group(1)) if m else None, str(exc))]) from None
    probs = _Problems(text)
    known = {"problem", "coefficients", "solver", "carleman", "observability", "data", "output"}
    for sec in raw:
        if sec not in known:
            probs.add(sec, None, "unknown section")
    if "problem" not in raw or "n" not in raw.get("problem", {}):
        probs.add("problem", "n", "required")
        raise ConfigError(probs.items)

    interval_msg = "must be [lo, hi] with 0 < lo < hi < 1"

    def open_interval(v):
        return _interval(v) and 0.0 < v[0] < v[1] < 1.0

    pk = _take(raw, "problem", ProblemConfig, probs, {
        "n": (lambda v: _is_int(v) and 1 <= v <= 9, "must be an integer in 1..9"),
        "T": (_positive, "must be a positive number"),
        "depth": (lambda v: _is_int(v) and 2 <= v <= 20, "must be an integer in 2..20"),
        "nx": (lambda v: _is_int(v) and v >= 3, "must be an integer >= 3"),
        "G0": (open_interval, interval_msg),
        "G0_tilde": (open_interval, interval_msg),
        "G1": (open_interval, interval_msg),
    })
    if "n" not in pk:
        raise ConfigError(probs.items)
    pk = {k: (float(v) if k == "T" else v) for k, v in pk.items()}
    problem = ProblemConfig(**pk)
    n = problem.n
    g0, gt, g1 = problem.G0, problem.G0_tilde, problem.G1
    if not (gt[0] < g1[0] and g1[1] < gt[1]):
        probs.add("problem", "G1", "nesting violated: G1 must lie compactly inside G0_tilde")
    if not (g0[0] <= gt[0] and gt[1] <= g0[1]):
        probs.add("problem", "G0_tilde", "nesting violated: G0_tilde must lie inside G0")
    problem.G0, problem.G0_tilde, problem.G1 = (tuple(float(x) for x in g) for g in (g0, gt, g1))

    coeff = CoefficientConfig()
    ctab = raw.get("coefficients", {})
    for key, value in ctab.items():
        if key in ("a0", "beta0"):
            if _positive(value):
                setattr(coeff, key, float(value))
            else:
                probs.add("coefficients", key, "must be a positive number")
            continue
        m, mb = _ENTRY.match(key), _BETA.match(key)
        if m and max(int(m.group(2)), int(m.group(3))) <= n:
            entry = _parse_entry(key, value, probs)
        elif mb and int(mb.group(1)) <= n:
            entry = _parse_entry(key, value, probs)
        else:
            probs.add("coefficients", key, f"unknown coefficient for n = {n}")
            continue
        if entry is not None:
            coeff.entries[key] = entry
    for key, entry in coeff.entries.items():
        if _BETA.match(key):
            lows = [entry.value, entry.value + entry.t_slope * problem.T]
            if entry.region is not None:
                lows.append(entry.outside)
            if min(lows) < coeff.beta0:
                probs.add("coefficients", key, f"diffusion must stay >= beta0 = {coeff.beta0}")
    coeff.entries = dict(sorted(coeff.entries.items()))

    sk = _take(raw, "solver", SolverConfig, probs, {
        "scheme": (lambda v: v in ("transpose", "direct"), "must be 'transpose' or 'direct'"),
        "cg_tol": (_positive, "must be a positive number"),
        "cg_max_iter": (lambda v: _is_int(v) and v >= 1, "must be a positive integer"),
        "eps": (_positive_list, "must be a non-empty list of positive numbers"),
    })
    ck = _take(raw, "carleman", CarlemanConfig, probs, {
        "mu": (lambda v: _is_number(v) and v >= 1, "must be >= 1"),
        "C0_cal": (_positive, "must be a positive number"),
        "C2_cal": (_positive, "must be a positive number"),
        "l": (lambda v: _is_int(v) and v >= 3, "must be an integer >= 3"),
        "lambda_multipliers": (lambda v: _positive_list(v) and min(v) >= 1, "must be a list of numbers >= 1"),
        "single_d": (_positive_list, "must be a non-empty list of positive numbers"),
    })
    ok = _take(raw, "observability", ObservabilityConfig, probs, {
        "rank_tol": (_positive, "must be a positive number"),
        "kernel_tol": (_positive, "must be a positive number"),
        "sweep_T": (_positive_list, "must be a non-empty list of positive numbers"),
    })
    dk = _take(raw, "data", DataConfig, probs, {
        "terminal": (lambda v: v in ("sine", "zero", "random"), "must be 'sine', 'zero' or 'random'"),
        "terminal_modes": (lambda v: isinstance(v, list) and len(v) == n and all(_is_int(x) and x >= 0 for x in v),
                           f"must list {n} non-negative integers"),
        "initial_components": (lambda v: isinstance(v, list) and len(v) > 0 and all(_is_int(x) and 1 <= x <= n for x in v),
                               f"must list component numbers in 1..{n}"),
        "samples": (lambda v: _is_int(v) and v >= 1, "must be a positive integer"),
        "seed": (lambda v: _is_int(v) and v >= 0, "must be a non-negative integer"),
    })
    outk = _take(raw, "output", OutputConfig, probs, {
        "directory": (lambda v: isinstance(v, str) and v != "", "must be a non-empty string"),
        "formats": (lambda v: isinstance(v, list) and set(v) <= {"csv", "jsonl"} and len(v) > 0,
                    "must be a subset of ['csv', 'jsonl']"),
    })
    if probs.items:
        raise ConfigError(probs.items)

    def floats(d, keys):
        for k in keys:
            if k in d:
                d[k] = [float(x) for x in d[k]] if isinstance(d[k], list) else float(d[k])
        return d

    return ExperimentConfig(
        problem=problem,
        coefficients=coeff,
        solver=SolverConfig(**floats(sk, ("cg_tol", "eps"))),
        carleman=CarlemanConfig(**floats(ck, ("mu", "C0_cal", "C2_cal", "lambda_multipliers", "single_d"))),
        observability=ObservabilityConfig(**floats(ok, ("rank_tol", "kernel_tol", "sweep_T"))),
        data=DataConfig(**dk),
        output=OutputConfig(**outk),
    )


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


# serialization


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {v!r}")


def _entry(entry: EntrySpec) -> str:
    if entry.is_constant and entry.outside == 0.0:
        return _fmt(entry.value)
    parts = [f"value = {_fmt(entry.value)}"]
    if entry.region is not None:
        parts.append(f"region = {_fmt(entry.region)}")
    parts.append(f"outside = {_fmt(entry.outside)}")
    parts.append(f"t_slope = {_fmt(entry.t_slope)}")
    return "{ " + ", ".join(parts) + " }"


def serialize(cfg: ExperimentConfig) -> str:
    out = []

    def section(name, obj, skip=()):
        out.append(f"[{name}]")
        for f in fields(obj):
            v = getattr(obj, f.name)
            if f.name in skip or v is None:
                continue
            out.append(f"{f.name} = {_fmt(v)}")
        out.append("")

    section("problem", cfg.problem)
    out.append("[coefficients]")
    out.append(f"a0 = {_fmt(cfg.coefficients.a0)}")
    out.append(f"beta0 = {_fmt(cfg.coefficients.beta0)}")
    for key, entry in sorted(cfg.coefficients.entries.items()):
        out.append(f"{key} = {_entry(entry)}")
    out.append("")
    section("solver", cfg.solver)
    section("carleman", cfg.carleman)
    section("observability", cfg.observability)
    section("data", cfg.data)
    section("output", cfg.output)
    return "\n".join(out)
