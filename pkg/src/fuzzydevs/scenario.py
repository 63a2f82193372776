"""Scenario files, experiment runs and result export."""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .devs import Simulator, Trace
from .fuzzy import (FuzzyError, FuzzyRule, Inference, LinguisticVariable, RuleBase, Trapezoid,
                    infer)
from .wildfire import (Conventional, ForestRecorder, Fuzzy, GridSpec, WeatherSchedule,
                       build_forest)

PAPER_DEFAULTS = "paper-defaults"


class ScenarioError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class TermConfig(_Strict):
    name: str = Field(min_length=1)
    trapezoid: tuple[float, float, float, float]

    @field_validator("trapezoid")
    @classmethod
    def _ordered(cls, v):
        Trapezoid(*v)
        return v


class VariableConfig(_Strict):
    name: str = Field(min_length=1)
    universe: tuple[float, float]
    terms: tuple[TermConfig, ...] = Field(min_length=1)

    @model_validator(mode="after")
    def _check(self):
        self.to_variable()
        return self

    def to_variable(self) -> LinguisticVariable:
        return LinguisticVariable(self.name, self.universe,
                                  tuple((t.name, Trapezoid(*t.trapezoid)) for t in self.terms))


class RuleConfig(_Strict):
    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)

    antecedents: tuple[str, ...] = Field(alias="if", min_length=1)
    consequent: str = Field(alias="then")


def _default_fuzzy() -> "FuzzyConfig":
    return FuzzyConfig(
        inputs=(
            VariableConfig(name="H", universe=(0, 100), terms=(
                TermConfig(name="Dry", trapezoid=(0, 0, 30, 70)),
                TermConfig(name="Wet", trapezoid=(30, 70, 100, 100)))),
            VariableConfig(name="V", universe=(0, 100), terms=(
                TermConfig(name="Calm", trapezoid=(0, 0, 20, 50)),
                TermConfig(name="Power", trapezoid=(20, 50, 100, 100)))),
        ),
        output=VariableConfig(name="tau", universe=(0.3, 0.8), terms=(
            TermConfig(name="Fast", trapezoid=(0.3, 0.3, 0.4, 0.6)),
            TermConfig(name="Slow", trapezoid=(0.4, 0.6, 0.8, 0.8)))),
        rules=(
            RuleConfig(antecedents=("Dry", "Calm"), consequent="Slow"),
            RuleConfig(antecedents=("Wet", "Calm"), consequent="Slow"),
            RuleConfig(antecedents=("Dry", "Power"), consequent="Fast"),
            RuleConfig(antecedents=("Wet", "Power"), consequent="Slow"),
        ),
    )


class FuzzyConfig(_Strict):
    inputs: tuple[VariableConfig, VariableConfig]
    output: VariableConfig
    rules: tuple[RuleConfig, ...] = Field(min_length=1)

    @model_validator(mode="after")
    def _check(self):
        self.to_rule_base()
        return self

    def to_rule_base(self) -> RuleBase:
        return RuleBase(
            tuple(v.to_variable() for v in self.inputs),
            self.output.to_variable(),
            tuple(FuzzyRule(tuple(r.antecedents), r.consequent) for r in self.rules),
        )


class IgnitionConfig(_Strict):
    row: int = 1
    col: int = 1
    time: float = Field(default=0.0, ge=0)


class GridConfig(_Strict):
    rows: int = Field(default=90, ge=1)
    cols: int = Field(default=90, ge=1)
    cell_area: tuple[float, float] = (1.2, 0.8)
    nonflammable: tuple[tuple[int, int], ...] = ()
    ignition: IgnitionConfig = IgnitionConfig()

    @model_validator(mode="after")
    def _check(self):
        self.to_spec()
        return self

    def to_spec(self) -> GridSpec:
        ig = self.ignition
        return GridSpec(self.rows, self.cols, self.cell_area, frozenset(self.nonflammable),
                        (ig.row, ig.col, ig.time))


class WeatherEntry(_Strict):
    time: float = Field(ge=0)
    h: float = Field(ge=0, le=100)
    v: float = Field(ge=0, le=100)


class Scenario(_Strict):
    """Everything needed to reproduce one run; there are no random fields."""

    grid: GridConfig = GridConfig()
    weather: tuple[WeatherEntry, ...] = (WeatherEntry(time=0, h=45, v=35),)
    mode: Literal["conventional", "fuzzy"] = "fuzzy"
    tau: float = Field(default=0.5, gt=0)
    ember_fraction: float = Field(default=0.2, ge=0)
    fuzzy: FuzzyConfig = Field(default_factory=_default_fuzzy)
    trace: bool = False

    @model_validator(mode="after")
    def _check(self):
        self.weather_schedule()
        return self

    def grid_spec(self) -> GridSpec:
        return self.grid.to_spec()

    def weather_schedule(self) -> WeatherSchedule:
        return WeatherSchedule(tuple((w.time, w.h, w.v) for w in self.weather))

    def rule_base(self) -> RuleBase:
        return self.fuzzy.to_rule_base()

    def forest_mode(self, mode: str | None = None):
        mode = mode or self.mode
        if mode == "conventional":
            return Conventional(self.tau)
        return Fuzzy(self.rule_base(), initial_tau=self.tau)


def _format_validation(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        msg = err["msg"]
        if "ctx" in err and "error" in err["ctx"]:
            msg = str(err["ctx"]["error"])
        lines.append(f"{loc}: {msg}")
    return "; ".join(lines)


def parse_scenario(data: dict | str) -> Scenario:
    try:
        if isinstance(data, str):
            return Scenario.model_validate_json(data)
        return Scenario.model_validate(data)
    except ValidationError as exc:
        raise ScenarioError(_format_validation(exc)) from None


def load_scenario(path) -> Scenario:
    """Read a JSON scenario; ``paper-defaults`` names the bundled one."""
    if str(path) == PAPER_DEFAULTS:
        text = resources.files("fuzzydevs").joinpath("scenarios/paper-defaults.json").read_text()
        return parse_scenario(text)
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"{p}: {exc.strerror or exc}") from None
    try:
        json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{p}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        return parse_scenario(text)
    except ScenarioError as exc:
        raise ScenarioError(f"{p}: {exc}") from None


def dump_scenario(s: Scenario) -> str:
    """Normalized JSON with every default filled in."""
    return s.model_dump_json(indent=2, by_alias=True) + "\n"


def load_fuzzy_config(path) -> RuleBase:
    """Rule base from either a full scenario file or a bare ``fuzzy`` section."""
    if str(path) == PAPER_DEFAULTS:
        return load_scenario(path).rule_base()
    p = Path(path)
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"{p}: {exc}") from None
    if isinstance(data, dict) and "inputs" in data:
        try:
            return FuzzyConfig.model_validate(data).to_rule_base()
        except ValidationError as exc:
            raise ScenarioError(f"{p}: {_format_validation(exc)}") from None
    return load_scenario(p).rule_base()


@dataclass(frozen=True)
class Metrics:
    cell_consumption_time_min: float
    forest_consumption_time_min: float
    forest_consumption_time_ember_min: float
    burned_cell_count: int
    event_count: int
    wall_clock_s: float

    def comparable(self) -> dict:
        """Everything except wall-clock time."""
        d = asdict(self)
        d.pop("wall_clock_s")
        return d


@dataclass
class RunResult:
    scenario: Scenario
    mode: str
    metrics: Metrics
    ignition_grid: list[list[Optional[float]]]
    trace: Trace
    fis_outputs: list[tuple[float, float]] = field(default_factory=list)

    @property
    def trace_digest(self) -> str:
        return self.trace.digest()


def run_scenario(s: Scenario, mode: str | None = None, trace: bool | None = None,
                 max_steps: int | None = None) -> RunResult:
    mode = mode or s.mode
    gs = s.grid_spec()
    forest_mode = s.forest_mode(mode)
    started = time.perf_counter()
    root = build_forest(gs, forest_mode, s.weather_schedule(), s.ember_fraction)
    kwargs = {"trace": s.trace if trace is None else trace}
    if max_steps is not None:
        kwargs["max_steps"] = max_steps
    sim = Simulator(root, **kwargs)
    rec = ForestRecorder(gs).attach(sim)
    events = 0

    def count(*_):
        nonlocal events
        events += 1
    sim.add_listener(count)
    sim.run_until()
    wall = time.perf_counter() - started

    ig_time = gs.ignition[2]
    if mode == "conventional":
        cell_tau = s.tau
    else:
        before = [u for t, u in rec.fis_outputs if t <= ig_time]
        cell_tau = before[-1] if before else s.tau
    metrics = Metrics(
        cell_consumption_time_min=cell_tau,
        forest_consumption_time_min=max(rec.ash.values(), default=0.0),
        forest_consumption_time_ember_min=max(rec.ember.values(), default=0.0),
        burned_cell_count=len(rec.ignited),
        event_count=events,
        wall_clock_s=wall,
    )
    return RunResult(s, mode, metrics, rec.ignition_grid(), sim.trace, rec.fis_outputs)


@dataclass
class Comparison:
    conventional: RunResult
    fuzzy: RunResult

    @property
    def ratios(self) -> dict[str, float]:
        a = self.conventional.metrics
        b = self.fuzzy.metrics
        out = {}
        for key in ("cell_consumption_time_min", "forest_consumption_time_min",
                    "forest_consumption_time_ember_min"):
            x, y = getattr(a, key), getattr(b, key)
            out[key] = y / x if x else math.nan
        return out

    def table(self) -> str:
        a, b = asdict(self.conventional.metrics), asdict(self.fuzzy.metrics)
        ratios = self.ratios
        rows = ["metric\tconventional\tfuzzy\tratio"]
        for key in a:
            r = ratios.get(key)
            rows.append(f"{key}\t{_num(a[key])}\t{_num(b[key])}\t{'' if r is None else f'{r:.6f}'}")
        return "\n".join(rows) + "\n"

    def record(self) -> dict:
        record = {
            "conventional": asdict(self.conventional.metrics),
            "fuzzy": asdict(self.fuzzy.metrics),
            "ratios": self.ratios,
        }
        if self.conventional.trace.enabled:
            record["trace_sha256"] = {"conventional": self.conventional.trace_digest,
                                      "fuzzy": self.fuzzy.trace_digest}
        return record


def compare(s: Scenario, trace: bool | None = None) -> Comparison:
    return Comparison(run_scenario(s, "conventional", trace), run_scenario(s, "fuzzy", trace))


def _num(x) -> str:
    if isinstance(x, float):
        return f"{x:.6g}" if abs(x) >= 1e-3 or x == 0 else repr(x)
    return str(x)


def metrics_table(m: Metrics) -> str:
    return "metric\tvalue\n" + "".join(f"{k}\t{_num(v)}\n" for k, v in asdict(m).items())


@dataclass(frozen=True)
class FisReport:
    inputs: tuple[float, ...]
    crisp: float
    rows: tuple[tuple[str, float, str], ...]
    inference: Inference
    output_var: LinguisticVariable

    @property
    def universe(self) -> tuple[float, float]:
        return self.output_var.universe

    def table(self) -> str:
        lines = ["rule\tactivation\tconsequent"]
        lines += [f"{r}\t{a:.6g}\t{c}" for r, a, c in self.rows]
        return "\n".join(lines) + "\n"

    def curve(self, samples: int = 201) -> list[tuple[float, float]]:
        lo, hi = self.universe
        u = np.linspace(lo, hi, samples)
        mu = self.inference.aggregate.sample(u)
        return [(float(a), float(b)) for a, b in zip(u, mu)]


def fis_eval_cmd(h: float, v: float, rb: RuleBase | None = None) -> FisReport:
    rb = rb or load_scenario(PAPER_DEFAULTS).rule_base()
    inf = infer(rb, [h, v])
    rows = tuple(("&".join(r.antecedents), a, r.consequent) for r, a in inf.activations)
    return FisReport(inf.inputs, inf.crisp, rows, inf, rb.output_var)


def _csv_value(t: float | None) -> str:
    if t is None:
        return "-1"
    text = repr(float(t))
    return text[:-2] if text.endswith(".0") else text


def grid_csv(grid) -> str:
    return "".join(",".join(_csv_value(t) for t in row) + "\n" for row in grid)


def grid_pgm(grid) -> bytes:
    """Binary PGM: never ignited is 0, earliest ignition 255, latest 1."""
    times = [t for row in grid for t in row if t is not None]
    rows, cols = len(grid), len(grid[0]) if grid else 0
    lo = min(times, default=0.0)
    hi = max(times, default=0.0)
    px = bytearray()
    for row in grid:
        for t in row:
            if t is None:
                px.append(0)
            elif hi == lo:
                px.append(255)
            else:
                px.append(int(round(255 - 254 * (t - lo) / (hi - lo))))
    return f"P5\n{cols} {rows}\n255\n".encode("ascii") + bytes(px)


def export_grid(grid, fmt: str, path) -> None:
    if fmt == "csv":
        Path(path).write_text(grid_csv(grid), encoding="utf-8")
    elif fmt == "pgm":
        Path(path).write_bytes(grid_pgm(grid))
    else:
        raise ValueError(f"unknown export format {fmt!r}")


def read_grid_csv(path) -> list[list[Optional[float]]]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line:
            out.append([None if x == "-1" else float(x) for x in line.split(",")])
    return out
