"""Forest-fire cell space driven by a weather/ignition generator.

Each cell is an atomic model cycling Unburned -> Burning -> Ember -> Ash. A
burning cell ignites its Moore neighbours when its burning phase ends, so the
front advances one cell (in Chebyshev distance) per burning lifetime.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable

from .devs import (COALESCE_EPS, IGNITE, INFINITY, AtomicModel, CoupledModel, Ignite,
                   Message, Simulator, WeatherPair)
from .fis import _NUMBER, build_fis_coupled, input_port
from .fuzzy import RuleBase, default_rule_base

Coords = tuple[int, int]


class CellPhase(enum.IntEnum):
    NONFLAMMABLE = 0
    UNBURNED = 1
    BURNING = 2
    EMBER = 3
    ASH = 4

    def __str__(self):
        return self.name.capitalize()


@dataclass(frozen=True)
class CellState:
    phase: CellPhase
    tau: float
    sigma: float

    def __repr__(self):
        return f"CellState({self.phase}, tau={self.tau!r}, sigma={self.sigma!r})"


class CellAM(AtomicModel):
    in_ports = {"Ignition": Ignite, "Duration": _NUMBER}
    out_ports = {"Ignite": Ignite}

    def __init__(self, coords: Coords, flammable: bool = True, tau: float = 0.5,
                 ember_fraction: float = 0.2):
        if ember_fraction < 0:
            raise ValueError(f"ember_fraction must be >= 0, got {ember_fraction}")
        if not tau > 0:
            raise ValueError(f"tau must be > 0, got {tau}")
        phase = CellPhase.UNBURNED if flammable else CellPhase.NONFLAMMABLE
        super().__init__(cell_name(coords), CellState(phase, float(tau), INFINITY))
        self.coords = coords
        self.ember_fraction = ember_fraction

    def _lifetime(self, phase, tau):
        if phase == CellPhase.BURNING:
            return tau
        if phase == CellPhase.EMBER:
            return self.ember_fraction * tau
        return INFINITY

    def delta_ext(self, state, elapsed, bag):
        s = state
        durations = [m.value for m in bag if m.port == "Duration"]
        if durations:
            tau = float(durations[-1])
            if not tau > 0:
                raise ValueError(f"Duration must be positive, got {tau}")
            if tau != s.tau:
                if s.phase in (CellPhase.BURNING, CellPhase.EMBER):
                    if elapsed <= COALESCE_EPS:
                        # Phase entered at this very instant: nothing consumed yet.
                        sigma = self._lifetime(s.phase, tau)
                    else:
                        sigma = s.sigma - elapsed
                    s = CellState(s.phase, tau, sigma)
                else:
                    s = CellState(s.phase, tau, s.sigma)
        if any(m.port == "Ignition" for m in bag):
            if s.phase == CellPhase.UNBURNED:
                s = CellState(CellPhase.BURNING, s.tau, s.tau)
            elif s.phase == CellPhase.NONFLAMMABLE:
                self.warn("Ignite on nonflammable cell ignored")
        return s

    def output(self, state):
        if state.phase == CellPhase.BURNING:
            return [Message("Ignite", IGNITE)]
        return []

    def delta_int(self, state):
        if state.phase == CellPhase.BURNING:
            return CellState(CellPhase.EMBER, state.tau, self.ember_fraction * state.tau)
        if state.phase == CellPhase.EMBER:
            return CellState(CellPhase.ASH, state.tau, INFINITY)
        raise RuntimeError(f"internal transition in passive phase {state.phase}")

    def time_advance(self, state):
        return state.sigma


def make_cell_am(coords: Coords, kind: str = "flammable", ember_fraction: float = 0.2,
                 tau: float = 0.5) -> CellAM:
    if kind not in ("flammable", "nonflammable"):
        raise ValueError(f"unknown cell kind {kind!r}")
    return CellAM(coords, kind == "flammable", tau, ember_fraction)


def cell_name(coords: Coords) -> str:
    return f"cell({coords[0]},{coords[1]})"


def neighbors(coords: Coords, dims: tuple[int, int]) -> set[Coords]:
    """Moore neighbourhood of a 1-based cell, clipped at the borders."""
    r, c = coords
    rows, cols = dims
    return {(r + dr, c + dc)
            for dr in (-1, 0, 1) for dc in (-1, 0, 1)
            if (dr or dc) and 1 <= r + dr <= rows and 1 <= c + dc <= cols}


def chebyshev(a: Coords, b: Coords) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


@dataclass(frozen=True)
class GridSpec:
    rows: int
    cols: int
    cell_area: tuple[float, float] = (1.2, 0.8)
    nonflammable: frozenset[Coords] = field(default_factory=frozenset)
    ignition: tuple[int, int, float] = (1, 1, 0.0)

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.rows}x{self.cols}")
        object.__setattr__(self, "nonflammable",
                           frozenset((int(r), int(c)) for r, c in self.nonflammable))
        for rc in self.nonflammable:
            if not self.contains(rc):
                raise ValueError(f"nonflammable cell {rc} outside {self.rows}x{self.cols} grid")
        r, c, t = self.ignition
        if not self.contains((r, c)):
            raise ValueError(f"ignition cell ({r},{c}) outside {self.rows}x{self.cols} grid")
        if (r, c) in self.nonflammable:
            raise ValueError(f"ignition cell ({r},{c}) is nonflammable")
        if t < 0:
            raise ValueError(f"ignition time must be >= 0, got {t}")

    def contains(self, rc: Coords) -> bool:
        return 1 <= rc[0] <= self.rows and 1 <= rc[1] <= self.cols

    def cells(self) -> Iterable[Coords]:
        for r in range(1, self.rows + 1):
            for c in range(1, self.cols + 1):
                yield (r, c)


@dataclass(frozen=True)
class WeatherSchedule:
    entries: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        if not self.entries:
            raise ValueError("weather schedule is empty")
        times = [e[0] for e in self.entries]
        if times[0] != 0:
            raise ValueError(f"weather schedule must start at time 0, starts at {times[0]}")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError(f"weather times must be strictly increasing: {times}")

    @classmethod
    def constant(cls, h: float, v: float) -> "WeatherSchedule":
        return cls(((0.0, h, v),))


@dataclass(frozen=True)
class _GenState:
    index: int
    sigma: float


class GeneratorAM(AtomicModel):
    """Emits weather on EnvOut and the ignition token on FireOut."""

    in_ports: dict = {}
    out_ports = {"EnvOut": WeatherPair, "FireOut": Ignite}

    def __init__(self, weather: WeatherSchedule, ignition_time: float, name: str = "generator"):
        events: dict[float, list[Message]] = {}
        for t, h, v in weather.entries:
            events.setdefault(float(t), []).append(Message("EnvOut", WeatherPair(h, v)))
        events.setdefault(float(ignition_time), []).append(Message("FireOut", IGNITE))
        self.timeline = sorted(events.items())
        super().__init__(name, _GenState(0, self.timeline[0][0]))

    def output(self, state):
        return list(self.timeline[state.index][1])

    def delta_int(self, state):
        i = state.index + 1
        if i >= len(self.timeline):
            return _GenState(i, INFINITY)
        return _GenState(i, self.timeline[i][0] - self.timeline[i - 1][0])

    def delta_ext(self, state, elapsed, bag):
        return state

    def time_advance(self, state):
        return state.sigma


def make_generator_am(ws: WeatherSchedule, ignition: tuple[int, int, float]) -> GeneratorAM:
    return GeneratorAM(ws, ignition[2])


@dataclass(frozen=True)
class Conventional:
    tau: float = 0.5


@dataclass(frozen=True)
class Fuzzy:
    rule_base: RuleBase = field(default_factory=default_rule_base)
    # Lifetime a cell holds until the controller's first output reaches it.
    initial_tau: float = 0.5


def build_forest(gs: GridSpec, mode: Conventional | Fuzzy,
                 weather: WeatherSchedule | None = None,
                 ember_fraction: float = 0.2) -> CoupledModel:
    """Generator + optional controller + the grid of cells, as one coupled model."""
    weather = weather or WeatherSchedule.constant(45.0, 35.0)
    fuzzy = isinstance(mode, Fuzzy)
    tau = mode.initial_tau if fuzzy else mode.tau

    grid = CoupledModel("forest", in_ports=["Ignition", "Duration"],
                        priority=[cell_name(rc) for rc in gs.cells()])
    dims = (gs.rows, gs.cols)
    for rc in gs.cells():
        grid.add(CellAM(rc, rc not in gs.nonflammable, tau, ember_fraction))
    for rc in gs.cells():
        for nb in sorted(neighbors(rc, dims)):
            grid.connect(cell_name(rc), "Ignite", cell_name(nb), "Ignition")
        grid.connect(grid, "Duration", cell_name(rc), "Duration")
    grid.connect(grid, "Ignition", cell_name(gs.ignition[:2]), "Ignition")

    root = CoupledModel("forest_fire", priority=["generator", "fis", "forest"])
    gen = root.add(GeneratorAM(weather, gs.ignition[2]))
    root.add(grid)
    root.connect(gen, "FireOut", grid, "Ignition")
    if fuzzy:
        rb = mode.rule_base
        fis = root.add(build_fis_coupled(rb, name="fis"))
        for var, attr in zip(rb.input_vars, ("h", "v")):
            root.connect(gen, "EnvOut", fis, input_port(var.name), field=attr)
        root.connect(fis, "OutNum", grid, "Duration")
    return root


class ForestRecorder:
    """Collects per-cell phase entry times from a running simulator."""

    def __init__(self, gs: GridSpec):
        self.grid = gs
        self.ignited: dict[Coords, float] = {}
        self.ember: dict[Coords, float] = {}
        self.ash: dict[Coords, float] = {}
        self.ignite_emissions: dict[Coords, int] = {}
        self.phase_history: dict[Coords, list[CellPhase]] = {}
        self.fis_outputs: list[tuple[float, float]] = []

    def attach(self, sim: Simulator) -> "ForestRecorder":
        sim.add_listener(self)
        return self

    def __call__(self, time, model, kind, state):
        if isinstance(model, CellAM):
            rc = model.coords
            hist = self.phase_history.setdefault(rc, [])
            if not hist or hist[-1] != state.phase:
                hist.append(state.phase)
            if state.phase == CellPhase.BURNING:
                self.ignited.setdefault(rc, time)
            elif state.phase == CellPhase.EMBER:
                self.ember.setdefault(rc, time)
                self.ignite_emissions[rc] = self.ignite_emissions.get(rc, 0) + 1
            elif state.phase == CellPhase.ASH:
                self.ash.setdefault(rc, time)
        elif model.name == "defuzz" and kind == "external":
            self.fis_outputs.append((time, state.u))

    def ignition_grid(self) -> list[list[float | None]]:
        return [[self.ignited.get((r, c)) for c in range(1, self.grid.cols + 1)]
                for r in range(1, self.grid.rows + 1)]
