"""The Mamdani controller as a network of DEVS atomic models.

One fuzzifier per (input, term), one rule model per cell of the rule grid and
a single defuzzifier. All of them are transient: lifetime 0 while active and
infinite while passive, so a crisp output leaves the coupled model at the
same simulation time the inputs arrived.
"""
from __future__ import annotations

from dataclasses import dataclass
from numbers import Real

from .devs import INFINITY, AtomicModel, CoupledModel, Message
from .fuzzy import (ClippedSet, MembershipFunction, RuleBase, Trapezoid, ZeroActivation,
                    aggregate, centroid, clip_consequent, rule_activation)

PASSIVE = "passive"
ACTIVE = "active"

_NUMBER = (int, float, Real)


@dataclass(frozen=True)
class FuzzificationState:
    phase: str
    m: float


@dataclass(frozen=True)
class RuleState:
    phase: str
    m: float
    contribution: ClippedSet


@dataclass(frozen=True)
class DefuzzState:
    phase: str
    u: float


def _transient_ta(state) -> float:
    return 0.0 if state.phase == ACTIVE else INFINITY


class FuzzificationAM(AtomicModel):
    in_ports = {"InNum": _NUMBER}
    out_ports = {"OutNum": float}

    def __init__(self, name: str, mf: MembershipFunction,
                 universe: tuple[float, float] | None = None):
        super().__init__(name, FuzzificationState(PASSIVE, 0.0))
        self.mf = mf
        self.universe = universe

    def delta_ext(self, state, elapsed, bag):
        values = [m.value for m in bag if m.port == "InNum"]
        if len(values) > 1:
            self.warn(f"{len(values)} simultaneous inputs, using the last")
        x = float(values[-1])
        if self.universe is not None:
            x = min(max(x, self.universe[0]), self.universe[1])
        return FuzzificationState(ACTIVE, self.mf(x))

    def output(self, state):
        return [Message("OutNum", state.m)]

    def delta_int(self, state):
        return FuzzificationState(PASSIVE, state.m)

    time_advance = staticmethod(_transient_ta)


class RuleAM(AtomicModel):
    """Fires only when both antecedent degrees arrive in the same bag."""

    in_ports = {"InNum1": _NUMBER, "InNum2": _NUMBER}
    out_ports = {"OutFuz": ClippedSet}

    def __init__(self, name: str, consequent: Trapezoid):
        super().__init__(name, RuleState(PASSIVE, 0.0, ClippedSet(0.0, consequent)))
        self.consequent = consequent

    def delta_ext(self, state, elapsed, bag):
        got = {m.port: float(m.value) for m in bag}
        if "InNum1" not in got or "InNum2" not in got:
            self.warn(f"ProtocolWarning: partial bag {sorted(got)}, staying passive")
            return state
        alpha = rule_activation([got["InNum1"], got["InNum2"]])
        return RuleState(ACTIVE, alpha, clip_consequent(self.consequent, alpha))

    def output(self, state):
        # A dead rule still reports, at level 0, so the defuzzifier can count.
        return [Message("OutFuz", state.contribution)]

    def delta_int(self, state):
        return RuleState(PASSIVE, state.m, state.contribution)

    time_advance = staticmethod(_transient_ta)


class DefuzzificationAM(AtomicModel):
    in_ports = {"InFuz": ClippedSet}
    out_ports = {"OutNum": float}

    def __init__(self, name: str, universe: tuple[float, float], expected: int = 4):
        super().__init__(name, DefuzzState(PASSIVE, 0.0))
        self.universe = universe
        self.expected = expected

    def delta_ext(self, state, elapsed, bag):
        parts = [m.value for m in bag if m.port == "InFuz"]
        if len(parts) != self.expected:
            self.warn(f"ProtocolWarning: {len(parts)} of {self.expected} contributions, "
                      "staying passive")
            return state
        try:
            u = centroid(aggregate(parts, self.universe))
        except ZeroActivation as exc:
            levels = ", ".join(f"{p.base.params}@{p.level:g}" for p in parts)
            raise ZeroActivation(f"no rule fired; contributions: {levels}") from exc
        return DefuzzState(ACTIVE, u)

    def output(self, state):
        return [Message("OutNum", state.u)]

    def delta_int(self, state):
        return DefuzzState(PASSIVE, state.u)

    time_advance = staticmethod(_transient_ta)


def make_fuzzification_am(mf: MembershipFunction, name: str = "fuzzifier",
                          universe: tuple[float, float] | None = None) -> FuzzificationAM:
    return FuzzificationAM(name, mf, universe)


def make_rule_am(consequent: Trapezoid, name: str = "rule") -> RuleAM:
    return RuleAM(name, consequent)


def make_defuzzification_am(universe: tuple[float, float], name: str = "defuzz",
                            expected: int = 4) -> DefuzzificationAM:
    return DefuzzificationAM(name, universe, expected)


@dataclass(frozen=True)
class FisTopology:
    inputs: tuple[str, ...]
    terms: tuple[tuple[str, ...], ...]
    fuzzifiers: dict[tuple[int, str], str]
    rules: dict[tuple[str, ...], str]
    defuzzifier: str

    @property
    def component_count(self) -> int:
        return len(self.fuzzifiers) + len(self.rules) + 1


def fis_topology(rb: RuleBase) -> FisTopology:
    if len(rb.input_vars) != 2:
        raise ValueError(f"the DEVS controller takes exactly 2 inputs, got {len(rb.input_vars)}")
    fuzzifiers = {(i, t): f"fuzz_{var.name}_{t}"
                  for i, var in enumerate(rb.input_vars) for t in var.term_names}
    rules = {r.antecedents: "rule_" + "_".join(r.antecedents) for r in rb.rules}
    return FisTopology(
        inputs=tuple(v.name for v in rb.input_vars),
        terms=tuple(tuple(v.term_names) for v in rb.input_vars),
        fuzzifiers=fuzzifiers,
        rules=rules,
        defuzzifier="defuzz",
    )


def input_port(var_name: str) -> str:
    return f"In{var_name}"


def build_fis_coupled(rb: RuleBase, name: str = "fis") -> CoupledModel:
    missing = rb.missing_cells()
    if missing:
        raise ValueError(f"incomplete rule grid, missing: {missing}")
    topo = fis_topology(rb)
    in_ports = [input_port(v) for v in topo.inputs]
    order = list(topo.fuzzifiers.values()) + list(topo.rules.values()) + [topo.defuzzifier]
    cm = CoupledModel(name, in_ports=in_ports, out_ports=["OutNum"], priority=order)

    for (i, term), fname in topo.fuzzifiers.items():
        var = rb.input_vars[i]
        cm.add(FuzzificationAM(fname, var.term(term), var.universe))
        cm.connect(cm, in_ports[i], fname, "InNum")
    defuzz = cm.add(DefuzzificationAM(topo.defuzzifier, rb.output_var.universe,
                                      expected=len(rb.rules)))
    for rule in rb.rules:
        rname = topo.rules[rule.antecedents]
        cm.add(RuleAM(rname, rb.output_var.term(rule.consequent)))
        for i, term in enumerate(rule.antecedents):
            cm.connect(topo.fuzzifiers[(i, term)], "OutNum", rname, f"InNum{i + 1}")
        cm.connect(rname, "OutFuz", defuzz, "InFuz")
    cm.connect(defuzz, "OutNum", cm, "OutNum")
    return cm
