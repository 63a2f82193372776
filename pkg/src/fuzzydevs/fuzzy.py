"""Mamdani fuzzy inference on trapezoidal terms.

Everything here is a pure function of immutable values. The aggregate of
clipped consequents is kept as an exact piecewise-linear function, so the
centre of gravity is computed in closed form rather than by sampling.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class FuzzyError(ValueError):
    """Malformed fuzzy-logic input."""


class ZeroActivation(FuzzyError):
    """No rule fired: the aggregated output has zero area."""


@dataclass(frozen=True)
class Trapezoid:
    l_foot: float
    l_shoulder: float
    r_shoulder: float
    r_foot: float

    def __post_init__(self):
        for name in ("l_foot", "l_shoulder", "r_shoulder", "r_foot"):
            object.__setattr__(self, name, float(getattr(self, name)))
        pts = (self.l_foot, self.l_shoulder, self.r_shoulder, self.r_foot)
        if not all(math.isfinite(p) for p in pts):
            raise FuzzyError(f"trapezoid parameters must be finite: {pts}")
        if not (self.l_foot <= self.l_shoulder <= self.r_shoulder <= self.r_foot):
            raise FuzzyError(f"trapezoid parameters out of order: {pts}")

    @property
    def params(self) -> tuple[float, float, float, float]:
        return (self.l_foot, self.l_shoulder, self.r_shoulder, self.r_foot)

    def __call__(self, x: float) -> float:
        if self.l_shoulder <= x <= self.r_shoulder:
            return 1.0
        if self.l_foot < x < self.l_shoulder:
            return (x - self.l_foot) / (self.l_shoulder - self.l_foot)
        if self.r_shoulder < x < self.r_foot:
            return (self.r_foot - x) / (self.r_foot - self.r_shoulder)
        return 0.0

    def breakpoints(self) -> list[tuple[float, float]]:
        """Vertices of the graph; a repeated abscissa marks a vertical edge."""
        a, b, c, d = self.params
        pts = [(a, 0.0), (b, 1.0), (c, 1.0), (d, 0.0)]
        out: list[tuple[float, float]] = []
        for p in pts:
            if out and out[-1] == p:
                continue
            out.append(p)
        return out


# Triangles and crisp intervals are degenerate trapezoids, so every term in
# this package evaluates through the same code path.
MembershipFunction = Trapezoid


def triangle(left: float, peak: float, right: float) -> Trapezoid:
    return Trapezoid(left, peak, peak, right)


def crisp(lo: float, hi: float) -> Trapezoid:
    return Trapezoid(lo, lo, hi, hi)


def eval_membership(mf: MembershipFunction, x: float) -> float:
    return mf(x)


@dataclass(frozen=True)
class LinguisticVariable:
    name: str
    universe: tuple[float, float]
    terms: tuple[tuple[str, MembershipFunction], ...]

    def __post_init__(self):
        lo, hi = self.universe
        if not lo < hi:
            raise FuzzyError(f"{self.name}: empty universe {self.universe}")
        names = [t for t, _ in self.terms]
        if len(set(names)) != len(names):
            raise FuzzyError(f"{self.name}: duplicate term names {names}")
        if not names:
            raise FuzzyError(f"{self.name}: no terms")
        for term, mf in self.terms:
            if mf.l_foot < lo or mf.r_foot > hi:
                raise FuzzyError(
                    f"{self.name}.{term}: support [{mf.l_foot}, {mf.r_foot}] "
                    f"leaves universe [{lo}, {hi}]")

    @property
    def term_names(self) -> list[str]:
        return [t for t, _ in self.terms]

    def term(self, name: str) -> MembershipFunction:
        for t, mf in self.terms:
            if t == name:
                return mf
        raise FuzzyError(f"{self.name}: unknown term {name!r}")

    def clamp(self, x: float) -> float:
        lo, hi = self.universe
        return min(max(x, lo), hi)


@dataclass(frozen=True)
class FuzzyRule:
    antecedents: tuple[str, ...]
    consequent: str

    def __str__(self):
        return f"{'&'.join(self.antecedents)}->{self.consequent}"


@dataclass(frozen=True)
class RuleBase:
    input_vars: tuple[LinguisticVariable, ...]
    output_var: LinguisticVariable
    rules: tuple[FuzzyRule, ...]

    def __post_init__(self):
        n = len(self.input_vars)
        if n == 0:
            raise FuzzyError("rule base needs at least one input variable")
        seen = set()
        for rule in self.rules:
            if len(rule.antecedents) != n:
                raise FuzzyError(f"rule {rule} has {len(rule.antecedents)} antecedents, expected {n}")
            for var, term in zip(self.input_vars, rule.antecedents):
                var.term(term)
            self.output_var.term(rule.consequent)
            if rule.antecedents in seen:
                raise FuzzyError(f"duplicate rule for antecedents {rule.antecedents}")
            seen.add(rule.antecedents)
        missing = self.missing_cells()
        if missing:
            raise FuzzyError(f"incomplete rule grid, missing: {missing}")

    def missing_cells(self) -> list[tuple[str, ...]]:
        have = {r.antecedents for r in self.rules}
        grid = itertools.product(*(v.term_names for v in self.input_vars))
        return [cell for cell in grid if cell not in have]


@dataclass(frozen=True)
class ClippedSet:
    level: float
    base: Trapezoid

    def __post_init__(self):
        if not 0.0 <= self.level <= 1.0:
            raise FuzzyError(f"clip level {self.level} outside [0, 1]")

    def __call__(self, u: float) -> float:
        return min(self.level, self.base(u))

    def breakpoints(self) -> list[tuple[float, float]]:
        pts = self.base.breakpoints()
        out: list[tuple[float, float]] = []
        for (u0, m0), (u1, m1) in zip(pts, pts[1:]):
            out.append((u0, min(m0, self.level)))
            if (m0 - self.level) * (m1 - self.level) < 0:
                u = u0 + (self.level - m0) * (u1 - u0) / (m1 - m0)
                out.append((u, self.level))
        out.append((pts[-1][0], min(pts[-1][1], self.level)))
        return out


@dataclass(frozen=True)
class PiecewiseLinearFn:
    """Linear interpolation of ``breakpoints``, zero outside their span.

    Abscissas are non-decreasing; two consecutive points sharing an abscissa
    encode a jump.
    """

    breakpoints: tuple[tuple[float, float], ...] = field(default=())

    def __post_init__(self):
        for (u0, _), (u1, _) in zip(self.breakpoints, self.breakpoints[1:]):
            if u1 < u0:
                raise FuzzyError("breakpoint abscissas must be non-decreasing")
        for _, m in self.breakpoints:
            if not 0.0 <= m <= 1.0:
                raise FuzzyError(f"membership value {m} outside [0, 1]")

    @property
    def span(self) -> tuple[float, float]:
        return (self.breakpoints[0][0], self.breakpoints[-1][0])

    def __call__(self, u: float) -> float:
        pts = self.breakpoints
        if not pts or u < pts[0][0] or u > pts[-1][0]:
            return 0.0
        best = 0.0
        for (u0, m0), (u1, m1) in zip(pts, pts[1:]):
            if u0 <= u <= u1:
                if u1 == u0:
                    best = max(best, m0, m1)
                else:
                    best = max(best, m0 + (m1 - m0) * (u - u0) / (u1 - u0))
        if len(pts) == 1:
            best = pts[0][1]
        return best

    def sample(self, u: np.ndarray) -> np.ndarray:
        """Vectorized evaluation; at a jump the right-hand value is taken."""
        pts = list(self.breakpoints)
        # The span's own edges are closed: take the inside limit there.
        while len(pts) > 2 and pts[0][0] == pts[1][0]:
            pts.pop(0)
        while len(pts) > 2 and pts[-1][0] == pts[-2][0]:
            pts.pop()
        xp = np.array([p[0] for p in pts])
        fp = np.array([p[1] for p in pts])
        u = np.asarray(u, dtype=float)
        idx = np.clip(np.searchsorted(xp, u, side="right") - 1, 0, len(xp) - 2)
        x0, x1, y0, y1 = xp[idx], xp[idx + 1], fp[idx], fp[idx + 1]
        with np.errstate(invalid="ignore", divide="ignore"):
            t = np.where(x1 > x0, (u - x0) / (x1 - x0), 0.0)
        out = y0 + t * (y1 - y0)
        out = np.where(u == xp[-1], fp[-1], out)
        return np.where((u < xp[0]) | (u > xp[-1]), 0.0, out)

    def area(self) -> float:
        return sum(_segment_integrals(self.breakpoints)[0])

    def moment(self) -> float:
        return sum(_segment_integrals(self.breakpoints)[1])


def _segment_integrals(pts):
    areas, moments = [], []
    for (u0, m0), (u1, m1) in zip(pts, pts[1:]):
        h = u1 - u0
        areas.append(h * (m0 + m1) / 2.0)
        moments.append(h * (m0 * (2 * u0 + u1) + m1 * (u0 + 2 * u1)) / 6.0)
    return areas, moments


def rule_activation(degrees: Sequence[float]) -> float:
    if len(degrees) == 0:
        raise FuzzyError("rule activation needs at least one degree")
    return min(degrees)


def clip_consequent(consequent: Trapezoid, alpha: float) -> ClippedSet:
    return ClippedSet(level=alpha, base=consequent)


def _piece_on(pts, lo, hi):
    """The linear piece (slope, intercept) of a graph on the open interval (lo, hi)."""
    mid = 0.5 * (lo + hi)
    if mid <= pts[0][0] or mid >= pts[-1][0]:
        return 0.0, 0.0
    for (u0, m0), (u1, m1) in zip(pts, pts[1:]):
        if u0 < mid < u1:
            slope = (m1 - m0) / (u1 - u0)
            return slope, m0 - slope * u0
    return 0.0, 0.0


def aggregate(contributions: Sequence[ClippedSet],
              universe: tuple[float, float]) -> PiecewiseLinearFn:
    """Pointwise maximum of the clipped sets, represented exactly."""
    if not contributions:
        raise FuzzyError("aggregate needs at least one contribution")
    lo, hi = universe
    graphs = []
    for c in contributions:
        if c.base.l_foot < lo or c.base.r_foot > hi:
            raise FuzzyError(f"contribution {c.base.params} leaves universe {universe}")
        graphs.append(c.breakpoints())

    xs = sorted({u for g in graphs for u, _ in g})
    # Between consecutive vertices every graph is linear; add the crossings.
    extra = []
    for a, b in zip(xs, xs[1:]):
        pieces = [_piece_on(g, a, b) for g in graphs]
        for (s1, c1), (s2, c2) in itertools.combinations(pieces, 2):
            if s1 != s2:
                u = (c2 - c1) / (s1 - s2)
                if a < u < b:
                    extra.append(u)
    xs = sorted(set(xs).union(extra))

    pieces = [[_piece_on(g, a, b) for g in graphs] for a, b in zip(xs, xs[1:])]
    pts: list[tuple[float, float]] = []
    for i, u in enumerate(xs):
        left = max((s * u + c for s, c in pieces[i - 1]), default=0.0) if i > 0 else 0.0
        right = max((s * u + c for s, c in pieces[i]), default=0.0) if i < len(pieces) else 0.0
        left = min(max(left, 0.0), 1.0)
        right = min(max(right, 0.0), 1.0)
        if i == 0 and len(xs) == 1:
            pts.append((u, max(m for g in graphs for v, m in g if v == u)))
        elif left == right:
            pts.append((u, left))
        else:
            pts.append((u, left))
            pts.append((u, right))
    return PiecewiseLinearFn(tuple(_simplify(pts)))


def _simplify(pts):
    out = []
    for p in pts:
        if out and out[-1] == p:
            continue
        if len(out) >= 2:
            (u0, m0), (u1, m1) = out[-2], out[-1]
            u2, m2 = p
            if u0 < u1 < u2 and abs((m1 - m0) * (u2 - u0) - (m2 - m0) * (u1 - u0)) <= 1e-15:
                out[-1] = p
                continue
        out.append(p)
    return out


def centroid(f: PiecewiseLinearFn) -> float:
    areas, moments = _segment_integrals(f.breakpoints)
    area = math.fsum(areas)
    if area <= 0.0:
        raise ZeroActivation("aggregated output has zero area; no rule fired")
    return math.fsum(moments) / area


# numpy 2 renamed trapz
_trapezoid = getattr(np, "trapezoid", None) or np.trapz


def centroid_numeric(f: PiecewiseLinearFn, samples: int) -> float:
    """Composite trapezoidal-rule estimate of the centroid; a test oracle."""
    if samples < 2:
        raise FuzzyError("need at least two samples")
    if not f.breakpoints:
        raise ZeroActivation("empty function")
    lo, hi = f.span
    if hi <= lo:
        raise ZeroActivation("degenerate span")
    u = np.linspace(lo, hi, samples)
    mu = f.sample(u)
    area = _trapezoid(mu, u)
    if area <= 0.0:
        raise ZeroActivation("aggregated output has zero area; no rule fired")
    return float(_trapezoid(u * mu, u) / area)


@dataclass(frozen=True)
class Inference:
    """Intermediate results of one evaluation."""

    inputs: tuple[float, ...]
    degrees: tuple[dict[str, float], ...]
    activations: tuple[tuple[FuzzyRule, float], ...]
    aggregate: PiecewiseLinearFn
    crisp: float


def infer(rb: RuleBase, inputs: Sequence[float]) -> Inference:
    if len(inputs) != len(rb.input_vars):
        raise FuzzyError(f"expected {len(rb.input_vars)} inputs, got {len(inputs)}")
    xs = tuple(var.clamp(float(x)) for var, x in zip(rb.input_vars, inputs))
    degrees = tuple({t: eval_membership(mf, x) for t, mf in var.terms}
                    for var, x in zip(rb.input_vars, xs))
    activations = []
    contributions = []
    for rule in rb.rules:
        alpha = rule_activation([d[t] for d, t in zip(degrees, rule.antecedents)])
        activations.append((rule, alpha))
        contributions.append(clip_consequent(rb.output_var.term(rule.consequent), alpha))
    agg = aggregate(contributions, rb.output_var.universe)
    try:
        y = centroid(agg)
    except ZeroActivation as exc:
        table = ", ".join(f"{r}={a:g}" for r, a in activations)
        raise ZeroActivation(f"no rule fired at inputs {xs}: {table}") from exc
    return Inference(xs, degrees, tuple(activations), agg, y)


def fis_evaluate(rb: RuleBase, inputs: Sequence[float]) -> float:
    return infer(rb, inputs).crisp


def default_rule_base() -> RuleBase:
    """Humidity/wind rule base used by the wildfire model."""
    humidity = LinguisticVariable("H", (0.0, 100.0), (
        ("Dry", Trapezoid(0, 0, 30, 70)),
        ("Wet", Trapezoid(30, 70, 100, 100)),
    ))
    wind = LinguisticVariable("V", (0.0, 100.0), (
        ("Calm", Trapezoid(0, 0, 20, 50)),
        ("Power", Trapezoid(20, 50, 100, 100)),
    ))
    lifetime = LinguisticVariable("tau", (0.3, 0.8), (
        ("Fast", Trapezoid(0.3, 0.3, 0.4, 0.6)),
        ("Slow", Trapezoid(0.4, 0.6, 0.8, 0.8)),
    ))
    rules = (
        FuzzyRule(("Dry", "Calm"), "Slow"),
        FuzzyRule(("Wet", "Calm"), "Slow"),
        FuzzyRule(("Dry", "Power"), "Fast"),
        FuzzyRule(("Wet", "Power"), "Slow"),
    )
    return RuleBase((humidity, wind), lifetime, rules)
