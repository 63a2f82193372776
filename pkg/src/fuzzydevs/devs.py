"""Classic DEVS atomic/coupled models and a deterministic simulator.

The simulator flattens the coupling hierarchy at initialization into direct
atomic-to-atomic links. Simultaneous events are processed in rounds: every
component imminent at the current time fires (lambda, then delta_int) in
Select order, and only then is each receiver handed everything addressed to
it at that time as a single bag. Receivers whose new lifetime is zero form
the next round at the same timestamp.
"""
from __future__ import annotations

import hashlib
import heapq
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, is_dataclass
from typing import Any, Callable, Iterable, Mapping, Sequence

log = logging.getLogger(__name__)

INFINITY = math.inf
#: Events closer than this are delivered in the same bag.
COALESCE_EPS = 1e-12
DEFAULT_MAX_STEPS = 10**8


class DevsError(RuntimeError):
    pass


class CouplingError(DevsError):
    """Malformed coupled model."""


class PortTypeError(DevsError, TypeError):
    """A message value does not match the receiving port's declared type."""


class NonTerminating(DevsError):
    """Step limit exceeded, usually an illegitimate zero-delay loop."""


class ModelError(DevsError):
    """A transition or output function raised; wraps the original error."""

    def __init__(self, path: str, time: float, cause: BaseException):
        super().__init__(f"{path} at t={time!r}: {type(cause).__name__}: {cause}")
        self.path = path
        self.time = time
        self.cause = cause


@dataclass(frozen=True)
class Message:
    port: str
    value: Any

    def __post_init__(self):
        if not self.port:
            raise ValueError("port name must be non-empty")


@dataclass(frozen=True)
class Ignite:
    """Unit token carried on ignition ports."""

    def __repr__(self):
        return "Ignite"


IGNITE = Ignite()


@dataclass(frozen=True)
class WeatherPair:
    h: float
    v: float


class AtomicModel:
    """Base class for atomic models.

    Subclasses declare ``in_ports``/``out_ports`` as mappings from port name
    to the accepted value type (or tuple of types, or ``None`` for any), set
    ``initial_state`` and implement the four DEVS functions. States should be
    immutable values: the simulator owns them, the model never stores them.
    Returning the very same state object from ``delta_ext`` means "nothing
    changed" and keeps the pending internal event where it was.
    """

    in_ports: Mapping[str, Any] = {}
    out_ports: Mapping[str, Any] = {}

    def __init__(self, name: str, initial_state: Any = None):
        self.name = name
        self.initial_state = initial_state
        self._notes: list[str] = []

    def delta_int(self, state):
        raise NotImplementedError

    def delta_ext(self, state, elapsed: float, bag: Sequence[Message]):
        raise NotImplementedError

    def output(self, state) -> list[Message]:
        return []

    def time_advance(self, state) -> float:
        raise NotImplementedError

    def warn(self, text: str) -> None:
        """Record a protocol warning; it lands in the trace."""
        self._notes.append(text)

    def __repr__(self):
        return f"<{type(self).__name__} {self.name}>"


@dataclass(frozen=True)
class Coupling:
    src: str | None          # None: the coupled model itself (EIC source)
    src_port: str
    dst: str | None          # None: the coupled model itself (EOC destination)
    dst_port: str
    field: str | None = None  # project one attribute of the value, e.g. "h"

    @property
    def kind(self) -> str:
        if self.src is None:
            return "EIC"
        if self.dst is None:
            return "EOC"
        return "IC"


class CoupledModel:
    """Composition of atomic and coupled components.

    ``priority`` is the Select function as a total order over component
    names; components missing from it follow in sorted-name order.
    """

    def __init__(self, name: str, in_ports: Iterable[str] = (),
                 out_ports: Iterable[str] = (), priority: Sequence[str] | None = None):
        self.name = name
        self.in_ports = dict.fromkeys(in_ports)
        self.out_ports = dict.fromkeys(out_ports)
        self.components: dict[str, AtomicModel | CoupledModel] = {}
        self.couplings: list[Coupling] = []
        self.priority = list(priority) if priority is not None else None
        self._routes: dict[tuple[str | None, str], list[Coupling]] | None = None

    def add(self, model):
        if model.name in self.components:
            raise CouplingError(f"{self.name}: duplicate component {model.name!r}")
        if "/" in model.name:
            raise CouplingError(f"{self.name}: component name {model.name!r} contains '/'")
        self.components[model.name] = model
        return model

    def connect(self, src, src_port: str, dst, dst_port: str, field: str | None = None):
        """Link ``src.src_port`` to ``dst.dst_port``; pass ``self`` for the boundary."""
        c = Coupling(self._ref(src), src_port, self._ref(dst), dst_port, field)
        self.couplings.append(c)
        self._routes = None
        return c

    def _ref(self, m):
        if m is self or m is None:
            return None
        return m if isinstance(m, str) else m.name

    @property
    def eic(self):
        return [c for c in self.couplings if c.kind == "EIC"]

    @property
    def eoc(self):
        return [c for c in self.couplings if c.kind == "EOC"]

    @property
    def ic(self):
        return [c for c in self.couplings if c.kind == "IC"]

    def select_priority(self) -> list[str]:
        order = [n for n in (self.priority or []) if n in self.components]
        rest = sorted(n for n in self.components if n not in set(order))
        return order + rest

    def validate(self) -> None:
        for c in self.couplings:
            if c.src is None:
                if c.src_port not in self.in_ports:
                    raise CouplingError(f"{self.name}: {c} uses undeclared input port {c.src_port!r}")
            else:
                comp = self.components.get(c.src)
                if comp is None:
                    raise CouplingError(f"{self.name}: {c} names unknown component {c.src!r}")
                if c.src_port not in comp.out_ports:
                    raise CouplingError(f"{self.name}: {c} uses undeclared output port "
                                        f"{c.src}.{c.src_port}")
            if c.dst is None:
                if c.dst_port not in self.out_ports:
                    raise CouplingError(f"{self.name}: {c} uses undeclared output port {c.dst_port!r}")
            else:
                comp = self.components.get(c.dst)
                if comp is None:
                    raise CouplingError(f"{self.name}: {c} names unknown component {c.dst!r}")
                if c.dst_port not in comp.in_ports:
                    raise CouplingError(f"{self.name}: {c} uses undeclared input port "
                                        f"{c.dst}.{c.dst_port}")
            if c.src is None and c.dst is None:
                raise CouplingError(f"{self.name}: {c} connects the boundary to itself")
            if c.src is not None and c.src == c.dst:
                raise CouplingError(f"{self.name}: {c} is a zero-delay self-loop")
        if self.priority is not None and len(set(self.priority)) != len(self.priority):
            raise CouplingError(f"{self.name}: duplicate names in select priority")
        for comp in self.components.values():
            if isinstance(comp, CoupledModel):
                comp.validate()

    def route(self, source: str | None, port: str) -> list[tuple[str | None, str]]:
        """One-level fan-out of ``source.port``; ``None`` is this model's boundary."""
        if self._routes is None:
            routes = defaultdict(list)
            for c in self.couplings:
                routes[(c.src, c.src_port)].append(c)
            self._routes = routes
        return [(c.dst, c.dst_port) for c in self._routes.get((source, port), [])]

    def __repr__(self):
        return f"<CoupledModel {self.name} ({len(self.components)} components)>"


def select_imminent(imminents: Iterable[str], priority: Sequence[str]) -> str:
    rank = {name: i for i, name in enumerate(priority)}
    return min(imminents, key=lambda n: rank[n])


def route(cm: CoupledModel, source, port: str, msg: Message | None = None):
    src = None if source is cm or source is None else getattr(source, "name", source)
    return cm.route(src, port)


@dataclass(frozen=True)
class TraceEntry:
    time: float
    path: str
    kind: str  # internal | external | output | dropped | warning
    port: str
    value: Any

    def line(self) -> str:
        return f"{_fmt(self.time)}\t{self.path}\t{self.kind}\t{self.port}={_fmt(self.value)}"


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if is_dataclass(v) and not isinstance(v, type):
        return repr(v)
    return str(v)


class Trace:
    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self.entries: list[TraceEntry] = []

    def add(self, time, path, kind, port, value) -> None:
        if self.enabled:
            self.entries.append(TraceEntry(time, path, kind, port, value))

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def lines(self):
        for e in self.entries:
            yield e.line()

    def text(self) -> str:
        return "".join(line + "\n" for line in self.lines())

    def digest(self) -> str:
        h = hashlib.sha256()
        for line in self.lines():
            h.update(line.encode())
            h.update(b"\n")
        return h.hexdigest()

    def export(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for line in self.lines():
                fh.write(line)
                fh.write("\n")


class _Leaf:
    __slots__ = ("model", "path", "order", "state", "t_last", "t_next", "version")

    def __init__(self, model, path, order):
        self.model = model
        self.path = path
        self.order = order
        self.state = model.initial_state
        self.t_last = 0.0
        self.t_next = INFINITY
        self.version = 0


_ROOT_OUT = -1

Listener = Callable[[float, AtomicModel, str, Any], None]


class Simulator:
    """Run state of one simulation: clock, atomic states and schedule.

    Not thread-safe; create one per run.
    """

    def __init__(self, root: CoupledModel | AtomicModel, t0: float = 0.0, *,
                 trace: bool = True, max_steps: int = DEFAULT_MAX_STEPS,
                 debug: bool = False):
        if isinstance(root, AtomicModel):
            wrapper = CoupledModel("root")
            wrapper.add(root)
            root = wrapper
        root.validate()
        self.root = root
        self.clock = t0
        self.trace = Trace(trace)
        self.max_steps = max_steps
        self.debug = debug
        self.steps = 0
        self.outputs: list[tuple[float, str, Any]] = []
        self._listeners: list[Listener] = []
        self._leaves: list[_Leaf] = []
        self._flatten(root, "", ())
        self._leaves.sort(key=lambda lf: lf.order)
        index = {id(lf.model): i for i, lf in enumerate(self._leaves)}
        if len(index) != len(self._leaves):
            raise CouplingError("the same model instance appears twice in the hierarchy")
        for i, lf in enumerate(self._leaves):
            lf.order = i
        self._links: dict[tuple[int, str], list[tuple[int, str, tuple]]] = {}
        self._input_links: dict[str, list[tuple[int, str, tuple]]] = {}
        self._resolve_links(root, index)

        self._heap: list[tuple[float, int, int]] = []
        self._round: list[int] = []
        self._pending: dict[int, list[Message]] = {}
        self._injections: list[tuple[float, int, str, Any]] = []
        self._inject_seq = 0
        self._fired_now: Counter = Counter()
        for lf in self._leaves:
            lf.t_last = t0
            self._schedule(lf, t0 + self._ta(lf))

    # construction

    def _flatten(self, cm: CoupledModel, prefix: str, key: tuple):
        for rank, name in enumerate(cm.select_priority()):
            comp = cm.components[name]
            path = f"{prefix}{name}"
            if isinstance(comp, CoupledModel):
                self._flatten(comp, path + "/", key + (rank,))
            else:
                self._leaves.append(_Leaf(comp, path, key + (rank,)))

    def _resolve_links(self, root: CoupledModel, index):
        # parent map: coupled model id -> (parent coupled model, name in parent)
        parents: dict[int, tuple[CoupledModel, str]] = {}
        owners: dict[int, CoupledModel] = {}

        def walk(cm):
            for name, comp in cm.components.items():
                if isinstance(comp, CoupledModel):
                    parents[id(comp)] = (cm, name)
                    walk(comp)
                else:
                    owners[id(comp)] = cm
        walk(root)

        def descend(cm, name, port, fields, out):
            comp = cm.components[name]
            if isinstance(comp, CoupledModel):
                for dst, dport, c in _fan(comp, None, port):
                    if dst is None:
                        continue
                    descend(comp, dst, dport, fields + ((c.field,) if c.field else ()), out)
            else:
                out.append((index[id(comp)], port, fields))

        def ascend(cm, src, port, fields, out):
            for dst, dport, c in _fan(cm, src, port):
                f = fields + ((c.field,) if c.field else ())
                if dst is None:
                    if cm is root:
                        out.append((_ROOT_OUT, dport, f))
                    else:
                        parent, pname = parents[id(cm)]
                        ascend(parent, pname, dport, f, out)
                else:
                    descend(cm, dst, dport, f, out)

        for i, lf in enumerate(self._leaves):
            owner = owners[id(lf.model)]
            for port in lf.model.out_ports:
                out: list = []
                ascend(owner, lf.model.name, port, (), out)
                out.sort(key=lambda d: (d[0] == _ROOT_OUT, d[0], d[1]))
                self._links[(i, port)] = out
        for port in root.in_ports:
            out = []
            for dst, dport, c in _fan(root, None, port):
                if dst is not None:
                    descend(root, dst, dport, (c.field,) if c.field else (), out)
            out.sort(key=lambda d: (d[0], d[1]))
            self._input_links[port] = out

    # public API

    @property
    def leaves(self) -> list[tuple[str, AtomicModel]]:
        return [(lf.path, lf.model) for lf in self._leaves]

    def state_of(self, path: str):
        for lf in self._leaves:
            if lf.path == path:
                return lf.state
        raise KeyError(path)

    def next_time(self, path: str) -> float:
        for lf in self._leaves:
            if lf.path == path:
                return lf.t_next
        raise KeyError(path)

    def destinations(self, path: str, port: str) -> list[tuple[str, str]]:
        """Flattened fan-out of one atomic output port, as (path, port)."""
        for i, lf in enumerate(self._leaves):
            if lf.path == path:
                return [("" if d == _ROOT_OUT else self._leaves[d].path, p)
                        for d, p, _ in self._links[(i, port)]]
        raise KeyError(path)

    def add_listener(self, fn: Listener) -> None:
        """``fn(time, model, kind, new_state)`` after every transition."""
        self._listeners.append(fn)

    def inject(self, time: float, port: str, value: Any) -> None:
        """Schedule an input event on one of the root model's input ports."""
        if port not in self._input_links:
            raise CouplingError(f"root has no input port {port!r}")
        if time < self.clock:
            raise DevsError(f"cannot inject at {time}, clock is already {self.clock}")
        heapq.heappush(self._injections, (time, self._inject_seq, port, value))
        self._inject_seq += 1

    def peek_time(self) -> float:
        t = INFINITY
        if self._round or self._pending:
            return self.clock
        self._drop_stale()
        if self._heap:
            t = self._heap[0][0]
        if self._injections:
            t = min(t, self._injections[0][0])
        return t

    def step(self) -> tuple[float, bool]:
        t = self.peek_time()
        if t == INFINITY:
            return self.clock, True
        self.steps += 1
        if self.steps > self.max_steps:
            culprit = self._fired_now.most_common(1)
            name = self._leaves[culprit[0][0]].path if culprit else "?"
            raise NonTerminating(f"step limit {self.max_steps} exceeded at t={self.clock!r}; "
                                 f"most active component: {name}")
        if not self._round:
            if t > self.clock:
                self._fired_now.clear()
            self.clock = max(self.clock, t)
            self._open_round()
            if self._injections and self._injections[0][0] <= self.clock + COALESCE_EPS:
                # The environment goes first within the round.
                self._inject_now()
                self._close_round()
                return self.clock, self.peek_time() == INFINITY
        i = heapq.heappop(self._round)
        self._fire(self._leaves[i])
        self._close_round()
        return self.clock, self.peek_time() == INFINITY

    def run_until(self, t_end: float = INFINITY) -> Trace:
        if t_end < self.clock:
            raise DevsError(f"t_end {t_end} is before the clock {self.clock}")
        while True:
            t = self.peek_time()
            if t == INFINITY or t > t_end:
                break
            self.step()
        return self.trace

    # internals

    def _ta(self, lf: _Leaf) -> float:
        try:
            ta = lf.model.time_advance(lf.state)
        except Exception as exc:
            raise ModelError(lf.path, self.clock, exc) from exc
        if not ta >= 0:
            raise ModelError(lf.path, self.clock, ValueError(f"negative time advance {ta}"))
        return ta

    def _schedule(self, lf: _Leaf, t_next: float) -> None:
        lf.t_next = t_next
        lf.version += 1
        if t_next < INFINITY:
            heapq.heappush(self._heap, (t_next, lf.order, lf.version))

    def _drop_stale(self):
        heap = self._heap
        while heap and heap[0][2] != self._leaves[heap[0][1]].version:
            heapq.heappop(heap)

    def _open_round(self):
        heap = self._heap
        limit = self.clock + COALESCE_EPS
        while heap and heap[0][0] <= limit:
            t, i, version = heapq.heappop(heap)
            if version == self._leaves[i].version:
                self._round.append(i)
        heapq.heapify(self._round)

    def _close_round(self):
        if self._round:
            return
        self._drop_stale()
        # Anything left in the heap at this instant joins the next round, but
        # only after everything already sent has been delivered.
        if self._pending:
            self._flush()

    def _inject_now(self):
        limit = self.clock + COALESCE_EPS
        while self._injections and self._injections[0][0] <= limit:
            _, _, port, value = heapq.heappop(self._injections)
            self.trace.add(self.clock, self.root.name, "external", port, value)
            self._send(self._input_links[port], Message(port, value), self.root.name)

    def _fire(self, lf: _Leaf):
        t = self.clock
        self._fired_now[lf.order] += 1
        try:
            out = lf.model.output(lf.state) or []
        except Exception as exc:
            raise ModelError(lf.path, t, exc) from exc
        for msg in out:
            if msg.port not in lf.model.out_ports:
                raise ModelError(lf.path, t, KeyError(f"undeclared output port {msg.port!r}"))
            dests = self._links[(lf.order, msg.port)]
            self.trace.add(t, lf.path, "output" if dests else "dropped", msg.port, msg.value)
            self._send(dests, msg, lf.path)
        try:
            lf.state = lf.model.delta_int(lf.state)
        except Exception as exc:
            raise ModelError(lf.path, t, exc) from exc
        lf.t_last = t
        self.trace.add(t, lf.path, "internal", "state", lf.state)
        self._drain_notes(lf)
        self._schedule(lf, t + self._ta(lf))
        for fn in self._listeners:
            fn(t, lf.model, "internal", lf.state)

    def _send(self, dests, msg: Message, src_path: str):
        for d, port, fields in dests:
            value = msg.value
            for f in fields:
                value = getattr(value, f)
            if d == _ROOT_OUT:
                self.outputs.append((self.clock, port, value))
                continue
            leaf = self._leaves[d]
            accepted = leaf.model.in_ports.get(port)
            if accepted is not None and not isinstance(value, accepted):
                raise PortTypeError(
                    f"{src_path or 'input'} -> {leaf.path}.{port}: "
                    f"{type(value).__name__} value {value!r} not accepted")
            self._pending.setdefault(d, []).append(Message(port, value))

    def _flush(self):
        pending, self._pending = self._pending, {}
        t = self.clock
        for d in sorted(pending):
            lf = self._leaves[d]
            bag = pending[d]
            elapsed = t - lf.t_last
            if self.debug:
                ta = lf.t_next - lf.t_last
                assert -COALESCE_EPS <= elapsed <= ta + COALESCE_EPS, (lf.path, elapsed, ta)
            for msg in bag:
                self.trace.add(t, lf.path, "external", msg.port, msg.value)
            old = lf.state
            try:
                new = lf.model.delta_ext(old, max(elapsed, 0.0), bag)
            except Exception as exc:
                raise ModelError(lf.path, t, exc) from exc
            self._drain_notes(lf)
            if new is old:
                continue
            lf.state = new
            lf.t_last = t
            self._schedule(lf, t + self._ta(lf))
            for fn in self._listeners:
                fn(t, lf.model, "external", new)

    def _drain_notes(self, lf: _Leaf):
        notes = lf.model._notes
        if notes:
            for text in notes:
                self.trace.add(self.clock, lf.path, "warning", "note", text)
                log.debug("%s at t=%r: %s", lf.path, self.clock, text)
            notes.clear()


def _fan(cm: CoupledModel, src, port):
    if cm._routes is None:
        cm.route(None, "")
    return [(c.dst, c.dst_port, c) for c in cm._routes.get((src, port), [])]


def initialize(root, t0: float = 0.0, **kwargs) -> Simulator:
    return Simulator(root, t0, **kwargs)


def step(sim: Simulator) -> tuple[float, bool]:
    return sim.step()


def run_until(sim: Simulator, t_end: float = INFINITY) -> Trace:
    return sim.run_until(t_end)
