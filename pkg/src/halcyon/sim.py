"""Scenario loading and the deterministic tick-driven simulator.

Each tick runs three phases in a fixed order: scheduled sends go out through
the sender path, the grid makes earlier frames visible, then every principal's
pipeline runs in declaration order. Nothing is random and no wall clock is
consulted, so a scenario text fully determines its trace.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

from .context import (
    Availability,
    Device,
    Interval,
    Modality,
    ScenarioTimeline,
    State,
    TimelineError,
    UnknownPrincipal,
)
from .envelope import Envelope, Urgency, ValidityWindow
from .grid import Grid
from .receiver import DropReason, ModalityTable, Pipeline
from .rules import ORIGINAL_SENDER, ParseError, ReplyTo, Rule, RuleSet, parse_rules
from .sender import MessageIds, SendRequest, dispatch

DEFAULT_TICK_LIMIT = 1000
DEFAULT_RECHECK_DELAY = 60
SUMMARY_MARKER = "-- summary --"

_ID = r"[A-Za-z0-9_][A-Za-z0-9_.\-]*"
_ID_RE = re.compile(_ID)
_FIELD_RE = re.compile(r'(?P<key>[a-z][a-z\-]*)=(?P<val>"(?:[^"\\]|\\.)*"|\[[^\]]*\]|\S+)|(?P<bare>\S+)')


class ScenarioError(ValueError):
    def __init__(self, line: int, message: str) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message


@dataclass(frozen=True)
class ScheduledSend:
    tick: int
    request: SendRequest
    line: int = 0


@dataclass(frozen=True)
class ScopedRule:
    rule: Rule
    owner: Optional[str]
    line: int


@dataclass
class Scenario:
    name: str = "unnamed"
    tick_duration: Optional[str] = None
    tick_limit: int = DEFAULT_TICK_LIMIT
    recheck_delay: int = DEFAULT_RECHECK_DELAY
    queue_limit: Optional[int] = None
    interrupt_urgency: Urgency = Urgency.HIGH
    timeline: ScenarioTimeline = field(default_factory=ScenarioTimeline)
    rules: list[ScopedRule] = field(default_factory=list)
    fallbacks: dict[str, str] = field(default_factory=dict)
    sends: list[ScheduledSend] = field(default_factory=list)
    modality_table: ModalityTable = field(default_factory=ModalityTable)

    @property
    def principals(self) -> list[str]:
        return self.timeline.principals

    def ruleset_for(self, principal: str) -> RuleSet:
        rules = tuple(r.rule for r in self.rules if r.owner in (None, principal))
        return RuleSet(rules, self.fallbacks.get(principal))


# --- scenario parsing --------------------------------------------------------


def _strip_comment(line: str) -> str:
    in_string = escaped = False
    for i, ch in enumerate(line):
        if escaped:
            escaped = False
        elif ch == "\\" and in_string:
            escaped = True
        elif ch == '"':
            in_string = not in_string
        elif ch == "#" and not in_string:
            return line[:i]
    return line


def _unquote(value: str) -> str:
    if len(value) < 2 or not (value.startswith('"') and value.endswith('"')):
        raise ValueError(f"expected a quoted string, got {value!r}")
    return re.sub(r"\\(.)", lambda m: "\n" if m[1] == "n" else m[1], value[1:-1])


def _fields(text: str) -> tuple[dict[str, str], list[str]]:
    keyed: dict[str, str] = {}
    bare: list[str] = []
    for m in _FIELD_RE.finditer(text):
        if m["bare"] is not None:
            bare.append(m["bare"])
        else:
            if m["key"] in keyed:
                raise ValueError(f"field {m['key']!r} given twice")
            keyed[m["key"]] = m["val"]
    return keyed, bare


def _int(text: str, what: str, minimum: int = 0) -> int:
    try:
        value = int(text)
    except ValueError:
        raise ValueError(f"{what} must be an integer, got {text!r}") from None
    if value < minimum:
        raise ValueError(f"{what} must be >= {minimum}, got {value}")
    return value


def _ident(text: str, what: str = "id") -> str:
    if not _ID_RE.fullmatch(text):
        raise ValueError(f"malformed {what} {text!r}")
    return text


def _interval(text: str) -> Interval:
    lo, sep, hi = text.partition("..")
    if not sep:
        raise ValueError(f"malformed interval {text!r}, expected <lo>..<hi> or <lo>..")
    lo_v = _int(lo, "interval start")
    if hi in ("", "inf"):
        return Interval(lo_v)
    hi_v = _int(hi, "interval end")
    if hi_v < lo_v:
        raise ValueError(f"inverted interval {text!r}")
    return Interval(lo_v, hi_v)


def _window(text: str) -> ValidityWindow:
    iv = _interval(text)
    return ValidityWindow(iv.lo, iv.hi)


_AVAIL_RE = re.compile(r"(free|busy)(?:\((?P<activity>[^()]*)\))?$")


def _availability(text: str) -> Availability:
    m = _AVAIL_RE.match(text)
    if m is None:
        raise ValueError(f"availability must be free or busy(<activity>), got {text!r}")
    activity = (m["activity"] or "").strip()
    if m[1] == "busy":
        if not activity:
            raise ValueError("busy needs an activity, e.g. busy(meeting)")
        return Availability(State.BUSY, activity)
    return Availability(State.FREE, activity or "idle")


def _modalities(text: str) -> list[Modality]:
    return [Modality.parse(part) for part in text.split(",") if part]


def _id_list(text: str) -> list[str]:
    if not (text.startswith("[") and text.endswith("]")):
        raise ValueError(f"expected [id,...], got {text!r}")
    return [_ident(p.strip(), "principal id") for p in text[1:-1].split(",") if p.strip()]


class _Loader:
    def __init__(self, base_dir: Optional[Path]) -> None:
        self.base_dir = base_dir
        self.s = Scenario()

    def require(self, pid: str) -> str:
        if pid not in self.s.timeline.devices:
            raise ValueError(f"undeclared principal {pid!r}")
        return pid

    def load(self, text: str) -> Scenario:
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = _strip_comment(raw).strip()
            if not line:
                continue
            try:
                self.directive(line, lineno)
            except ScenarioError:
                raise
            except (ValueError, KeyError, TimelineError) as exc:
                msg = f"undeclared principal {exc.args[0]!r}" if isinstance(exc, UnknownPrincipal) else str(exc)
                raise ScenarioError(lineno, msg) from None
        self.finish()
        return self.s

    def directive(self, line: str, lineno: int) -> None:
        word, _, rest = line.partition(" ")
        if "\t" in word:
            word, _, tail = word.partition("\t")
            rest = tail + " " + rest
        rest = rest.strip()
        s = self.s
        if word == "scenario":
            s.name = rest or s.name
        elif word == "tick-duration":
            s.tick_duration = rest
        elif word == "tick-limit":
            s.tick_limit = _int(rest, "tick-limit")
        elif word == "recheck-delay":
            s.recheck_delay = _int(rest, "recheck-delay", 1)
        elif word == "queue-limit":
            s.queue_limit = _int(rest, "queue-limit", 1)
        elif word == "interrupt-urgency":
            s.interrupt_urgency = Urgency.parse(rest)
        elif word == "principal":
            s.timeline.add_principal(_ident(rest, "principal id"))
        elif word == "device":
            self.device(rest)
        elif word == "availability":
            parts = rest.split(None, 2)
            if len(parts) != 3:
                raise ValueError("usage: availability <owner> <lo>..<hi|> <free|busy(<activity>)>")
            owner, span, state = parts
            s.timeline.add_availability(self.require(owner), _interval(span), _availability(state))
        elif word == "rule":
            self.inline_rule(line, lineno)
        elif word == "rules":
            self.rules_file(rest, lineno)
        elif word == "fallback":
            parts = rest.split()
            if len(parts) != 2:
                raise ValueError("usage: fallback <owner> <delegate>")
            owner, delegate = parts
            if owner == delegate:
                raise ValueError(f"{owner!r} cannot be its own fallback delegate")
            s.fallbacks[self.require(owner)] = self.require(delegate)
        elif word == "modality-table":
            self.modality_row(rest)
        elif word == "at":
            self.send(rest, lineno)
        else:
            raise ValueError(f"unknown directive {word!r}")

    def device(self, rest: str) -> None:
        keyed, bare = _fields(rest)
        if len(bare) != 2:
            raise ValueError("usage: device <owner> <id> modality=<m>[,<m>] priority=<n> [present=<lo>..<hi>]")
        unknown = set(keyed) - {"modality", "priority", "present"}
        if unknown:
            raise ValueError(f"unknown device field {sorted(unknown)[0]!r}")
        if "modality" not in keyed or "priority" not in keyed:
            raise ValueError("device needs modality= and priority=")
        owner = self.require(bare[0])
        present = _interval(keyed["present"]) if "present" in keyed else Interval(0)
        self.s.timeline.add_device(
            Device(
                device_id=_ident(bare[1], "device id"),
                owner=owner,
                modalities=frozenset(_modalities(keyed["modality"])),
                priority=_int(keyed["priority"], "priority", 1),
                present=present,
            )
        )

    def modality_row(self, rest: str) -> None:
        keyed, bare = _fields(rest)
        if len(bare) != 2 or set(keyed) - {"urgency"}:
            raise ValueError("usage: modality-table <activity|*> <m>[,<m>...] [urgency=<level>]")
        activity, row = bare
        urgency = Urgency.parse(keyed["urgency"]) if "urgency" in keyed else None
        self.s.modality_table.set_row(activity, _modalities(row), urgency)

    def _add_rules(self, rs: RuleSet, owner: Optional[str], lineno: int) -> None:
        names = {r.rule.name for r in self.s.rules if r.owner in (None, owner) or owner is None}
        for rule in rs.rules:
            if rule.name in names:
                raise ValueError(f"rule name {rule.name!r} declared twice")
            names.add(rule.name)
            self.s.rules.append(ScopedRule(rule, owner, lineno))

    def inline_rule(self, line: str, lineno: int) -> None:
        try:
            rs = parse_rules(line)
        except ParseError as exc:
            raise ScenarioError(lineno, f"column {exc.column}: expected {exc.expected}, found {exc.found}") from None
        self._add_rules(rs, None, lineno)

    def rules_file(self, rest: str, lineno: int) -> None:
        keyed, bare = _fields(rest)
        if len(bare) != 1 or set(keyed) - {"owner"}:
            raise ValueError("usage: rules <path> [owner=<id>]")
        owner = self.require(keyed["owner"]) if "owner" in keyed else None
        path = Path(bare[0])
        if not path.is_absolute() and self.base_dir is not None:
            path = self.base_dir / path
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ValueError(f"cannot read rules file {bare[0]!r}: {exc.strerror}") from None
        try:
            rs = parse_rules(text)
        except ParseError as exc:
            raise ScenarioError(lineno, f"{bare[0]}: {exc}") from None
        self._add_rules(rs, owner, lineno)

    def send(self, rest: str, lineno: int) -> None:
        tick_text, _, body = rest.partition(" ")
        tick = _int(tick_text, "send tick")
        keyed, bare = _fields(body.strip())
        if not bare or bare[0] != "send":
            raise ValueError("usage: at <tick> send from=<id> to=[...] urgency=<level> valid=<lo>..<hi|inf> [perishable] payload=\"<text>\"")
        flags = bare[1:]
        if any(f != "perishable" for f in flags):
            raise ValueError(f"unexpected token {next(f for f in flags if f != 'perishable')!r}")
        missing = [k for k in ("from", "to", "urgency", "payload") if k not in keyed]
        if missing:
            raise ValueError(f"send is missing {missing[0]}=")
        unknown = set(keyed) - {"from", "to", "urgency", "valid", "payload"}
        if unknown:
            raise ValueError(f"unknown send field {sorted(unknown)[0]!r}")
        dests = _id_list(keyed["to"])
        if not dests:
            raise ValueError("send needs at least one destination")
        for d in dests:
            self.require(d)
        window = _window(keyed["valid"]) if "valid" in keyed else ValidityWindow(tick)
        if not window.contains(tick):
            raise ValueError(f"send at tick {tick} lies outside its window {window.render()}")
        payload = _unquote(keyed["payload"])
        if not payload:
            raise ValueError("payload must be non-empty")
        req = SendRequest(
            payload=payload,
            sender=self.require(keyed["from"]),
            destinations=frozenset(dests),
            urgency=Urgency.parse(keyed["urgency"]),
            validity=window,
            perishable=bool(flags),
        )
        self.s.sends.append(ScheduledSend(tick, req, lineno))

    def finish(self) -> None:
        s = self.s
        declared = s.timeline.devices
        for scoped in s.rules:
            for act in scoped.rule.actions:
                target = act.target
                if isinstance(act, ReplyTo) and target == ORIGINAL_SENDER:
                    continue
                if target not in declared:
                    raise ScenarioError(
                        scoped.line, f"rule {scoped.rule.name!r} targets undeclared principal {target!r}"
                    )
        for send in s.sends:
            if send.tick > s.tick_limit:
                raise ScenarioError(send.line, f"send at tick {send.tick} is beyond tick-limit {s.tick_limit}")
        s.sends.sort(key=lambda snd: snd.tick)


def load_scenario(text: str, base_dir: Union[str, Path, None] = None) -> Scenario:
    return _Loader(Path(base_dir) if base_dir is not None else None).load(text)


def load_scenario_file(path: Union[str, Path]) -> Scenario:
    path = Path(path)
    return load_scenario(path.read_text(encoding="utf-8"), path.parent)


# --- simulation --------------------------------------------------------------


@dataclass
class Summary:
    scenario: str
    ticks: int
    published: int
    addressed: int
    delivered: int
    dropped: dict[DropReason, int]
    queued: int
    in_flight: int
    forwards: int
    replies: int
    max_queue_depth: int
    mean_latency: Optional[float]

    @property
    def dropped_total(self) -> int:
        return sum(n for r, n in self.dropped.items() if r is not DropReason.UNAUTHORIZED)

    @property
    def conserved(self) -> bool:
        return self.addressed == self.delivered + self.dropped_total + self.queued + self.in_flight

    def lines(self) -> list[str]:
        latency = "n/a" if self.mean_latency is None else f"{self.mean_latency:.2f}"
        return [
            SUMMARY_MARKER,
            f"scenario={self.scenario}",
            f"ticks={self.ticks}",
            f"published={self.published}",
            f"addressed={self.addressed}",
            f"delivered={self.delivered}",
            f"dropped={self.dropped_total}",
            f"dropped.expired={self.dropped[DropReason.EXPIRED]}",
            f"dropped.undeliverable={self.dropped[DropReason.UNDELIVERABLE]}",
            f"filtered.unauthorized={self.dropped[DropReason.UNAUTHORIZED]}",
            f"queued={self.queued}",
            f"in_flight={self.in_flight}",
            f"forwards={self.forwards}",
            f"replies={self.replies}",
            f"max_queue_depth={self.max_queue_depth}",
            f"mean_latency={latency}",
            f"conserved={str(self.conserved).lower()}",
        ]


@dataclass
class Trace:
    lines: list[str]
    summary: Summary

    def text(self) -> str:
        return "".join(line + "\n" for line in self.lines + self.summary.lines())

    def summary_text(self) -> str:
        return "".join(line + "\n" for line in self.summary.lines())


@dataclass
class StepResult:
    tick: int
    events: list[Any]
    lines: list[str]
    quiescent: bool


class Simulation:
    """Mutable run state; :meth:`step` advances exactly one tick."""

    def __init__(self, scenario: Scenario) -> None:
        self.scenario = scenario
        self.lines: list[str] = []
        self.grid = Grid(trace=self.lines.append)
        self.ids = MessageIds()
        self.now = 0
        self.last_tick = -1
        self.done = False
        self.quiescent = False
        self.published: list[Envelope] = []
        self._sends = list(scenario.sends)
        self._next_send = 0
        self.pipelines: list[Pipeline] = []
        for pid in scenario.principals:
            self.grid.register(pid)
            self.pipelines.append(
                Pipeline(
                    pid,
                    self.grid,
                    scenario.timeline,
                    self.ids,
                    rules=scenario.ruleset_for(pid),
                    table=scenario.modality_table,
                    recheck_delay=scenario.recheck_delay,
                    interrupt=scenario.interrupt_urgency,
                    queue_limit=scenario.queue_limit,
                    trace=self.lines.append,
                )
            )
        if not self._sends:
            self._check_quiescent()

    def _check_quiescent(self) -> None:
        self.quiescent = (
            self._next_send >= len(self._sends)
            and not self.grid.has_pending()
            and all(len(p.queue) == 0 for p in self.pipelines)
        )
        if self.quiescent or self.now > self.scenario.tick_limit:
            self.done = True

    def step(self) -> StepResult:
        if self.done:
            return StepResult(self.now, [], [], self.quiescent)
        now = self.now
        start = len(self.lines)
        events: list[Any] = []
        while self._next_send < len(self._sends) and self._sends[self._next_send].tick == now:
            req = self._sends[self._next_send].request
            self._next_send += 1
            env = dispatch(req, self.ids, self.grid, now, self.lines.append)
            self.published.append(env)
            events.append(env)
        for pipeline in self.pipelines:
            events.extend(pipeline.process_tick(now))
        self.last_tick = now
        self.now = now + 1
        self._check_quiescent()
        return StepResult(now, events, self.lines[start:], self.quiescent)

    def envelopes(self) -> list[Envelope]:
        out = list(self.published)
        for p in self.pipelines:
            out.extend(p.published)
        return sorted(out, key=lambda e: e.msg_id)

    def deliveries(self) -> list:
        return [rec for p in self.pipelines for rec in p.deliveries]

    def summary(self) -> Summary:
        envs = self.envelopes()
        records = self.deliveries()
        dropped = {r: 0 for r in DropReason}
        for p in self.pipelines:
            dropped[DropReason.UNAUTHORIZED] += p.filtered
            for o in p.outcomes:
                if o.kind == "dropped" and o.reason is not None:
                    dropped[o.reason] += 1
        in_flight = 0
        for p in self.pipelines:
            for frame in self.grid.backlog(p.principal):
                if p.principal in frame.envelope.authority:
                    in_flight += 1
        latencies = [r.latency for r in records]
        return Summary(
            scenario=self.scenario.name,
            ticks=self.last_tick + 1,
            published=len(envs),
            addressed=sum(len(e.authority) for e in envs),
            delivered=len(records),
            dropped=dropped,
            queued=sum(len(p.queue) for p in self.pipelines),
            in_flight=in_flight,
            forwards=sum(p.forwards for p in self.pipelines),
            replies=sum(p.replies for p in self.pipelines),
            max_queue_depth=max((p.queue.max_depth for p in self.pipelines), default=0),
            mean_latency=sum(latencies) / len(latencies) if latencies else None,
        )

    def trace(self) -> Trace:
        return Trace(list(self.lines), self.summary())


def run(s: Scenario) -> Trace:
    sim = Simulation(s)
    while not sim.done:
        sim.step()
    return sim.trace()
