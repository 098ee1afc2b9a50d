"""Receiver-side mediation pipeline, levels L1 through L7.

Each principal runs one :class:`Pipeline`. A tick processes newly polled
frames (admission and gating, with the fast path straight through to
integration and delivery), then due queue items (recheck and final
selection), then delegation for items deferred as busy during this tick.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence, Union

from .context import (
    Device,
    EnvironmentSnapshot,
    Modality,
    ScenarioTimeline,
    available_devices,
    snapshot,
)
from .deferral import DeferralQueue, DeferReason, DeferredItem, QueueFull
from .envelope import Envelope, Urgency, is_live
from .grid import Channel, Grid, GridFrame
from .rules import Action, Forward, Reply, RuleSet, forward_request, match
from .sender import MessageIds, SendRequest, dispatch


class DropReason(Enum):
    UNAUTHORIZED = "Unauthorized"
    EXPIRED = "Expired"
    UNDELIVERABLE = "Undeliverable"


@dataclass(frozen=True)
class Admitted:
    pass


@dataclass(frozen=True)
class DeliverNow:
    modality: Modality

    def render(self) -> str:
        return f"DeliverNow:{self.modality.value}"


@dataclass(frozen=True)
class Defer:
    reason: DeferReason

    def render(self) -> str:
        return f"Defer:{self.reason.value}"


@dataclass(frozen=True)
class Drop:
    reason: DropReason

    def render(self) -> str:
        return f"Drop:{self.reason.value}"


@dataclass(frozen=True)
class Forwarded:
    targets: frozenset[str]

    def render(self) -> str:
        return "Forward:" + ",".join(sorted(self.targets))


@dataclass(frozen=True)
class Requeue:
    def render(self) -> str:
        return "Requeue"


@dataclass(frozen=True)
class Hold:
    def render(self) -> str:
        return "Hold"


RouteDecision = Union[DeliverNow, Defer, Drop, Forwarded]


@dataclass(frozen=True)
class Presentation:
    msg_id: int
    payload: str
    modality: Modality
    device: Device
    rendered_at: int


@dataclass(frozen=True)
class DeliveryRecord:
    presentation: Presentation
    recipient: str
    delivered_at: int
    path: tuple[str, ...]
    envelope: Envelope
    latency: int = 0


class NoDevice(LookupError):
    pass


FAST_PATH = ("L1", "L2", "L6", "L7")

DEFAULT_MODALITY_ROWS: dict[str, tuple[Modality, ...]] = {
    "driving": (Modality.AUDIO, Modality.HAPTIC, Modality.VISUAL),
    "meeting": (Modality.VISUAL, Modality.HAPTIC, Modality.AUDIO),
}
DEFAULT_ROW = (Modality.VISUAL, Modality.AUDIO, Modality.HAPTIC, Modality.OLFACTORY)


@dataclass
class ModalityTable:
    """Preferred modalities keyed by (urgency, activity).

    Lookup tries the exact (urgency, activity) row, then the activity row for
    any urgency, then the ``*`` row for the urgency, then the default row.
    """

    rows: dict[tuple[Optional[Urgency], str], tuple[Modality, ...]] = field(
        default_factory=lambda: {(None, k): v for k, v in DEFAULT_MODALITY_ROWS.items()}
    )
    default: tuple[Modality, ...] = DEFAULT_ROW

    def set_row(self, activity: str, row: Sequence[Modality], urgency: Optional[Urgency] = None) -> None:
        if activity == "*" and urgency is None:
            self.default = tuple(row)
        else:
            self.rows[(urgency, activity)] = tuple(row)

    def row(self, urgency: Urgency, activity: str) -> tuple[Modality, ...]:
        for key in ((urgency, activity), (None, activity), (urgency, "*")):
            if key in self.rows:
                return self.rows[key]
        return self.default


def select_modality(
    u: Urgency, snap: EnvironmentSnapshot, table: Optional[ModalityTable] = None
) -> Optional[Modality]:
    """First modality of the table row with a present device; None if undeliverable."""
    table = table or ModalityTable()
    for m in table.row(u, snap.availability.activity):
        if available_devices(snap, m):
            return m
    return None


def select_device(m: Modality, snap: EnvironmentSnapshot) -> Device:
    devices = available_devices(snap, m)
    if not devices:
        raise NoDevice(f"no device for {m.value} around {snap.principal} at {snap.at}")
    return devices[0]


def level1_admit(env: Envelope, recipient: str) -> Union[Admitted, Drop]:
    if recipient in env.authority:
        return Admitted()
    return Drop(DropReason.UNAUTHORIZED)


def _unreachable(env: Envelope) -> Union[Defer, Drop]:
    if env.perishable:
        return Drop(DropReason.UNDELIVERABLE)
    return Defer(DeferReason.BUSY)


def level2_gate(
    env: Envelope,
    snap: EnvironmentSnapshot,
    now: int,
    table: Optional[ModalityTable] = None,
    interrupt: Urgency = Urgency.HIGH,
) -> RouteDecision:
    if not is_live(env, now):
        return Drop(DropReason.EXPIRED)
    interrupts = env.perishable and env.urgency >= interrupt
    if snap.availability.busy and not interrupts:
        return Defer(DeferReason.BUSY)
    if env.urgency <= Urgency.NORMAL and not env.perishable:
        return Defer(DeferReason.NOT_IMPORTANT_NOW)
    m = select_modality(env.urgency, snap, table)
    if m is None:
        return _unreachable(env)
    return DeliverNow(m)


def level3_delegate(
    item: DeferredItem, rules: RuleSet, now: int, owner: Optional[str] = None
) -> list[Union[Action, Hold]]:
    """Delegation for a busy-deferred item; the item itself stays queued.

    Forwards addressed to *owner* itself are discarded: the item is already
    waiting in the owner's queue, and self-forwarding would loop.
    """
    if item.reason is not DeferReason.BUSY:
        return [Hold()]
    actions: list[Union[Action, Hold]] = [
        a for a in match(item.env, rules) if not (isinstance(a, Forward) and a.target == owner)
    ]
    if actions:
        return actions
    if rules.fallback is not None and rules.fallback != owner:
        return [Forward(forward_request(item.env, rules.fallback, item.env.urgency))]
    return [Hold()]


def level4_recheck(queue: DeferralQueue, now: int, delay: int) -> list[DeferredItem]:
    return queue.due(now, delay)


def level5_final_select(
    item: DeferredItem,
    snap: EnvironmentSnapshot,
    now: int,
    table: Optional[ModalityTable] = None,
) -> Union[DeliverNow, Drop, Requeue]:
    env = item.env
    if not is_live(env, now):
        return Drop(DropReason.EXPIRED)
    if not snap.availability.busy:
        m = select_modality(env.urgency, snap, table)
        if m is not None:
            return DeliverNow(m)
        return Drop(DropReason.UNDELIVERABLE) if env.perishable else Requeue()
    if env.perishable:
        return Drop(DropReason.EXPIRED)
    return Requeue()


def level6_integrate(
    env: Envelope, m: Modality, snap: EnvironmentSnapshot, now: int
) -> Presentation:
    device = select_device(m, snap)
    return Presentation(env.msg_id, env.payload, m, device, now)


def level7_deliver(
    p: Presentation, recipient: str, now: int, path: Sequence[str], env: Envelope, published_at: int = 0
) -> DeliveryRecord:
    return DeliveryRecord(p, recipient, now, tuple(path), env, now - published_at)


def queue_path(delegated: bool) -> tuple[str, ...]:
    return ("L1", "L2", "Q") + (("L3",) if delegated else ()) + ("L4", "L5", "L6", "L7")


Event = Union[RouteDecision, Admitted, Requeue, Hold, Action, DeliveryRecord]


@dataclass
class Outcome:
    """Final fate of one (message, addressee) pair."""

    msg_id: int
    recipient: str
    kind: str  # "delivered" or "dropped"
    reason: Optional[DropReason] = None


class Pipeline:
    """Mediation state machine for a single principal."""

    def __init__(
        self,
        principal: str,
        grid: Grid,
        timeline: ScenarioTimeline,
        ids: MessageIds,
        rules: Optional[RuleSet] = None,
        table: Optional[ModalityTable] = None,
        recheck_delay: int = 60,
        interrupt: Urgency = Urgency.HIGH,
        queue_limit: Optional[int] = None,
        trace: Optional[Callable[[str], None]] = None,
    ) -> None:
        self.principal = principal
        self.grid = grid
        self.timeline = timeline
        self.ids = ids
        self.rules = rules if rules is not None else RuleSet()
        self.table = table or ModalityTable()
        self.recheck_delay = recheck_delay
        self.interrupt = interrupt
        self._trace = trace
        self.queue = DeferralQueue(principal, limit=queue_limit, trace=trace)
        self.deliveries: list[DeliveryRecord] = []
        self.outcomes: list[Outcome] = []
        self.published: list[Envelope] = []
        self.filtered = 0
        self.forwards = 0
        self.replies = 0

    def _log(self, now: int, level: str, msg_id: int, decision: str) -> None:
        if self._trace is not None:
            self._trace(
                f"tick={now} {level} principal={self.principal} msg={msg_id} decision={decision}"
            )

    def _drop(self, now: int, level: str, env: Envelope, reason: DropReason, events: list) -> None:
        decision = Drop(reason)
        self._log(now, level, env.msg_id, decision.render())
        events.append(decision)
        self.outcomes.append(Outcome(env.msg_id, self.principal, "dropped", reason))

    def _deliver(
        self,
        now: int,
        env: Envelope,
        m: Modality,
        snap: EnvironmentSnapshot,
        path: tuple[str, ...],
        published_at: int,
        events: list,
    ) -> Optional[DeliveryRecord]:
        try:
            p = level6_integrate(env, m, snap, now)
        except NoDevice:
            return None
        self._log(now, "L6", env.msg_id, f"Deliver:{p.device.device_id}")
        record = level7_deliver(p, self.principal, now, path, env, published_at)
        self._log(now, "L7", env.msg_id, f"Deliver:{p.device.device_id}")
        self.deliveries.append(record)
        self.outcomes.append(Outcome(env.msg_id, self.principal, "delivered"))
        events.append(record)
        return record

    def _defer(
        self, now: int, env: Envelope, reason: DeferReason, published_at: int, events: list
    ) -> Optional[DeferredItem]:
        try:
            item = self.queue.enqueue(env, now, reason)
        except QueueFull:
            self._drop(now, "Q", env, DropReason.UNDELIVERABLE, events)
            return None
        item.published_at = published_at
        return item

    def process_tick(self, now: int) -> list[Event]:
        events: list[Event] = []
        snap = snapshot(self.principal, now, self.timeline)
        busy_deferred: list[DeferredItem] = []

        for frame in self.grid.poll(self.principal, Channel.RECEIVE, now):
            self._arrive(frame, snap, now, events, busy_deferred)
            self.grid.ack(self.principal, frame)

        for item in level4_recheck(self.queue, now, self.recheck_delay):
            self._recheck(item, snap, now, events)

        for item in busy_deferred:
            if item.msg_id in self.queue:
                self._delegate(item, now, events)
        return events

    def _arrive(
        self,
        frame: GridFrame,
        snap: EnvironmentSnapshot,
        now: int,
        events: list,
        busy_deferred: list[DeferredItem],
    ) -> None:
        env = frame.envelope
        admission = level1_admit(env, self.principal)
        if isinstance(admission, Drop):
            self._log(now, "L1", env.msg_id, admission.render())
            events.append(admission)
            self.filtered += 1
            return
        self._log(now, "L1", env.msg_id, "Admitted")
        events.append(admission)

        decision = level2_gate(env, snap, now, self.table, self.interrupt)
        if isinstance(decision, DeliverNow):
            self._log(now, "L2", env.msg_id, decision.render())
            events.append(decision)
            if self._deliver(now, env, decision.modality, snap, FAST_PATH, frame.published_at, events):
                return
            decision = _unreachable(env)
        if isinstance(decision, Drop):
            self._drop(now, "L2", env, decision.reason, events)
            return
        assert isinstance(decision, Defer)
        self._log(now, "L2", env.msg_id, decision.render())
        events.append(decision)
        item = self._defer(now, env, decision.reason, frame.published_at, events)
        if item is not None and decision.reason is DeferReason.BUSY:
            busy_deferred.append(item)

    def _recheck(
        self, item: DeferredItem, snap: EnvironmentSnapshot, now: int, events: list
    ) -> None:
        env = item.env
        self._log(now, "L4", env.msg_id, "Recheck")
        decision = level5_final_select(item, snap, now, self.table)
        if isinstance(decision, DeliverNow):
            self._log(now, "L5", env.msg_id, decision.render())
            events.append(decision)
            path = queue_path(item.delegated)
            published = item.published_at if item.published_at is not None else item.enqueued_at
            if self._deliver(now, env, decision.modality, snap, path, published, events):
                self.queue.remove(env.msg_id, now)
                return
            decision = Drop(DropReason.UNDELIVERABLE) if env.perishable else Requeue()
        if isinstance(decision, Drop):
            self._drop(now, "L5", env, decision.reason, events)
            self.queue.remove(env.msg_id, now)
            return
        self._log(now, "L5", env.msg_id, decision.render())
        events.append(decision)
        self.queue.requeue(item, now)

    def _delegate(self, item: DeferredItem, now: int, events: list) -> None:
        item.delegated = True
        for action in level3_delegate(item, self.rules, now, self.principal):
            if isinstance(action, Hold):
                self._log(now, "L3", item.msg_id, action.render())
                events.append(action)
                continue
            if isinstance(action, Forward):
                self._log(now, "L3", item.msg_id, Forwarded(action.request.destinations).render())
                request = action.request
                self.forwards += 1
            else:
                self._log(now, "L3", item.msg_id, f"Reply:{action.to}")
                request = reply_request(item.env, self.principal, action)
                self.replies += 1
            events.append(action)
            self.published.append(dispatch(request, self.ids, self.grid, now, self._trace))


def reply_request(original: Envelope, replier: str, reply: Reply) -> SendRequest:
    return SendRequest(
        payload=reply.payload,
        sender=replier,
        destinations=frozenset({reply.to}),
        urgency=original.urgency,
        validity=original.validity,
        perishable=False,
    )
