"""Principal environments: availability over time and the devices around them."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional


class Modality(Enum):
    AUDIO = "audio"
    VISUAL = "visual"
    HAPTIC = "haptic"
    OLFACTORY = "olfactory"

    @classmethod
    def parse(cls, text: str) -> "Modality":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"unknown modality {text!r}") from None


class State(Enum):
    FREE = "free"
    BUSY = "busy"


@dataclass(frozen=True)
class Availability:
    state: State = State.FREE
    activity: str = "idle"

    def __post_init__(self) -> None:
        if self.state is State.BUSY and not self.activity:
            raise ValueError("busy availability needs an activity label")

    @property
    def busy(self) -> bool:
        return self.state is State.BUSY

    def render(self) -> str:
        if self.state is State.BUSY:
            return f"busy({self.activity})"
        return "free" if self.activity == "idle" else f"free({self.activity})"


FREE = Availability()


@dataclass(frozen=True)
class Interval:
    """Closed tick range; ``hi=None`` is open-ended."""

    lo: int
    hi: Optional[int] = None

    def contains(self, tick: int) -> bool:
        return self.lo <= tick and (self.hi is None or tick <= self.hi)

    def overlaps(self, other: "Interval") -> bool:
        a_hi = float("inf") if self.hi is None else self.hi
        b_hi = float("inf") if other.hi is None else other.hi
        return self.lo <= b_hi and other.lo <= a_hi


@dataclass(frozen=True)
class Device:
    device_id: str
    owner: str
    modalities: frozenset[Modality]
    priority: int
    present: Interval = Interval(0)

    def supports(self, m: Modality) -> bool:
        return m in self.modalities


@dataclass(frozen=True)
class EnvironmentSnapshot:
    principal: str
    at: int
    availability: Availability
    present_devices: tuple[Device, ...] = ()


class UnknownPrincipal(KeyError):
    pass


class TimelineError(ValueError):
    pass


@dataclass
class ScenarioTimeline:
    """Declared principals, their devices, and availability intervals.

    Ticks outside every declared interval default to free/idle, except that
    the last declared interval of a principal extends to infinity.
    """

    principals: list[str] = field(default_factory=list)
    devices: dict[str, list[Device]] = field(default_factory=dict)
    availability: dict[str, list[tuple[Interval, Availability]]] = field(default_factory=dict)

    def add_principal(self, pid: str) -> None:
        if not pid:
            raise TimelineError("principal id must be non-empty")
        if pid in self.devices:
            raise TimelineError(f"principal {pid!r} declared twice")
        self.principals.append(pid)
        self.devices[pid] = []
        self.availability[pid] = []

    def _require(self, pid: str) -> None:
        if pid not in self.devices:
            raise UnknownPrincipal(pid)

    def add_device(self, device: Device) -> None:
        self._require(device.owner)
        if not device.modalities:
            raise TimelineError(f"device {device.device_id!r} has no modality")
        if device.priority < 1:
            raise TimelineError(f"device {device.device_id!r}: priority must be positive")
        for owned in self.devices.values():
            for other in owned:
                if other.device_id == device.device_id:
                    raise TimelineError(f"device id {device.device_id!r} declared twice")
        for other in self.devices[device.owner]:
            shared = other.modalities & device.modalities
            if other.priority == device.priority and shared:
                m = sorted(x.value for x in shared)[0]
                raise TimelineError(
                    f"devices {other.device_id!r} and {device.device_id!r} share "
                    f"priority {device.priority} for {m}"
                )
        self.devices[device.owner].append(device)

    def add_availability(self, pid: str, interval: Interval, avail: Availability) -> None:
        self._require(pid)
        if interval.hi is not None and interval.hi < interval.lo:
            raise TimelineError(f"inverted interval {interval.lo}..{interval.hi}")
        for existing, _ in self.availability[pid]:
            if existing.overlaps(interval):
                raise TimelineError(
                    f"availability for {pid!r} overlaps interval starting at {existing.lo}"
                )
        self.availability[pid].append((interval, avail))
        self.availability[pid].sort(key=lambda pair: pair[0].lo)

    def availability_at(self, pid: str, at: int) -> Availability:
        self._require(pid)
        intervals = self.availability[pid]
        for interval, avail in intervals:
            if interval.contains(at):
                return avail
        if intervals and at > intervals[-1][0].lo:
            return intervals[-1][1]
        return FREE


def snapshot(principal: str, at: int, timeline: ScenarioTimeline) -> EnvironmentSnapshot:
    avail = timeline.availability_at(principal, at)
    present = tuple(d for d in timeline.devices[principal] if d.present.contains(at))
    return EnvironmentSnapshot(principal, at, avail, present)


def available_devices(snap: EnvironmentSnapshot, m: Modality) -> list[Device]:
    return sorted(
        (d for d in snap.present_devices if d.supports(m)),
        key=lambda d: (d.priority, d.device_id),
    )
