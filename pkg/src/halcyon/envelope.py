"""Grid message format: envelopes, urgency, validity windows.

Every symbol that travels on the grid is defined here, together with the
single-line textual form used in traces.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import IntEnum
from typing import Optional


class Urgency(IntEnum):
    LOW = 0
    NORMAL = 1
    HIGH = 2
    CRITICAL = 3

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, text: str) -> "Urgency":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown urgency level {text!r}") from None


class Ordering(IntEnum):
    LESS = -1
    EQUAL = 0
    GREATER = 1


def compare_urgency(a: Urgency, b: Urgency) -> Ordering:
    """Three-way comparison usable with ``functools.cmp_to_key``."""
    if a < b:
        return Ordering.LESS
    if a > b:
        return Ordering.GREATER
    return Ordering.EQUAL


@dataclass(frozen=True)
class ValidityWindow:
    """Closed tick interval; ``not_after=None`` means unbounded."""

    not_before: int = 0
    not_after: Optional[int] = None

    def contains(self, now: int) -> bool:
        if now < self.not_before:
            return False
        return self.not_after is None or now <= self.not_after

    def render(self) -> str:
        hi = "inf" if self.not_after is None else str(self.not_after)
        return f"{self.not_before}..{hi}"

    @classmethod
    def parse(cls, text: str) -> "ValidityWindow":
        lo, sep, hi = text.partition("..")
        if not sep:
            raise ValueError(f"malformed window {text!r}, expected <lo>..<hi|inf>")
        hi = hi.strip()
        return cls(int(lo), None if hi in ("", "inf") else int(hi))


class ValidationError(ValueError):
    """Base for envelope invariant violations."""


class EmptyAuthority(ValidationError):
    pass


class EmptyPayload(ValidationError):
    pass


class InvertedWindow(ValidationError):
    pass


class EmptyPrincipal(ValidationError):
    pass


@dataclass(frozen=True)
class Envelope:
    msg_id: int
    payload: str
    sender: str
    authority: frozenset[str]
    urgency: Urgency
    validity: ValidityWindow = ValidityWindow()
    perishable: bool = False

    def render(self) -> str:
        return format_envelope(self)


def validate(env: Envelope) -> None:
    """Raise the matching :class:`ValidationError` if *env* breaks an invariant."""
    if not env.authority:
        raise EmptyAuthority(f"msg {env.msg_id}: authority list is empty")
    if not env.payload:
        raise EmptyPayload(f"msg {env.msg_id}: payload is empty")
    window = env.validity
    if window.not_after is not None and window.not_before > window.not_after:
        raise InvertedWindow(
            f"msg {env.msg_id}: not_before {window.not_before} > not_after {window.not_after}"
        )
    if not env.sender or any(not p for p in env.authority):
        raise EmptyPrincipal(f"msg {env.msg_id}: principal ids must be non-empty")


def is_live(env: Envelope, now: int) -> bool:
    return env.validity.contains(now)


def _quote(text: str) -> str:
    escaped = text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
    return '"' + escaped + '"'


def _unquote(body: str) -> str:
    return re.sub(r"\\(.)", lambda m: "\n" if m[1] == "n" else m[1], body)


def format_envelope(env: Envelope) -> str:
    auth = ",".join(sorted(env.authority))
    return (
        f"msg={env.msg_id} from={env.sender} auth=[{auth}] urg={env.urgency.label} "
        f"valid={env.validity.render()} perishable={str(env.perishable).lower()} "
        f"payload={_quote(env.payload)}"
    )


_ENVELOPE_RE = re.compile(
    r'msg=(?P<id>\d+) from=(?P<sender>\S+) auth=\[(?P<auth>[^\]]*)\] '
    r'urg=(?P<urg>\w+) valid=(?P<valid>\d+\.\.(?:\d+|inf)) '
    r'perishable=(?P<per>true|false) payload="(?P<payload>(?:[^"\\]|\\.)*)"$'
)


def parse_envelope(line: str) -> Envelope:
    """Inverse of :func:`format_envelope`."""
    m = _ENVELOPE_RE.fullmatch(line.strip())
    if m is None:
        raise ValueError(f"not an envelope line: {line!r}")
    payload = _unquote(m["payload"])
    auth = frozenset(p for p in m["auth"].split(",") if p)
    return Envelope(
        msg_id=int(m["id"]),
        payload=payload,
        sender=m["sender"],
        authority=auth,
        urgency=Urgency.parse(m["urg"]),
        validity=ValidityWindow.parse(m["valid"]),
        perishable=m["per"] == "true",
    )
