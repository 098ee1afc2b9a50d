"""Per-principal FIFO deferral queue shared by delegation and recheck."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterator, Optional

from .envelope import Envelope


class DeferReason(Enum):
    BUSY = "Busy"
    NOT_IMPORTANT_NOW = "NotImportantNow"


class QueueError(Exception):
    pass


class DuplicateDeferral(QueueError):
    pass


class NotFound(QueueError, KeyError):
    pass


class QueueFull(QueueError):
    pass


@dataclass
class DeferredItem:
    env: Envelope
    enqueued_at: int
    enqueue_seq: int
    last_checked: int
    reason: DeferReason
    recheck_count: int = 0
    # set once delegation has run for this item
    delegated: bool = False
    # grid publication tick of the envelope; used for latency
    published_at: Optional[int] = None

    @property
    def msg_id(self) -> int:
        return self.env.msg_id


class DeferralQueue:
    """FIFO store owned by exactly one principal.

    Items keep their enqueue position for their whole lifetime; requeueing
    only refreshes ``last_checked``.
    """

    def __init__(
        self,
        owner: str,
        limit: Optional[int] = None,
        trace: Optional[Callable[[str], None]] = None,
    ) -> None:
        self.owner = owner
        self.limit = limit
        self._items: dict[int, DeferredItem] = {}
        self._seq = 0
        self._trace = trace
        self.max_depth = 0

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self) -> Iterator[DeferredItem]:
        return iter(list(self._items.values()))

    def __contains__(self, msg_id: int) -> bool:
        return msg_id in self._items

    def get(self, msg_id: int) -> DeferredItem:
        try:
            return self._items[msg_id]
        except KeyError:
            raise NotFound(msg_id) from None

    def _log(self, now: int, item: DeferredItem, event: str) -> None:
        if self._trace is not None:
            self._trace(
                f"tick={now} Q principal={self.owner} msg={item.msg_id} "
                f"event={event} seq={item.enqueue_seq}"
            )

    def enqueue(self, env: Envelope, now: int, reason: DeferReason) -> DeferredItem:
        if env.msg_id in self._items:
            raise DuplicateDeferral(f"msg {env.msg_id} already queued for {self.owner}")
        if self.limit is not None and len(self._items) >= self.limit:
            raise QueueFull(f"queue of {self.owner} holds {self.limit} items")
        self._seq += 1
        item = DeferredItem(env, now, self._seq, now, reason)
        # dict insertion order is enqueue_seq order since seq only grows
        self._items[env.msg_id] = item
        self.max_depth = max(self.max_depth, len(self._items))
        self._log(now, item, "enqueue")
        return item

    def due(self, now: int, delay: int) -> list[DeferredItem]:
        if delay <= 0:
            raise ValueError("recheck delay must be positive")
        ready = [it for it in self._items.values() if it.last_checked + delay <= now]
        for item in ready:
            item.last_checked = now
            item.recheck_count += 1
            self._log(now, item, "due")
        return ready

    def remove(self, msg_id: int, now: Optional[int] = None) -> DeferredItem:
        item = self._items.pop(msg_id, None)
        if item is None:
            raise NotFound(msg_id)
        if now is not None:
            self._log(now, item, "remove")
        return item

    def requeue(self, item: DeferredItem, now: int) -> None:
        if self._items.get(item.msg_id) is not item:
            raise NotFound(item.msg_id)
        item.last_checked = now
        self._log(now, item, "requeue")
