"""Scoped publish/subscribe bus with per-key coalescing.

Simulation code publishes from any thread; delivery happens only when the
owner context (the single thread that owns all view state) calls
``dispatch_pending``.  Envelopes carrying a coalesce key collapse so that a
burst of equivalent updates costs one delivery per dispatch cycle.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

# Topic conventions used across the package.
TOPIC_SIM_REFRESH = "sim.refresh"
TOPIC_SIM_PROGRESS = "sim.progress"
TOPIC_SIM_STATE = "sim.state"
TOPIC_PLOT_DATA = "plot.data"
TOPIC_VIEW_DIRTY = "view.dirty"
TOPIC_INPUT_PREFIX = "input."


class BusError(RuntimeError):
    """Raised for bus misuse: re-entrant or off-thread dispatch."""


class MalformedPattern(ValueError):
    """Raised when a subscription pattern is not exact or trailing '.*'."""


class UnknownSubscription(KeyError):
    """Raised when unsubscribing an id that is not registered."""


@dataclass(frozen=True)
class Envelope:
    """One published message.  ``scope`` is a view id, or None for broadcast."""

    topic: str
    payload: dict
    scope: Optional[str] = None
    coalesce_key: Optional[str] = None
    source: str = ""
    seq: int = 0


@dataclass
class Subscription:
    id: int
    pattern: str
    scope_filter: Optional[str]  # view id, or None for any scope
    handler: Callable[[Envelope], None]


def _check_pattern(pattern: str) -> None:
    if not pattern:
        raise MalformedPattern("empty pattern")
    if pattern.endswith(".*"):
        body = pattern[:-2]
    else:
        body = pattern
    if not body or "*" in body:
        raise MalformedPattern(f"pattern {pattern!r}: '*' only allowed as trailing '.*'")


def _matches(sub: Subscription, env: Envelope) -> bool:
    if sub.pattern.endswith(".*"):
        if not env.topic.startswith(sub.pattern[:-1]):
            return False
    elif env.topic != sub.pattern:
        return False
    # Broadcast envelopes reach every scope filter; scoped envelopes reach
    # only 'any' subscriptions or ones filtered to the same view.
    if env.scope is None or sub.scope_filter is None:
        return True
    return env.scope == sub.scope_filter


class MessageBus:
    """Internally synchronized queue + subscription table.

    ``publish`` is safe from any thread.  ``dispatch_pending`` must run on
    one thread only (bound at first dispatch); handlers run inline on it.
    """

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._pending: list[Envelope] = []
        self._coalesce_index: dict[tuple, int] = {}
        self._subs: dict[int, Subscription] = {}
        self._next_sub_id = 1
        self._next_seq = 1
        self._dispatching = False
        self._owner_thread: Optional[int] = None

    # -- subscription ------------------------------------------------------

    def subscribe(
        self,
        pattern: str,
        handler: Callable[[Envelope], None],
        scope_filter: Optional[str] = None,
    ) -> int:
        _check_pattern(pattern)
        with self._lock:
            sub_id = self._next_sub_id
            self._next_sub_id += 1
            self._subs[sub_id] = Subscription(sub_id, pattern, scope_filter, handler)
        return sub_id

    def unsubscribe(self, sub_id: int) -> None:
        with self._lock:
            if sub_id not in self._subs:
                raise UnknownSubscription(sub_id)
            del self._subs[sub_id]

    # -- publish / dispatch ------------------------------------------------

    def publish(
        self,
        topic: str,
        payload: Optional[dict] = None,
        *,
        scope: Optional[str] = None,
        coalesce_key: Optional[str] = None,
        source: str = "",
    ) -> None:
        """Enqueue an envelope; never blocks on delivery (fire-and-forget).

        With a coalesce key, an undispatched envelope sharing
        (topic, scope, key) is replaced in place: it keeps its queue
        position and will be delivered once, with the latest payload.
        """
        if not topic:
            raise ValueError("empty topic")
        with self._lock:
            seq = self._next_seq
            self._next_seq += 1
            env = Envelope(topic, dict(payload or {}), scope, coalesce_key, source, seq)
            if coalesce_key:
                key = (topic, scope, coalesce_key)
                pos = self._coalesce_index.get(key)
                if pos is not None:
                    self._pending[pos] = replace(env, seq=seq)
                    return
                self._coalesce_index[key] = len(self._pending)
            self._pending.append(env)

    def pending_count(self) -> int:
        with self._lock:
            return len(self._pending)

    def dispatch_pending(self) -> int:
        """Deliver everything queued so far; returns delivery count.

        Two-phase: the queue is swapped out first, so publishes made by
        handlers (or by other threads mid-dispatch) wait for the next cycle.
        """
        ident = threading.get_ident()
        with self._lock:
            if self._dispatching:
                raise BusError("re-entrant dispatch")
            if self._owner_thread is None:
                self._owner_thread = ident
            elif self._owner_thread != ident:
                raise BusError("dispatch_pending called off the owner thread")
            self._dispatching = True
            batch = self._pending
            self._pending = []
            self._coalesce_index.clear()
            subs = list(self._subs.values())
        delivered = 0
        try:
            for env in batch:
                for sub in subs:
                    with self._lock:
                        live = sub.id in self._subs
                    if live and _matches(sub, env):
                        sub.handler(env)
                        delivered += 1
        finally:
            with self._lock:
                self._dispatching = False
        return delivered
