"""Deterministic step-loop simulation engine.

The engine owns one background thread per run.  Control calls (pause,
resume, cancel) are safe from any thread and take effect at the next step
boundary.  The engine's only output channel is the message bus; timing
parameters shape when messages are emitted but never touch simulation
state, so a run is bit-reproducible regardless of refresh cadence.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Protocol, runtime_checkable

from .bus import MessageBus, TOPIC_SIM_PROGRESS, TOPIC_SIM_REFRESH, TOPIC_SIM_STATE


class IllegalState(RuntimeError):
    """Raised when an engine operation is invalid in the current state."""


class EngineState(Enum):
    IDLE = "Idle"
    RUNNING = "Running"
    PAUSED = "Paused"
    CANCELLED = "Cancelled"
    COMPLETED = "Completed"


@dataclass(frozen=True)
class TimingParams:
    """Engine emission cadence, all in milliseconds.

    ``cooperative_yield`` is a minimum interval between opportunities to
    relinquish the CPU (a rate limit), never a per-step sleep.
    """

    refresh_interval: float = 33.0
    progress_interval: float = 250.0
    cooperative_yield: float = 0.0

    def __post_init__(self) -> None:
        if self.refresh_interval <= 0:
            raise ValueError("refresh_interval must be > 0")
        if self.progress_interval <= 0:
            raise ValueError("progress_interval must be > 0")
        if self.cooperative_yield < 0:
            raise ValueError("cooperative_yield must be >= 0")


@runtime_checkable
class Simulation(Protocol):
    """Opaque stepping contract: ``step`` returns True to continue,
    False when the simulation is done; ``reset`` restores initial state."""

    def step(self) -> bool: ...

    def reset(self) -> None: ...


class RealClock:
    def now(self) -> float:
        return time.monotonic() * 1000.0


class VirtualClock:
    """Manually advanced clock for deterministic timing tests."""

    def __init__(self, start_ms: float = 0.0) -> None:
        self._now = start_ms
        self._lock = threading.Lock()

    def now(self) -> float:
        with self._lock:
            return self._now

    def advance(self, ms: float) -> None:
        if ms < 0:
            raise ValueError("clock cannot go backward")
        with self._lock:
            self._now += ms


class Engine:
    """Lifecycle: Idle -> Running <-> Paused -> Cancelled/Completed -> Idle."""

    def __init__(self, bus: MessageBus, timing: Optional[TimingParams] = None, clock=None) -> None:
        self.bus = bus
        self.timing = timing or TimingParams()
        self.clock = clock or RealClock()
        self._sim: Optional[Simulation] = None
        self._lock = threading.Lock()
        self._cond = threading.Condition(self._lock)
        self._state = EngineState.IDLE
        self._step_count = 0
        self._epoch = self.clock.now()
        self._thread: Optional[threading.Thread] = None

    @property
    def state(self) -> EngineState:
        with self._lock:
            return self._state

    @property
    def step_count(self) -> int:
        with self._lock:
            return self._step_count

    def _sim_time_ms(self) -> float:
        return self.clock.now() - self._epoch

    def _publish_state(self, state: EngineState, step_count: int) -> None:
        self.bus.publish(
            TOPIC_SIM_STATE,
            {"state": state.value, "step_count": step_count, "sim_time_ms": self._sim_time_ms()},
        )

    def _publish_refresh(self, state: EngineState, step_count: int) -> None:
        self.bus.publish(
            TOPIC_SIM_REFRESH,
            {"state": state.value, "step_count": step_count, "sim_time_ms": self._sim_time_ms()},
            coalesce_key="refresh",
        )

    # -- control operations (any thread) ------------------------------------

    def attach(self, sim: Simulation) -> None:
        with self._lock:
            if self._state is not EngineState.IDLE:
                raise IllegalState(f"attach in {self._state.value}")
            self._sim = sim
            self._step_count = 0
            self._epoch = self.clock.now()

    def start(self) -> None:
        with self._lock:
            if self._state is not EngineState.IDLE:
                raise IllegalState(f"start in {self._state.value}")
            if self._sim is None:
                raise IllegalState("start with no simulation attached")
            self._state = EngineState.RUNNING
            count = self._step_count
            self._thread = threading.Thread(target=self._run_loop, daemon=True, name="simdesk-engine")
            self._thread.start()
        self._publish_state(EngineState.RUNNING, count)

    def pause(self) -> None:
        with self._cond:
            if self._state is not EngineState.RUNNING:
                raise IllegalState(f"pause in {self._state.value}")
            self._state = EngineState.PAUSED
            count = self._step_count
            self._cond.notify_all()
        self._publish_state(EngineState.PAUSED, count)

    def resume(self) -> None:
        with self._cond:
            if self._state is not EngineState.PAUSED:
                raise IllegalState(f"resume in {self._state.value}")
            self._state = EngineState.RUNNING
            count = self._step_count
            self._cond.notify_all()
        self._publish_state(EngineState.RUNNING, count)

    def cancel(self) -> None:
        with self._cond:
            if self._state not in (EngineState.RUNNING, EngineState.PAUSED):
                raise IllegalState(f"cancel in {self._state.value}")
            self._state = EngineState.CANCELLED
            count = self._step_count
            self._cond.notify_all()
        self._publish_state(EngineState.CANCELLED, count)

    def reset(self) -> None:
        with self._cond:
            if self._state is EngineState.RUNNING:
                raise IllegalState("reset while Running")
            if self._state is EngineState.PAUSED:
                # Unpark the loop through the legal Paused->Cancelled edge.
                self._state = EngineState.CANCELLED
                self._cond.notify_all()
            thread = self._thread
        if thread is not None:
            thread.join()
        with self._lock:
            if self._sim is not None:
                self._sim.reset()
            self._step_count = 0
            self._state = EngineState.IDLE
            self._epoch = self.clock.now()
            self._thread = None
        self._publish_state(EngineState.IDLE, 0)

    def step_n(self, n: int) -> int:
        """Run up to n steps synchronously; leaves one coalesced refresh pending."""
        if n < 1:
            raise ValueError("n must be >= 1")
        with self._lock:
            if self._state not in (EngineState.IDLE, EngineState.PAUSED):
                raise IllegalState(f"step_n in {self._state.value}")
            if self._sim is None:
                raise IllegalState("step_n with no simulation attached")
            sim = self._sim
        executed = 0
        completed = False
        for _ in range(n):
            cont = sim.step()
            executed += 1
            with self._lock:
                self._step_count += 1
            if not cont:
                completed = True
                break
        with self._lock:
            if completed:
                self._state = EngineState.COMPLETED
            state = self._state
            count = self._step_count
        self._publish_refresh(state, count)
        if completed:
            self._publish_state(state, count)
        return executed

    def wait(self, timeout: Optional[float] = None) -> bool:
        """Join the background loop; True if it has exited."""
        with self._lock:
            thread = self._thread
        if thread is None:
            return True
        thread.join(timeout)
        return not thread.is_alive()

    # -- background loop -----------------------------------------------------

    def _run_loop(self) -> None:
        sim = self._sim
        timing = self.timing
        clock = self.clock
        now = clock.now()
        last_refresh = last_progress = last_yield = now
        while True:
            with self._cond:
                while self._state is EngineState.PAUSED:
                    self._cond.wait()
                if self._state is not EngineState.RUNNING:
                    break
            cont = sim.step()
            with self._lock:
                self._step_count += 1
                count = self._step_count
            now = clock.now()
            if now - last_refresh >= timing.refresh_interval:
                self._publish_refresh(EngineState.RUNNING, count)
                last_refresh = now
            if now - last_progress >= timing.progress_interval:
                self.bus.publish(
                    TOPIC_SIM_PROGRESS,
                    {"state": EngineState.RUNNING.value, "step_count": count,
                     "sim_time_ms": self._sim_time_ms()},
                )
                last_progress = now
            if not cont:
                with self._lock:
                    if self._state is EngineState.RUNNING:
                        self._state = EngineState.COMPLETED
                    state = self._state
                self._publish_state(state, count)
                break
            if timing.cooperative_yield <= 0 or now - last_yield >= timing.cooperative_yield:
                time.sleep(0)  # scheduler hint only
                last_yield = now
