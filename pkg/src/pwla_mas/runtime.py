"""A small deterministic multi-agent kernel.

Agents own a plan library and an inbox. Everything that happens is an
:class:`Event` with a monotone id; :meth:`Runtime.run_until_quiescent`
repeatedly dispatches the lowest-id pending event to its owner and runs the
first plan whose trigger matches. Messages are checked against a
:class:`Protocol` on send, beliefs live in a versioned store, and every
dispatch is recorded in the trace.
"""
from __future__ import annotations

import threading
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

from .errors import DuplicateAgent, ProtocolViolation, StepLimitExceeded, UnknownAgent

PERFORMATIVES = frozenset({"request", "inform", "report", "approve", "feedback"})
EVENT_KINDS = frozenset({"percept_arrived", "message_arrived", "belief_changed", "timer"})


@dataclass(frozen=True)
class AgentMessage:
    id: int
    sender: str
    recipient: str
    performative: str
    payload: Any = None
    correlation_id: int | None = None


@dataclass(frozen=True)
class Belief:
    key: str
    value: Any
    version: int
    updated_by: str


@dataclass(frozen=True)
class Event:
    id: int
    kind: str
    owner: str
    payload: Any = None


@dataclass(frozen=True)
class Plan:
    """``steps`` are callables ``step(ctx) -> str | None``; the string is logged as the action."""

    name: str
    trigger: Callable[["Event"], bool]
    steps: tuple
    goal: str = ""

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        if not self.steps:
            raise ValueError(f"plan {self.name!r} has no steps")


def on_message(performative: str | None = None, sender: str | None = None) -> Callable[[Event], bool]:
    """Trigger matching message arrivals, optionally filtered."""

    def trigger(event: Event) -> bool:
        if event.kind != "message_arrived":
            return False
        msg = event.payload
        return (performative is None or msg.performative == performative) and (
            sender is None or msg.sender == sender
        )

    return trigger


def on_kind(kind: str) -> Callable[[Event], bool]:
    return lambda event: event.kind == kind


@dataclass(frozen=True)
class Protocol:
    """Allowed ``(performative, from_role, to_role)`` transitions."""

    name: str
    allowed: frozenset
    requires_reply: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "allowed", frozenset(tuple(t) for t in self.allowed))
        object.__setattr__(self, "requires_reply", frozenset(self.requires_reply))
        for perf, _, _ in self.allowed:
            if perf not in PERFORMATIVES:
                raise ValueError(f"unknown performative {perf!r}")

    def permits(self, performative: str, from_role: str, to_role: str) -> bool:
        return (performative, from_role, to_role) in self.allowed


class BeliefStore:
    """Versioned key/value store; writes are serialized by a lock."""

    def __init__(self):
        self._lock = threading.Lock()
        self._history: dict[str, list[Belief]] = {}

    def write(self, key: str, value, agent: str) -> Belief:
        with self._lock:
            history = self._history.setdefault(key, [])
            belief = Belief(key, value, len(history) + 1, agent)
            history.append(belief)
            return belief

    def get(self, key: str) -> Belief | None:
        history = self._history.get(key)
        return history[-1] if history else None

    def history(self, key: str) -> list[Belief]:
        return list(self._history.get(key, ()))

    def keys(self):
        return sorted(self._history)

    def snapshot(self, prefixes: Sequence[str] | None = None) -> dict[str, Belief]:
        out = {}
        for key in self.keys():
            if prefixes is None or any(key.startswith(p) for p in prefixes):
                out[key] = self._history[key][-1]
        return out


@dataclass
class Agent:
    name: str
    role: str
    plans: tuple
    belief_view: tuple | None = None
    subscriptions: tuple = ()
    goals: set = field(default_factory=set)
    inbox: deque = field(default_factory=deque)
    state: dict = field(default_factory=dict)


class AgentContext:
    """What a plan step can see and do while handling one event."""

    def __init__(self, runtime: "Runtime", agent: Agent, event: Event):
        self.runtime = runtime
        self.agent = agent
        self.event = event
        self.actions: list[str] = []

    @property
    def message(self) -> AgentMessage | None:
        return self.event.payload if self.event.kind == "message_arrived" else None

    @property
    def state(self) -> dict:
        return self.agent.state

    def send(self, to: str, performative: str, payload=None, correlation_id=None) -> AgentMessage:
        return self.runtime.send(self.agent.name, to, performative, payload, correlation_id)

    def reply(self, performative: str, payload=None) -> AgentMessage:
        msg = self.message
        if msg is None:
            raise ValueError("reply outside of a message event")
        return self.send(msg.sender, performative, payload, correlation_id=msg.id)

    def update_belief(self, key: str, value) -> int:
        return self.runtime.update_belief(key, value, self.agent.name)

    def belief(self, key: str):
        visible = self.runtime.beliefs_for(self.agent.name)
        b = visible.get(key)
        return None if b is None else b.value

    def schedule_timer(self, payload=None) -> Event:
        return self.runtime.schedule_timer(self.agent.name, payload)


@dataclass(frozen=True)
class TraceRecord:
    step: int
    agent: str
    event_kind: str
    event_id: int
    message_id: int | None
    correlation_id: int | None
    performative: str | None
    plan: str | None
    actions: tuple

    def to_line(self) -> str:
        def opt(x):
            return "-" if x is None else str(x)

        return "\t".join(
            [
                f"step={self.step}",
                f"agent={self.agent}",
                f"event={self.event_kind}",
                f"event_id={self.event_id}",
                f"msg={opt(self.message_id)}",
                f"corr={opt(self.correlation_id)}",
                f"perf={opt(self.performative)}",
                f"plan={opt(self.plan)}",
                "actions=" + ";".join(self.actions),
            ]
        )


def export_trace(trace: Iterable[TraceRecord]) -> str:
    return "".join(rec.to_line() + "\n" for rec in trace)


class Runtime:
    """Single-queue deterministic scheduler.

    >>> rt = Runtime(Protocol("p", {("inform", "a", "b")}))
    >>> _ = rt.register_agent("a", "a", [])
    >>> _ = rt.register_agent("b", "b", [])
    >>> rt.send("a", "b", "inform", 1).id
    1
    >>> [r.event_kind for r in rt.run_until_quiescent(10)]
    ['message_arrived']
    """

    def __init__(self, protocol: Protocol):
        self.protocol = protocol
        self.agents: dict[str, Agent] = {}
        self.beliefs = BeliefStore()
        self._pending: deque[Event] = deque()
        self._next_event = 1
        self._next_message = 1
        self._step = 0
        self.emitted = 0
        self.dispatched = 0
        self.sent: list[AgentMessage] = []
        self.delivered: list[AgentMessage] = []
        self.trace: list[TraceRecord] = []

    # roster --------------------------------------------------------------

    def register_agent(
        self,
        name: str,
        role: str,
        plan_library: Iterable[Plan] = (),
        *,
        belief_view: Sequence[str] | None = None,
        subscriptions: Sequence[str] = (),
        goals: Iterable[str] = (),
    ) -> Agent:
        if name in self.agents:
            raise DuplicateAgent(name)
        agent = Agent(
            name=name,
            role=role,
            plans=tuple(plan_library),
            belief_view=None if belief_view is None else tuple(belief_view),
            subscriptions=tuple(subscriptions),
            goals=set(goals),
        )
        self.agents[name] = agent
        return agent

    def _agent(self, name: str) -> Agent:
        try:
            return self.agents[name]
        except KeyError:
            raise UnknownAgent(name) from None

    # events --------------------------------------------------------------

    def _emit(self, kind: str, owner: str, payload=None) -> Event:
        event = Event(self._next_event, kind, owner, payload)
        self._next_event += 1
        self._pending.append(event)
        self.emitted += 1
        return event

    def inject_percept(self, agent: str, payload) -> Event:
        self._agent(agent)
        return self._emit("percept_arrived", agent, payload)

    def schedule_timer(self, agent: str, payload=None) -> Event:
        self._agent(agent)
        return self._emit("timer", agent, payload)

    @property
    def pending(self) -> int:
        return len(self._pending)

    # messages ------------------------------------------------------------

    def send(self, sender: str, recipient: str, performative: str, payload=None, correlation_id=None) -> AgentMessage:
        src = self._agent(sender)
        dst = self._agent(recipient)
        if performative not in PERFORMATIVES or not self.protocol.permits(performative, src.role, dst.role):
            raise ProtocolViolation((performative, src.role, dst.role))
        msg = AgentMessage(self._next_message, sender, recipient, performative, payload, correlation_id)
        self._next_message += 1
        self.sent.append(msg)
        dst.inbox.append(msg)
        self._emit("message_arrived", recipient, msg)
        return msg

    # beliefs -------------------------------------------------------------

    def update_belief(self, key: str, value, agent: str) -> int:
        belief = self.beliefs.write(key, value, agent)
        for name in sorted(self.agents):
            if any(key.startswith(p) for p in self.agents[name].subscriptions):
                self._emit("belief_changed", name, belief)
        return belief.version

    def beliefs_for(self, agent: str) -> dict[str, Belief]:
        return self.beliefs.snapshot(self._agent(agent).belief_view)

    # scheduling ----------------------------------------------------------

    def dispatch_next(self) -> TraceRecord:
        event = self._pending.popleft()
        agent = self.agents[event.owner]
        self.dispatched += 1
        self._step += 1
        msg = None
        if event.kind == "message_arrived":
            msg = agent.inbox.popleft()
            assert msg is event.payload
            self.delivered.append(msg)
        ctx = AgentContext(self, agent, event)
        plan = next((p for p in agent.plans if p.trigger(event)), None)
        if plan is not None:
            for action in plan.steps:
                summary = action(ctx)
                if summary:
                    ctx.actions.append(summary)
        record = TraceRecord(
            step=self._step,
            agent=agent.name,
            event_kind=event.kind,
            event_id=event.id,
            message_id=None if msg is None else msg.id,
            correlation_id=None if msg is None else msg.correlation_id,
            performative=None if msg is None else msg.performative,
            plan=None if plan is None else plan.name,
            actions=tuple(ctx.actions),
        )
        self.trace.append(record)
        return record

    def run_until_quiescent(self, max_steps: int) -> list[TraceRecord]:
        """Dispatch events until none remain; raise after ``max_steps`` dispatches."""
        if max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        start = len(self.trace)
        for _ in range(max_steps):
            if not self._pending:
                break
            self.dispatch_next()
        if self._pending:
            raise StepLimitExceeded(max_steps, list(self.trace[start:]))
        return list(self.trace[start:])

    # invariants ----------------------------------------------------------

    def audit(self) -> list[str]:
        """Violated runtime invariants, as human-readable strings.

        Reply completeness is only meaningful at quiescence and is skipped
        while events are pending.
        """
        problems = []
        for msg in self.sent:
            src, dst = self.agents[msg.sender], self.agents[msg.recipient]
            if not self.protocol.permits(msg.performative, src.role, dst.role):
                problems.append(f"protocol: message {msg.id} {msg.performative} {src.role}->{dst.role}")

        if not self._pending:
            replies = Counter(m.correlation_id for m in self.sent if m.correlation_id is not None)
            for msg in self.sent:
                if msg.performative in self.protocol.requires_reply and replies[msg.id] != 1:
                    problems.append(f"reply: message {msg.id} has {replies[msg.id]} replies")

        def by_pair(msgs):
            pairs: dict[tuple, list[int]] = {}
            for m in msgs:
                pairs.setdefault((m.sender, m.recipient), []).append(m.id)
            return pairs

        sent_pairs, got_pairs = by_pair(self.sent), by_pair(self.delivered)
        for pair, got in got_pairs.items():
            if sent_pairs.get(pair, [])[: len(got)] != got:
                problems.append(f"fifo: {pair[0]}->{pair[1]} delivered {got}")

        if self.emitted != self.dispatched + len(self._pending):
            problems.append(
                f"events: emitted {self.emitted} != dispatched {self.dispatched} + pending {len(self._pending)}"
            )

        for key in self.beliefs.keys():
            versions = [b.version for b in self.beliefs.history(key)]
            if versions != list(range(1, len(versions) + 1)):
                problems.append(f"belief: {key} versions {versions}")
        return problems
