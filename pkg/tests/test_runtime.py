import threading

import pytest

from pwla_mas.errors import DuplicateAgent, ProtocolViolation, StepLimitExceeded, UnknownAgent
from pwla_mas.pipeline import PIPELINE_PROTOCOL
from pwla_mas.runtime import Plan, Protocol, Runtime, export_trace, on_kind, on_message

PROTO = Protocol(
    "test",
    allowed={("request", "a", "b"), ("inform", "b", "a"), ("inform", "a", "b")},
    requires_reply={"request"},
)


def runtime(*agents, protocol=PROTO):
    rt = Runtime(protocol)
    for name, plans in agents:
        rt.register_agent(name, name, plans)
    return rt


def test_register_duplicate():
    rt = runtime(("acquisition", ()), protocol=PIPELINE_PROTOCOL)
    with pytest.raises(DuplicateAgent):
        rt.register_agent("acquisition", "acquisition", ())


def test_register_roster():
    rt = runtime(("a", ()), ("b", ()), ("c", ()))
    assert len(rt.agents) == 3


def test_inert_agent_consumes_events():
    rt = runtime(("a", ()))
    rt.inject_percept("a", {"x": 1})
    trace = rt.run_until_quiescent(5)
    assert len(trace) == 1 and trace[0].plan is None and trace[0].actions == ()
    assert rt.pending == 0


def test_send_allowed_by_pipeline_protocol():
    rt = Runtime(PIPELINE_PROTOCOL)
    for name in ("acquisition", "modeling", "delivery"):
        rt.register_agent(name, name, ())
    msg = rt.send("acquisition", "modeling", "request", {})
    assert rt.agents["modeling"].inbox[-1] is msg


def test_send_protocol_violation():
    rt = Runtime(PIPELINE_PROTOCOL)
    for name in ("acquisition", "modeling", "delivery"):
        rt.register_agent(name, name, ())
    rt.send("modeling", "delivery", "report", {})
    with pytest.raises(ProtocolViolation) as err:
        rt.send("modeling", "acquisition", "report", {})
    assert err.value.transition == ("report", "modeling", "acquisition")


def test_send_unknown_agent():
    rt = runtime(("a", ()))
    with pytest.raises(UnknownAgent):
        rt.send("a", "ghost", "inform")


def test_fifo_inbox():
    rt = runtime(("a", ()), ("b", ()))
    m1 = rt.send("a", "b", "inform", 1)
    m2 = rt.send("a", "b", "inform", 2)
    assert list(rt.agents["b"].inbox) == [m1, m2]
    rt.run_until_quiescent(10)
    assert rt.delivered == [m1, m2]


def test_belief_versions():
    rt = runtime(("a", ()))
    assert rt.update_belief("rules/zone-policy", "x", "a") == 1
    assert rt.update_belief("rules/zone-policy", "y", "a") == 2
    assert rt.beliefs.get("rules/zone-policy").value == "y"


def test_interleaved_writers_are_gap_free():
    rt = runtime(("a", ()), ("b", ()))
    barrier = threading.Barrier(2)
    seen = {"a": [], "b": []}

    def writer(name):
        barrier.wait()
        for i in range(500):
            seen[name].append(rt.update_belief("k", (name, i), name))

    threads = [threading.Thread(target=writer, args=(n,)) for n in ("a", "b")]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    history = rt.beliefs.history("k")
    assert [b.version for b in history] == list(range(1, 1001))
    assert sorted(seen["a"] + seen["b"]) == list(range(1, 1001))
    # each writer's own versions increase
    assert seen["a"] == sorted(seen["a"]) and seen["b"] == sorted(seen["b"])
    assert rt.audit() == []


def test_belief_view_filters_keys():
    rt = Runtime(PROTO)
    rt.register_agent("a", "a", (), belief_view=("data/",))
    rt.update_belief("data/x", 1, "a")
    rt.update_belief("rules/y", 2, "a")
    assert list(rt.beliefs_for("a")) == ["data/x"]


def test_belief_subscription_emits_event():
    rt = Runtime(PROTO)
    rt.register_agent("a", "a", (), subscriptions=("rules/",))
    rt.update_belief("rules/y", 2, "a")
    rt.update_belief("data/x", 1, "a")
    trace = rt.run_until_quiescent(5)
    assert [r.event_kind for r in trace] == ["belief_changed"]


def test_empty_run():
    assert runtime(("a", ())).run_until_quiescent(3) == []


def test_percept_plan_message_trace_length_two():
    def emit(ctx):
        ctx.send("b", "inform", "hello")
        return "sent"

    rt = runtime(("a", (Plan("p", on_kind("percept_arrived"), (emit,)),)), ("b", ()))
    rt.inject_percept("a", None)
    trace = rt.run_until_quiescent(10)
    assert [(r.agent, r.event_kind) for r in trace] == [("a", "percept_arrived"), ("b", "message_arrived")]
    assert trace[0].actions == ("sent",)


def test_runaway_plan_hits_step_limit():
    rt = runtime(("a", (Plan("loop", on_kind("timer"), (lambda ctx: ctx.schedule_timer() and None,)),)))
    rt.schedule_timer("a")
    with pytest.raises(StepLimitExceeded) as err:
        rt.run_until_quiescent(10)
    assert len(err.value.trace) == 10
    assert rt.audit() == []  # events still conserved


def test_first_matching_plan_wins():
    plans = (
        Plan("first", on_kind("timer"), (lambda ctx: "first",)),
        Plan("second", on_kind("timer"), (lambda ctx: "second",)),
    )
    rt = runtime(("a", plans))
    rt.schedule_timer("a")
    assert rt.run_until_quiescent(3)[0].plan == "first"


def request_reply_runtime():
    def ask(ctx):
        ctx.send("b", "request", "q1")
        ctx.send("b", "request", "q2")
        return "asked"

    def answer(ctx):
        ctx.reply("inform", ctx.message.payload.upper())
        return "answered"

    rt = runtime(
        ("a", (Plan("ask", on_kind("percept_arrived"), (ask,)),)),
        ("b", (Plan("answer", on_message("request"), (answer,)),)),
    )
    rt.inject_percept("a", None)
    return rt


def test_reply_completeness_and_trace_export():
    rt = request_reply_runtime()
    trace = rt.run_until_quiescent(20)
    assert rt.audit() == []
    replies = [m for m in rt.sent if m.correlation_id is not None]
    assert [(m.correlation_id, m.payload) for m in replies] == [(1, "Q1"), (2, "Q2")]
    text = export_trace(trace)
    assert text.splitlines()[0] == (
        "step=1\tagent=a\tevent=percept_arrived\tevent_id=1\tmsg=-\tcorr=-\tperf=-\tplan=ask\tactions=asked"
    )
    assert "msg=3\tcorr=1\tperf=inform" in text


def test_trace_is_deterministic():
    a = export_trace(request_reply_runtime().run_until_quiescent(20))
    b = export_trace(request_reply_runtime().run_until_quiescent(20))
    assert a == b


def test_audit_flags_missing_reply():
    rt = runtime(("a", ()), ("b", ()))
    rt.send("a", "b", "request", "unanswered")
    rt.run_until_quiescent(5)
    assert any(p.startswith("reply:") for p in rt.audit())


def test_plan_needs_steps():
    with pytest.raises(ValueError):
        Plan("empty", on_kind("timer"), ())
