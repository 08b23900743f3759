from __future__ import annotations

import random
from datetime import datetime, timedelta, timezone

import pytest

from chronicle.extract import Message
from chronicle.ontology import ConditionAtom, RelationSpec
from chronicle.relations import (WindowPolicy, anchors_compatible,
                                 brute_force_oracle, bucket_messages,
                                 detect_ellipsis, diachronic_pairs,
                                 evaluate_relations, parse_window,
                                 synchronic_pairs)
from chronicle.temporal import TimeAnchor

UTC = timezone.utc


def day(d, month=9, year=2004):
    return TimeAnchor.day(datetime(year, month, d))


def msg(msg_type="performance", source="A", doc="d", sentence=0, anchor=None,
        report_index=0, **args):
    return Message(msg_type=msg_type, args=args, time=anchor or day(9),
                   source=source, doc_id=doc, sentence_index=sentence,
                   report_index=report_index)


def keys(instances):
    return {r.key() for r in instances}


# ---------------------------------------------------------------------------
# candidate generators

def test_synchronic_same_day_cross_source_both_orders():
    m1 = msg(source="A", doc="a0")
    m2 = msg(source="B", doc="b0")
    pairs = synchronic_pairs([m1, m2], WindowPolicy(timedelta(0)))
    assert {(a.doc_id, b.doc_id) for a, b in pairs} == {("a0", "b0"), ("b0", "a0")}


def test_synchronic_same_source_excluded():
    m1 = msg(source="A", doc="a0")
    m2 = msg(source="A", doc="a1")
    assert synchronic_pairs([m1, m2], WindowPolicy(timedelta(0))) == []


def test_window_widens_compatibility():
    a, b = day(9), day(10)
    assert not anchors_compatible(a, b, WindowPolicy(timedelta(0)))
    assert anchors_compatible(a, b, WindowPolicy(timedelta(days=2)))


def test_diachronic_consecutive_reports_distance_one():
    m1 = msg(source="A", doc="a0", anchor=day(9), report_index=0)
    m2 = msg(source="A", doc="a1", anchor=day(10), report_index=1)
    pairs = diachronic_pairs([m1, m2])
    assert [(a.doc_id, b.doc_id, d) for a, b, d in pairs] == [("a0", "a1", 1)]


def test_diachronic_equal_anchors_no_pair():
    m1 = msg(source="A", doc="a0", anchor=day(9), report_index=0)
    m2 = msg(source="A", doc="a1", anchor=day(9), report_index=1)
    assert diachronic_pairs([m1, m2]) == []


def test_diachronic_distance_counts_report_steps():
    m1 = msg(source="A", doc="a0", anchor=day(9), report_index=0)
    m2 = msg(source="A", doc="a3", anchor=day(20), report_index=3)
    pairs = diachronic_pairs([m1, m2])
    assert pairs[0][2] == 3


# ---------------------------------------------------------------------------
# rule evaluation on the worked examples

def eq(slot):
    return ConditionAtom(op="eq", left_slot=slot, right_slot=slot)


DEGREES = ("poor", "mediocre", "good", "excellent")
AGREEMENT = RelationSpec(
    name="agreement", axis="synchronic", left_type="performance",
    right_type="performance", symmetric=True,
    conditions=(eq("entity"), eq("in_what"), eq("time_span"), eq("value")))
POSITIVE = RelationSpec(
    name="positive_graduation", axis="diachronic", left_type="performance",
    right_type="performance", distance=("==", 1),
    conditions=(eq("entity"), eq("in_what"), eq("time_span"),
                ConditionAtom(op="lt", left_slot="value", right_slot="value",
                              scale=DEGREES)))
TERMINATION = RelationSpec(
    name="termination", axis="diachronic", left_type="start",
    right_type="end", distance=(">=", 1),
    conditions=(eq("entity"), eq("activity")))


def perf(source, doc, anchor, value, report_index=0):
    return msg(source=source, doc=doc, anchor=anchor, report_index=report_index,
               entity="Alpha_United", in_what="attack", time_span="full_match",
               value=value)


def test_identical_messages_agree_both_directions():
    m1 = perf("A", "a0", day(9), "good")
    m2 = perf("B", "b0", day(9), "good")
    out = evaluate_relations([m1, m2], [AGREEMENT], WindowPolicy(timedelta(0)))
    assert keys(out) == {
        ("synchronic", "agreement", ("a0", 0), ("b0", 0)),
        ("synchronic", "agreement", ("b0", 0), ("a0", 0))}


def test_positive_graduation_on_consecutive_reports():
    m1 = perf("A", "a0", day(9), "poor", report_index=0)
    m2 = perf("A", "a1", day(10), "good", report_index=1)
    out = evaluate_relations([m1, m2], [POSITIVE], WindowPolicy(timedelta(0)))
    assert [(r.name, r.distance) for r in out] == [("positive_graduation", 1)]
    # direction is past -> future
    assert out[0].left.doc_id == "a0" and out[0].right.doc_id == "a1"


def test_termination_at_distance_two():
    m1 = msg(msg_type="start", source="A", doc="a0", anchor=day(1),
             report_index=0, entity="captors", activity="occupation")
    m2 = msg(msg_type="end", source="A", doc="a2", anchor=day(9),
             report_index=2, entity="captors", activity="occupation")
    out = evaluate_relations([m1, m2], [TERMINATION], WindowPolicy(timedelta(0)))
    assert [(r.name, r.distance) for r in out] == [("termination", 2)]


def test_null_slots_never_match():
    m1 = perf("A", "a0", day(9), None)
    m2 = perf("B", "b0", day(9), None)
    out = evaluate_relations([m1, m2], [AGREEMENT], WindowPolicy(timedelta(0)))
    assert out == []


def test_football_fixture_relation_counts(football):
    out = evaluate_relations(football.gold, football.relation_specs,
                             WindowPolicy(timedelta(0)))
    by_name = {}
    for r in out:
        by_name[r.name] = by_name.get(r.name, 0) + 1
    assert by_name == {"agreement": 20, "disagreement": 4,
                       "positive_graduation": 6, "negative_graduation": 1,
                       "stability": 3}


# ---------------------------------------------------------------------------
# ellipsis

def test_ellipsis_names_the_silent_source():
    m = msg(source="A", doc="a0")
    reports = detect_ellipsis([m], {"A", "B"}, WindowPolicy(timedelta(0)))
    assert len(reports) == 1
    assert reports[0].silent_sources == ("B",)


def test_ellipsis_absent_when_both_sources_report():
    m1 = msg(source="A", doc="a0")
    m2 = msg(source="B", doc="b0")
    assert detect_ellipsis([m1, m2], {"A", "B"},
                           WindowPolicy(timedelta(0))) == []


def test_late_starter_reported_silent(hostage):
    window = WindowPolicy(timedelta(0))
    reports = detect_ellipsis(hostage.gold, hostage.corpus.sources, window)
    early = [r for r in reports
             if r.message.time.start < datetime(2004, 9, 13, tzinfo=UTC)]
    assert early
    assert all("late_wire" in r.silent_sources for r in early)


# ---------------------------------------------------------------------------
# buckets

def test_buckets_partition_by_anchor():
    ms = [msg(doc="a0", anchor=day(1)), msg(doc="a1", anchor=day(1)),
          msg(doc="a2", anchor=day(3), source="B")]
    buckets = bucket_messages(ms, WindowPolicy(timedelta(0)))
    assert [len(b.messages) for b in buckets] == [2, 1]
    assert [b.label for b in buckets] == ["2004-09-01", "2004-09-03"]
    assert [b.index for b in buckets] == [0, 1]


def test_buckets_merge_under_wide_window():
    ms = [msg(doc="a0", anchor=day(1)), msg(doc="a1", anchor=day(2), source="B")]
    assert len(bucket_messages(ms, WindowPolicy(timedelta(0)))) == 2
    assert len(bucket_messages(ms, WindowPolicy(timedelta(days=2)))) == 1


# ---------------------------------------------------------------------------
# randomized equivalence with the literal oracle

def random_trial(seed: int, max_messages=60):
    rng = random.Random(seed)
    types = [f"t{i}" for i in range(rng.randint(1, 5))]
    slots = {t: [f"s{j}" for j in range(rng.randint(1, 3))] for t in types}
    scale = tuple(f"v{j}" for j in range(4))
    instances = list(scale) + [f"i{j}" for j in range(rng.randint(1, 16))]
    sources = [f"src{j}" for j in range(rng.randint(2, 5))]
    specs = []
    for k in range(rng.randint(1, 10)):
        lt, rt = rng.choice(types), rng.choice(types)
        axis = rng.choice(["synchronic", "diachronic"])
        conds = []
        for _ in range(rng.randint(0, 3)):
            op = rng.choice(["eq", "neq", "lt", "gt", "const"])
            ls, rs = rng.choice(slots[lt]), rng.choice(slots[rt])
            if op == "const":
                side = rng.choice(["left", "right"])
                conds.append(ConditionAtom(
                    op="const", side=side,
                    left_slot=ls if side == "left" else None,
                    right_slot=rs if side == "right" else None,
                    value=rng.choice(instances)))
            elif op in ("lt", "gt"):
                conds.append(ConditionAtom(op=op, left_slot=ls, right_slot=rs,
                                           scale=scale))
            else:
                conds.append(ConditionAtom(op=op, left_slot=ls, right_slot=rs))
        distance = None
        symmetric = False
        if axis == "diachronic":
            if rng.random() < 0.6:
                distance = (rng.choice(["==", ">="]), rng.randint(0, 3))
        else:
            symmetric = rng.random() < 0.5
        specs.append(RelationSpec(name=f"r{k}", axis=axis, left_type=lt,
                                  right_type=rt, conditions=tuple(conds),
                                  distance=distance, symmetric=symmetric))
    base = datetime(2004, 9, 1, tzinfo=UTC)
    messages = []
    counters = {}
    for _ in range(rng.randint(2, max_messages)):
        source = rng.choice(sources)
        ridx = counters.get(source, 0)
        counters[source] = ridx + 1
        t = rng.choice(types)
        offset = rng.randint(0, 18)
        if rng.random() < 0.5:
            anchor = TimeAnchor.day(base + timedelta(days=offset))
        else:
            anchor = TimeAnchor.instant(
                base + timedelta(days=offset, hours=rng.randint(0, 23),
                                 minutes=rng.randint(0, 59)))
        args = {s: (rng.choice(instances) if rng.random() < 0.85 else None)
                for s in slots[t]}
        messages.append(Message(
            msg_type=t, args=args, time=anchor, source=source,
            doc_id=f"{source}-{ridx}", sentence_index=0, report_index=ridx))
    width = rng.choice([timedelta(0), timedelta(hours=12), timedelta(days=1),
                        timedelta(days=2), timedelta(days=7)])
    return messages, specs, WindowPolicy(width)


@pytest.mark.parametrize("seed", range(0, 120))
def test_engine_matches_oracle(seed):
    messages, specs, window = random_trial(seed)
    engine = evaluate_relations(messages, specs, window)
    oracle = brute_force_oracle(messages, specs, window)
    assert keys(engine) == keys(oracle)


@pytest.mark.parametrize("seed", range(0, 40))
def test_axis_invariants_hold(seed):
    messages, specs, window = random_trial(seed)
    for r in evaluate_relations(messages, specs, window):
        if r.axis == "synchronic":
            assert r.left.source != r.right.source
            assert anchors_compatible(r.left.time, r.right.time, window)
        else:
            assert r.left.source == r.right.source
            assert r.left.time.start < r.right.time.start


@pytest.mark.parametrize("seed", range(0, 25))
def test_window_monotonicity(seed):
    messages, specs, _ = random_trial(seed, max_messages=40)
    widths = [timedelta(0), timedelta(days=1), timedelta(days=2),
              timedelta(days=7)]
    previous: set = set()
    for width in widths:
        current = keys(evaluate_relations(messages, specs, WindowPolicy(width)))
        sync_prev = {k for k in previous if k[0] == "synchronic"}
        sync_cur = {k for k in current if k[0] == "synchronic"}
        assert sync_prev <= sync_cur
        previous = current


@pytest.mark.parametrize("seed", range(0, 25))
def test_symmetric_specs_emit_both_directions(seed):
    messages, specs, window = random_trial(seed, max_messages=40)
    symmetric_names = {s.name for s in specs if s.symmetric}
    out = evaluate_relations(messages, specs, window)
    emitted = keys(out)
    for r in out:
        if r.name in symmetric_names and r.axis == "synchronic":
            assert ("synchronic", r.name, r.right.key(), r.left.key()) in emitted


def test_exact_time_degeneracy():
    t = datetime(2004, 9, 9, 10, 0, tzinfo=UTC)
    m1 = perf("A", "a0", TimeAnchor.instant(t), "good")
    m2 = perf("B", "b0", TimeAnchor.instant(t), "good")
    m3 = perf("C", "c0", TimeAnchor.instant(t + timedelta(minutes=1)), "good")
    out = evaluate_relations([m1, m2, m3], [AGREEMENT],
                             WindowPolicy(timedelta(0)))
    assert keys(out) == {
        ("synchronic", "agreement", ("a0", 0), ("b0", 0)),
        ("synchronic", "agreement", ("b0", 0), ("a0", 0))}


def test_window_parsing():
    assert parse_window("0").width == timedelta(0)
    assert parse_window("48h").width == timedelta(hours=48)
    assert parse_window("2d").width == timedelta(days=2)
    assert parse_window("90m").width == timedelta(minutes=90)
    with pytest.raises(ValueError):
        parse_window("two days")
