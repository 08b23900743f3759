"""Cross-document relation evaluation over extracted messages.

Synchronic candidates are cross-source message pairs whose time anchors
fall together under a configurable window: each anchor's occupied interval
is dilated by half the window width and the pair is compatible when the
dilated intervals overlap. With width zero and instant anchors this
degenerates to exact time equality. Diachronic candidates are same-source
pairs at strictly increasing anchors, their distance counted in per-source
report steps.

``brute_force_oracle`` re-implements the whole contract literally and
independently (no shared condition or window helpers) so tests can check
the engine against it on randomized inputs.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path

from .errors import MalformedRecord
from .extract import Message
from .ontology import RelationSpec, SYNCHRONIC, DIACHRONIC, evaluate_atom
from .temporal import TimeAnchor


@dataclass(frozen=True)
class WindowPolicy:
    """Synchronic tolerance. Two anchors are compatible when their extents,
    each dilated by width/2, overlap."""

    width: timedelta

    def __post_init__(self):
        if self.width < timedelta(0):
            raise ValueError("window width must be >= 0")


_DURATION_RE = re.compile(r"^(\d+)([dhm])$")


def parse_duration(text: str) -> timedelta:
    """Parse a duration: "0", "36h", "2d", "90m"."""
    text = text.strip()
    if text == "0":
        return timedelta(0)
    m = _DURATION_RE.match(text)
    if not m:
        raise ValueError(f"bad duration {text!r} (expected forms: 0, 12h, 2d, 90m)")
    n, unit = int(m.group(1)), m.group(2)
    return timedelta(**{{"d": "days", "h": "hours", "m": "minutes"}[unit]: n})


def parse_window(text: str) -> WindowPolicy:
    return WindowPolicy(parse_duration(text))


def _dilated(anchor: TimeAnchor, window: WindowPolicy):
    start, end, end_open = anchor.extent()
    half = window.width / 2
    return start - half, end + half, end_open


def _extents_overlap(a, b) -> bool:
    s1, e1, open1 = a
    s2, e2, open2 = b
    left_ok = s2 < e1 or (s2 == e1 and not open1)
    right_ok = s1 < e2 or (s1 == e2 and not open2)
    return left_ok and right_ok


def anchors_compatible(a: TimeAnchor, b: TimeAnchor, window: WindowPolicy) -> bool:
    return _extents_overlap(_dilated(a, window), _dilated(b, window))


@dataclass(frozen=True)
class RelationInstance:
    name: str
    axis: str
    left: Message
    right: Message
    distance: int | None = None    # diachronic only: report steps

    def key(self):
        return (self.axis, self.name, self.left.key(), self.right.key())


def _message_sort_key(m: Message):
    return (m.time.start, m.doc_id, m.sentence_index)


def sort_instances(instances) -> list[RelationInstance]:
    return sorted(instances, key=lambda r: (
        r.axis, r.name, _message_sort_key(r.left), _message_sort_key(r.right)))


def synchronic_pairs(messages: list[Message],
                     window: WindowPolicy) -> list[tuple[Message, Message]]:
    """All ordered cross-source pairs with window-compatible anchors."""
    ordered = sorted(messages, key=_message_sort_key)
    pairs = []
    for m1 in ordered:
        for m2 in ordered:
            if m1.key() == m2.key() or m1.source == m2.source:
                continue
            if anchors_compatible(m1.time, m2.time, window):
                pairs.append((m1, m2))
    return pairs


def diachronic_pairs(messages: list[Message]) -> list[tuple[Message, Message, int]]:
    """All same-source ordered pairs with strictly increasing anchor start,
    with their report distance (later report_index minus earlier)."""
    ordered = sorted(messages, key=_message_sort_key)
    pairs = []
    for m1 in ordered:
        for m2 in ordered:
            if m1.source != m2.source or not m1.time.start < m2.time.start:
                continue
            pairs.append((m1, m2, m2.report_index - m1.report_index))
    return pairs


def _distance_ok(constraint: tuple[str, int] | None, distance: int) -> bool:
    if constraint is None:
        return True
    op, k = constraint
    return distance == k if op == "==" else distance >= k


def evaluate_relations(messages: list[Message], relation_specs: list[RelationSpec],
                       window: WindowPolicy) -> list[RelationInstance]:
    """Match every relation spec against its axis candidates.

    Symmetric synchronic specs emit both directions. Output is deduplicated
    and deterministically sorted by (axis, name, left anchor, doc, sentence).
    """
    by_type: dict[str, list[Message]] = {}
    for m in sorted(messages, key=_message_sort_key):
        by_type.setdefault(m.msg_type, []).append(m)
    found: dict[tuple, RelationInstance] = {}

    def emit(inst: RelationInstance):
        found.setdefault(inst.key(), inst)

    for spec in relation_specs:
        lefts = by_type.get(spec.left_type, [])
        rights = by_type.get(spec.right_type, [])
        if spec.axis == SYNCHRONIC:
            for m1 in lefts:
                for m2 in rights:
                    if m1.key() == m2.key() or m1.source == m2.source:
                        continue
                    if not anchors_compatible(m1.time, m2.time, window):
                        continue
                    if all(evaluate_atom(a, m1.args, m2.args)
                           for a in spec.conditions):
                        emit(RelationInstance(spec.name, SYNCHRONIC, m1, m2))
                        if spec.symmetric:
                            emit(RelationInstance(spec.name, SYNCHRONIC, m2, m1))
        else:
            for m1 in lefts:
                for m2 in rights:
                    if m1.source != m2.source or not m1.time.start < m2.time.start:
                        continue
                    distance = m2.report_index - m1.report_index
                    if not _distance_ok(spec.distance, distance):
                        continue
                    if all(evaluate_atom(a, m1.args, m2.args)
                           for a in spec.conditions):
                        emit(RelationInstance(spec.name, DIACHRONIC, m1, m2,
                                              distance=distance))
    return sort_instances(found.values())


def brute_force_oracle(messages: list[Message], relation_specs: list[RelationSpec],
                       window: WindowPolicy) -> list[RelationInstance]:
    """Reference implementation: every ordered pair against every spec,
    every condition tested literally. Used by tests; shares no evaluation
    helpers with evaluate_relations."""
    half = window.width / 2
    results: dict[tuple, RelationInstance] = {}
    for spec in relation_specs:
        for m1 in messages:
            for m2 in messages:
                if m1.key() == m2.key():
                    continue
                if m1.msg_type != spec.left_type or m2.msg_type != spec.right_type:
                    continue
                if spec.axis == "synchronic":
                    if m1.source == m2.source:
                        continue
                    s1, e1, o1 = m1.time.extent()
                    s2, e2, o2 = m2.time.extent()
                    s1, e1 = s1 - half, e1 + half
                    s2, e2 = s2 - half, e2 + half
                    if not (s2 < e1 or (s2 == e1 and not o1)):
                        continue
                    if not (s1 < e2 or (s1 == e2 and not o2)):
                        continue
                    distance = None
                else:
                    if m1.source != m2.source:
                        continue
                    if not m1.time.start < m2.time.start:
                        continue
                    distance = m2.report_index - m1.report_index
                    if spec.distance is not None:
                        op, k = spec.distance
                        if op == "==" and distance != k:
                            continue
                        if op == ">=" and distance < k:
                            continue
                ok = True
                for atom in spec.conditions:
                    if atom.op == "const":
                        args = m1.args if atom.side == "left" else m2.args
                        slot = atom.left_slot if atom.side == "left" else atom.right_slot
                        if args.get(slot) is None or args.get(slot) != atom.value:
                            ok = False
                            break
                        continue
                    lv = m1.args.get(atom.left_slot)
                    rv = m2.args.get(atom.right_slot)
                    if lv is None or rv is None:
                        ok = False
                        break
                    if atom.op == "eq":
                        ok = lv == rv
                    elif atom.op == "neq":
                        ok = lv != rv
                    else:
                        if lv not in atom.scale or rv not in atom.scale:
                            ok = False
                            break
                        li = atom.scale.index(lv)
                        ri = atom.scale.index(rv)
                        ok = li < ri if atom.op == "lt" else li > ri
                    if not ok:
                        break
                if not ok:
                    continue
                inst = RelationInstance(spec.name, spec.axis, m1, m2,
                                        distance=distance)
                results.setdefault(inst.key(), inst)
                if spec.axis == "synchronic" and spec.symmetric:
                    rev = RelationInstance(spec.name, spec.axis, m2, m1)
                    results.setdefault(rev.key(), rev)
    return sort_instances(results.values())


# ---------------------------------------------------------------------------
# Window-aligned time buckets (shared with the summarizer)

@dataclass(frozen=True)
class Bucket:
    index: int
    label: str                      # ISO date of the earliest anchor start
    start: datetime
    messages: tuple[Message, ...]


def bucket_messages(messages: list[Message], window: WindowPolicy) -> list[Bucket]:
    """Partition messages into chronological groups of compatible anchors.

    Buckets are the connected components of the anchor-compatibility graph,
    computed by a sweep over dilated extents.
    """
    ordered = sorted(messages, key=_message_sort_key)
    buckets: list[Bucket] = []
    group: list[Message] = []
    hull = None

    def close():
        if group:
            buckets.append(Bucket(
                index=len(buckets),
                label=group[0].time.start.strftime("%Y-%m-%d"),
                start=group[0].time.start,
                messages=tuple(group)))

    for m in ordered:
        ext = _dilated(m.time, window)
        if hull is None or _extents_overlap(hull, ext):
            if hull is None:
                hull = ext
            else:
                # extend the hull end; a closed end outranks an open one
                s, e, o = hull
                if ext[1] > e or (ext[1] == e and o and not ext[2]):
                    e, o = ext[1], ext[2]
                hull = (s, e, o)
            group.append(m)
        else:
            close()
            group = [m]
            hull = ext
    close()
    return buckets


def bucket_index_of(message: Message, buckets: list[Bucket]) -> int:
    for b in buckets:
        for m in b.messages:
            if m.key() == message.key():
                return b.index
    raise KeyError(message.key())


# ---------------------------------------------------------------------------
# Ellipsis: incidents only one source covers in their window

@dataclass(frozen=True)
class EllipsisReport:
    message: Message
    bucket: int
    silent_sources: tuple[str, ...]


def detect_ellipsis(messages: list[Message], sources: set[str],
                    window: WindowPolicy) -> list[EllipsisReport]:
    """One report per message that some other source never echoes: the
    report lists every source with no window-compatible message of the
    same type."""
    if len(sources) < 2:
        raise ValueError("ellipsis detection needs at least two sources")
    buckets = bucket_messages(messages, window)
    reports = []
    for m in sorted(messages, key=_message_sort_key):
        silent = []
        for source in sorted(sources):
            if source == m.source:
                continue
            echoed = any(
                m2.source == source and m2.msg_type == m.msg_type
                and anchors_compatible(m.time, m2.time, window)
                for m2 in messages)
            if not echoed:
                silent.append(source)
        if silent:
            reports.append(EllipsisReport(
                message=m, bucket=bucket_index_of(m, buckets),
                silent_sources=tuple(silent)))
    return reports


# ---------------------------------------------------------------------------
# relations-jsonl-v1 artifact

def write_relations(instances: list[RelationInstance], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in sort_instances(instances):
            rec = {
                "name": r.name,
                "axis": r.axis,
                "left": {"doc_id": r.left.doc_id,
                         "sentence_index": r.left.sentence_index},
                "right": {"doc_id": r.right.doc_id,
                          "sentence_index": r.right.sentence_index},
            }
            if r.axis == DIACHRONIC:
                rec["distance"] = r.distance
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_relations(path: str | Path,
                   messages: list[Message]) -> list[RelationInstance]:
    by_key = {m.key(): m for m in messages}
    out = []
    with open(path, encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            rec = json.loads(raw)
            try:
                left = by_key[(rec["left"]["doc_id"], rec["left"]["sentence_index"])]
                right = by_key[(rec["right"]["doc_id"], rec["right"]["sentence_index"])]
            except KeyError as exc:
                raise MalformedRecord(f"relation references unknown message {exc}",
                                      str(path), ln) from None
            out.append(RelationInstance(
                name=rec["name"], axis=rec["axis"], left=left, right=right,
                distance=rec.get("distance")))
    return out


def write_ellipsis(reports: list[EllipsisReport], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in reports:
            rec = {"doc_id": r.message.doc_id,
                   "sentence_index": r.message.sentence_index,
                   "bucket": r.bucket,
                   "silent_sources": list(r.silent_sources)}
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_ellipsis(path: str | Path, messages: list[Message]) -> list[EllipsisReport]:
    by_key = {m.key(): m for m in messages}
    out = []
    with open(path, encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            rec = json.loads(raw)
            key = (rec["doc_id"], rec["sentence_index"])
            if key not in by_key:
                raise MalformedRecord(f"ellipsis references unknown message {key}",
                                      str(path), ln)
            out.append(EllipsisReport(
                message=by_key[key], bucket=rec["bucket"],
                silent_sources=tuple(rec["silent_sources"])))
    return out
