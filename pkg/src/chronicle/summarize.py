"""Relation-driven summary rendering.

The relation names carry the pragmatic content, so rendering is organized
around them: the document plan is a chronological walk over window-aligned
buckets; within a bucket, same-type messages connected by symmetric
equal-argument relations collapse into one sentence crediting all
concurring sources, differing variants render with per-source attribution,
diachronic chains of one relation collapse into a single trend sentence in
the bucket where they land, ellipsis reports call out the lone source, and
messages no relation touches fall back to per-type templates. Every
relation instance is consumed by exactly one sentence and the consumption
is reported as a coverage trace next to the text.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

from .errors import ChronicleError, DslSyntaxError, MissingTemplate
from .extract import Message
from .ontology import DIACHRONIC, SYNCHRONIC
from .relations import (Bucket, EllipsisReport, RelationInstance, WindowPolicy,
                        bucket_index_of, bucket_messages, sort_instances,
                        _message_sort_key)

_TEMPLATE_RE = re.compile(r'^template\s+([A-Za-z_][A-Za-z0-9_-]*)\s*:\s*"(.*)"\s*$')
_PLACEHOLDER_RE = re.compile(r"\{([A-Za-z0-9_.]+)\}")


@dataclass(frozen=True)
class SummaryTemplate:
    name: str          # relation name, "lone-<message type>", or "ellipsis"
    pattern: str


def load_templates(path: str | Path) -> dict[str, SummaryTemplate]:
    templates: dict[str, SummaryTemplate] = {}
    with open(path, encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            m = _TEMPLATE_RE.match(line)
            if not m:
                raise DslSyntaxError('expected: template <name>: "<pattern>"',
                                     str(path), ln, 1)
            name, pattern = m.group(1), m.group(2)
            if name in templates:
                raise DslSyntaxError(f"template {name!r} redeclared", str(path), ln)
            templates[name] = SummaryTemplate(name, pattern)
    return templates


@dataclass(frozen=True)
class RelationGraph:
    nodes: tuple[Message, ...]
    edges: tuple[RelationInstance, ...]
    buckets: tuple[Bucket, ...]
    window: WindowPolicy


def build_graph(messages: list[Message], relations: list[RelationInstance],
                window: WindowPolicy) -> RelationGraph:
    nodes = tuple(sorted(messages, key=_message_sort_key))
    node_keys = {m.key() for m in nodes}
    for r in relations:
        if r.left.key() not in node_keys or r.right.key() not in node_keys:
            raise ChronicleError(
                f"relation {r.name!r} references a message outside the graph")
    return RelationGraph(
        nodes=nodes, edges=tuple(sort_instances(relations)),
        buckets=tuple(bucket_messages(list(nodes), window)), window=window)


@dataclass(frozen=True)
class RenderResult:
    text: str
    sentences: tuple[str, ...]
    coverage: tuple[tuple[str, int], ...]   # (relation instance key, sentence)


def instance_key(r: RelationInstance) -> str:
    return (f"{r.axis}|{r.name}|{r.left.doc_id}#{r.left.sentence_index}"
            f"->{r.right.doc_id}#{r.right.sentence_index}")


def _pretty(value: str | None) -> str:
    return "unspecified" if value is None else value.replace("_", " ")


def _date_of(m: Message) -> str:
    return m.time.start.strftime("%Y-%m-%d")


def _join_sources(sources) -> str:
    items = sorted(set(sources))
    if len(items) == 1:
        return items[0]
    return ", ".join(items[:-1]) + " and " + items[-1]


def _pair_context(left: Message, right: Message, sources) -> dict[str, str]:
    ctx = {"sources": _join_sources(sources), "date": _date_of(left)}
    for side, msg in (("left", left), ("right", right)):
        ctx[f"{side}.source"] = msg.source
        ctx[f"{side}.date"] = _date_of(msg)
        ctx[f"{side}.type"] = msg.msg_type
        for slot, value in msg.args.items():
            ctx[f"{side}.{slot}"] = _pretty(value)
    return ctx


def _single_context(m: Message) -> dict[str, str]:
    ctx = {"source": m.source, "sources": m.source, "date": _date_of(m),
           "type": m.msg_type}
    for slot, value in m.args.items():
        ctx[slot] = _pretty(value)
    return ctx


def _render(pattern: str, ctx: dict[str, str], template_name: str) -> str:
    def sub(match: re.Match) -> str:
        key = match.group(1)
        if key not in ctx:
            raise ChronicleError(
                f"template {template_name!r}: unresolvable placeholder {{{key}}}")
        return ctx[key]
    return _PLACEHOLDER_RE.sub(sub, pattern)


class _UnionFind:
    def __init__(self):
        self.parent: dict = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _diachronic_chains(edges: list[RelationInstance]) -> list[list[RelationInstance]]:
    """Maximal same-name paths; each edge lands in exactly one chain."""
    chains: list[list[RelationInstance]] = []
    by_name: dict[str, list[RelationInstance]] = {}
    for e in edges:
        by_name.setdefault(e.name, []).append(e)
    for name in sorted(by_name):
        pool = sort_instances(by_name[name])
        unconsumed = {instance_key(e): e for e in pool}
        incoming = {e.right.key() for e in pool}

        def take_chain(start: RelationInstance) -> list[RelationInstance]:
            chain = [start]
            del unconsumed[instance_key(start)]
            cursor = start.right
            while True:
                nxt = None
                for e in pool:
                    if instance_key(e) in unconsumed and e.left.key() == cursor.key():
                        nxt = e
                        break
                if nxt is None:
                    return chain
                chain.append(nxt)
                del unconsumed[instance_key(nxt)]
                cursor = nxt.right

        for e in pool:
            if instance_key(e) in unconsumed and e.left.key() not in incoming:
                chains.append(take_chain(e))
        while unconsumed:
            first = next(e for e in pool if instance_key(e) in unconsumed)
            chains.append(take_chain(first))
    return chains


def render_summary(graph: RelationGraph,
                   templates: dict[str, SummaryTemplate],
                   ellipsis: list[EllipsisReport] = (),
                   bucket_budget: int | None = None) -> RenderResult:
    """Deterministic template rendering over the graph.

    Raises MissingTemplate (never skips silently) when a relation name, the
    "ellipsis" template, or a needed "lone-<type>" template is absent. The
    per-bucket budget only trims lone-message sentences; relation-driven
    and ellipsis sentences always render so coverage stays exact.
    """
    for name in sorted({e.name for e in graph.edges}):
        if name not in templates:
            raise MissingTemplate(name)
    if ellipsis and "ellipsis" not in templates:
        raise MissingTemplate("ellipsis")

    # (bucket, kind_rank, sort_key) -> rendered text + consumed instances
    planned: list[tuple[tuple, str, list[str]]] = []

    sync_edges = [e for e in graph.edges if e.axis == SYNCHRONIC]
    dia_edges = [e for e in graph.edges if e.axis == DIACHRONIC]
    buckets = list(graph.buckets)
    by_key = {m.key(): m for m in graph.nodes}

    # --- synchronic: collapse equal-argument groups, attribute variants
    by_name: dict[str, list[RelationInstance]] = {}
    for e in sync_edges:
        by_name.setdefault(e.name, []).append(e)
    for name in sorted(by_name):
        pool = sort_instances(by_name[name])
        equal = [e for e in pool
                 if e.left.msg_type == e.right.msg_type and e.left.args == e.right.args]
        rest = [e for e in pool if e not in equal]

        uf = _UnionFind()
        for e in equal:
            uf.union(e.left.key(), e.right.key())
        components: dict[tuple, list[RelationInstance]] = {}
        for e in equal:
            components.setdefault(uf.find(e.left.key()), []).append(e)
        for root in sorted(components):
            edges_c = components[root]
            members = {e.left.key() for e in edges_c} | {e.right.key() for e in edges_c}
            msgs = sorted((by_key[k] for k in members), key=_message_sort_key)
            rep = msgs[0]
            ctx = _pair_context(rep, rep, [m.source for m in msgs])
            text = _render(templates[name].pattern, ctx, name)
            order = (bucket_index_of(rep, buckets), 0, name,
                     _message_sort_key(rep))
            planned.append((order, text, [instance_key(e) for e in edges_c]))

        # group remaining directed instances into undirected pairs
        grouped: dict[tuple, list[RelationInstance]] = {}
        for e in rest:
            pair_id = (name,) + tuple(sorted([e.left.key(), e.right.key()]))
            grouped.setdefault(pair_id, []).append(e)
        for pair_id in sorted(grouped):
            edges_p = sort_instances(grouped[pair_id])
            canon = edges_p[0]
            ctx = _pair_context(canon.left, canon.right,
                                [canon.left.source, canon.right.source])
            text = _render(templates[name].pattern, ctx, name)
            order = (bucket_index_of(canon.left, buckets), 0, name,
                     _message_sort_key(canon.left))
            planned.append((order, text, [instance_key(e) for e in edges_p]))

    # --- diachronic: collapse same-name chains into trend sentences
    for chain in _diachronic_chains(dia_edges):
        name = chain[0].name
        head, tail = chain[0].left, chain[-1].right
        ctx = _pair_context(head, tail, [head.source])
        ctx["date"] = _date_of(tail)
        text = _render(templates[name].pattern, ctx, name)
        order = (bucket_index_of(tail, buckets), 1, name, _message_sort_key(tail))
        planned.append((order, text, [instance_key(e) for e in chain]))

    # --- ellipsis reports
    reported: set[tuple[str, int]] = set()
    for rep in ellipsis:
        reported.add(rep.message.key())
        ctx = _single_context(rep.message)
        ctx["silent"] = _join_sources(rep.silent_sources)
        text = _render(templates["ellipsis"].pattern, ctx, "ellipsis")
        order = (rep.bucket, 2, "ellipsis", _message_sort_key(rep.message))
        planned.append((order, text, []))

    # --- lone messages: no relation touches them, no ellipsis covers them
    touched = {e.left.key() for e in graph.edges} | \
              {e.right.key() for e in graph.edges} | reported
    lone_sentences: list[tuple[tuple, str]] = []
    for m in graph.nodes:
        if m.key() in touched:
            continue
        tname = f"lone-{m.msg_type}"
        if tname not in templates:
            raise MissingTemplate(tname)
        text = _render(templates[tname].pattern, _single_context(m), tname)
        order = (bucket_index_of(m, buckets), 3, tname, _message_sort_key(m))
        lone_sentences.append((order, text))

    planned.sort(key=lambda p: p[0])
    lone_sentences.sort(key=lambda p: p[0])

    # merge, applying the per-bucket budget to lone sentences only
    per_bucket: dict[int, int] = {}
    merged: list[tuple[tuple, str, list[str]]] = list(planned)
    for order, text in lone_sentences:
        bucket = order[0]
        mandatory = sum(1 for o, _, _ in planned if o[0] == bucket)
        used = per_bucket.get(bucket, 0)
        if bucket_budget is None or mandatory + used < bucket_budget:
            merged.append((order, text, []))
            per_bucket[bucket] = used + 1
    merged.sort(key=lambda p: p[0])

    sentences = tuple(text for _, text, _ in merged)
    coverage = []
    for idx, (_, _, consumed) in enumerate(merged):
        for key in consumed:
            coverage.append((key, idx))
    seen = [k for k, _ in coverage]
    assert len(seen) == len(set(seen)) == len(graph.edges), \
        "every relation instance must be consumed exactly once"
    text = "\n".join(sentences) + ("\n" if sentences else "")
    return RenderResult(text=text, sentences=sentences,
                        coverage=tuple(sorted(coverage)))


def coverage_to_json(result: RenderResult) -> dict:
    return {
        "sentences": list(result.sentences),
        "consumed": [{"relation": key, "sentence": idx}
                     for key, idx in result.coverage],
    }


# ---------------------------------------------------------------------------
# Graph export

def export_graph(graph: RelationGraph, format: str = "json") -> bytes:
    """Serialize the graph with stable field order ("json" or "dot")."""
    if format == "json":
        doc = {
            "nodes": [
                {"doc_id": m.doc_id, "sentence_index": m.sentence_index,
                 "type": m.msg_type, "source": m.source,
                 "time": m.time.to_string(), "args": m.args}
                for m in graph.nodes
            ],
            "edges": [
                {"name": r.name, "axis": r.axis,
                 "left": f"{r.left.doc_id}#{r.left.sentence_index}",
                 "right": f"{r.right.doc_id}#{r.right.sentence_index}",
                 "distance": r.distance}
                for r in graph.edges
            ],
            "buckets": [
                {"index": b.index, "label": b.label,
                 "members": [f"{m.doc_id}#{m.sentence_index}" for m in b.messages]}
                for b in graph.buckets
            ],
        }
        return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode("utf-8")
    if format == "dot":
        lines = ["digraph chronicle {"]
        for m in graph.nodes:
            node_id = f"{m.doc_id}#{m.sentence_index}"
            lines.append(f'  "{node_id}" [label="{m.msg_type}\\n{m.source}"];')
        for r in graph.edges:
            left = f"{r.left.doc_id}#{r.left.sentence_index}"
            right = f"{r.right.doc_id}#{r.right.sentence_index}"
            lines.append(f'  "{left}" -> "{right}" [label="{r.name}"];')
        lines.append("}")
        return ("\n".join(lines) + "\n").encode("utf-8")
    raise ValueError(f"unknown export format {format!r}")
