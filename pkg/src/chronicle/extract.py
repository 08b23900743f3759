"""Two-stage message extraction.

Stage one decides the message type of a sentence, either from trigger-lemma
rules or from a smoothed count-based classifier over lemma and named-entity
features. Stage two fills the message's arguments with ontology instances
mentioned in the sentence: type-compatible candidates, nearest to the
trigger, leftmost on ties, no token reuse. Every emitted message passes the
same validation as gold messages.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Corpus, Document, Sentence, _TOKEN_RE
from .errors import (EmptyTrainingSet, MalformedRecord, SlotTypeViolation,
                     UnknownMessageType, UnknownSlot)
from .ontology import (MessageTypeSpec, Ontology, TriggerStatement,
                       constraint_satisfied, is_subtype, load_trigger_statements)
from .temporal import GrammarPattern, TimeAnchor, message_time

log = logging.getLogger("chronicle.extract")

NONE_LABEL = "none"


@dataclass(frozen=True)
class Message:
    """A typed incident record, tagged with its source and resolved time."""

    msg_type: str
    args: dict[str, str | None]
    time: TimeAnchor
    source: str
    doc_id: str
    sentence_index: int
    trigger_span: tuple[int, int] | None = None
    report_index: int = 0

    def key(self) -> tuple[str, int]:
        return (self.doc_id, self.sentence_index)


@dataclass(frozen=True)
class TriggerRule:
    msg_type: str
    lemmas: tuple[str, ...]
    requires: tuple[str, ...] = ()


def load_trigger_rules(path: str | Path,
                       message_specs: list[MessageTypeSpec]) -> list[TriggerRule]:
    known = {m.name for m in message_specs}
    rules = []
    for st in load_trigger_statements(path):
        if st.msg_type not in known:
            raise UnknownMessageType(
                f"trigger references unknown message type {st.msg_type!r}",
                str(path), st.line)
        rules.append(TriggerRule(st.msg_type, st.lemmas, st.requires))
    return rules


# ---------------------------------------------------------------------------
# Stage one: type classification

class ClassifierModel:
    """Multinomial count model with add-one smoothing over lemma + NE features.

    Classes are the message types plus the reserved ``none`` label; scores
    are smoothed log posteriors. The class order is kept for tie-breaking
    (first match wins, ``none`` always last).
    """

    def __init__(self, classes: list[str], class_counts: dict[str, int],
                 feature_counts: dict[str, dict[str, int]],
                 vocabulary: set[str]):
        self.classes = list(classes)
        self.class_counts = dict(class_counts)
        self.feature_counts = {c: dict(fc) for c, fc in feature_counts.items()}
        self.vocabulary = set(vocabulary)
        self.total_examples = sum(class_counts.values())
        self.feature_totals = {c: sum(fc.values())
                               for c, fc in self.feature_counts.items()}

    def log_score(self, cls: str, features: list[str]) -> float:
        prior = self.class_counts[cls] / self.total_examples
        score = math.log(prior)
        denom = self.feature_totals[cls] + len(self.vocabulary)
        counts = self.feature_counts[cls]
        for f in features:
            if f not in self.vocabulary:
                continue
            score += math.log((counts.get(f, 0) + 1) / denom)
        return score

    def posteriors(self, sentence: Sentence) -> dict[str, float]:
        features = sentence_features(sentence)
        scores = {c: self.log_score(c, features) for c in self.classes}
        peak = max(scores.values())
        expd = {c: math.exp(s - peak) for c, s in scores.items()}
        norm = sum(expd.values())
        return {c: v / norm for c, v in expd.items()}


def sentence_features(sentence: Sentence) -> list[str]:
    features = [f"lemma:{t.lemma}" for t in sentence.tokens]
    features += [f"ne:{t.ne}" for t in sentence.tokens if t.ne is not None]
    return features


def train_classifier(labeled: list[tuple[Sentence, str | None]],
                     type_order: list[str] | None = None) -> ClassifierModel:
    """Train the count model; None labels stand for the ``none`` class.

    Deterministic and order-independent: only feature/class counts matter.
    ``type_order`` (normally spec-file order) fixes the tie-break order;
    by default classes are ordered by first appearance in the data.
    """
    if not labeled:
        raise EmptyTrainingSet("no labeled sentences")
    class_counts: dict[str, int] = {}
    feature_counts: dict[str, dict[str, int]] = {}
    vocabulary: set[str] = set()
    first_seen: list[str] = []
    for sentence, label in labeled:
        cls = NONE_LABEL if label is None else label
        if cls not in class_counts:
            class_counts[cls] = 0
            feature_counts[cls] = {}
            first_seen.append(cls)
        class_counts[cls] += 1
        for f in sentence_features(sentence):
            vocabulary.add(f)
            feature_counts[cls][f] = feature_counts[cls].get(f, 0) + 1

    if type_order is not None:
        order = [c for c in type_order if c in class_counts]
        order += [c for c in first_seen if c not in order and c != NONE_LABEL]
    else:
        order = [c for c in first_seen if c != NONE_LABEL]
    if NONE_LABEL in class_counts:
        order.append(NONE_LABEL)
    return ClassifierModel(order, class_counts, feature_counts, vocabulary)


def classify_sentence(sentence: Sentence,
                      model_or_rules,
                      mode: str = "rules") -> str | None:
    """Predict the message type of a sentence, or None.

    Rules mode: the first rule (spec-file order) whose trigger lemma occurs
    and whose NE requirements are all present wins. Statistical mode: argmax
    smoothed log score; ties break by class order with ``none`` last.
    """
    if mode == "rules":
        lemmas = set(sentence.lemmas())
        labels = sentence.ne_labels()
        for rule in model_or_rules:
            if any(l in lemmas for l in rule.lemmas) \
                    and all(r in labels for r in rule.requires):
                return rule.msg_type
        return None
    if mode == "statistical":
        model: ClassifierModel = model_or_rules
        features = sentence_features(sentence)
        best_cls, best_score = None, None
        ordered = [c for c in model.classes if c != NONE_LABEL]
        if NONE_LABEL in model.classes:
            ordered.append(NONE_LABEL)
        for cls in ordered:
            score = model.log_score(cls, features)
            if best_score is None or score > best_score:
                best_cls, best_score = cls, score
        return None if best_cls == NONE_LABEL else best_cls
    raise ValueError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# Stage two: argument filling

def _instance_spans(sentence: Sentence, ontology: Ontology) -> list[tuple[str, tuple[int, int]]]:
    """All (instance, token_span) occurrences in the sentence.

    An instance's surface form is its name with underscores as spaces,
    segmented by the corpus tokenizer and matched case-insensitively.
    """
    folded = [t.surface.lower() for t in sentence.tokens]
    out = []
    for instance, _ in ontology.instances:
        surface = instance.replace("_", " ")
        key = tuple(m.group(0).lower() for m in _TOKEN_RE.finditer(surface))
        if not key:
            continue
        for i in range(0, len(folded) - len(key) + 1):
            if tuple(folded[i:i + len(key)]) == key:
                out.append((instance, (i, i + len(key))))
    return out


def _span_distance(a: tuple[int, int], b: tuple[int, int]) -> int:
    if a[1] <= b[0]:
        return b[0] - a[1]
    if b[1] <= a[0]:
        return a[0] - b[1]
    return 0


def fill_arguments(sentence: Sentence, msg_type: str, ontology: Ontology,
                   spec: MessageTypeSpec,
                   trigger_span: tuple[int, int] | None = None) -> dict[str, str | None]:
    """Heuristic slot filling.

    Slots are filled in spec order. Candidates are instance mentions whose
    concept is a subtype of the slot constraint; the mention nearest the
    trigger wins (leftmost on ties, longer span preferred at equal start);
    a token span fills at most one slot; unfilled slots stay None.
    """
    assert spec.name == msg_type
    mentions = _instance_spans(sentence, ontology)
    anchor = trigger_span if trigger_span is not None else (0, 0)
    used: list[tuple[int, int]] = []
    args: dict[str, str | None] = {}
    for slot, concept in spec.slots:
        best = None
        for instance, span in mentions:
            if not is_subtype(ontology, ontology.concept_of(instance), concept):
                continue
            if any(span[0] < u[1] and u[0] < span[1] for u in used):
                continue
            key = (_span_distance(span, anchor), span[0], -(span[1] - span[0]), instance)
            if best is None or key < best[0]:
                best = (key, instance, span)
        if best is None:
            args[slot] = None
        else:
            args[slot] = best[1]
            used.append(best[2])
    return args


# ---------------------------------------------------------------------------
# Pipeline

@dataclass
class ExtractorConfig:
    mode: str = "rules"                       # rules | statistical
    rules: list[TriggerRule] = field(default_factory=list)
    model: ClassifierModel | None = None
    grammar: tuple[GrammarPattern, ...] | None = None


def trigger_span_for(sentence: Sentence, msg_type: str,
                     rules: list[TriggerRule]) -> tuple[int, int] | None:
    """First token whose lemma triggers ``msg_type``. Mode-independent."""
    wanted = set()
    for rule in rules:
        if rule.msg_type == msg_type:
            wanted.update(rule.lemmas)
    for i, token in enumerate(sentence.tokens):
        if token.lemma in wanted:
            return (i, i + 1)
    return None


def validate_message(msg: Message, specs: list[MessageTypeSpec],
                     ontology: Ontology) -> str | None:
    """Check a message against its type spec; returns a reason or None."""
    by_name = {m.name: m for m in specs}
    spec = by_name.get(msg.msg_type)
    if spec is None:
        return f"unknown message type {msg.msg_type!r}"
    for slot in msg.args:
        if slot not in spec.slot_names():
            return f"unknown slot {slot!r}"
    for slot, concept in spec.slots:
        value = msg.args.get(slot)
        if value is None:
            continue
        got = ontology.concept_of(value)
        if got is None:
            return f"{slot}: {value!r} is not an ontology instance"
        if not is_subtype(ontology, got, concept):
            return f"{slot}: {value!r} is not an instance of {concept!r}"
    for atom in spec.constraints:
        if not constraint_satisfied(atom, msg.args):
            return f"constraint violated: {atom.op} on " \
                   f"({atom.left_slot}, {atom.right_slot or atom.value})"
    return None


def extract_messages(document: Document, specs: list[MessageTypeSpec],
                     ontology: Ontology, config: ExtractorConfig) -> list[Message]:
    """Run both stages over a document; at most one message per sentence.

    Messages that violate their type's cross-slot constraints are discarded
    (with a logged reason), not repaired.
    """
    by_name = {m.name: m for m in specs}
    out: list[Message] = []
    for sentence in document.sentences:
        if config.mode == "rules":
            msg_type = classify_sentence(sentence, config.rules, "rules")
        else:
            msg_type = classify_sentence(sentence, config.model, "statistical")
        if msg_type is None:
            continue
        if msg_type not in by_name:
            log.info("skip %s#%d: predicted unknown type %r",
                     document.doc_id, sentence.index, msg_type)
            continue
        spec = by_name[msg_type]
        trigger = trigger_span_for(sentence, msg_type, config.rules)
        args = fill_arguments(sentence, msg_type, ontology, spec, trigger)
        anchor = message_time(sentence, document.publish_time, trigger,
                              config.grammar)
        msg = Message(msg_type=msg_type, args=args, time=anchor,
                      source=document.source, doc_id=document.doc_id,
                      sentence_index=sentence.index, trigger_span=trigger,
                      report_index=document.report_index)
        reason = validate_message(msg, specs, ontology)
        if reason is not None:
            log.info("discard %s#%d (%s): %s",
                     document.doc_id, sentence.index, msg_type, reason)
            continue
        out.append(msg)
    return out


def extract_corpus(corpus: Corpus, specs: list[MessageTypeSpec],
                   ontology: Ontology, config: ExtractorConfig) -> list[Message]:
    messages: list[Message] = []
    for doc in corpus.documents:
        messages.extend(extract_messages(doc, specs, ontology, config))
    return messages


# ---------------------------------------------------------------------------
# Gold messages (messages-jsonl-v1)

def load_gold_messages(path: str | Path, specs: list[MessageTypeSpec],
                       ontology: Ontology, corpus: Corpus) -> list[Message]:
    """Load hand-authored messages, validating every message invariant.

    Records: ``doc_id``, ``sentence_index``, ``type``, ``args`` (slot to
    instance or null), optional ``time`` (RFC 3339 day or instant; absent
    means the publication day). One message per sentence, as in extraction.
    """
    by_name = {m.name: m for m in specs}
    docs = {d.doc_id: d for d in corpus.documents}
    seen: set[tuple[str, int]] = set()
    messages = []
    with open(path, encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(f"invalid JSON ({exc.msg})", str(path), ln) from None
            for key in ("doc_id", "sentence_index", "type"):
                if key not in rec:
                    raise MalformedRecord(f"missing {key}", str(path), ln)
            doc = docs.get(rec["doc_id"])
            if doc is None:
                raise MalformedRecord(f"unknown doc_id {rec['doc_id']!r}",
                                      str(path), ln)
            sidx = rec["sentence_index"]
            if not isinstance(sidx, int) or not 0 <= sidx < len(doc.sentences):
                raise MalformedRecord(f"sentence_index {sidx!r} out of range",
                                      str(path), ln)
            if (doc.doc_id, sidx) in seen:
                raise MalformedRecord(
                    f"second message for sentence {doc.doc_id}#{sidx}",
                    str(path), ln)
            seen.add((doc.doc_id, sidx))
            msg_type = rec["type"]
            spec = by_name.get(msg_type)
            if spec is None:
                raise UnknownMessageType(f"unknown message type {msg_type!r}",
                                         str(path), ln)
            raw_args = rec.get("args", {})
            for slot in raw_args:
                if slot not in spec.slot_names():
                    raise UnknownSlot(
                        f"message type {msg_type!r} has no slot {slot!r}",
                        str(path), ln)
            args: dict[str, str | None] = {}
            for slot, concept in spec.slots:
                value = raw_args.get(slot)
                if value is not None:
                    got = ontology.concept_of(value)
                    if got is None or not is_subtype(ontology, got, concept):
                        raise SlotTypeViolation(msg_type, slot, value, concept)
                args[slot] = value
            if "time" in rec and rec["time"] is not None:
                anchor = TimeAnchor.from_string(rec["time"])
            else:
                anchor = TimeAnchor.day(doc.publish_time)
            msg = Message(msg_type=msg_type, args=args, time=anchor,
                          source=doc.source, doc_id=doc.doc_id,
                          sentence_index=sidx, trigger_span=None,
                          report_index=doc.report_index)
            reason = validate_message(msg, specs, ontology)
            if reason is not None:
                raise MalformedRecord(reason, str(path), ln)
            messages.append(msg)
    return messages


# ---------------------------------------------------------------------------
# Messages artifact (same wire format as gold files)

def write_messages(messages: list[Message], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for m in messages:
            rec = {"doc_id": m.doc_id, "sentence_index": m.sentence_index,
                   "type": m.msg_type, "args": m.args,
                   "time": m.time.to_string()}
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
