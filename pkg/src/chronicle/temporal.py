"""Temporal expression spotting and resolution against publication time.

The pattern grammar is data, not code: each grammar line pairs a token
pattern with a resolution rule id, so new domains or languages extend the
set without touching this module. Resolution is day-granular; a message
with no resolvable expression falls back to the publication day.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from importlib import resources
from pathlib import Path

from .corpus import Sentence, format_rfc3339, parse_rfc3339
from .errors import DslSyntaxError, UnparsableAnchor, UnresolvableExpression

UTC = timezone.utc

_MONTHS = {
    "january": 1, "february": 2, "march": 3, "april": 4, "may": 5, "june": 6,
    "july": 7, "august": 8, "september": 9, "october": 10, "november": 11,
    "december": 12,
    "jan": 1, "feb": 2, "mar": 3, "apr": 4, "jun": 6, "jul": 7, "aug": 8,
    "sep": 9, "sept": 9, "oct": 10, "nov": 11, "dec": 12,
}
_WEEKDAYS = {
    "monday": 0, "tuesday": 1, "wednesday": 2, "thursday": 3, "friday": 4,
    "saturday": 5, "sunday": 6,
    "mon": 0, "tue": 1, "wed": 2, "thu": 3, "fri": 4, "sat": 5, "sun": 6,
}

_ELEMENT_CLASSES = {"<num>", "<day>", "<year>", "<month>", "<weekday>", "<isodate>"}

_RULES = {"dmy", "iso", "days-ago", "weeks-ago",
          "last-weekday", "next-weekday", "on-weekday", "vague"}


@dataclass(frozen=True)
class TimeAnchor:
    """A resolved point or span on the timeline.

    ``day`` anchors keep start == end (midnight UTC); the day they denote
    covers [00:00, 24:00), which is what :meth:`extent` reports.
    """

    kind: str            # "instant" | "day" | "interval"
    start: datetime
    end: datetime

    def __post_init__(self):
        if self.kind not in ("instant", "day", "interval"):
            raise ValueError(f"bad anchor kind {self.kind!r}")
        if self.start > self.end:
            raise ValueError("anchor start after end")

    @classmethod
    def instant(cls, t: datetime) -> "TimeAnchor":
        t = t.astimezone(UTC).replace(second=0, microsecond=0)
        return cls("instant", t, t)

    @classmethod
    def day(cls, d) -> "TimeAnchor":
        if isinstance(d, datetime):
            d = d.astimezone(UTC).date()
        midnight = datetime(d.year, d.month, d.day, tzinfo=UTC)
        return cls("day", midnight, midnight)

    @classmethod
    def interval(cls, start: datetime, end: datetime) -> "TimeAnchor":
        return cls("interval",
                   start.astimezone(UTC).replace(second=0, microsecond=0),
                   end.astimezone(UTC).replace(second=0, microsecond=0))

    def extent(self) -> tuple[datetime, datetime, bool]:
        """Occupied interval as (start, end, end_is_exclusive)."""
        if self.kind == "day":
            return self.start, self.start + timedelta(days=1), True
        return self.start, self.end, False

    def to_string(self) -> str:
        if self.kind == "day":
            return self.start.strftime("%Y-%m-%d")
        if self.kind == "instant":
            return format_rfc3339(self.start)
        return f"{format_rfc3339(self.start)}/{format_rfc3339(self.end)}"

    @classmethod
    def from_string(cls, value: str) -> "TimeAnchor":
        if not isinstance(value, str) or not value.strip():
            raise UnparsableAnchor(repr(value))
        text = value.strip()
        try:
            if "/" in text:
                a, b = text.split("/", 1)
                return cls.interval(parse_rfc3339(a), parse_rfc3339(b))
            if "T" in text or " " in text:
                return cls.instant(parse_rfc3339(text))
            return cls.day(date.fromisoformat(text))
        except Exception:
            raise UnparsableAnchor(value) from None


@dataclass(frozen=True)
class TemporalExpression:
    sentence_index: int
    token_span: tuple[int, int]   # [start, end) token indices
    pattern_id: str
    raw: str
    rule: str
    captures: tuple[tuple[str, int | str], ...] = ()

    def capture(self, name: str):
        for key, val in self.captures:
            if key == name:
                return val
        raise KeyError(name)


@dataclass(frozen=True)
class GrammarPattern:
    pattern_id: str
    elements: tuple[str, ...]
    rule: str


def load_grammar(path: str | Path | None = None) -> tuple[GrammarPattern, ...]:
    """Load the pattern grammar; defaults to the grammar shipped as package data."""
    if path is None:
        text = resources.files("chronicle").joinpath(
            "data/temporal_patterns.txt").read_text(encoding="utf-8")
        name = "temporal_patterns.txt"
    else:
        text = Path(path).read_text(encoding="utf-8")
        name = str(path)
    patterns = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in raw.split("\t") if p.strip()]
        if len(parts) != 3:
            raise DslSyntaxError("expected pattern_id<TAB>tokens<TAB>rule", name, ln)
        pattern_id, tokens, rule = parts
        elements = tuple(tokens.split())
        for el in elements:
            if el.startswith("<") and el not in _ELEMENT_CLASSES:
                raise DslSyntaxError(f"unknown pattern element {el!r}", name, ln,
                                     raw.index(el) + 1)
        base = rule.split(":", 1)[0]
        if base not in _RULES and base != "day-offset":
            raise DslSyntaxError(f"unknown resolution rule {rule!r}", name, ln)
        patterns.append(GrammarPattern(pattern_id, elements, rule))
    return tuple(patterns)


_DEFAULT_GRAMMAR: tuple[GrammarPattern, ...] | None = None


def default_grammar() -> tuple[GrammarPattern, ...]:
    global _DEFAULT_GRAMMAR
    if _DEFAULT_GRAMMAR is None:
        _DEFAULT_GRAMMAR = load_grammar()
    return _DEFAULT_GRAMMAR


def _match_element(element: str, surface: str) -> tuple[str, int | str] | None | bool:
    """Return False (no match), True (literal match) or a (name, value) capture."""
    folded = surface.lower()
    if element == "<num>":
        return ("num", int(folded)) if folded.isdigit() else False
    if element == "<day>":
        if folded.isdigit() and len(folded) <= 2 and 1 <= int(folded) <= 31:
            return ("day", int(folded))
        return False
    if element == "<year>":
        return ("year", int(folded)) if folded.isdigit() and len(folded) == 4 else False
    if element == "<month>":
        return ("month", _MONTHS[folded]) if folded in _MONTHS else False
    if element == "<weekday>":
        return ("weekday", _WEEKDAYS[folded]) if folded in _WEEKDAYS else False
    if element == "<isodate>":
        parts = folded.split("-")
        if len(parts) == 3 and [len(p) for p in parts] == [4, 2, 2] \
                and all(p.isdigit() for p in parts):
            return ("isodate", folded)
        return False
    return folded == element.lower()


def find_temporal_expressions(
        sentence: Sentence,
        grammar: tuple[GrammarPattern, ...] | None = None) -> list[TemporalExpression]:
    """Scan a tokenized sentence for grammar matches.

    Matches are non-overlapping; at each position the longest matching
    pattern wins (grammar file order breaks length ties).
    """
    grammar = grammar if grammar is not None else default_grammar()
    ordered = sorted(range(len(grammar)), key=lambda i: (-len(grammar[i].elements), i))
    tokens = sentence.tokens
    found: list[TemporalExpression] = []
    i = 0
    while i < len(tokens):
        hit = None
        for gi in ordered:
            pat = grammar[gi]
            n = len(pat.elements)
            if i + n > len(tokens):
                continue
            captures = []
            ok = True
            for k, el in enumerate(pat.elements):
                res = _match_element(el, tokens[i + k].surface)
                if res is False:
                    ok = False
                    break
                if res is not True:
                    captures.append(res)
            if ok:
                raw = sentence.text[tokens[i].start:tokens[i + n - 1].end]
                hit = TemporalExpression(
                    sentence_index=sentence.index, token_span=(i, i + n),
                    pattern_id=pat.pattern_id, raw=raw, rule=pat.rule,
                    captures=tuple(captures))
                break
        if hit is not None:
            found.append(hit)
            i = hit.token_span[1]
        else:
            i += 1
    return found


def resolve(expr: TemporalExpression, publish_time: datetime) -> TimeAnchor:
    """Resolve an expression to a day anchor relative to the publication time.

    "last <weekday>" is the latest such weekday strictly before publication;
    "next <weekday>" the earliest strictly after; "on <weekday>" the nearest
    occurrence not after publication.
    """
    pub = publish_time.astimezone(UTC).date()
    rule = expr.rule
    if rule.startswith("day-offset:"):
        return TimeAnchor.day(pub + timedelta(days=int(rule.split(":", 1)[1])))
    if rule == "days-ago":
        return TimeAnchor.day(pub - timedelta(days=expr.capture("num")))
    if rule == "weeks-ago":
        return TimeAnchor.day(pub - timedelta(weeks=expr.capture("num")))
    if rule == "dmy":
        try:
            d = date(expr.capture("year"), expr.capture("month"), expr.capture("day"))
        except ValueError:
            raise UnresolvableExpression(expr.raw, expr.pattern_id) from None
        return TimeAnchor.day(d)
    if rule == "iso":
        try:
            d = date.fromisoformat(expr.capture("isodate"))
        except ValueError:
            raise UnresolvableExpression(expr.raw, expr.pattern_id) from None
        return TimeAnchor.day(d)
    if rule == "last-weekday":
        back = (pub.weekday() - expr.capture("weekday") - 1) % 7 + 1
        return TimeAnchor.day(pub - timedelta(days=back))
    if rule == "next-weekday":
        fwd = (expr.capture("weekday") - pub.weekday() - 1) % 7 + 1
        return TimeAnchor.day(pub + timedelta(days=fwd))
    if rule == "on-weekday":
        back = (pub.weekday() - expr.capture("weekday")) % 7
        return TimeAnchor.day(pub - timedelta(days=back))
    raise UnresolvableExpression(expr.raw, expr.pattern_id)


def _span_distance(a: tuple[int, int], b: tuple[int, int]) -> int:
    if a[1] <= b[0]:
        return b[0] - a[1]
    if b[1] <= a[0]:
        return a[0] - b[1]
    return 0


def message_time(msg_sentence: Sentence, publish_time: datetime,
                 trigger_span: tuple[int, int] | None = None,
                 grammar: tuple[GrammarPattern, ...] | None = None) -> TimeAnchor:
    """Anchor for a message found in ``msg_sentence``. Never fails.

    If the sentence carries at least one resolvable temporal expression the
    anchor of the one nearest the trigger span is used (leftmost on ties,
    leftmost overall when no trigger is known); otherwise the anchor is the
    publication day.
    """
    candidates: list[tuple[int, int, TimeAnchor]] = []
    for expr in find_temporal_expressions(msg_sentence, grammar):
        try:
            anchor = resolve(expr, publish_time)
        except UnresolvableExpression:
            continue
        dist = (_span_distance(expr.token_span, trigger_span)
                if trigger_span is not None else expr.token_span[0])
        candidates.append((dist, expr.token_span[0], anchor))
    if not candidates:
        return TimeAnchor.day(publish_time)
    candidates.sort(key=lambda c: (c[0], c[1]))
    return candidates[0][2]
