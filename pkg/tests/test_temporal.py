from __future__ import annotations

import random
from datetime import datetime, timedelta, timezone

import pytest

from chronicle.corpus import Sentence, tokenize
from chronicle.errors import UnresolvableExpression
from chronicle.temporal import (TimeAnchor, find_temporal_expressions,
                                message_time, resolve)

UTC = timezone.utc


def sent(text, index=0):
    return Sentence(index=index, text=text, tokens=tokenize(text))


def pub(y, m, d, hh=8, mm=30):
    return datetime(y, m, d, hh, mm, tzinfo=UTC)


def test_relative_day_expression_found():
    exprs = find_temporal_expressions(sent("they freed the hostage yesterday"))
    assert len(exprs) == 1
    assert exprs[0].pattern_id == "relative-day"
    assert exprs[0].raw == "yesterday"
    assert exprs[0].token_span == (4, 5)


def test_no_temporal_tokens():
    assert find_temporal_expressions(sent("talks resume")) == []


def test_absolute_date_found():
    exprs = find_temporal_expressions(
        sent("on 21 September 2004 the group issued a deadline"))
    assert len(exprs) == 1
    assert exprs[0].pattern_id == "absolute-date"
    assert exprs[0].raw == "21 September 2004"


def test_longest_match_wins():
    # "on <weekday>" must not shadow a following absolute date; here the
    # absolute date (3 tokens) outranks any 1-token pattern at its position
    exprs = find_temporal_expressions(sent("seen 21 September 2004 today"))
    assert [(e.pattern_id, e.raw) for e in exprs] == [
        ("absolute-date", "21 September 2004"), ("relative-day", "today")]


def test_resolve_yesterday():
    e = find_temporal_expressions(sent("it happened yesterday"))[0]
    assert resolve(e, pub(2004, 9, 10)) == TimeAnchor.day(datetime(2004, 9, 9))


def test_resolve_two_days_ago():
    e = find_temporal_expressions(sent("it happened 2 days ago"))[0]
    assert resolve(e, pub(2004, 9, 10)) == TimeAnchor.day(datetime(2004, 9, 8))


def test_resolve_last_tuesday():
    # 2004-09-10 is a Friday; the latest Tuesday strictly before is 09-07
    e = find_temporal_expressions(sent("talks broke down last Tuesday"))[0]
    assert resolve(e, pub(2004, 9, 10)) == TimeAnchor.day(datetime(2004, 9, 7))


def test_unresolvable_expression():
    e = find_temporal_expressions(sent("violence escalated recently"))[0]
    assert e.pattern_id == "vague"
    with pytest.raises(UnresolvableExpression):
        resolve(e, pub(2004, 9, 10))


def test_message_time_defaults_to_publication_day():
    anchor = message_time(sent("talks resume"), pub(2004, 9, 10))
    assert anchor == TimeAnchor.day(datetime(2004, 9, 10))


def test_message_time_survives_unresolvable():
    anchor = message_time(sent("violence escalated recently"), pub(2004, 9, 10))
    assert anchor == TimeAnchor.day(datetime(2004, 9, 10))


def test_message_time_reanchors_to_earlier_day():
    # a later report whose sentence points at the earlier day: its anchor
    # must equal the earlier report's publication day so the two align
    early = message_time(sent("the captors seized the compound"),
                         pub(2004, 9, 1, 0, 0))
    late = message_time(sent("the captors seized the compound yesterday"),
                        pub(2004, 9, 2, 0, 0))
    assert early == late == TimeAnchor.day(datetime(2004, 9, 1))


def test_message_time_picks_expression_nearest_trigger():
    s = sent("on 2004-09-03 talks began but the group struck today")
    trigger = None
    for i, t in enumerate(s.tokens):
        if t.surface == "struck":
            trigger = (i, i + 1)
    far = message_time(s, pub(2004, 9, 10), trigger_span=(2, 3))
    near = message_time(s, pub(2004, 9, 10), trigger_span=trigger)
    assert far == TimeAnchor.day(datetime(2004, 9, 3))
    assert near == TimeAnchor.day(datetime(2004, 9, 10))


def test_past_referring_anchors_never_after_publication():
    rng = random.Random(7)
    texts = ["it happened yesterday", "it happened 5 days ago",
             "it happened 2 weeks ago", "it happened last Monday",
             "it happened last Sunday", "seen on Thursday"]
    for _ in range(200):
        publish = datetime(2004, 1, 1, tzinfo=UTC) + \
            timedelta(days=rng.randint(0, 400), hours=rng.randint(0, 23))
        text = rng.choice(texts)
        e = find_temporal_expressions(sent(text))[0]
        anchor = resolve(e, publish)
        assert anchor.start.date() <= publish.date()


def test_determinism():
    s = sent("the captors demanded a ransom 3 days ago")
    p = pub(2004, 9, 20)
    assert message_time(s, p) == message_time(s, p)


def test_day_anchor_extent_covers_whole_day():
    a = TimeAnchor.day(datetime(2004, 9, 9))
    start, end, end_open = a.extent()
    assert end - start == timedelta(days=1)
    assert end_open
    assert a.start == a.end
