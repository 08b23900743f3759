from __future__ import annotations

import json
from datetime import timedelta

import pytest

from chronicle.corpus import (load_corpus, parse_rfc3339, tokenize)
from chronicle.errors import DuplicateDocId, MalformedRecord, UnparsableTimestamp


def write_jsonl(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records))
    return path


def test_two_docs_same_timestamp_rank_zero_each(tmp_path):
    path = write_jsonl(tmp_path / "c.jsonl", [
        {"doc_id": "a1", "source": "A", "publish_time": "2004-09-10T08:00:00Z",
         "text": ["one sentence"]},
        {"doc_id": "b1", "source": "B", "publish_time": "2004-09-10T08:00:00Z",
         "text": ["another sentence"]},
    ])
    corpus = load_corpus(path)
    assert len(corpus.documents) == 2
    assert all(d.report_index == 0 for d in corpus.documents)
    assert corpus.sources == {"A", "B"}


def test_hostage_fixture_counts_span_and_ranks(hostage):
    corpus = hostage.corpus
    per_source = {}
    for d in corpus.documents:
        per_source.setdefault(d.source, []).append(d)
    assert len(per_source) == 5
    for docs in per_source.values():
        assert 5 <= len(docs) <= 12
        assert [d.report_index for d in sorted(docs, key=lambda d: d.publish_time)] \
            == list(range(len(docs)))
    times = [d.publish_time for d in corpus.documents]
    span = max(times) - min(times)
    assert timedelta(days=20) <= span <= timedelta(days=25)


def test_duplicate_doc_id_rejected(tmp_path):
    path = write_jsonl(tmp_path / "c.jsonl", [
        {"doc_id": "a1", "source": "A", "publish_time": "2004-09-10T08:00:00Z",
         "text": ["x"]},
        {"doc_id": "a1", "source": "A", "publish_time": "2004-09-11T08:00:00Z",
         "text": ["y"]},
    ])
    with pytest.raises(DuplicateDocId) as err:
        load_corpus(path)
    assert "a1" in str(err.value)


@pytest.mark.parametrize("record, fragment", [
    ({"doc_id": "a1", "publish_time": "2004-09-10T08:00:00Z", "text": ["x"]},
     "source"),
    ({"doc_id": "a1", "source": "A", "text": ["x"]}, "publish_time"),
    ({"doc_id": "a1", "source": "A", "publish_time": "2004-09-10T08:00:00Z",
      "text": []}, "sentences"),
    ({"source": "A", "publish_time": "2004-09-10T08:00:00Z", "text": ["x"]},
     "doc_id"),
])
def test_malformed_records_rejected(tmp_path, record, fragment):
    path = write_jsonl(tmp_path / "c.jsonl", [record])
    with pytest.raises(MalformedRecord) as err:
        load_corpus(path)
    assert fragment in str(err.value)


def test_unparsable_timestamp(tmp_path):
    path = write_jsonl(tmp_path / "c.jsonl", [
        {"doc_id": "a1", "source": "A", "publish_time": "not a time",
         "text": ["x"]}])
    with pytest.raises(UnparsableTimestamp):
        load_corpus(path)


def test_timestamps_normalized_to_utc_minutes():
    t = parse_rfc3339("2004-09-10T10:30:45+02:00")
    assert t.strftime("%Y-%m-%dT%H:%M:%SZ") == "2004-09-10T08:30:00Z"
    assert parse_rfc3339("2004-09-10T08:30:00").utcoffset() == timedelta(0)


def test_tokenize_empty():
    assert tokenize("") == ()


def test_tokenize_lexicon_lemmas():
    tokens = tokenize("freed the hostages", {"freed": "free", "hostages": "hostage"})
    assert [(t.surface, t.lemma) for t in tokens] == [
        ("freed", "free"), ("the", "the"), ("hostages", "hostage")]


def test_tokenize_gazetteer_label():
    tokens = tokenize("Al-Jazeera reported", ne_gazetteer={"Al-Jazeera": "ORG"})
    assert tokens[0].surface == "Al-Jazeera"
    assert tokens[0].ne == "ORG"
    assert tokens[1].ne is None


def test_tokenize_multiword_gazetteer_longest_first():
    gaz = {"Italian government": "ORG", "government": "MISC"}
    tokens = tokenize("the Italian government spoke", ne_gazetteer=gaz)
    assert [t.ne for t in tokens] == [None, "ORG", "ORG", None]


@pytest.mark.parametrize("text", [
    "The captors seized the compound and the occupation began.",
    "hyphen-words and  double  spaces survive",
    "punct! (everywhere), right?",
    "",
])
def test_tokens_reconstruct_text(text):
    tokens = tokenize(text)
    rebuilt = []
    cursor = 0
    for t in tokens:
        rebuilt.append(text[cursor:t.start])
        rebuilt.append(text[t.start:t.end])
        assert text[t.start:t.end] == t.surface
        cursor = t.end
    rebuilt.append(text[cursor:])
    assert "".join(rebuilt) == text


def test_load_is_idempotent(hostage):
    again = load_corpus(hostage.root / "corpus.jsonl",
                        lexicon=hostage.lexicon, gazetteer=hostage.gazetteer)
    assert again == hostage.corpus


def test_publish_time_nondecreasing_over_report_index(hostage, football):
    for corpus in (hostage.corpus, football.corpus):
        per_source = {}
        for d in corpus.documents:
            per_source.setdefault(d.source, []).append(d)
        for docs in per_source.values():
            docs.sort(key=lambda d: d.report_index)
            for a, b in zip(docs, docs[1:]):
                assert a.publish_time <= b.publish_time
