from __future__ import annotations

from pathlib import Path

import pytest

from chronicle.corpus import load_corpus, load_gazetteer, load_lexicon
from chronicle.extract import load_gold_messages
from chronicle.ontology import (load_message_specs, load_ontology,
                                load_relation_specs)

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def football():
    return domain_bundle("football")


@pytest.fixture(scope="session")
def hostage():
    return domain_bundle("hostage")


class DomainBundle:
    def __init__(self, name: str):
        self.root = FIXTURES / name
        self.spec_path = self.root / "domain.spec"
        self.ontology = load_ontology(self.spec_path)
        self.message_specs = load_message_specs(self.spec_path, self.ontology)
        self.relation_specs = load_relation_specs(
            self.spec_path, self.message_specs, self.ontology)
        self.lexicon = load_lexicon(self.root / "lexicon.tsv")
        self.gazetteer = load_gazetteer(self.root / "gazetteer.tsv")
        self.corpus = load_corpus(self.root / "corpus.jsonl",
                                  lexicon=self.lexicon,
                                  gazetteer=self.gazetteer)
        self.gold = load_gold_messages(self.root / "gold_messages.jsonl",
                                       self.message_specs, self.ontology,
                                       self.corpus)
        self.templates_path = self.root / "templates.txt"


def domain_bundle(name: str) -> DomainBundle:
    return DomainBundle(name)
