"""Pipeline command line: one subcommand per stage, artifacts on disk.

Every stage reads and writes only its declared artifacts inside --out-dir,
so stages can be rerun and diffed in isolation. Outputs are byte-stable
given identical inputs and seeds. Failures exit nonzero with one
machine-readable JSON error object on stderr. The CHRONICLE_LOG
environment variable (DEBUG/INFO/WARNING/ERROR) controls diagnostics.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import corpus as corpus_mod
from . import evolution as evolution_mod
from . import extract as extract_mod
from . import relations as relations_mod
from . import summarize as summarize_mod
from .errors import ChronicleError
from .ontology import load_message_specs, load_ontology, load_relation_specs
from .relations import parse_duration, parse_window

log = logging.getLogger("chronicle.cli")

CORPUS_ARTIFACT = "corpus.jsonl"
MESSAGES_ARTIFACT = "messages.jsonl"
RELATIONS_ARTIFACT = "relations.jsonl"
ELLIPSIS_ARTIFACT = "ellipsis.jsonl"
EVOLUTION_ARTIFACT = "evolution.json"
PLOT_ARTIFACT = "plot.csv"
SUMMARY_ARTIFACT = "summary.txt"
COVERAGE_ARTIFACT = "coverage.json"
SIMULATED_ARTIFACT = "simulated.jsonl"


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_domain(args):
    ontology_path = args.ontology
    specs_path = args.specs or args.ontology
    if ontology_path is None:
        ontology_path = specs_path
    ontology = load_ontology(ontology_path)
    message_specs = load_message_specs(specs_path, ontology)
    relation_specs = load_relation_specs(specs_path, message_specs, ontology)
    return ontology, message_specs, relation_specs, specs_path


def cmd_ingest(args) -> int:
    out = _out_dir(args)
    lexicon = corpus_mod.load_lexicon(args.lexicon) if args.lexicon else None
    gazetteer = corpus_mod.load_gazetteer(args.gazetteer) if args.gazetteer else None
    corpus = corpus_mod.load_corpus(args.corpus, "jsonl-v1",
                                    lexicon=lexicon, gazetteer=gazetteer)
    corpus_mod.write_corpus_artifact(corpus, out / CORPUS_ARTIFACT)
    log.info("ingested %d documents from %d sources",
             len(corpus.documents), len(corpus.sources))
    return 0


def _read_training(path: str, lexicon, gazetteer):
    labeled = []
    with open(path, encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            rec = json.loads(raw)
            tokens = corpus_mod.tokenize(rec["text"], lexicon, gazetteer)
            sentence = corpus_mod.Sentence(index=0, text=rec["text"], tokens=tokens)
            labeled.append((sentence, rec.get("type")))
    return labeled


def cmd_extract(args) -> int:
    out = _out_dir(args)
    ontology, message_specs, _, _ = _load_domain(args)
    corpus = corpus_mod.read_corpus_artifact(out / CORPUS_ARTIFACT)
    if args.mode == "gold":
        if not args.gold:
            raise ChronicleError("--mode gold requires --gold <messages file>")
        messages = extract_mod.load_gold_messages(
            args.gold, message_specs, ontology, corpus)
    else:
        rules = extract_mod.load_trigger_rules(args.specs or args.ontology,
                                               message_specs)
        config = extract_mod.ExtractorConfig(mode=args.mode, rules=rules)
        if args.mode == "statistical":
            if not args.train:
                raise ChronicleError("--mode statistical requires --train")
            lexicon = corpus_mod.load_lexicon(args.lexicon) if args.lexicon else None
            gazetteer = (corpus_mod.load_gazetteer(args.gazetteer)
                         if args.gazetteer else None)
            labeled = _read_training(args.train, lexicon, gazetteer)
            config.model = extract_mod.train_classifier(
                labeled, type_order=[m.name for m in message_specs])
        messages = extract_mod.extract_corpus(corpus, message_specs, ontology,
                                              config)
    extract_mod.write_messages(messages, out / MESSAGES_ARTIFACT)
    log.info("extracted %d messages", len(messages))
    return 0


def cmd_relate(args) -> int:
    out = _out_dir(args)
    ontology, message_specs, relation_specs, _ = _load_domain(args)
    corpus = corpus_mod.read_corpus_artifact(out / CORPUS_ARTIFACT)
    source = args.from_gold if args.from_gold else out / MESSAGES_ARTIFACT
    messages = extract_mod.load_gold_messages(source, message_specs, ontology,
                                              corpus)
    window = parse_window(args.window)
    instances = relations_mod.evaluate_relations(messages, relation_specs, window)
    relations_mod.write_relations(instances, out / RELATIONS_ARTIFACT)
    if len(corpus.sources) >= 2:
        reports = relations_mod.detect_ellipsis(messages, corpus.sources, window)
    else:
        reports = []
        log.info("single-source corpus: no ellipsis detection")
    relations_mod.write_ellipsis(reports, out / ELLIPSIS_ARTIFACT)
    log.info("emitted %d relation instances, %d ellipsis reports",
             len(instances), len(reports))
    return 0


def cmd_analyze(args) -> int:
    out = _out_dir(args)
    corpus = corpus_mod.read_corpus_artifact(out / CORPUS_ARTIFACT)
    report = evolution_mod.analyze_corpus(
        corpus,
        residual_threshold=args.residual_threshold,
        alignment_tolerance=parse_duration(args.emission_tolerance))
    with open(out / EVOLUTION_ARTIFACT, "w", encoding="utf-8") as fh:
        json.dump(evolution_mod.report_to_json(report), fh, indent=2,
                  sort_keys=True)
        fh.write("\n")
    with open(out / PLOT_ARTIFACT, "w", encoding="utf-8") as fh:
        fh.write(evolution_mod.plot_data_csv(corpus))
    log.info("event is %s with %s emission", report.linearity, report.emission)
    return 0


def cmd_summarize(args) -> int:
    out = _out_dir(args)
    ontology, message_specs, _, _ = _load_domain(args)
    corpus = corpus_mod.read_corpus_artifact(out / CORPUS_ARTIFACT)
    messages = extract_mod.load_gold_messages(
        out / MESSAGES_ARTIFACT, message_specs, ontology, corpus)
    instances = relations_mod.read_relations(out / RELATIONS_ARTIFACT, messages)
    ellipsis_path = out / ELLIPSIS_ARTIFACT
    reports = (relations_mod.read_ellipsis(ellipsis_path, messages)
               if ellipsis_path.exists() else [])
    window = parse_window(args.window)
    templates = summarize_mod.load_templates(args.templates)
    graph = summarize_mod.build_graph(messages, instances, window)
    result = summarize_mod.render_summary(graph, templates, reports,
                                          bucket_budget=args.bucket_budget)
    target = Path(args.out) if args.out else out / SUMMARY_ARTIFACT
    with open(target, "w", encoding="utf-8") as fh:
        fh.write(result.text)
    with open(out / COVERAGE_ARTIFACT, "w", encoding="utf-8") as fh:
        json.dump(summarize_mod.coverage_to_json(result), fh, indent=2,
                  sort_keys=True)
        fh.write("\n")
    if not args.out:
        sys.stdout.write(result.text)
    return 0


def cmd_simulate(args) -> int:
    out = _out_dir(args)
    offsets = tuple(int(x) for x in args.offsets.split(",")) if args.offsets else ()
    params = evolution_mod.StreamParams(
        seed=args.seed,
        period=parse_duration(args.period),
        jitter=args.jitter,
        source_offsets=offsets,
        burst_size=(args.burst_min, args.burst_max),
        intra_burst_gap=parse_duration(args.intra_gap),
        inter_burst_gap=parse_duration(args.inter_gap))
    corpus = evolution_mod.generate_stream(args.kind, args.sources, params,
                                           args.horizon)
    target = Path(args.out) if args.out else out / SIMULATED_ARTIFACT
    evolution_mod.write_stream(corpus, target)
    log.info("simulated %d documents", len(corpus.documents))
    return 0


def cmd_validate(args) -> int:
    ontology, message_specs, relation_specs, specs_path = _load_domain(args)
    triggers = extract_mod.load_trigger_rules(specs_path, message_specs)
    diagnostics = {
        "ok": True,
        "concepts": len(ontology.concepts),
        "instances": len(ontology.instances),
        "scales": len(ontology.ordered_scales),
        "message_types": sorted(m.name for m in message_specs),
        "relations": sorted({r.name for r in relation_specs}),
        "triggers": len(triggers),
    }
    if args.templates:
        diagnostics["templates"] = len(summarize_mod.load_templates(args.templates))
    json.dump(diagnostics, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chronicle",
        description="Summarize events evolving across multiple news sources.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_domain_flags(p, specs_required=True):
        p.add_argument("--specs", help="message/relation/trigger spec file")
        p.add_argument("--ontology",
                       required=specs_required,
                       help="ontology spec file (may be the same combined file)")

    p = sub.add_parser("ingest", help="load a raw corpus into the canonical model")
    p.add_argument("--corpus", required=True, help="raw jsonl-v1 corpus file")
    p.add_argument("--lexicon", help="surface<TAB>lemma table")
    p.add_argument("--gazetteer", help="surface<TAB>NE-label table")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("extract", help="extract messages from the corpus artifact")
    add_domain_flags(p)
    p.add_argument("--mode", choices=["rules", "statistical", "gold"],
                   default="rules")
    p.add_argument("--gold", help="gold messages file (mode gold)")
    p.add_argument("--train", help="labeled sentences jsonl (mode statistical)")
    p.add_argument("--lexicon")
    p.add_argument("--gazetteer")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("relate", help="evaluate relation rules over messages")
    add_domain_flags(p)
    p.add_argument("--window", required=True,
                   help="synchronic window width (0, 12h, 2d, 90m)")
    p.add_argument("--from-gold", metavar="FILE",
                   help="read messages from a gold file instead of the artifact")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_relate)

    p = sub.add_parser("analyze", help="classify evolution and emission")
    p.add_argument("--residual-threshold", type=float, default=0.1)
    p.add_argument("--emission-tolerance", default="1h")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("summarize", help="render the relation-driven summary")
    add_domain_flags(p)
    p.add_argument("--templates", required=True)
    p.add_argument("--window", required=True)
    p.add_argument("--bucket-budget", type=int, default=None)
    p.add_argument("--out", help="write the summary here instead of stdout")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("simulate", help="generate a synthetic corpus")
    p.add_argument("--kind", choices=["linear", "non-linear"], required=True)
    p.add_argument("--sources", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", type=int, default=10,
                   help="reports per source")
    p.add_argument("--period", default="7d")
    p.add_argument("--jitter", type=float, default=0.0)
    p.add_argument("--offsets", help="per-source offsets in minutes, comma-separated")
    p.add_argument("--intra-gap", default="6h")
    p.add_argument("--inter-gap", default="4d")
    p.add_argument("--burst-min", type=int, default=2)
    p.add_argument("--burst-max", type=int, default=5)
    p.add_argument("--out", help="write the corpus here")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("validate", help="check domain spec files")
    add_domain_flags(p)
    p.add_argument("--templates")
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    level = os.environ.get("CHRONICLE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ChronicleError as exc:
        json.dump({"stage": args.command, "error": type(exc).__name__,
                   "detail": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 2
    except (OSError, ValueError) as exc:
        json.dump({"stage": args.command, "error": type(exc).__name__,
                   "detail": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
