"""Command-line interface: one subcommand per stage.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 stage failure.
Failures print a single JSON object ``{"error": <category>, "message": ...}``
to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._io import atomic_write_text, read_csv, write_csv
from .cleaning import ReferenceOracle, binarize, load_thresholds, save_thresholds, search_thresholds
from .config import RunConfig, load_config, require_files
from .datamodel import (
    AnnotatedDataset,
    AttributeSchema,
    align_rows,
    generate_synthetic,
    load_annotations,
    load_continuous,
    load_dataset,
    load_embeddings,
    load_schema,
    save_annotations,
    save_continuous,
    save_dataset,
    save_schema,
    split_subject_exclusive,
)
from .errors import AttrTransferError, ConfigError, DataError, ParseError
from .mac import load_model, save_model
from .pipeline import (
    SourceAnnotations,
    SourcePredictions,
    load_calibration,
    provenance_rows,
    save_calibration,
    transfer,
    write_provenance,
)
from .pipeline.run import calibrate_source, combine, train_source
from .recognition import (
    HammingComparator,
    all_pairs,
    attribute_importance,
    eval_closed_set,
    eval_open_set,
    eval_verification,
    fuse_scores,
    load_logreg,
    save_logreg,
    select_gallery,
    split_open_set,
    train_logreg,
    valid_filter,
    verification_scores,
)
from .recognition.io import load_scores, save_scores, scoreset_from, write_cmc, write_det, write_verification
from .reports import annotation_stats, quality_csv, quality_report, quality_text, stats_csv, stats_text

log = logging.getLogger("attrtransfer")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_STAGE = 0, 2, 3, 4


# ---------------------------------------------------------------------------
# helpers


def _schema_for(cfg: RunConfig, entry) -> AttributeSchema:
    path = entry.schema or cfg.schema
    if path is None:
        raise ConfigError(f"no schema given for dataset {entry.name!r}")
    require_files(cfg, path)
    return load_schema(cfg.resolve(path))


def _load_source(cfg: RunConfig, name: str) -> tuple[int, AnnotatedDataset]:
    index, entry = cfg.source(name)
    if entry.annotations is None:
        raise ConfigError(f"source {name!r} has no annotations file")
    require_files(cfg, entry.embeddings, entry.annotations)
    schema = _schema_for(cfg, entry)
    ds = load_dataset(cfg.resolve(entry.embeddings), cfg.resolve(entry.annotations), schema, name=name)
    return index, ds


def _target_embeddings(cfg: RunConfig):
    if cfg.target is None:
        raise ConfigError("config has no target dataset")
    require_files(cfg, cfg.target.embeddings)
    return load_embeddings(cfg.resolve(cfg.target.embeddings))


def _subjects(path):
    sids, subj, _ = load_embeddings(path)
    return sids, subj


# ---------------------------------------------------------------------------
# commands


def cmd_generate(cfg: RunConfig, args) -> int:
    """Write synthetic source and target datasets plus their hidden truth."""
    if not cfg.synthetic:
        raise ConfigError("generate needs a 'synthetic' section in the config")
    spec, subsets = cfg.synthetic_spec()
    data = generate_synthetic(spec, cfg.seed)
    out, meta = Path(args.out), cfg.meta()
    schema = spec.resolved_schema()
    save_schema(schema, out / "schema.json")
    listing = {"schema": "schema.json", "sources": [], "target": None}
    if subsets is not None and len(subsets) != len(data.sources):
        raise ConfigError("synthetic.source_attributes must list one attribute set per source")
    for i, ds in enumerate(data.sources):
        names = subsets[i] if subsets is not None else schema.names
        sub = ds.select_attributes(names)
        save_dataset(sub, out / f"{ds.name}_embeddings.csv", out / f"{ds.name}_annotations.csv",
                     out / f"{ds.name}_schema.json", meta)
        listing["sources"].append(
            {"name": ds.name, "embeddings": f"{ds.name}_embeddings.csv",
             "annotations": f"{ds.name}_annotations.csv", "schema": f"{ds.name}_schema.json"}
        )
    t = data.target
    save_dataset(t, out / f"{t.name}_embeddings.csv", out / f"{t.name}_annotations.csv", None, meta)
    listing["target"] = {"name": t.name, "embeddings": f"{t.name}_embeddings.csv", "annotations": f"{t.name}_annotations.csv"}
    for name, truth in data.truth.items():
        ids = t.sample_ids if name == t.name else next(d.sample_ids for d in data.sources if d.name == name)
        save_annotations(ids, truth, schema, out / f"{name}_truth.csv", meta)
    atomic_write_text(out / "datasets.json", json.dumps(listing, indent=2) + "\n")
    return EXIT_OK


def cmd_clean(cfg: RunConfig, args) -> int:
    """Binarise continuous annotations with given or searched thresholds."""
    require_files(cfg, args.scores)
    sids, names, scores = load_continuous(cfg.resolve(args.scores))
    out, meta = Path(args.out), cfg.meta()
    if args.thresholds:
        require_files(cfg, args.thresholds)
        thresholds = load_thresholds(cfg.resolve(args.thresholds))
    elif args.reference:
        require_files(cfg, args.reference)
        ref_ids, ref_names, ref = load_annotations(cfg.resolve(args.reference))
        ref = align_rows(sids, ref_ids, ref, "reference")
        oracle = ReferenceOracle(sids, ref_names, ref)
        c = cfg.cleaning
        thresholds = {
            n: search_thresholds(scores[:, k], sids, n, oracle, c.window, c.required_correct, c.step)
            for k, n in enumerate(names)
        }
    else:
        raise ConfigError("clean needs --thresholds or --reference")
    labels = binarize(scores, thresholds, names)
    save_thresholds({n: thresholds[n] for n in names}, out / "thresholds.csv", meta)
    schema = AttributeSchema.simple(names)
    save_annotations(sids, labels, schema, out / "annotations.csv", meta)
    unusable = [n for n in names if not thresholds[n].usable]
    if unusable:
        log.warning("unusable attributes (all annotations rejected): %s", unusable)
    return EXIT_OK


def cmd_train(cfg: RunConfig, args) -> int:
    """Split a source subject-exclusively and train its classifier."""
    index, src = _load_source(cfg, args.source)
    split, _, model, tlog = train_source(src, index, cfg.pipeline())
    out, meta = Path(args.out), cfg.meta()
    save_model(model, out / f"{src.name}.mac", provenance=meta)
    rows = [[s, "train"] for s in sorted(split.train_subjects)] + [[s, "test"] for s in sorted(split.test_subjects)]
    write_csv(out / f"{src.name}_split.csv", ["subject_id", "side"], rows, meta)
    write_csv(
        out / f"{src.name}_loss.csv",
        ["epoch", "learning_rate", "loss"],
        ([str(e), repr(lr), repr(loss)] for e, (lr, loss) in enumerate(zip(tlog.learning_rates, tlog.epoch_losses))),
        meta,
    )
    if tlog.skipped:
        log.warning("%s: branches without training labels: %s", src.name, tlog.skipped)
    return EXIT_OK


def _read_split(path):
    header, rows = read_csv(path)
    if header != ["subject_id", "side"]:
        raise ParseError(path, 1, "header must be subject_id,side")
    train, test = set(), set()
    for line, row in rows:
        if len(row) != 2 or row[1] not in ("train", "test"):
            raise ParseError(path, line, "malformed split row")
        (train if row[1] == "train" else test).add(row[0])
    return train, test


def cmd_calibrate(cfg: RunConfig, args) -> int:
    """Predict on the source test part and the target, then fix thresholds."""
    index, src = _load_source(cfg, args.source)
    inp = Path(args.input or args.out)
    model_path = Path(args.model) if args.model else inp / f"{src.name}.mac"
    split_path = Path(args.split) if args.split else inp / f"{src.name}_split.csv"
    for p in (model_path, split_path):
        if not p.is_file():
            raise ConfigError(f"missing input file: {p}")
    model = load_model(model_path, src.schema)
    _, test_subjects = _read_split(split_path)
    test = src.select_subjects(test_subjects)
    tids, _, temb = _target_embeddings(cfg)
    table, preds = calibrate_source(model, test, temb, index, cfg.pipeline(), name=src.name)
    out, meta = Path(args.out), cfg.meta()
    save_calibration(table, out / f"{src.name}_calibration.csv", out / f"{src.name}_support.csv", meta)
    save_annotations(tids, preds.p, src.schema, out / f"{src.name}_target_p.csv", meta)
    save_continuous(tids, preds.r, src.schema, out / f"{src.name}_target_r.csv", meta)
    return EXIT_OK


def cmd_transfer(cfg: RunConfig, args) -> int:
    """Reject, merge and repair per-source target predictions."""
    inp = Path(args.input or args.out)
    if not cfg.sources:
        raise ConfigError("config lists no sources")
    tids, _, _ = _target_embeddings(cfg)
    annotated = []
    for entry in cfg.sources:
        schema = _schema_for(cfg, entry)
        files = [inp / f"{entry.name}_{s}" for s in ("calibration.csv", "support.csv", "target_p.csv", "target_r.csv")]
        missing = [str(f) for f in files if not f.is_file()]
        if missing:
            raise ConfigError(f"missing stage outputs: {missing}")
        table = load_calibration(files[0], files[1])
        pid, _, p = load_annotations(files[2], schema)
        rid, _, r = load_continuous(files[3], schema)
        p = align_rows(tids, pid, p, "target predictions")
        r = align_rows(tids, rid, r, "target reliabilities")
        preds = SourcePredictions(entry.name, schema, p, r)
        annotated.append(SourceAnnotations(entry.name, schema, transfer(preds, table), preds.r, table))
    target_schema = load_schema(cfg.resolve(cfg.schema)) if cfg.schema else None
    labels, choice, _, schema = combine(annotated, target_schema, cfg.pipeline())
    out, meta = Path(args.out), cfg.meta()
    save_annotations(tids, labels, schema, out / "target_annotations.csv", meta)
    rows = provenance_rows(labels, schema, choice, [(a.name, a.table) for a in annotated])
    write_provenance(rows, out / "provenance.csv", out / "provenance.txt", meta)
    return EXIT_OK


def cmd_stats(cfg: RunConfig, args) -> int:
    require_files(cfg, args.annotations)
    schema = load_schema(cfg.resolve(args.schema)) if args.schema else None
    _, names, ann = load_annotations(cfg.resolve(args.annotations), schema)
    report = annotation_stats(ann, names)
    out, meta = Path(args.out), cfg.meta()
    atomic_write_text(out / "stats.csv", stats_csv(report, meta))
    atomic_write_text(out / "stats.txt", stats_text(report))
    return EXIT_OK


def cmd_evaluate_labels(cfg: RunConfig, args) -> int:
    require_files(cfg, args.predicted, args.truth)
    pid, names, pred = load_annotations(cfg.resolve(args.predicted))
    tid, tnames, truth = load_annotations(cfg.resolve(args.truth))
    missing = [n for n in names if n not in tnames]
    if missing:
        raise DataError(f"truth file lacks attributes {missing}")
    truth = truth[:, [tnames.index(n) for n in names]]
    truth = align_rows(pid, tid, truth, "truth")
    rows, total = quality_report(pred, truth, names)
    out, meta = Path(args.out), cfg.meta()
    atomic_write_text(out / "quality.csv", quality_csv(rows, total, meta))
    atomic_write_text(out / "quality.txt", quality_text(rows, total))
    return EXIT_OK


def _recognition_inputs(cfg: RunConfig, args):
    require_files(cfg, args.annotations, args.subjects)
    aid, names, ann = load_annotations(cfg.resolve(args.annotations))
    sids, subj = _subjects(cfg.resolve(args.subjects))
    subj_of = dict(zip(sids, subj))
    missing = [s for s in aid if s not in subj_of]
    if missing:
        raise DataError(f"samples without subject ids: {missing[:5]}")
    subjects = np.array([subj_of[s] for s in aid])
    wanted = cfg.recognition.attributes
    if wanted:
        unknown = [n for n in wanted if n not in names]
        if unknown:
            raise ConfigError(f"recognition.attributes not in annotation file: {unknown}")
        ann = ann[:, [names.index(n) for n in wanted]]
        names = list(wanted)
    return np.array(aid), names, ann, subjects


def cmd_recog_train(cfg: RunConfig, args) -> int:
    """Subject-exclusive split and logistic comparator training."""
    from .recognition import PairSamplingConfig

    aid, names, ann, subjects = _recognition_inputs(cfg, args)
    rc = cfg.recognition
    split = split_subject_exclusive(subjects, rc.train_fraction, cfg.seed)
    train_mask = np.isin(subjects, list(split.train_subjects))
    sampling = PairSamplingConfig(rc.max_genuine_per_subject, rc.imposter_ratio, rc.min_overlap)
    comp = train_logreg(ann[train_mask], subjects[train_mask], sampling, cfg.seed, rc.l2)
    schema = AttributeSchema.simple(names)
    out, meta = Path(args.out), cfg.meta()
    save_logreg(comp, schema, out / "logreg.csv", meta)
    rows = [[s, "train"] for s in sorted(split.train_subjects)] + [[s, "test"] for s in sorted(split.test_subjects)]
    write_csv(out / "recog_split.csv", ["subject_id", "side"], rows, meta)
    imp = attribute_importance(comp, schema)
    slots = list(imp)
    body = ([n] + [repr(imp[s][k][1]) for s in slots] for k, n in enumerate(names))
    write_csv(out / "importance.csv", ["attribute", *slots], body, meta)
    return EXIT_OK


def cmd_recog_eval(cfg: RunConfig, args) -> int:
    """Verification, closed-set and open-set evaluation on the test identities."""
    aid, names, ann, subjects = _recognition_inputs(cfg, args)
    rc = cfg.recognition
    inp = Path(args.input or args.out)
    if args.comparator == "logreg":
        model = Path(args.model) if args.model else inp / "logreg.csv"
        if not model.is_file():
            raise ConfigError(f"missing comparator file: {model}")
        comp = load_logreg(model, AttributeSchema.simple(names))
    else:
        comp = HammingComparator(literal=args.literal)
    split_path = Path(args.split) if args.split else inp / "recog_split.csv"
    if split_path.is_file():
        _, test_subjects = _read_split(split_path)
        keep = np.isin(subjects, list(test_subjects))
        aid, ann, subjects = aid[keep], ann[keep], subjects[keep]
    out, meta = Path(args.out), cfg.meta()
    prefix = args.comparator

    pairs = valid_filter(all_pairs(ann, subjects), rc.min_overlap)
    scores, raw = verification_scores(comp, ann, pairs)
    save_scores(out / f"{prefix}_scores.csv", aid[pairs.ref], aid[pairs.probe], pairs.genuine, raw, meta)
    ver = eval_verification(scores, rc.fmr_targets)
    write_verification(ver, out / f"{prefix}_roc.csv", out / f"{prefix}_summary.json", meta,
                       extra={"valid_pairs": len(pairs)})

    closed = eval_closed_set(ann, subjects, list(aid), comp, rc.min_overlap)
    write_cmc(closed, out / f"{prefix}_cmc.csv", meta)

    enrolled, unenrolled = split_open_set(subjects, rc.unenrolled_fraction, cfg.seed)
    enr = np.isin(subjects, enrolled)
    g_local, p_local = select_gallery(ann[enr], subjects[enr], list(aid[enr]))
    enr_idx = np.flatnonzero(enr)
    gallery, probes = enr_idx[g_local], enr_idx[p_local]
    unenr = np.flatnonzero(~enr)
    det = eval_open_set(ann[gallery], subjects[gallery], ann[probes], subjects[probes], ann[unenr], comp, rc.min_overlap)
    write_det(det, out / f"{prefix}_det.csv", meta)
    return EXIT_OK


def _aligned_scores(path_a, path_b):
    ra, pa, ga, sa = load_scores(path_a)
    rb, pb, gb, sb = load_scores(path_b)
    key_b = {(r, p): k for k, (r, p) in enumerate(zip(rb, pb))}
    if len(key_b) != len(rb) or set(key_b) != set(zip(ra, pa)):
        raise DataError("score files do not cover the same comparison pairs")
    order = np.array([key_b[(r, p)] for r, p in zip(ra, pa)], dtype=int)
    if (gb[order] != ga).any():
        raise DataError("score files disagree on genuine/imposter labels")
    return ra, pa, ga, sa, sb[order]


def cmd_fuse(cfg: RunConfig, args) -> int:
    """EER-weighted fusion of two aligned score files."""
    require_files(cfg, args.primary, args.secondary)
    refs, probes, gen, s1, s2 = _aligned_scores(cfg.resolve(args.primary), cfg.resolve(args.secondary))
    fused, weights = fuse_scores(scoreset_from(gen, s1), scoreset_from(gen, s2), mode=cfg.recognition.fusion_mode)
    scores = np.empty(len(gen))
    scores[gen] = fused.genuine
    scores[~gen] = fused.imposter
    out, meta = Path(args.out), cfg.meta()
    save_scores(out / "fused_scores.csv", refs, probes, gen, scores, meta)
    ver = eval_verification(fused, cfg.recognition.fmr_targets)
    write_verification(ver, out / "fused_roc.csv", out / "fused_summary.json", meta,
                       extra={"weights": [float(w) for w in weights]})
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "clean": cmd_clean,
    "train-mac": cmd_train,
    "calibrate": cmd_calibrate,
    "transfer": cmd_transfer,
    "stats": cmd_stats,
    "evaluate-labels": cmd_evaluate_labels,
    "recog-train": cmd_recog_train,
    "recog-eval": cmd_recog_eval,
    "fuse": cmd_fuse,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="override the global seed")
    common.add_argument("--workers", type=int, help="worker threads (results do not depend on it)")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="attrtransfer", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("generate", parents=[common], help="write synthetic datasets")

    p = sub.add_parser("clean", parents=[common], help="binarise continuous annotations")
    p.add_argument("--scores", required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--thresholds", help="CSV attribute,lower,upper")
    g.add_argument("--reference", help="tri-state annotations judging threshold windows")

    p = sub.add_parser("train-mac", parents=[common], help="train a source classifier")
    p.add_argument("--source", required=True)

    p = sub.add_parser("calibrate", parents=[common], help="reliability thresholds for a source")
    p.add_argument("--source", required=True)
    p.add_argument("--input", help="directory with train-mac outputs (default: --out)")
    p.add_argument("--model")
    p.add_argument("--split")

    p = sub.add_parser("transfer", parents=[common], help="build target annotations")
    p.add_argument("--input", help="directory with calibrate outputs (default: --out)")

    p = sub.add_parser("stats", parents=[common], help="annotation distribution report")
    p.add_argument("--annotations", required=True)
    p.add_argument("--schema")

    p = sub.add_parser("evaluate-labels", parents=[common], help="accuracy/precision/recall vs a reference")
    p.add_argument("--predicted", required=True)
    p.add_argument("--truth", required=True)

    for name in ("recog-train", "recog-eval"):
        p = sub.add_parser(name, parents=[common], help=f"soft-biometric recognition ({name.split('-')[1]})")
        p.add_argument("--annotations", required=True)
        p.add_argument("--subjects", required=True, help="CSV starting with sample_id,subject_id")
        if name == "recog-eval":
            p.add_argument("--comparator", choices=("hamming", "logreg"), default="hamming")
            p.add_argument("--literal", action="store_true", help="count every joint-feature slot in hamming")
            p.add_argument("--model")
            p.add_argument("--split")
            p.add_argument("--input")

    p = sub.add_parser("fuse", parents=[common], help="EER-weighted score fusion")
    p.add_argument("--primary", required=True)
    p.add_argument("--secondary", required=True)
    return parser


def _fail(category, code, exc) -> int:
    print(json.dumps({"error": category, "message": str(exc)}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, {"seed": args.seed, "workers": args.workers})
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        return _fail("config", EXIT_CONFIG, exc)
    except FileNotFoundError as exc:
        return _fail("config", EXIT_CONFIG, exc)
    except DataError as exc:
        return _fail("data", EXIT_DATA, exc)
    except AttrTransferError as exc:
        return _fail("stage", EXIT_STAGE, exc)
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        return _fail("stage", EXIT_STAGE, exc)


if __name__ == "__main__":
    sys.exit(main())
