"""End-to-end annotation transfer from several source datasets to one target.

Stages per source: subject-exclusive split, classifier training, predictions
with reliabilities on the source test part and on the target, threshold
calibration, rejection of unreliable predictions. The per-source annotations
are then merged and repaired for plausibility.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ..datamodel import AnnotatedDataset, AttributeSchema, SubjectSplit, split_subject_exclusive
from ..errors import StageError
from ..mac import (
    MacConfig,
    MacModel,
    ReliabilityConfig,
    TrainingConfig,
    TrainingLog,
    init_model,
    predict_with_reliability,
    train,
)
from .calibration import CalibrationConfig, CalibrationTable, calibrate
from .transfer import SourceAnnotations, SourcePredictions, aggregate, merged_schema, obtain_plausibility, transfer

log = logging.getLogger(__name__)

_STAGES = {"split": 1, "init": 2, "train": 3, "test": 4, "target": 5}


def stage_seed(seed: int, source_index: int, stage: str) -> int:
    """Independent, reproducible seed for one stage of one source."""
    return int(np.random.SeedSequence([seed, source_index, _STAGES[stage]]).generate_state(1)[0])


@dataclass
class MacSettings:
    trunk_width: int = 512
    branch_width: int = 512
    dropout_rate: float = 0.5


@dataclass
class PipelineConfig:
    mac: MacSettings = field(default_factory=MacSettings)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    reliability: ReliabilityConfig = field(default_factory=ReliabilityConfig)
    calibration: CalibrationConfig = field(default_factory=CalibrationConfig)
    train_fraction: float = 0.8
    seed: int = 0
    priority: Sequence[str] | None = None
    strict_plausibility: bool = False
    workers: int = 1


@dataclass
class SourceRun:
    name: str
    split: SubjectSplit | None
    model: MacModel
    training_log: TrainingLog | None
    table: CalibrationTable
    predictions: SourcePredictions
    labels: np.ndarray


@dataclass
class PipelineResult:
    labels: np.ndarray
    schema: AttributeSchema
    sources: list[SourceRun]
    choice: np.ndarray
    unrepaired: np.ndarray

    def report(self):
        from .report import provenance_report

        return provenance_report(self)


def train_source(source: AnnotatedDataset, index: int, config: PipelineConfig):
    """Split ``source`` and train its classifier on the training part."""
    split = split_subject_exclusive(source, config.train_fraction, stage_seed(config.seed, index, "split"))
    train_ds, test_ds = split.apply(source)
    mac_cfg = MacConfig(
        input_dim=source.dim,
        schema=source.schema,
        trunk_width=config.mac.trunk_width,
        branch_width=config.mac.branch_width,
        dropout_rate=config.mac.dropout_rate,
    )
    model = init_model(mac_cfg, stage_seed(config.seed, index, "init"))
    tcfg = replace(config.training, seed=stage_seed(config.seed, index, "train"))
    model, tlog = train(model, train_ds.embeddings, train_ds.annotations, tcfg)
    return split, test_ds, model, tlog


def calibrate_source(model: MacModel, test: AnnotatedDataset, target_embeddings, index: int, config: PipelineConfig, name=""):
    """Predict on the test part and the target, then calibrate thresholds."""
    rel = config.reliability
    tp, tr = predict_with_reliability(
        model, test.embeddings, rel, stage_seed(config.seed, index, "test"), workers=config.workers
    )
    gp, gr = predict_with_reliability(
        model, target_embeddings, rel, stage_seed(config.seed, index, "target"), workers=config.workers
    )
    table = calibrate(tp, tr, test.annotations, gr, model.schema.names, config.calibration)
    return table, SourcePredictions(name, model.schema, gp, gr)


def combine(runs: Sequence[SourceAnnotations], schema, config: PipelineConfig):
    labels, choice = aggregate(runs, schema, config.priority, return_choice=True)
    schema = merged_schema(runs, schema)
    repaired = obtain_plausibility(labels, schema, strict=config.strict_plausibility)
    choice = np.where(repaired != 0, choice, -1)
    return repaired, choice, labels, schema


def run_pipeline(
    sources: Sequence[AnnotatedDataset],
    target: AnnotatedDataset,
    config: PipelineConfig = PipelineConfig(),
    schema: AttributeSchema | None = None,
    models: dict[str, tuple[MacModel, AnnotatedDataset]] | None = None,
) -> PipelineResult:
    """Transfer annotations from ``sources`` onto ``target``.

    ``models`` may supply, per source name, an already trained classifier
    together with the test part to calibrate on; those sources skip
    splitting and training. Only the target's embeddings are used.
    """
    if not sources:
        raise StageError("run_pipeline needs at least one source dataset")
    names = [s.name or f"source{i}" for i, s in enumerate(sources)]
    if len(set(names)) != len(names):
        raise StageError(f"source names must be unique, got {names}")
    models = models or {}
    runs = []
    for i, (name, src) in enumerate(zip(names, sources)):
        if name in models:
            model, test = models[name]
            split, tlog = None, None
        else:
            split, test, model, tlog = train_source(src, i, config)
        table, preds = calibrate_source(model, test, target.embeddings, i, config, name=name)
        labels = transfer(preds, table)
        for e in table.entries.values():
            if not e.retained:
                log.info("%s: attribute %s discarded: %s", name, e.attribute, e.reason)
        runs.append(SourceRun(name, split, model, tlog, table, preds, labels))
    annotated = [SourceAnnotations(r.name, r.predictions.schema, r.labels, r.predictions.r, r.table) for r in runs]
    labels, choice, raw, schema = combine(annotated, schema, config)
    return PipelineResult(labels, schema, runs, choice, raw)
