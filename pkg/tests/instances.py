"""Random tiny transfer instances, solved by the package and by the loop oracle."""

from __future__ import annotations

import numpy as np

from attrtransfer.datamodel import AttributeSchema
from attrtransfer.pipeline import (
    CalibrationConfig,
    SourceAnnotations,
    SourcePredictions,
    aggregate,
    calibrate,
    obtain_plausibility,
    transfer,
)
from oracles import annotate_target_loops, calibrate_sweep

NAMES = ["a0", "a1", "a2"]
CLASSES = {"pair": ["a0", "a1"], "single": ["a2"]}
LEVELS = 4  # reliabilities on a coarse grid so ties are common


def random_instance(rng, n_sources=2):
    """At most three attributes, at most five target samples, ``n_sources`` sources."""
    k = int(rng.integers(1, 4))
    names = NAMES[:k]
    classes = {c: [a for a in m if a in names] for c, m in CLASSES.items()}
    classes = {c: m for c, m in classes.items() if m}
    n = int(rng.integers(1, 6))
    sources = []
    for s in range(n_sources):
        attrs = [a for a in names if rng.random() < 0.7] or [names[int(rng.integers(k))]]
        m = int(rng.integers(4, 12))
        truth = rng.choice([1, -1, 0], size=(m, len(attrs)), p=[0.45, 0.45, 0.1])
        flip = rng.random((m, len(attrs))) < 0.2
        preds = np.where(flip, -truth, truth)
        preds[preds == 0] = 1
        sources.append(
            {
                "name": f"s{s}",
                "attributes": attrs,
                "calib_p": preds,
                "calib_r": rng.integers(0, LEVELS, size=(m, len(attrs))) / LEVELS,
                "calib_t": truth,
                "p": rng.choice([1, -1], size=(n, len(attrs))),
                "r": rng.integers(0, LEVELS, size=(n, len(attrs))) / LEVELS,
            }
        )
    acc_min = float(rng.choice([0.5, 0.75, 0.9]))
    d_min = float(rng.choice([0.2, 0.5]))
    return {"names": names, "classes": classes, "sources": sources, "acc_min": acc_min, "d_min": d_min}


def solve_with_package(inst, strict=False):
    schema = AttributeSchema.simple(inst["names"], inst["classes"])
    config = CalibrationConfig(inst["acc_min"], inst["d_min"])
    annotated = []
    for src in inst["sources"]:
        sub = schema.subset(src["attributes"])
        table = calibrate(src["calib_p"], src["calib_r"], src["calib_t"], src["r"], src["attributes"], config)
        labels = transfer(SourcePredictions(src["name"], sub, src["p"], src["r"]), table)
        annotated.append(SourceAnnotations(src["name"], sub, labels, src["r"], table))
    return obtain_plausibility(aggregate(annotated, schema), schema, strict=strict)


def solve_with_loops(inst, strict=False):
    sources = []
    for src in inst["sources"]:
        thr, calib = {}, {}
        for j, a in enumerate(src["attributes"]):
            cols = (list(src["calib_p"][:, j]), list(src["calib_r"][:, j]), list(src["calib_t"][:, j]))
            found = calibrate_sweep(*cols, list(src["r"][:, j]), inst["acc_min"], inst["d_min"])
            thr[a] = None if found is None else found[0]
            calib[a] = cols
        sources.append(
            {
                "attributes": src["attributes"],
                "p": src["p"].tolist(),
                "r": src["r"].tolist(),
                "thr": thr,
                "calib": calib,
            }
        )
    return np.array(annotate_target_loops(sources, inst["names"], inst["classes"], strict=strict))
