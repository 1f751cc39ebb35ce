"""Synthetic stand-in cohorts for demos and tests.

Generates tables shaped like the public Framingham export (same columns,
row count and class imbalance) with a learnable but noisy risk signal. The
rows are random draws, not patient data; use a real CSV for any clinical
conclusion.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .data import BINARY, FRAMINGHAM_SCHEMA, DataTable, FeatureSchema

# Marginals for the default schema: (mean, sd) for continuous columns,
# Bernoulli p for binary ones. Loosely realistic ranges; exact values only
# shape the demo data.
_CONTINUOUS_MARGINALS = {
    "age": (49.5, 8.6),
    "cigsPerDay": (9.0, 11.9),
    "totChol": (236.0, 44.0),
    "sysBP": (132.0, 22.0),
    "diaBP": (83.0, 12.0),
    "BMI": (25.8, 4.1),
    "heartRate": (76.0, 12.0),
    "glucose": (82.0, 24.0),
}
_BINARY_MARGINALS = {
    "male": 0.43,
    "currentSmoker": 0.49,
    "BPMeds": 0.03,
    "prevalentStroke": 0.006,
    "prevalentHyp": 0.31,
    "diabetes": 0.026,
}

# Linear risk weights on z-scored features. Heavier weight on age, systolic
# pressure, glucose and cholesterol so tree importance rankings look sane.
_RISK_WEIGHTS = {
    "age": 1.0,
    "sysBP": 0.8,
    "glucose": 0.7,
    "totChol": 0.6,
    "diaBP": 0.35,
    "cigsPerDay": 0.3,
    "male": 0.3,
    "prevalentHyp": 0.25,
    "diabetes": 0.25,
    "BMI": 0.2,
    "heartRate": 0.1,
    "currentSmoker": 0.15,
    "BPMeds": 0.1,
    "prevalentStroke": 0.1,
}


def synthetic_cohort(
    n_rows: int = 4238,
    positive_rate: float = 0.152,
    seed: int = 0,
    schema: FeatureSchema = FRAMINGHAM_SCHEMA,
    noise: float = 0.9,
) -> DataTable:
    """Draw a synthetic cohort with the given size and positive rate.

    Labels are assigned to the top quantile of a noisy linear risk score, so
    the signal is learnable without being separable. ``noise`` scales the
    label noise relative to the risk spread.
    """
    rng = np.random.default_rng(seed)
    cols = []
    for name, kind in zip(schema.names, schema.kinds):
        if kind == BINARY:
            p = _BINARY_MARGINALS.get(name, 0.3)
            cols.append((rng.random(n_rows) < p).astype(np.float64))
        else:
            mean, sd = _CONTINUOUS_MARGINALS.get(name, (0.0, 1.0))
            raw = rng.normal(mean, sd, size=n_rows)
            cols.append(np.maximum(raw, 0.0) if mean > 0 else raw)
    X = np.column_stack(cols)

    sd = X.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    Z = (X - X.mean(axis=0)) / sd
    weights = np.array([_RISK_WEIGHTS.get(n, 0.2) for n in schema.names])
    score = Z @ weights + noise * np.linalg.norm(weights) * rng.standard_normal(n_rows)
    threshold = np.quantile(score, 1.0 - positive_rate)
    y = (score > threshold).astype(np.int64)
    return DataTable(schema, X, y)


def write_cohort_csv(
    table: DataTable,
    path,
    missing_fraction: float = 0.0,
    seed: int = 0,
    missing_marker: str = "NA",
) -> Path:
    """Write a table as CSV, optionally blanking a fraction of feature cells."""
    path = Path(path)
    rng = np.random.default_rng(seed)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([*table.schema.names, table.schema.label_name])
        for row, label in zip(table.X, table.y):
            cells = [_format(v) for v in row]
            if missing_fraction > 0.0:
                blank = rng.random(len(cells)) < missing_fraction
                cells = [missing_marker if b else c for c, b in zip(cells, blank)]
            writer.writerow([*cells, int(label)])
    return path


def _format(value: float) -> str:
    # repr() is the shortest string that parses back to the same float, so a
    # written cohort reloads bit-identically.
    return str(int(value)) if value == int(value) else repr(float(value))
