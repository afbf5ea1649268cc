"""MAPE scoring of trained models on clean and attacked test windows."""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .attacks import (AttackSpec, Random, apply_attack, apply_random, attack_from_dict, attack_key,
                      attack_to_dict, validate_for_window)
from .dataio import WindowedDataset
from .errors import ValidationError
from .mlp import MLPModel, forward_batch

CSV_HEADER = ["model_id", "attack_model", "lambda", "p", "gamma", "seed", "mape"]


def mape_values(y, y_hat) -> float:
    """Mean absolute percentage error as a fraction (0.076 rather than 7.6%)."""
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.size == 0:
        raise ValidationError("cannot score an empty test set")
    if np.any(y <= 0):
        raise ValidationError("observed loads must be positive")
    return float(np.mean(np.abs(y - y_hat) / y))


def mape(model: MLPModel, test: WindowedDataset) -> float:
    """MAPE of de-logged forecasts against de-logged observed targets."""
    if len(test) == 0:
        raise ValidationError("cannot score an empty test set")
    return mape_values(test.y, np.exp(forward_batch(model, test.x_log)))


def attacked_windows(test: WindowedDataset, attack: AttackSpec, repeat: int = 0) -> np.ndarray:
    """Raw test windows after the attack; random draws use one sub-stream per window."""
    x = np.asarray(test.x_raw)
    validate_for_window(attack, x.shape[1])
    if isinstance(attack, Random):
        stream = (lambda k: (k,)) if repeat == 0 else (lambda k: (k, repeat))
        return np.stack([apply_random(w, attack, stream(k)) for k, w in enumerate(x)])
    return apply_attack(x, attack)


def evaluate_under_attack(model: MLPModel, test: WindowedDataset, attack: AttackSpec | None,
                          repeats: int = 1) -> float:
    """MAPE when every test input window is attacked; targets stay the true values.

    With ``repeats > 1`` random attacks are redrawn that many times and the
    MAPEs averaged; deterministic attacks ignore ``repeats``.
    """
    if attack is None:
        return mape(model, test)
    if repeats < 1:
        raise ValidationError("repeats must be >= 1")
    n = repeats if isinstance(attack, Random) else 1
    scores = [mape(model, test.with_inputs(attacked_windows(test, attack, r))) for r in range(n)]
    return scores[0] if n == 1 else float(np.mean(scores))


@dataclass(frozen=True)
class EvalRow:
    model_id: str
    attack: AttackSpec | None
    mape: float

    def sort_key(self):
        return (self.model_id, attack_key(self.attack))

    def to_record(self) -> list:
        if self.attack is None:
            return [self.model_id, "none", "", "", "", "", repr(self.mape)]
        d = attack_to_dict(self.attack)
        return [self.model_id, d["model"], repr(d["lambda"]), repr(d["p"]),
                d.get("gamma", ""), d.get("seed", ""), repr(self.mape)]


@dataclass
class EvalReport:
    rows: list
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rows = sorted(self.rows, key=EvalRow.sort_key)
        keys = [r.sort_key() for r in self.rows]
        if len(set(keys)) != len(keys):
            raise ValidationError("duplicate (model_id, attack) rows in report")
        if any(not r.mape >= 0 for r in self.rows):
            raise ValidationError("MAPE values must be non-negative")

    def lookup(self, model_id: str, attack: AttackSpec | None = None) -> float:
        key = (model_id, attack_key(attack))
        for r in self.rows:
            if r.sort_key() == key:
                return r.mape
        raise KeyError(key)

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow(r.to_record())
        return out.getvalue()

    def write(self, csv_path, stamp: bool = True):
        """Write the CSV body and a ``.json`` metadata sidecar next to it."""
        csv_path = Path(csv_path)
        csv_path.write_text(self.to_csv())
        meta = dict(self.metadata)
        if stamp:
            meta["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
        meta["rows"] = len(self.rows)
        csv_path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def parse_report_csv(text: str) -> EvalReport:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != CSV_HEADER:
        raise ValidationError(f"report header must be {','.join(CSV_HEADER)}")
    rows = []
    for rec in reader:
        attack = None
        if rec["attack_model"] != "none":
            d = {"model": rec["attack_model"], "lambda": rec["lambda"], "p": rec["p"]}
            if rec["attack_model"] == "random":
                d["seed"] = rec["seed"]
            else:
                d["gamma"] = rec["gamma"]
            attack = attack_from_dict(d)
        rows.append(EvalRow(rec["model_id"], attack, float(rec["mape"])))
    return EvalReport(rows)


def grid_evaluate(models, test: WindowedDataset, grid, workers: int = 1, repeats: int = 1,
                  metadata: dict | None = None) -> EvalReport:
    """Score every model on clean data and under every attack in ``grid``.

    ``models`` is a mapping or a sequence of ``(model_id, model)`` pairs.
    Cells are independent, so ``workers > 1`` runs them on a thread pool;
    rows are sorted afterwards and the report does not depend on ``workers``.
    """
    pairs = list(models.items()) if isinstance(models, dict) else list(models)
    ids = [mid for mid, _ in pairs]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate model ids")
    if not pairs:
        raise ValidationError("no models to evaluate")
    grid = list(grid)
    if not grid:
        raise ValidationError("attack grid is empty")
    for spec in grid:
        validate_for_window(spec, test.window_length)
    cells = [(mid, m, spec) for mid, m in pairs for spec in [None] + grid]

    def run(cell):
        mid, m, spec = cell
        return EvalRow(mid, spec, evaluate_under_attack(m, test, spec, repeats))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run, cells))
    else:
        rows = [run(c) for c in cells]
    meta = {"test_samples": len(test), "repeats": repeats}
    if test.target_days:
        meta["test_period"] = [test.target_days[0].isoformat(), test.target_days[-1].isoformat()]
    meta.update(metadata or {})
    return EvalReport(rows, meta)
