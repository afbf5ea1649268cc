"""Threshold-gated selection of the adversarial-training attack model.

1. Reserve: train one model per (attack model, training configuration) and
   keep configurations whose clean-test MAPE is strictly below the threshold.
2. Per model: among reserved configurations, pick the one with the lowest
   mean MAPE over that attack model's own evaluation grid.
3. Overall: among the per-model winners, pick the lowest mean MAPE over the
   union of all evaluation grids.

Ties go to the least perturbing configuration: smaller ``|lambda - 1|``
(``lambda`` for ramping), then smaller ``p``, then smaller ``gamma``; in
stage 3 the attack-model order scaling < ramping < random breaks any
remaining tie. Means use ``math.fsum`` so they do not depend on order.

MAPEs come from an evaluator object with ``clean_mape(train_attack)`` and
``attacked_mape(train_attack, test_attack)``. :class:`TrainingEvaluator`
trains and scores real models; tests inject table-driven ones.
"""

from __future__ import annotations

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .advtrain import AdvTrainJob, adversarial_train, train_clean
from .attacks import (MODEL_ORDER, AttackSpec, attack_from_dict, attack_key, attack_to_dict,
                      is_identity, label, make_grid, perturbation)
from .dataio import WindowedDataset
from .errors import SelectionInfeasibleError, ValidationError
from .evaluate import EvalReport, EvalRow, evaluate_under_attack, mape
from .mlp import TrainConfig

ADV_NAMES = {"scaling": "ScalAdv", "ramping": "RampAdv", "random": "RandAdv"}


def _grid_from_json(model, entry, seed):
    if isinstance(entry, dict):
        return make_grid(model, entry["lambda"], entry["p"], entry.get("gamma", [0]),
                         seed=entry.get("seed", seed))
    specs = [attack_from_dict(d) for d in entry]
    return specs


@dataclass(frozen=True)
class SelectionConfig:
    threshold: float
    training_grids: dict
    evaluation_grids: dict
    train_cfg: TrainConfig = field(default_factory=TrainConfig)
    repeats: int = 1

    def validate(self):
        if not (self.threshold >= 0 and math.isfinite(self.threshold)):
            raise ValidationError("threshold must be a non-negative finite number")
        if not self.training_grids:
            raise ValidationError("no training grids")
        for name, grids in (("training", self.training_grids), ("evaluation", self.evaluation_grids)):
            for model, specs in grids.items():
                if model not in MODEL_ORDER:
                    raise ValidationError(f"unknown attack model {model!r} in {name} grids")
                if not specs:
                    raise ValidationError(f"{name} grid for {model} is empty")
                if any(s.model != model for s in specs):
                    raise ValidationError(f"{name} grid for {model} contains other attack models")
        missing = set(self.training_grids) - set(self.evaluation_grids)
        if missing:
            raise ValidationError(f"no evaluation grid for {sorted(missing)}")
        self.train_cfg.validate()

    @classmethod
    def from_dict(cls, d):
        seed = int(d.get("seed", 0))
        cfg = cls(
            threshold=float(d["threshold"]),
            training_grids={m: _grid_from_json(m, e, seed) for m, e in d["training_grids"].items()},
            evaluation_grids={m: _grid_from_json(m, e, seed) for m, e in d["evaluation_grids"].items()},
            train_cfg=TrainConfig.from_dict(d.get("train", {})),
            repeats=int(d.get("repeats", 1)),
        )
        cfg.validate()
        return cfg

    def to_dict(self):
        return {
            "threshold": self.threshold,
            "training_grids": {m: [attack_to_dict(s) for s in g] for m, g in self.training_grids.items()},
            "evaluation_grids": {m: [attack_to_dict(s) for s in g] for m, g in self.evaluation_grids.items()},
            "train": self.train_cfg.to_dict(),
            "repeats": self.repeats,
        }

    def models(self):
        return sorted(self.training_grids, key=MODEL_ORDER.__getitem__)

    def all_evaluation_attacks(self):
        """Union of every model's evaluation grid, in canonical order."""
        seen = {}
        for specs in self.evaluation_grids.values():
            for s in specs:
                seen.setdefault(attack_key(s), s)
        return [seen[k] for k in sorted(seen)]


def reference_config(threshold: float = 0.1, seed: int = 0, train_cfg: TrainConfig | None = None,
                     points: int = 5) -> SelectionConfig:
    """Training grids of the published no-attack tables, evaluation grids over the
    published attack ranges sampled at ``points`` values per continuous axis."""
    train_gammas = (0, 6, 12, 18)
    training = {
        "scaling": make_grid("scaling", (1.2, 1.4, 1.6, 1.8, 2.0),
                             (0, 0.0119, 0.0238, 0.0357, 0.0476, 0.0595), train_gammas),
        "ramping": make_grid("ramping", (0.01, 0.02, 0.03, 0.04, 0.05),
                             (0, 0.0714, 0.1428, 0.2142, 0.2856, 0.3570), train_gammas),
        "random": make_grid("random", (1.2, 1.4, 1.6, 1.8, 2.0), (0, 0.1, 0.2, 0.3, 0.4, 0.5), seed=seed),
    }
    test_gammas = (0, 24, 48, 72)
    lam_sr = np.linspace(0.4, 2.0, points)
    ramping = []
    for g in test_gammas:
        ramping += make_grid("ramping", np.linspace(0, 1, points), np.linspace(0, (168 - g) / 168, points), (g,))
    evaluation = {
        "scaling": make_grid("scaling", lam_sr, np.linspace(0, 0.1428, points), test_gammas),
        "ramping": ramping,
        "random": make_grid("random", lam_sr, np.linspace(0, 1, points), seed=seed),
    }
    return SelectionConfig(threshold, training, evaluation, train_cfg or TrainConfig(seed=seed))


# -- evaluators --------------------------------------------------------------


class FunctionEvaluator:
    """Evaluator backed by two plain callables (mock tables, synthetic MAPE functions)."""

    def __init__(self, clean_fn, attacked_fn):
        self.clean_fn = clean_fn
        self.attacked_fn = attacked_fn

    def clean_mape(self, train_attack):
        return float(self.clean_fn(train_attack))

    def attacked_mape(self, train_attack, test_attack):
        return float(self.attacked_fn(train_attack, test_attack))


class TrainingEvaluator:
    """Adversarially trains one model per training configuration and scores it.

    Models are cached per configuration; every identity attack shares the
    model of the clean baseline since their training updates are identical.
    Safe to call from several threads.
    """

    def __init__(self, train_data: WindowedDataset, test_data: WindowedDataset,
                 train_cfg: TrainConfig, repeats: int = 1):
        self.train_data = train_data
        self.test_data = test_data
        self.train_cfg = train_cfg
        self.repeats = repeats
        self._models = {}
        self._locks = {}
        self._guard = threading.Lock()

    def _key(self, spec):
        return ("identity",) if spec is None or is_identity(spec) else attack_key(spec)

    def model(self, spec: AttackSpec | None):
        key = self._key(spec)
        with self._guard:
            lock = self._locks.setdefault(key, threading.Lock())
        with lock:
            if key not in self._models:
                if key == ("identity",):
                    self._models[key] = train_clean(self.train_data, self.train_cfg)[0]
                else:
                    self._models[key] = adversarial_train(self.train_data, AdvTrainJob(spec, self.train_cfg))[0]
            return self._models[key]

    def clean_mape(self, train_attack):
        return mape(self.model(train_attack), self.test_data)

    def attacked_mape(self, train_attack, test_attack):
        return evaluate_under_attack(self.model(train_attack), self.test_data, test_attack, self.repeats)


class _Recorder:
    """Memoizes evaluator calls and keeps the audit trail in first-computed order."""

    def __init__(self, evaluator):
        self.evaluator = evaluator
        self.values = {}
        self.order = []
        self._lock = threading.Lock()

    def get(self, train_attack, test_attack):
        key = (attack_key(train_attack), attack_key(test_attack))
        with self._lock:
            if key in self.values:
                return self.values[key]
        if test_attack is None:
            v = self.evaluator.clean_mape(train_attack)
        else:
            v = self.evaluator.attacked_mape(train_attack, test_attack)
        if not (v >= 0 and math.isfinite(v)):
            raise ValidationError(f"evaluator returned invalid MAPE {v!r}")
        with self._lock:
            if key not in self.values:
                self.values[key] = v
                self.order.append((train_attack, test_attack, v))
        return v


def _mean(values):
    values = list(values)
    return math.fsum(values) / len(values)


def _config_key(spec):
    return (perturbation(spec), spec.p, getattr(spec, "gamma", 0), spec.lam, getattr(spec, "seed", 0))


# -- result ------------------------------------------------------------------


@dataclass
class SelectionResult:
    threshold: float
    reserved: dict
    per_model_choice: dict
    overall: tuple
    audit: list = field(default_factory=list)

    def to_dict(self):
        name, spec, score = self.overall
        return {
            "threshold": self.threshold,
            "reserved": {m: [{"attack": attack_to_dict(s), "clean_mape": v} for s, v in items]
                         for m, items in self.reserved.items()},
            "per_model_choice": {m: {"attack": attack_to_dict(s), "mean_mape": v}
                                 for m, (s, v) in self.per_model_choice.items()},
            "overall": {"model": name, "name": ADV_NAMES[name], "attack": attack_to_dict(spec),
                        "mean_mape": score},
            "audit_rows": len(self.audit),
        }

    def audit_report(self) -> EvalReport:
        rows = [EvalRow(label(tr), te, v) for tr, te, v in self.audit]
        return EvalReport(rows, {"threshold": self.threshold})


# -- stages ------------------------------------------------------------------


def _recorder(evaluator):
    return evaluator if isinstance(evaluator, _Recorder) else _Recorder(evaluator)


def _map(fn, items, workers):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def stage1_reserve(cfg: SelectionConfig, evaluator, workers: int = 1) -> dict:
    """Map attack model -> [(config, clean MAPE)] for configs strictly below the threshold.

    Models without any surviving configuration map to an empty list.
    """
    rec = _recorder(evaluator)
    reserved = {}
    for model in cfg.models():
        specs = cfg.training_grids[model]
        scores = _map(lambda s: rec.get(s, None), specs, workers)
        reserved[model] = [(s, v) for s, v in zip(specs, scores) if v < cfg.threshold]
    if not any(reserved.values()):
        raise SelectionInfeasibleError(
            f"no configuration reached a clean MAPE below {cfg.threshold}"
        )
    return reserved


def stage2_per_model(cfg: SelectionConfig, reserved: dict, evaluator, workers: int = 1) -> dict:
    """Map attack model -> (winning config, its mean MAPE under that model's own attacks)."""
    rec = _recorder(evaluator)
    choice = {}
    for model in cfg.models():
        items = reserved.get(model) or []
        if not items:
            continue
        grid = cfg.evaluation_grids[model]
        scored = []
        for spec, _ in items:
            values = _map(lambda t: rec.get(spec, t), grid, workers)
            scored.append((_mean(values), _config_key(spec), spec))
        best = min(scored, key=lambda t: (t[0], t[1]))
        choice[model] = (best[2], best[0])
    return choice


def stage3_overall(cfg: SelectionConfig, per_model_choice: dict, evaluator, workers: int = 1,
                   reserved: dict | None = None) -> SelectionResult:
    rec = _recorder(evaluator)
    if not per_model_choice:
        raise SelectionInfeasibleError("no per-model choices to compare")
    grid = cfg.all_evaluation_attacks()
    scored = []
    for model, (spec, _) in per_model_choice.items():
        values = _map(lambda t: rec.get(spec, t), grid, workers)
        scored.append((_mean(values), _config_key(spec)[:3], MODEL_ORDER[model], _config_key(spec)[3:],
                       model, spec))
    best = min(scored, key=lambda t: t[:4])
    audit = sorted(rec.order, key=lambda t: (attack_key(t[0]), attack_key(t[1])))
    return SelectionResult(cfg.threshold, reserved or {}, dict(per_model_choice),
                           (best[4], best[5], best[0]), audit)


def run_selection(cfg: SelectionConfig, evaluator, workers: int = 1) -> SelectionResult:
    """All three stages with one shared memo, so every MAPE is computed once."""
    cfg.validate()
    rec = _Recorder(evaluator)
    reserved = stage1_reserve(cfg, rec, workers)
    per_model = stage2_per_model(cfg, reserved, rec, workers)
    return stage3_overall(cfg, per_model, rec, workers, reserved=reserved)
