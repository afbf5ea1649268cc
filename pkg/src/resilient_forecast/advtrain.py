"""Accelerated adversarial training.

Adversarial examples are generated once, before the first epoch, by applying
an attack template to the clean training windows. Each clean sample is kept
and followed by one attacked copy carrying the same (true) target, and the
augmented set stays fixed for the whole run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .attacks import AttackSpec, apply_attack, attack_from_dict, attack_to_dict, validate_for_window
from .dataio import WindowedDataset
from .errors import ValidationError
from .mlp import MLPModel, TrainConfig, TrainReport, init_model, train


@dataclass(frozen=True)
class AdvTrainJob:
    attack: AttackSpec
    train_cfg: TrainConfig = field(default_factory=TrainConfig)

    @classmethod
    def from_dict(cls, d):
        if "attack" not in d:
            raise ValidationError("job needs an 'attack' entry")
        return cls(attack_from_dict(d["attack"]), TrainConfig.from_dict(d.get("train", {})))

    def to_dict(self):
        return {"attack": attack_to_dict(self.attack), "train": self.train_cfg.to_dict()}


def attack_inputs(x_raw: np.ndarray, attack: AttackSpec) -> np.ndarray:
    """Attacked copy of a block of training windows.

    Scaling and ramping hit the same span of every window; the random attack
    draws once over all cells of the block.
    """
    validate_for_window(attack, x_raw.shape[1])
    return apply_attack(x_raw, attack)


def generate_adversarial_dataset(clean: WindowedDataset, attack: AttackSpec) -> WindowedDataset:
    """Clean samples interleaved with their attacked twins (``2 * len(clean)`` rows).

    Row ``2k`` is clean sample ``k`` and row ``2k + 1`` its attacked copy;
    targets are never modified.
    """
    if len(clean) == 0:
        raise ValidationError("clean dataset is empty")
    attacked = attack_inputs(np.asarray(clean.x_raw), attack)
    n, length = clean.x_raw.shape
    x = np.empty((2 * n, length))
    x[0::2] = clean.x_raw
    x[1::2] = attacked
    z = np.repeat(clean.z, 2)
    days = tuple(d for d in clean.target_days for _ in range(2))
    return WindowedDataset(x, z, days, clean.role)


def adversarial_train(clean: WindowedDataset, job: AdvTrainJob) -> tuple[MLPModel, TrainReport]:
    """Train a fresh model (seeded from ``job.train_cfg.seed``) on the augmented set."""
    augmented = generate_adversarial_dataset(clean, job.attack)
    model = init_model(job.train_cfg.seed, n_in=clean.window_length)
    return train(model, augmented, job.train_cfg)


def train_clean(clean: WindowedDataset, cfg: TrainConfig) -> tuple[MLPModel, TrainReport]:
    """The traditional model: same initialization rule, clean data only."""
    return train(init_model(cfg.seed, n_in=clean.window_length), clean, cfg)


__all__ = ["AdvTrainJob", "adversarial_train", "attack_inputs",
           "generate_adversarial_dataset", "train_clean"]
