"""Data-poisoning attack templates applied to raw (pre-log) load windows.

Windows use 1-based positions ``1..L`` with ``L`` the most recent hour. An
attack covering proportion ``p`` of a window and ending ``gamma`` hours
before its end spans ``[n_s, n_e]`` with::

    n_e = L - gamma
    n_s = n_e + 1 - round_half_up(p * L)

* scaling multiplies every span point by ``lam``;
* ramping multiplies by ``1 + lam*(i - n_s)`` up to the floored midpoint of
  the span and by ``1 + lam*(n_e - i)`` after it, so both ends keep factor 1;
* random multiplies ``round_half_up(p * N)`` distinct cells, drawn without
  replacement from a generator seeded with ``seed``, by ``lam``.

Scaling and ramping act on the last axis and may be given a whole
``(N, L)`` block; random treats its input as one flat pool of cells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

MODEL_ORDER = {"scaling": 0, "ramping": 1, "random": 2}


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _check_p(p):
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"attack proportion p={p} outside [0, 1]")


def _check_gamma(gamma):
    if int(gamma) != gamma or gamma < 0:
        raise ValidationError(f"attack location gamma={gamma} must be a non-negative integer")


def _coerce(spec, last):
    """Store lam and p as floats and gamma/seed as ints, so equal specs serialize alike."""
    object.__setattr__(spec, "lam", float(spec.lam))
    object.__setattr__(spec, "p", float(spec.p))
    object.__setattr__(spec, last, int(getattr(spec, last)))


@dataclass(frozen=True)
class Scaling:
    lam: float
    p: float
    gamma: int = 0
    model = "scaling"

    def __post_init__(self):
        if not self.lam > 0:
            raise ValidationError("scaling factor must be positive")
        _check_p(self.p)
        _check_gamma(self.gamma)
        _coerce(self, "gamma")


@dataclass(frozen=True)
class Ramping:
    lam: float
    p: float
    gamma: int = 0
    model = "ramping"

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValidationError("ramp rate must be non-negative")
        _check_p(self.p)
        _check_gamma(self.gamma)
        _coerce(self, "gamma")


@dataclass(frozen=True)
class Random:
    lam: float
    p: float
    seed: int = 0
    model = "random"

    def __post_init__(self):
        if not self.lam > 0:
            raise ValidationError("scaling factor must be positive")
        _check_p(self.p)
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValidationError("seed must be a non-negative integer")
        _coerce(self, "seed")


AttackSpec = Scaling | Ramping | Random


@dataclass(frozen=True)
class AttackSpan:
    n_s: int
    n_e: int

    @property
    def size(self) -> int:
        return max(0, self.n_e - self.n_s + 1)

    def as_slice(self) -> slice:
        return slice(self.n_s - 1, self.n_e)


def attack_span(window_length: int, p: float, gamma: int) -> AttackSpan:
    _check_p(p)
    _check_gamma(gamma)
    if gamma >= window_length:
        raise ValidationError(f"gamma={gamma} must be smaller than the window length {window_length}")
    n_e = window_length - int(gamma)
    count = round_half_up(p * window_length)
    n_s = n_e + 1 - count
    if count and n_s < 1:
        raise ValidationError(
            f"span of {count} points ending at {n_e} does not fit a window of {window_length}"
        )
    return AttackSpan(n_s, n_e)


def apply_scaling(window, spec: Scaling) -> np.ndarray:
    out = np.array(window, dtype=np.float64)
    span = attack_span(out.shape[-1], spec.p, spec.gamma)
    if span.size:
        out[..., span.as_slice()] *= spec.lam
    return out


def ramp_factors(span: AttackSpan, lam: float) -> np.ndarray:
    """Multipliers for positions ``n_s..n_e`` of a ramping attack."""
    i = np.arange(span.n_s, span.n_e + 1)
    mid = (span.n_s + span.n_e) // 2
    steps = np.where(i <= mid, i - span.n_s, span.n_e - i)
    return 1.0 + lam * steps


def apply_ramping(window, spec: Ramping) -> np.ndarray:
    out = np.array(window, dtype=np.float64)
    span = attack_span(out.shape[-1], spec.p, spec.gamma)
    if span.size:
        out[..., span.as_slice()] *= ramp_factors(span, spec.lam)
    return out


def random_indices(n_cells: int, p: float, rng: np.random.Generator) -> np.ndarray:
    k = round_half_up(p * n_cells)
    return rng.permutation(n_cells)[:k]


def apply_random(cells, spec: Random, stream=None) -> np.ndarray:
    """Scale a random subset of all cells of ``cells``.

    ``stream`` (an int or tuple of ints) derives an independent sub-stream
    from ``spec.seed``, e.g. one per evaluation window.
    """
    out = np.array(cells, dtype=np.float64)
    if out.size < 1:
        raise ValidationError("random attack needs at least one cell")
    entropy = [spec.seed]
    if stream is not None:
        entropy.extend(np.atleast_1d(stream).tolist())
    idx = random_indices(out.size, spec.p, np.random.default_rng(entropy))
    flat = out.reshape(-1)
    flat[idx] *= spec.lam
    return out


def apply_attack(window, spec: AttackSpec, stream=None) -> np.ndarray:
    if isinstance(spec, Scaling):
        return apply_scaling(window, spec)
    if isinstance(spec, Ramping):
        return apply_ramping(window, spec)
    if isinstance(spec, Random):
        return apply_random(window, spec, stream)
    raise ValidationError(f"unknown attack spec {spec!r}")


def validate_for_window(spec: AttackSpec, window_length: int):
    """Raise if ``spec`` cannot be applied to windows of ``window_length``."""
    if not isinstance(spec, Random):
        attack_span(window_length, spec.p, spec.gamma)


# -- identity, ordering, serialization -------------------------------------


def is_identity(spec: AttackSpec) -> bool:
    if isinstance(spec, Ramping):
        return spec.lam == 0 or spec.p == 0
    return spec.lam == 1 or spec.p == 0


def perturbation(spec: AttackSpec) -> float:
    """Size of the factor's departure from "no attack", used for tie-breaks."""
    return spec.lam if isinstance(spec, Ramping) else abs(spec.lam - 1.0)


def attack_key(spec: AttackSpec | None) -> tuple:
    """Total order: no attack first, then model, least perturbation, p, gamma, seed."""
    if spec is None:
        return (-1,)
    return (MODEL_ORDER[spec.model], perturbation(spec), spec.lam, spec.p,
            getattr(spec, "gamma", 0), getattr(spec, "seed", 0))


def label(spec: AttackSpec | None) -> str:
    if spec is None:
        return "none"
    if isinstance(spec, Random):
        return f"random(lambda={spec.lam:.10g},p={spec.p:.10g},seed={spec.seed})"
    return f"{spec.model}(lambda={spec.lam:.10g},p={spec.p:.10g},gamma={spec.gamma})"


def attack_to_dict(spec: AttackSpec) -> dict:
    d = {"model": spec.model, "lambda": spec.lam, "p": spec.p}
    if isinstance(spec, Random):
        d["seed"] = spec.seed
    else:
        d["gamma"] = spec.gamma
    return d


def attack_from_dict(d: dict) -> AttackSpec:
    try:
        model = d["model"]
        lam, p = float(d["lambda"]), float(d["p"])
    except KeyError as exc:
        raise ValidationError(f"attack spec missing key {exc}") from None
    allowed = {"model", "lambda", "p", "seed" if model == "random" else "gamma"}
    extra = set(d) - allowed
    if extra:
        raise ValidationError(f"unexpected keys for {model} attack: {sorted(extra)}")
    if model == "scaling":
        return Scaling(lam, p, int(d.get("gamma", 0)))
    if model == "ramping":
        return Ramping(lam, p, int(d.get("gamma", 0)))
    if model == "random":
        return Random(lam, p, int(d.get("seed", 0)))
    raise ValidationError(f"unknown attack model {model!r}")


def make_grid(model: str, lams, ps, gammas=(0,), seed: int = 0, window_length: int = 168) -> list:
    """Cartesian grid of specs for one attack model.

    For ramping, proportions whose span would not fit before ``gamma`` are
    dropped.
    """
    specs = []
    for g in gammas if model != "random" else (None,):
        for lam in lams:
            for p in ps:
                if model == "scaling":
                    specs.append(Scaling(float(lam), float(p), int(g)))
                elif model == "ramping":
                    if round_half_up(p * window_length) <= window_length - g:
                        specs.append(Ramping(float(lam), float(p), int(g)))
                elif model == "random":
                    specs.append(Random(float(lam), float(p), seed))
                else:
                    raise ValidationError(f"unknown attack model {model!r}")
    return specs
