"""Day-ahead load forecasting hardened by accelerated adversarial training."""

__version__ = "0.1.0"

from ._backend import BACKEND
from .advtrain import AdvTrainJob, adversarial_train, generate_adversarial_dataset, train_clean
from .attacks import (AttackSpan, Ramping, Random, Scaling, apply_attack, apply_random, apply_ramping,
                      apply_scaling, attack_span)
from .dataio import (LoadSeries, SamplePair, SynthConfig, WindowedDataset, build_windows, parse_load_csv,
                     slice_period, synth_series)
from .errors import (DivergenceError, ForecastError, GapError, ParseError, RangeError,
                     SelectionInfeasibleError, ValidationError)
from .evaluate import EvalReport, evaluate_under_attack, grid_evaluate, mape
from .mlp import MLPModel, TrainConfig, TrainReport, backprop, forward, init_model, train
from .selection import SelectionConfig, SelectionResult, run_selection

__all__ = [
    "AdvTrainJob", "AttackSpan", "BACKEND", "DivergenceError", "EvalReport", "ForecastError", "GapError",
    "LoadSeries", "MLPModel", "ParseError", "Ramping", "Random", "RangeError", "SamplePair", "Scaling",
    "SelectionConfig", "SelectionInfeasibleError", "SelectionResult", "SynthConfig", "TrainConfig",
    "TrainReport", "ValidationError", "WindowedDataset", "adversarial_train", "apply_attack",
    "apply_random", "apply_ramping", "apply_scaling", "attack_span", "backprop", "build_windows",
    "evaluate_under_attack", "forward", "generate_adversarial_dataset", "grid_evaluate", "init_model",
    "mape", "parse_load_csv", "run_selection", "slice_period", "synth_series", "train", "train_clean",
]
