"""Command-line front end.

    rfcast ingest    --synthetic --out run/
    rfcast train     --out run/
    rfcast adv-train --config job.json --out run/
    rfcast eval      --config eval.json --out run/
    rfcast select    --config select.json --out run/ --workers 4
    rfcast report    run/report.csv

Every command reads an optional JSON ``--config`` and writes its artifacts
plus the effective configuration (``<command>_config.json``) under
``--out``. All randomness derives from ``--seed`` through named sub-seeds.
Exit codes: 0 success, 2 invalid input, 3 training divergence, 4 no
configuration passed the selection threshold.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import zlib
from datetime import date
from pathlib import Path

import numpy as np

from . import __version__
from .advtrain import AdvTrainJob, adversarial_train, train_clean
from .attacks import attack_from_dict, attack_to_dict, label
from .dataio import (SynthConfig, default_data_path, load_splits, read_load_csv, save_splits,
                     split_windows, synth_series)
from .errors import DivergenceError, SelectionInfeasibleError, ValidationError
from .evaluate import grid_evaluate, mape, parse_report_csv
from .mlp import TrainConfig, load_model, save_model
from .selection import (FunctionEvaluator, SelectionConfig, TrainingEvaluator, _grid_from_json,
                        reference_config, run_selection)

logger = logging.getLogger("resilient_forecast")

EXIT_OK, EXIT_INVALID, EXIT_DIVERGED, EXIT_INFEASIBLE = 0, 2, 3, 4
DEFAULT_TRAIN_PERIOD = ("2004-01-01", "2005-12-31")
DEFAULT_TEST_PERIOD = ("2006-01-01", "2006-12-31")


def derive_seed(seed: int, name: str) -> int:
    """Stable named sub-seed of the global seed."""
    ss = np.random.SeedSequence([seed, zlib.crc32(name.encode())])
    return int(ss.generate_state(1, np.uint32)[0])


def _dump(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _load_config(args) -> dict:
    if not args.config:
        return {}
    path = Path(args.config)
    if not path.is_file():
        raise ValidationError(f"config file not found: {path}")
    try:
        cfg = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(cfg, dict):
        raise ValidationError(f"{path}: top level must be an object")
    return cfg


def _train_cfg(cfg: dict, seed: int) -> TrainConfig:
    d = dict(cfg.get("train", {}))
    d.setdefault("seed", derive_seed(seed, "init"))
    return TrainConfig.from_dict(d)


def _fill_random_seeds(entry, seed):
    """Give random-attack grid entries the derived seed unless they carry one."""
    rseed = derive_seed(seed, "random-attack")
    if isinstance(entry, dict):
        if entry.get("model", "random") == "random" and "lambda" in entry:
            entry = dict(entry)
            entry.setdefault("seed", rseed)
        return entry
    return [_fill_random_seeds(e, seed) for e in entry]


def _grids(raw: dict, seed: int) -> dict:
    out = {}
    for model, entry in raw.items():
        if model == "random":
            entry = _fill_random_seeds(entry, seed)
        out[model] = _grid_from_json(model, entry, derive_seed(seed, "random-attack"))
    return out


def _dataset_path(cfg, out: Path) -> Path:
    path = Path(cfg.get("dataset", out / "dataset.npz"))
    if not path.is_file():
        raise ValidationError(f"dataset not found: {path} (run 'ingest' first)")
    return path


def _period(value, default):
    a, b = value if value else default
    return date.fromisoformat(a), date.fromisoformat(b)


# -- commands ----------------------------------------------------------------


def cmd_ingest(args, cfg, out: Path):
    train_p = _period(cfg.get("train_period"), DEFAULT_TRAIN_PERIOD)
    test_p = _period(cfg.get("test_period"), DEFAULT_TEST_PERIOD)
    if args.synthetic or cfg.get("synthetic") is not None and not cfg.get("csv"):
        profile = SynthConfig.from_dict(cfg.get("synthetic") or {})
        series = synth_series(profile, derive_seed(args.seed, "synthetic"))
        source = {"synthetic": profile.to_dict()}
    else:
        path = Path(args.csv or cfg.get("csv") or default_data_path())
        if not path.is_file():
            raise ValidationError(f"load CSV not found: {path}")
        zone = int(cfg.get("zone", 1))
        series = read_load_csv(path, zone=zone, start=min(train_p[0], test_p[0]),
                               end=max(train_p[1], test_p[1]))
        source = {"csv": str(path), "zone": zone}
    train, test = split_windows(series, train_p, test_p)
    meta = {"source": source, "train_period": [d.isoformat() for d in train_p],
            "test_period": [d.isoformat() for d in test_p],
            "train_samples": len(train), "test_samples": len(test)}
    save_splits(out / "dataset.npz", train, test, meta)
    _dump(out / "dataset.json", meta)
    print(f"train samples: {len(train)}  test samples: {len(test)}")
    return meta


def cmd_train(args, cfg, out: Path):
    dataset = _dataset_path(cfg, out)
    train, test, _ = load_splits(dataset)
    tcfg = _train_cfg(cfg, args.seed)
    model, report = train_clean(train, tcfg)
    name = cfg.get("name", "traditional")
    save_model(model, out / f"{name}.json")
    _dump(out / f"{name}_train_report.json", report.to_dict())
    score = mape(model, test)
    print(f"{name}: clean MAPE {score:.4f} ({100 * score:.2f}%) after {report.epochs_run} epochs")
    return {"dataset": str(dataset), "train": tcfg.to_dict(), "name": name}


def cmd_adv_train(args, cfg, out: Path):
    if "attack" not in cfg:
        raise ValidationError("adv-train needs an 'attack' object in --config")
    dataset = _dataset_path(cfg, out)
    train, test, _ = load_splits(dataset)
    attack = attack_from_dict(_fill_random_seeds(cfg["attack"], args.seed))
    job = AdvTrainJob(attack, _train_cfg(cfg, args.seed))
    model, report = adversarial_train(train, job)
    name = cfg.get("name", f"adv-{attack.model}")
    save_model(model, out / f"{name}.json")
    with open(out / "reports.jsonl", "a") as fh:
        fh.write(json.dumps({"model": name, **job.to_dict(), "report": report.to_dict()}, sort_keys=True) + "\n")
    score = mape(model, test)
    print(f"{name} [{label(attack)}]: clean MAPE {score:.4f} ({100 * score:.2f}%)")
    return {"dataset": str(dataset), "name": name, **job.to_dict()}


def cmd_eval(args, cfg, out: Path):
    dataset = _dataset_path(cfg, out)
    _, test, _ = load_splits(dataset)
    paths = cfg.get("models") or {"traditional": str(out / "traditional.json")}
    if isinstance(paths, list):
        paths = {Path(p).stem: p for p in paths}
    models = {}
    for mid, p in sorted(paths.items()):
        if not Path(p).is_file():
            raise ValidationError(f"model not found: {p}")
        models[mid] = load_model(p)
    raw = cfg.get("grid")
    if raw is None:
        full = reference_config(seed=derive_seed(args.seed, "random-attack"))
        grid = full.all_evaluation_attacks()
    else:
        grid = [s for specs in _grids(raw, args.seed).values() for s in specs]
    repeats = int(cfg.get("repeats", 1))
    report = grid_evaluate(models, test, grid, workers=args.workers, repeats=repeats,
                           metadata={"seed": args.seed, "models": sorted(paths)})
    report.write(out / "report.csv")
    for mid in models:
        clean = report.lookup(mid)
        scores = [r.mape for r in report.rows if r.model_id == mid and r.attack is not None]
        print(f"{mid}: clean MAPE {clean:.4f} ({100 * clean:.2f}%)  "
              f"mean under attack {np.mean(scores):.4f} ({100 * np.mean(scores):.2f}%)")
    return {"dataset": str(dataset), "models": paths, "grid": [attack_to_dict(s) for s in grid],
            "repeats": repeats}


def _table_evaluator(path):
    table = json.loads(Path(path).read_text())
    clean, attacked = table["clean"], table["attacked"]
    return FunctionEvaluator(lambda tr: clean[label(tr)],
                             lambda tr, te: attacked[f"{label(tr)}|{label(te)}"])


def cmd_select(args, cfg, out: Path):
    if cfg.get("preset") == "reference" or not cfg.get("training_grids"):
        base = reference_config(float(cfg.get("threshold", 0.1)), derive_seed(args.seed, "random-attack"),
                                _train_cfg(cfg, args.seed))
        base = base.to_dict()
    else:
        base = {"threshold": cfg["threshold"],
                "training_grids": {m: [attack_to_dict(s) for s in g]
                                   for m, g in _grids(cfg["training_grids"], args.seed).items()},
                "evaluation_grids": {m: [attack_to_dict(s) for s in g]
                                     for m, g in _grids(cfg["evaluation_grids"], args.seed).items()},
                "train": _train_cfg(cfg, args.seed).to_dict(), "repeats": int(cfg.get("repeats", 1))}
    sel = SelectionConfig.from_dict(base)
    dataset = None
    if cfg.get("mock_table"):
        evaluator = _table_evaluator(cfg["mock_table"])
    else:
        dataset = _dataset_path(cfg, out)
        train, test, _ = load_splits(dataset)
        evaluator = TrainingEvaluator(train, test, sel.train_cfg, sel.repeats)
    result = run_selection(sel, evaluator, workers=args.workers)
    _dump(out / "selection.json", result.to_dict())
    result.audit_report().write(out / "audit.csv")
    name, spec, score = result.overall
    counts = ", ".join(f"{m}: {len(v)}" for m, v in result.reserved.items())
    print(f"reserved configurations ({counts})")
    for m, (s, v) in result.per_model_choice.items():
        print(f"  {m}: {label(s)}  mean MAPE {v:.4f}")
    print(f"selected {name} {label(spec)}: mean MAPE {score:.4f} ({100 * score:.2f}%)")
    return {**sel.to_dict(), "dataset": dataset and str(dataset), "mock_table": cfg.get("mock_table")}


def cmd_report(args, cfg, out: Path):
    path = Path(args.report or cfg.get("report") or out / "report.csv")
    if not path.is_file():
        raise ValidationError(f"report not found: {path}")
    report = parse_report_csv(path.read_text())
    summary = {}
    for mid in sorted({r.model_id for r in report.rows}):
        rows = [r for r in report.rows if r.model_id == mid]
        attacked = [r.mape for r in rows if r.attack is not None]
        clean = [r.mape for r in rows if r.attack is None]
        entry = {"clean_mape": clean[0] if clean else None, "attacks": len(attacked)}
        if attacked:
            worst = max((r for r in rows if r.attack is not None), key=lambda r: r.mape)
            entry.update(mean_attacked_mape=float(np.mean(attacked)), max_attacked_mape=worst.mape,
                         worst_attack=label(worst.attack))
        summary[mid] = entry
        line = f"{mid}:"
        if clean:
            line += f" clean {clean[0]:.4f} ({100 * clean[0]:.2f}%)"
        if attacked:
            line += (f" mean {entry['mean_attacked_mape']:.4f} ({100 * entry['mean_attacked_mape']:.2f}%)"
                     f" worst {worst.mape:.4f} under {entry['worst_attack']}")
        print(line)
    _dump(out / "summary.json", summary)
    return {"report": str(path)}


COMMANDS = {
    "ingest": cmd_ingest,
    "train": cmd_train,
    "adv-train": cmd_adv_train,
    "eval": cmd_eval,
    "select": cmd_select,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--seed", type=int, default=0, help="global seed (default 0)")
    common.add_argument("--out", default="run", help="output directory (default ./run)")
    common.add_argument("--synthetic", action="store_true", help="use the synthetic surrogate series")
    common.add_argument("--workers", type=int, default=1, help="parallel workers for grids")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="rfcast", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "ingest":
            p.add_argument("--csv", help="GEFCom-format load CSV (default $RF_DATA_DIR/Load_history.csv)")
        if name == "report":
            p.add_argument("report", nargs="?", help="report CSV to summarize")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.workers < 1:
            raise ValidationError("--workers must be >= 1")
        cfg = _load_config(args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        effective = COMMANDS[args.command](args, cfg, out)
        _dump(out / f"{args.command}_config.json",
              {"command": args.command, "seed": args.seed, "synthetic": args.synthetic,
               "config": effective})
    except SelectionInfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ValidationError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
