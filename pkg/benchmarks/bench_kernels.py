"""Compare the compiled and numpy kernels on the full-size training problem.

Usage: python3 benchmarks/bench_kernels.py [--epochs 200] [--repeats 3]
"""

import argparse
import json
import time
from datetime import date

import numpy as np

from resilient_forecast import _kernels_py
from resilient_forecast.dataio import SynthConfig, split_windows, synth_series
from resilient_forecast.mlp import fit_scaler, init_model

try:
    from resilient_forecast import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def _problem():
    series = synth_series(SynthConfig(), 7)
    train, test = split_windows(series, (date(2004, 1, 1), date(2005, 12, 31)), (date(2006, 1, 1), date(2006, 12, 31)))
    weight = np.full(len(train), 1.0 / len(train))
    s = fit_scaler(train.x_log, train.z, weight)
    norm = lambda x: np.ascontiguousarray((x - s.input_center) / s.input_scale)
    return norm(train.x_log), np.ascontiguousarray((train.z - s.output_center) / s.output_scale), weight, norm(test.x_log)


def _best(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench(module, epochs, repeats):
    x, z, weight, x_test = _problem()
    m = init_model(0)

    def run_fit():
        w1, b1, w2 = (np.array(a, order="C") for a in (m.w1, m.b1, m.w2))
        b2 = np.zeros(1)
        # a tolerance of -inf disables early stopping so every epoch runs
        trace, _ = module.fit(w1, b1, w2, b2, x, z, weight, 0.01, epochs, -np.inf)
        return (w1, b1, w2, float(b2[0])), trace

    fit_s, (params, trace) = _best(run_fit, repeats)
    pred_s, pred = _best(lambda: module.predict(*params, x_test), max(repeats, 20))
    return {"fit_ms_per_epoch": 1e3 * fit_s / len(trace), "predict_us_per_batch": 1e6 * pred_s,
            "final_loss": float(trace[-1]), "pred": pred}


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--epochs", type=int, default=200)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args(argv)
    results = {"python": bench(_kernels_py, args.epochs, args.repeats)}
    if _kernels_c is not None:
        results["cython"] = bench(_kernels_c, args.epochs, args.repeats)
        gap = np.max(np.abs(results["cython"]["pred"] - results["python"]["pred"]))
        print(f"max prediction difference between backends: {gap:.3e}")
    else:
        print("compiled kernels not built; only the numpy fallback was timed")
    for name, r in results.items():
        r.pop("pred")
        print(f"{name:>7}: fit {r['fit_ms_per_epoch']:.3f} ms/epoch, predict {r['predict_us_per_batch']:.1f} us "
              f"per 358-row batch, final loss {r['final_loss']:.6g}")
    if "cython" in results:
        ratio = results["python"]["fit_ms_per_epoch"] / results["cython"]["fit_ms_per_epoch"]
        print(f"training speedup: {ratio:.2f}x")
    print(json.dumps(results))


if __name__ == "__main__":
    main()
