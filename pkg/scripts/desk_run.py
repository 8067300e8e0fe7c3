#!/usr/bin/env python3
"""End-to-end desk-scale run: surrogate data -> training -> samples -> report.

Produces, under --out:
    data.spk            synthetic reference raster
    run/                train_log.csv, checkpoint.ckpt, resolved_config.ini
    generated.spk       sampled spike windows
    eval/               per-statistic CSVs and summary.csv

The JS column of train_log.csv is the headline convergence readout.
"""

import argparse
import csv
import sys
from pathlib import Path

from spiqgan.cli import main as spiqgan


def run(argv):
    code = spiqgan([str(a) for a in argv])
    if code != 0:
        sys.exit(code)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="desk_out")
    parser.add_argument("--neurons", type=int, default=2)
    parser.add_argument("--timesteps", type=int, default=1)
    parser.add_argument("--steps", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--samples", type=int, default=20000)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data = out / "data.spk"
    rates = ",".join(str(0.1 + 0.05 * i) for i in range(args.neurons))

    run(["surrogate", "--neurons", args.neurons, "--cols", 20000,
         "--rates", rates, "--burst-prob", 0.9, "--burst-gain", 2.5,
         "--seed", 1234, "--out", data])

    config = out / "train.ini"
    config.write_text(f"""[generator]
neurons = {args.neurons}
timesteps = {args.timesteps}

[training]
total_gen_steps = {args.steps}
seed = {args.seed}
clip_c = 0.2
js_log_interval = 25

[paths]
data = {data}
out = {out / 'run'}
""")
    run(["train", "--config", config])

    run(["generate", "--checkpoint", out / "run" / "checkpoint.ckpt",
         "--count", args.samples, "--seed", args.seed + 1,
         "--out", out / "generated.spk"])
    run(["evaluate", "--generated", out / "generated.spk",
         "--reference", data, "--neurons", args.neurons,
         "--timesteps", args.timesteps, "--out", out / "eval"])

    with open(out / "run" / "train_log.csv", newline="") as fh:
        rows = [r for r in csv.DictReader(fh) if r["js_divergence"]]
    if rows:
        print(f"JS trend: {float(rows[0]['js_divergence']):.4f} "
              f"-> {float(rows[-1]['js_divergence']):.4f} "
              f"over {len(rows)} logged points")
    with open(out / "eval" / "summary.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            print(f"{row['metric']}: {row['value']}")


if __name__ == "__main__":
    main()
