#!/usr/bin/env python3
"""Minimize the layered energy once and print the full diagnostic picture.

Runs the diagnostics task for a single parameter point: random start,
gradient descent with Barzilai-Borwein steps, then the energy breakdown,
the normalized report row and the potential-theoretic observables.
"""
import argparse
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from ldsim.cli import ExperimentConfig, run_experiment


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", type=float, default=0.2)
    ap.add_argument("--h-ex", type=float, default=4.0)
    ap.add_argument("--n-layers", type=int, default=2)
    ap.add_argument("--mesh", type=int, default=17)
    ap.add_argument("--nz", type=int, default=13)
    ap.add_argument("--pad", type=float, default=0.25)
    ap.add_argument("--max-iters", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=11)
    ap.add_argument("--out", default="runs/demo")
    args = ap.parse_args(argv)

    cfg = ExperimentConfig.from_dict(
        {
            "task": "diagnostics",
            "out": args.out,
            "seed": args.seed,
            "dump_fields": True,
            "model": {
                "epsilon": args.eps,
                "n_layers": args.n_layers,
                "height": 1.0,
                "h_ex": args.h_ex,
                "pad": args.pad,
                "mesh": [args.mesh, args.mesh, args.nz],
            },
            "minimize": {"max_iters": args.max_iters, "grad_tol": 1.0e-6},
        },
        "diagnostics",
    )
    rc = run_experiment(cfg)
    if rc != 0:
        return rc
    point = Path(args.out) / "point_000"
    for name in ("breakdown", "report", "diagnostics"):
        print(f"--- {name}")
        print((point / f"{name}.json").read_text().strip())
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
