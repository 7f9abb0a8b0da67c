#!/usr/bin/env python3
"""Sweep tree arity and workload skew; report proof-depth ratios.

Writes one CSV row per (k, zipf exponent) cell and prints a table. Ratios
below 1.0 mean the frequency-ordered tree answered queries with shorter
proofs than a balanced tree over the same leaves would have.
"""

import argparse
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from huffrev.sim import SimConfig, run_simulation


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--k", type=int, nargs="+", default=[2, 3, 4, 5])
    parser.add_argument("--zipf", type=float, nargs="+", default=[0.0, 0.8, 1.2, 1.6])
    parser.add_argument("--num-revoked", type=int, default=500)
    parser.add_argument("--num-obus", type=int, default=2000)
    parser.add_argument("--epochs", type=int, default=5)
    parser.add_argument("--queries-per-epoch", type=int, default=6000)
    parser.add_argument("--out", default="bench_depth.csv")
    args = parser.parse_args()

    rows = []
    print(f"{'k':>3} {'s':>5} {'huffman':>8} {'baseline':>9} {'ratio':>7}")
    for k in sorted(set(args.k)):
        for s in sorted(set(args.zipf)):
            cfg = SimConfig(
                seed=args.seed, k=k, num_rsus=4, num_obus=args.num_obus,
                num_revoked=args.num_revoked, epochs=args.epochs,
                queries_per_epoch=args.queries_per_epoch, zipf_exponent=s,
                public_vehicle_fraction=0.1, public_query_multiplier=1.0,
                trust_threshold=3, cheater_rsu_ids=(), max_root_age=1,
            )
            report = run_simulation(cfg)
            rows.append((k, s, report.weighted_mean_proof_depth,
                         report.baseline_mean_proof_depth, report.depth_ratio))
            print(f"{k:>3} {s:>5.2f} {rows[-1][2]:>8.3f} {rows[-1][3]:>9.3f} "
                  f"{rows[-1][4]:>7.3f}")

    out = pathlib.Path(args.out)
    lines = ["k,zipf_exponent,huffman_mean_depth,baseline_mean_depth,depth_ratio"]
    lines += [f"{k},{s:g},{h:.6f},{b:.6f},{r:.6f}" for k, s, h, b, r in rows]
    out.write_text("\n".join(lines) + "\n")
    print(f"\nwrote {out}")


if __name__ == "__main__":
    main()
