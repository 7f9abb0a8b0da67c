#!/usr/bin/env python3
"""Run the cheating-RSU scenario and show how fast the fraud is caught.

One of the RSUs answers 'OK' even for revoked pseudonyms. OBUs that later
receive a genuine revocation proof for the same pseudonym submit the signed
'OK' together with the proof, and the TTP revokes the cheater.
"""

import argparse
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from huffrev.sim import SimConfig, run_simulation


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--num-rsus", type=int, default=5)
    parser.add_argument("--cheaters", type=int, nargs="+", default=[2])
    parser.add_argument("--num-obus", type=int, default=50)
    parser.add_argument("--num-revoked", type=int, default=60)
    parser.add_argument("--epochs", type=int, default=5)
    parser.add_argument("--queries-per-epoch", type=int, default=3000)
    args = parser.parse_args()

    cfg = SimConfig(
        seed=args.seed, k=4, num_rsus=args.num_rsus, num_obus=args.num_obus,
        num_revoked=args.num_revoked, epochs=args.epochs,
        queries_per_epoch=args.queries_per_epoch, zipf_exponent=1.2,
        public_vehicle_fraction=0.1, public_query_multiplier=1.0,
        trust_threshold=3, cheater_rsu_ids=tuple(args.cheaters), max_root_age=1,
    )
    report = run_simulation(cfg)
    print(report.to_text())
    caught = report.cheaters_revoked
    planted = len(cfg.cheater_rsu_ids)
    print(f"cheaters planted: {planted}, revoked by impeachment: {caught}")
    if report.per_epoch:
        lying_epochs = [row.epoch for row in report.per_epoch if row.ok_responses]
        if lying_epochs:
            print(f"'OK' answers (all from cheaters; every query target is revoked) "
                  f"stopped after epoch {max(lying_epochs)}")


if __name__ == "__main__":
    main()
