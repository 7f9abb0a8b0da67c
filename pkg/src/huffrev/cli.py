"""Command line front end: build / prove / verify / simulate / bench.

Exit codes are a stable contract: 0 success, 1 verification or logic
failure (proof rejected, pseudonym not revoked), 2 usage or input error.
Output files are written to a temp name and renamed, so a failing command
never leaves a partial file behind. All randomness flows from --seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from typing import Optional

from . import tree as treemod
from . import wire
from .crypto import DEFAULT_BACKEND, setup
from .sim import SimConfig, SimConfigError, run_simulation
from .tree import RevokedLeaf

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


class InputError(Exception):
    """Bad input file or argument value; maps to exit code 2."""


class CommandFailure(Exception):
    """Verification or logic failure; maps to exit code 1."""


def _write_atomic(path: str, data: bytes) -> None:
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def _read_file(path: str, what: str) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {what} {path}: {exc.strerror}") from exc


def _parse_pseudonym(text: str) -> bytes:
    try:
        raw = bytes.fromhex(text)
    except ValueError as exc:
        raise InputError(f"pseudonym is not hex: {exc}") from exc
    if len(raw) != 32:
        raise InputError(f"pseudonym must be 64 hex chars (32 bytes), got {len(raw)} bytes")
    return raw


def _seed_bytes(seed: int) -> bytes:
    if not 0 <= seed <= wire.U64_MAX:
        raise InputError("seed out of u64 range")
    return seed.to_bytes(32, "big")


def _load_leaves_csv(path: str) -> list[RevokedLeaf]:
    """Rows are pseudonym-hex, revocation_epoch, frequency; no header."""
    data = _read_file(path, "leaves file").decode("utf-8", errors="replace")
    leaves = []
    for lineno, row in enumerate(csv.reader(data.splitlines()), start=1):
        if not row:
            continue
        if len(row) != 3:
            raise InputError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
        try:
            pseudonym = _parse_pseudonym(row[0].strip())
            epoch = int(row[1])
            frequency = int(row[2])
        except (InputError, ValueError) as exc:
            raise InputError(f"{path}:{lineno}: {exc}") from exc
        if epoch < 0 or frequency < 0:
            raise InputError(f"{path}:{lineno}: negative field")
        leaves.append(RevokedLeaf(pseudonym, epoch, frequency))
    if not leaves:
        raise InputError(f"{path}: no leaf rows")
    return leaves


def cmd_build(args: argparse.Namespace) -> int:
    leaves = _load_leaves_csv(args.leaves_file)
    master = setup(_seed_bytes(args.seed))
    try:
        built, _ = treemod.build_tree(leaves, args.k, args.epoch, master)
    except treemod.TreeError as exc:
        raise InputError(str(exc)) from exc
    _write_atomic(args.out, treemod.encode_tree(built))
    if args.mpu_out:
        _write_atomic(args.mpu_out, DEFAULT_BACKEND.export_verifier(master))
    print(f"root_digest\t{built.root_digest.hex()}")
    print(f"weighted_path_length\t{treemod.weighted_path_length(built)}")
    return EXIT_OK


def cmd_prove(args: argparse.Namespace) -> int:
    try:
        built = treemod.decode_tree(_read_file(args.tree_file, "tree file"))
    except wire.CodecError as exc:
        raise InputError(f"{args.tree_file}: {exc}") from exc
    pseudonym = _parse_pseudonym(args.pseudonym)
    proof = treemod.generate_proof(built, pseudonym)
    if proof is None:
        raise CommandFailure("not revoked")
    _write_atomic(args.out, treemod.encode_proof(proof))
    print(f"proof_depth\t{proof.depth}")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    pseudonym = _parse_pseudonym(args.pseudonym)
    blob = _read_file(args.mpu_file, "verifier key file")
    try:
        mpu = DEFAULT_BACKEND.import_verifier(blob)
    except (wire.CodecError, ValueError) as exc:
        raise InputError(f"{args.mpu_file}: {exc}") from exc
    raw = _read_file(args.proof_file, "proof file")
    try:
        proof = treemod.decode_proof(raw)
    except wire.CodecError:
        raise CommandFailure("malformed")
    result = treemod.verify_proof(proof, pseudonym, mpu,
                                  args.current_epoch, args.max_age)
    if not result:
        raise CommandFailure(result.reason or "rejected")
    print("accept")
    return EXIT_OK


_CONFIG_FLAGS = (
    ("seed", int), ("k", int), ("num-rsus", int), ("num-obus", int),
    ("num-revoked", int), ("epochs", int), ("queries-per-epoch", int),
    ("zipf-exponent", float), ("public-vehicle-fraction", float),
    ("public-query-multiplier", float), ("trust-threshold", int),
    ("max-root-age", int),
)


def _config_from_args(args: argparse.Namespace) -> SimConfig:
    overrides = {}
    for flag, _ in _CONFIG_FLAGS:
        name = flag.replace("-", "_")
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    if args.cheater_rsu_ids is not None:
        overrides["cheater_rsu_ids"] = tuple(_parse_int_list(args.cheater_rsu_ids))
    if args.config_file:
        if overrides:
            raise InputError("--config-file excludes individual config flags")
        try:
            raw = json.loads(_read_file(args.config_file, "config file"))
        except json.JSONDecodeError as exc:
            raise InputError(f"{args.config_file}: {exc}") from exc
        if not isinstance(raw, dict):
            raise InputError(f"{args.config_file}: config must be a JSON object")
        if "cheater_rsu_ids" in raw:
            raw["cheater_rsu_ids"] = tuple(raw["cheater_rsu_ids"])
        try:
            return SimConfig.from_dict(raw)
        except (SimConfigError, TypeError) as exc:
            raise InputError(f"{args.config_file}: {exc}") from exc
    try:
        return SimConfig(**overrides)
    except SimConfigError as exc:
        raise InputError(str(exc)) from exc


def _parse_int_list(text: str) -> list[int]:
    if not text.strip():
        return []
    try:
        return [int(part) for part in text.split(",")]
    except ValueError as exc:
        raise InputError(f"bad integer list {text!r}") from exc


def _parse_float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",")]
    except ValueError as exc:
        raise InputError(f"bad number list {text!r}") from exc


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    report = run_simulation(cfg)
    rendered = report.to_json() if args.format == "json" else report.to_text()
    if args.report_out:
        _write_atomic(args.report_out, rendered.encode())
    else:
        sys.stdout.write(rendered)
    if args.series_out:
        _write_atomic(args.series_out, report.series_csv().encode())
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    """Sweep (k, zipf exponent) and emit one CSV row of depth ratios per cell."""
    k_list = sorted(set(_parse_int_list(args.k_list)))
    zipf_list = sorted(set(_parse_float_list(args.zipf_list)))
    if not k_list or not zipf_list:
        raise InputError("k-list and zipf-list must be non-empty")
    lines = ["k,zipf_exponent,huffman_mean_depth,baseline_mean_depth,depth_ratio"]
    for k in k_list:
        for s in zipf_list:
            try:
                cfg = SimConfig(
                    seed=args.seed, k=k, num_rsus=args.num_rsus,
                    num_obus=args.num_obus, num_revoked=args.num_revoked,
                    epochs=args.epochs, queries_per_epoch=args.queries_per_epoch,
                    zipf_exponent=s, public_vehicle_fraction=0.1,
                    public_query_multiplier=1.0, trust_threshold=3,
                    cheater_rsu_ids=(), max_root_age=1,
                )
            except SimConfigError as exc:
                raise InputError(str(exc)) from exc
            report = run_simulation(cfg)
            lines.append(
                f"{k},{s:g},{report.weighted_mean_proof_depth:.6f},"
                f"{report.baseline_mean_proof_depth:.6f},{report.depth_ratio:.6f}"
            )
    _write_atomic(args.out, ("\n".join(lines) + "\n").encode())
    print(f"wrote {len(lines) - 1} rows to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="huffrev",
        description="Frequency-ordered k-ary revocation trees: build, prove, verify, simulate, bench.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build a signed tree snapshot from a leaves CSV")
    p.add_argument("leaves_file", help="CSV rows: pseudonym-hex, revocation_epoch, frequency")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--epoch", type=int, required=True)
    p.add_argument("--seed", type=int, required=True, help="master key seed (u64)")
    p.add_argument("--out", required=True, help="snapshot output path")
    p.add_argument("--mpu-out", help="write the verifier key blob here "
                                     "(secret with the deterministic backend)")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("prove", help="extract a revocation proof from a snapshot")
    p.add_argument("tree_file")
    p.add_argument("--pseudonym", required=True, help="64 hex chars")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_prove)

    p = sub.add_parser("verify", help="check a proof file; exit 0 only on accept")
    p.add_argument("proof_file")
    p.add_argument("--pseudonym", required=True)
    p.add_argument("--mpu-file", required=True)
    p.add_argument("--current-epoch", type=int, required=True)
    p.add_argument("--max-age", type=int, required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="run one seeded scenario and write the metrics report")
    p.add_argument("--config-file", help="JSON object with SimConfig fields")
    for flag, typ in _CONFIG_FLAGS:
        p.add_argument(f"--{flag}", type=typ, default=None)
    p.add_argument("--cheater-rsu-ids", default=None, help="comma-separated RSU ids")
    p.add_argument("--report-out", help="metrics output path (stdout if omitted)")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--series-out", help="per-epoch CSV output path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="sweep a (k, zipf) grid and write depth-ratio CSV")
    p.add_argument("--k-list", required=True, help="comma-separated k values")
    p.add_argument("--zipf-list", required=True, help="comma-separated exponents")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--num-rsus", type=int, default=4)
    p.add_argument("--num-obus", type=int, default=2000)
    p.add_argument("--num-revoked", type=int, default=500)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--queries-per-epoch", type=int, default=6000)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CommandFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
