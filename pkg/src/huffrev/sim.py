"""Seeded discrete-event harness measuring the frequency-ordered tree.

One TTP, a handful of RSUs (optionally some cheaters), and a fleet of
querying OBUs run epochs of query/answer/report/update rounds against a
population of revoked pseudonyms. Query targets are drawn from a Zipf
rank distribution, with pseudonyms tagged as public vehicles weighted up,
so popular pseudonyms dominate the trace the way long-lived road users
dominate real query load.

Everything derives from the one seed: workload, OBU-to-RSU assignment, and
crypto keys. Two runs with the same config produce bytewise-identical
reports. The headline metric compares the mean proof depth answered by the
frequency-ordered tree against a balanced complete k-ary tree over the
same leaves, which isolates what the frequency ordering buys.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np

from . import protocol, tree, wire
from .crypto import setup
from .protocol import (
    Decision,
    Discarded,
    ImpeachmentEmitted,
    Pending,
    ProofResponse,
    Query,
    RsuRevoked,
)


class SimConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    k: int = 4
    num_rsus: int = 4
    num_obus: int = 20
    num_revoked: int = 100
    epochs: int = 5
    queries_per_epoch: int = 2000
    zipf_exponent: float = 1.0
    public_vehicle_fraction: float = 0.1
    public_query_multiplier: float = 1.0
    trust_threshold: int = 3
    cheater_rsu_ids: tuple[int, ...] = ()
    max_root_age: int = 1

    def __post_init__(self):
        object.__setattr__(self, "cheater_rsu_ids", tuple(self.cheater_rsu_ids))
        if not 0 <= self.seed <= wire.U64_MAX:
            raise SimConfigError("seed out of u64 range")
        if self.k < 2:
            raise SimConfigError("k must be >= 2")
        for name in ("num_rsus", "num_obus", "num_revoked", "epochs",
                     "queries_per_epoch", "trust_threshold"):
            if getattr(self, name) < 1:
                raise SimConfigError(f"{name} must be >= 1")
        if self.zipf_exponent < 0:
            raise SimConfigError("zipf_exponent must be >= 0")
        if not 0.0 <= self.public_vehicle_fraction <= 1.0:
            raise SimConfigError("public_vehicle_fraction must be in [0, 1]")
        if self.public_query_multiplier < 1:
            raise SimConfigError("public_query_multiplier must be >= 1")
        if self.max_root_age < 0:
            raise SimConfigError("max_root_age must be >= 0")
        bad = [r for r in self.cheater_rsu_ids if not 0 <= r < self.num_rsus]
        if bad:
            raise SimConfigError(f"cheater ids outside the RSU range: {bad}")

    @classmethod
    def from_dict(cls, raw: dict) -> "SimConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise SimConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["cheater_rsu_ids"] = list(self.cheater_rsu_ids)
        return out


@dataclass(frozen=True)
class Workload:
    """Ordered query trace: parallel arrays of target rank and querying OBU."""

    targets: np.ndarray
    obus: np.ndarray
    public: np.ndarray

    def __eq__(self, other):
        return (isinstance(other, Workload)
                and np.array_equal(self.targets, other.targets)
                and np.array_equal(self.obus, other.obus)
                and np.array_equal(self.public, other.public))


def gen_workload(cfg: SimConfig) -> Workload:
    """Draw the full query trace for a run; pure function of the config."""
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0]))
    n = cfg.num_revoked
    ranks = np.arange(1, n + 1, dtype=np.float64)
    weights = ranks ** (-cfg.zipf_exponent)
    public = np.zeros(n, dtype=bool)
    public_count = int(round(cfg.public_vehicle_fraction * n))
    if public_count:
        public[rng.choice(n, size=public_count, replace=False)] = True
    weights = np.where(public, weights * cfg.public_query_multiplier, weights)
    cum = np.cumsum(weights)
    cum /= cum[-1]
    total = cfg.epochs * cfg.queries_per_epoch
    targets = np.searchsorted(cum, rng.random(total), side="right")
    targets = np.minimum(targets, n - 1).astype(np.int64)
    obus = rng.integers(0, cfg.num_obus, size=total, dtype=np.int64)
    return Workload(targets=targets, obus=obus, public=public)


def balanced_depth(leaf_count: int, k: int) -> int:
    """Leaf depth in the balanced complete k-ary baseline (uniform depth)."""
    depth, capacity = 0, 1
    while capacity < leaf_count:
        capacity *= k
        depth += 1
    return max(depth, 1)


@dataclass(frozen=True)
class EpochRow:
    epoch: int
    weighted_path_length: int
    proofs_answered: int
    ok_responses: int
    mean_proof_depth: float


@dataclass(frozen=True)
class MetricsReport:
    config: SimConfig
    total_queries: int
    proofs_answered: int
    ok_responses: int
    cache_hits_revoked: int
    cache_hits_reliable: int
    weighted_mean_proof_depth: float
    baseline_mean_proof_depth: float
    depth_ratio: float
    proof_bytes_mean: float
    impeachments_emitted: int
    impeachments_accepted: int
    impeachments_dismissed: int
    cheaters_revoked: int
    provisional_accepts: int
    invalid_oks_discarded: int
    per_epoch: tuple[EpochRow, ...]

    _SCALARS = (
        "total_queries", "proofs_answered", "ok_responses", "cache_hits_revoked",
        "cache_hits_reliable", "weighted_mean_proof_depth",
        "baseline_mean_proof_depth", "depth_ratio", "proof_bytes_mean",
        "impeachments_emitted", "impeachments_accepted", "impeachments_dismissed",
        "cheaters_revoked", "provisional_accepts", "invalid_oks_discarded",
    )

    def to_text(self) -> str:
        """One metric per line: name, tab, value."""
        lines = []
        for name in self._SCALARS:
            value = getattr(self, name)
            if isinstance(value, float):
                lines.append(f"{name}\t{value:.6f}")
            else:
                lines.append(f"{name}\t{value}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        payload = {name: getattr(self, name) for name in self._SCALARS}
        payload["config"] = self.config.to_dict()
        payload["per_epoch"] = [asdict(row) for row in self.per_epoch]
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    def series_csv(self) -> str:
        lines = ["epoch,weighted_path_length,proofs_answered,ok_responses,mean_proof_depth"]
        for row in self.per_epoch:
            lines.append(
                f"{row.epoch},{row.weighted_path_length},{row.proofs_answered},"
                f"{row.ok_responses},{row.mean_proof_depth:.6f}"
            )
        return "\n".join(lines) + "\n"


_PSEUDONYMS_PER_REVOKED_OBU = 3
_REVOKED_OBU_ID_BASE = 1_000_000


def _mean(total: float, count: int) -> float:
    return total / count if count else 0.0


def run_simulation(cfg: SimConfig) -> MetricsReport:
    """Run the full scenario and return the metrics; reproducible per config."""
    workload = gen_workload(cfg)
    delivery_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))

    crypto_seed = hashlib.sha3_256(b"sim-master" + wire.u64(cfg.seed)).digest()
    master = setup(crypto_seed)
    ttp = protocol.make_ttp(master, k=cfg.k, max_root_age=cfg.max_root_age)

    obus = []
    for obu_id in range(cfg.num_obus):
        keys = protocol.ttp_register_obu(ttp, obu_id, 1)
        obus.append(protocol.ObuState(
            id=obu_id,
            ttp_mpu=master.master_public,
            trust_threshold=cfg.trust_threshold,
            max_root_age=cfg.max_root_age,
            pseudonym_keys=keys,
        ))

    # The revoked population belongs to misbehaving OBUs outside the
    # querying fleet; revoking an OBU revokes all its pseudonyms at once.
    remaining = cfg.num_revoked
    revoked_obu_ids = []
    while remaining > 0:
        count = min(_PSEUDONYMS_PER_REVOKED_OBU, remaining)
        obu_id = _REVOKED_OBU_ID_BASE + len(revoked_obu_ids)
        protocol.ttp_register_obu(ttp, obu_id, count)
        revoked_obu_ids.append(obu_id)
        remaining -= count
    update = None
    for obu_id in revoked_obu_ids:
        update = protocol.ttp_revoke_obu(ttp, obu_id)
    assert update is not None
    revoked_pseudonyms = [
        p for obu_id in revoked_obu_ids for p in ttp.obu_registry[obu_id]
    ]
    assert len(revoked_pseudonyms) == cfg.num_revoked

    rsus = []
    for rsu_id in range(cfg.num_rsus):
        rsu = protocol.ttp_register_rsu(ttp, rsu_id)
        if rsu_id in cfg.cheater_rsu_ids:
            rsu.behavior = "cheater"
        protocol.rsu_apply_update(rsu, update)
        rsus.append(rsu)
    active_ids = list(range(cfg.num_rsus))

    totals = {
        "proofs": 0, "oks": 0, "hits_revoked": 0, "hits_reliable": 0,
        "depth_sum": 0, "baseline_depth_sum": 0, "bytes_sum": 0,
        "imp_emitted": 0, "imp_accepted": 0, "imp_dismissed": 0,
        "cheaters_revoked": 0, "provisional": 0, "invalid_oks": 0,
    }
    per_epoch: list[EpochRow] = []

    def revoke_rsu(rsu_id: int) -> None:
        if rsu_id in active_ids:
            active_ids.remove(rsu_id)
        for obu in obus:
            protocol.obu_note_rsu_revoked(obu, rsu_id)

    round_size = cfg.num_obus
    for epoch in range(cfg.epochs):
        epoch_proofs = 0
        epoch_oks = 0
        epoch_depth_sum = 0
        start = epoch * cfg.queries_per_epoch
        stop = start + cfg.queries_per_epoch
        perm: Optional[np.ndarray] = None
        for i in range(start, stop):
            if (i - start) % round_size == 0:
                perm = delivery_rng.permutation(len(active_ids)) if active_ids else None
            obu = obus[int(workload.obus[i])]
            target = revoked_pseudonyms[int(workload.targets[i])]

            decision = protocol.obu_check(obu, target)
            if decision is Decision.REJECT:
                totals["hits_revoked"] += 1
                continue
            if decision is Decision.ACCEPT:
                totals["hits_reliable"] += 1
                continue
            if not active_ids or perm is None or len(perm) != len(active_ids):
                perm = delivery_rng.permutation(len(active_ids)) if active_ids else None
            if perm is None:
                totals["provisional"] += 1
                continue
            rsu = rsus[active_ids[int(perm[obu.id % len(active_ids)])]]
            response = protocol.rsu_handle_query(rsu, Query(target))

            if isinstance(response, ProofResponse):
                totals["proofs"] += 1
                epoch_proofs += 1
                depth = response.proof.depth
                totals["depth_sum"] += depth
                epoch_depth_sum += depth
                totals["baseline_depth_sum"] += balanced_depth(cfg.num_revoked, cfg.k)
                totals["bytes_sum"] += len(tree.encode_proof(response.proof))
            else:
                totals["oks"] += 1
                epoch_oks += 1

            outcome = protocol.obu_process_response(obu, response, current_epoch=ttp.epoch)
            protocol.check_obu_invariants(obu)
            if isinstance(response, ProofResponse):
                # honest RSUs only ever hand out proofs that verify
                assert not isinstance(outcome, Discarded), outcome
            if isinstance(outcome, ImpeachmentEmitted):
                totals["imp_emitted"] += 1
                verdict = protocol.ttp_handle_impeachment(ttp, outcome.impeachment)
                if isinstance(verdict, RsuRevoked):
                    totals["imp_accepted"] += 1
                    totals["cheaters_revoked"] += 1
                    revoke_rsu(verdict.rsu_id)
                else:
                    totals["imp_dismissed"] += 1
            elif isinstance(outcome, Pending):
                totals["provisional"] += 1
            elif isinstance(outcome, Discarded) and outcome.reason == "bad_ok_signature":
                totals["invalid_oks"] += 1

        # Per-epoch conservation: every proof issued was counted exactly once.
        reported = 0
        for rsu in rsus:
            if rsu.id not in active_ids:
                continue
            assert sum(rsu.query_counters.values()) == rsu.proofs_issued_this_epoch
            reported += rsu.proofs_issued_this_epoch
            report = protocol.rsu_report_frequencies(rsu, ttp.epoch)
            protocol.ttp_receive_frequency_report(ttp, report)
        assert reported == epoch_proofs, (reported, epoch_proofs)

        per_epoch.append(EpochRow(
            epoch=epoch,
            weighted_path_length=tree.weighted_path_length(ttp.tree) if ttp.tree else 0,
            proofs_answered=epoch_proofs,
            ok_responses=epoch_oks,
            mean_proof_depth=_mean(epoch_depth_sum, epoch_proofs),
        ))

        update = protocol.ttp_epoch_update(ttp)
        for rsu in rsus:
            if rsu.id in active_ids:
                protocol.rsu_apply_update(rsu, update)
        for obu in obus:
            protocol.obu_advance_epoch(obu, ttp.epoch)
            protocol.check_obu_invariants(obu)

    huffman_mean = _mean(totals["depth_sum"], totals["proofs"])
    baseline_mean = _mean(totals["baseline_depth_sum"], totals["proofs"])
    return MetricsReport(
        config=cfg,
        total_queries=cfg.epochs * cfg.queries_per_epoch,
        proofs_answered=totals["proofs"],
        ok_responses=totals["oks"],
        cache_hits_revoked=totals["hits_revoked"],
        cache_hits_reliable=totals["hits_reliable"],
        weighted_mean_proof_depth=huffman_mean,
        baseline_mean_proof_depth=baseline_mean,
        depth_ratio=huffman_mean / baseline_mean if baseline_mean else 0.0,
        proof_bytes_mean=_mean(totals["bytes_sum"], totals["proofs"]),
        impeachments_emitted=totals["imp_emitted"],
        impeachments_accepted=totals["imp_accepted"],
        impeachments_dismissed=totals["imp_dismissed"],
        cheaters_revoked=totals["cheaters_revoked"],
        provisional_accepts=totals["provisional"],
        invalid_oks_discarded=totals["invalid_oks"],
        per_epoch=tuple(per_epoch),
    )
