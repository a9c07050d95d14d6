"""Attack harness: tamper avalanche, share removal, replay, clone, silence.

Every trial draws its session nonce and sharing randomness from
``trial_seed(seed, trial)``, so a trial's result does not depend on which
worker ran it or in what order.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .chiplet import Behavior, Chiplet, expected_digest, puf_response
from .config import ATTACK_TYPES, Scenario
from .crypto import SessionContext, Signature, flip_bits, hamming_distance, session_digest
from .interposer import MessageKind
from .protocol import (
    AuthenTree, Classification, TranscriptEntry, Verdict, authenticate_sip,
)
from .sharing import aggregate_digest

DEFAULT_LENGTHS = (64, 128, 256, 512)
DEFAULT_ATTACKS = ("bit_flip", "share_removal", "replay")
CSV_COLUMNS = ("attack", "length_bits", "mean_hd", "std_hd", "min", "max", "fail_rate")


def trial_seed(seed: int, trial: int) -> int:
    digest = hashlib.sha256(b"authentree/trial" + (seed % 2**64).to_bytes(8, "big")
                            + trial.to_bytes(8, "big")).digest()
    return int.from_bytes(digest[:8], "big")


def trial_context(seed: int, trial: int) -> SessionContext:
    nonce = hashlib.sha256(b"authentree/trial-nonce" + trial_seed(seed, trial).to_bytes(8, "big")).digest()
    # session 1 is the harness setup session
    return SessionContext(trial + 2, nonce[:16])


@dataclass
class HammingReport:
    attack: str
    signature_length_bits: int
    distances: list[int] = field(default_factory=list)
    verdicts: list[str] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    @property
    def trials(self) -> int:
        return len(self.verdicts)

    @property
    def mean(self) -> Optional[float]:
        return float(np.mean(self.distances)) if self.distances else None

    @property
    def std(self) -> Optional[float]:
        # population std so a single trial reports 0
        return float(np.std(self.distances)) if self.distances else None

    @property
    def min(self) -> Optional[int]:
        return min(self.distances) if self.distances else None

    @property
    def max(self) -> Optional[int]:
        return max(self.distances) if self.distances else None

    @property
    def passes(self) -> int:
        return self.verdicts.count(Verdict.PASS.value)

    @property
    def fail_rate(self) -> float:
        return 1.0 - self.passes / len(self.verdicts) if self.verdicts else 0.0

    def row(self) -> dict:
        fmt = lambda x: "" if x is None else f"{x:.4f}"
        return {
            "attack": self.attack, "length_bits": self.signature_length_bits,
            "mean_hd": fmt(self.mean), "std_hd": fmt(self.std),
            "min": "" if self.min is None else self.min, "max": "" if self.max is None else self.max,
            "fail_rate": f"{self.fail_rate:.4f}",
        }

    def raw_records(self) -> list[dict]:
        return [
            {"attack": self.attack, "length_bits": self.signature_length_bits, "trial": i,
             "hd": self.distances[i] if i < len(self.distances) else None, "verdict": v}
            for i, v in enumerate(self.verdicts)
        ]


class Harness:
    """A scenario with its trust tree already formed, ready for repeated trials."""

    def __init__(self, scenario: Scenario, target: Optional[int] = None):
        self.scenario = scenario
        self.engine = AuthenTree(scenario.topology, scenario.manifest, scenario.protocol, scenario.seed)
        setup = self.engine.new_session()
        self.tree, self.clock = self.engine.cross_authenticate_integrators(setup)
        third = scenario.topology.third_parties
        if not third:
            raise ValueError("scenario has no third-party chiplet to attack")
        self.target: Chiplet = scenario.topology.chiplets[target] if target is not None else third[0]
        self.bits = scenario.protocol.signature_bits
        self.challenge = scenario.manifest.challenge

    def expected(self, ctx: SessionContext):
        return expected_digest(self.scenario.manifest, self.target.id, self.challenge, ctx)

    def deal(self, ctx: SessionContext, rng: random.Random):
        _, self.clock = self.engine.distribute_shares(self.tree, ctx, [self.target], rng, start=self.clock)

    def judge(self, ctx: SessionContext) -> tuple[Verdict, Optional[str]]:
        """Quorum verdict, escalated through localization when anomalous."""
        rnd = self.engine.authenticate_chiplet(self.tree, self.target, ctx, start=self.clock)
        self.clock = rnd.end_cycle
        if rnd.verdict is Verdict.ANOMALOUS and rnd.verdicts and not (rnd.cause or "").startswith("dos"):
            diag = self.engine.localize_fault(self.tree, self.target, rnd, ctx, start=self.clock)
            self.clock = diag.end_cycle
            final = Verdict.FAIL if diag.rejects_chiplet else Verdict.PASS
            return final, diag.classification.value
        return rnd.verdict, rnd.cause

    def trial(self, seed: int, trial: int) -> tuple[SessionContext, random.Random]:
        ctx = trial_context(seed, trial)
        rng = random.Random(trial_seed(seed, trial))
        self.deal(ctx, rng)
        return ctx, rng


def attack_bit_flip(scenario: Scenario, k: int = 1, trials: int = 1000, seed: Optional[int] = None,
                    target: Optional[int] = None) -> HammingReport:
    """Flip ``k`` random signature bits before hashing; measure digest distance."""
    bits = scenario.protocol.signature_bits
    if not 1 <= k <= bits:
        raise ValueError(f"k must be in [1, {bits}]")
    seed = scenario.seed if seed is None else seed
    h = Harness(scenario, target)
    report = HammingReport("bit_flip", bits)
    chip = h.target
    saved = (chip.behavior, chip.tamper_bits)
    sig = puf_response(chip.puf_secret, h.challenge, bits)
    try:
        for i in range(trials):
            ctx, rng = h.trial(seed, i)
            positions = rng.sample(range(bits), k)
            chip.behavior, chip.tamper_bits = Behavior.TAMPER, tuple(positions)
            tampered = session_digest(Signature(flip_bits(sig.value, positions), bits), ctx, chip.id)
            report.distances.append(hamming_distance(tampered, h.expected(ctx)))
            report.verdicts.append(h.judge(ctx)[0].value)
    finally:
        chip.behavior, chip.tamper_bits = saved
    return report


def attack_share_removal(scenario: Scenario, victim: Optional[int] = None, trials: int = 1000,
                         seed: Optional[int] = None, target: Optional[int] = None) -> HammingReport:
    """Withhold one integrator's contribution.

    Strict mode runs the quorum with the victim withholding and records the
    verdict. Degraded-aggregate mode zero-fills the victim's share slot and
    records the distance between the resulting aggregate digest and the
    complete one.
    """
    seed = scenario.seed if seed is None else seed
    h = Harness(scenario, target)
    victim = h.tree.root_set[-1] if victim is None else victim
    if victim not in h.tree.root_set:
        raise ValueError(f"victim {victim} not in trust tree")
    n = h.tree.quorum.n
    report = HammingReport("share_removal", scenario.protocol.signature_bits)
    chip = scenario.topology.chiplets[victim]
    saved = chip.behavior
    try:
        for i in range(trials):
            ctx, _ = h.trial(seed, i)
            held = h.engine.holdings[h.target.id]
            full = aggregate_digest(held.values(), n, 32)
            degraded = aggregate_digest([s for hid, s in held.items() if hid != victim], n, 32)
            report.distances.append(hamming_distance(degraded, full))
            chip.behavior = Behavior.WITHHOLD
            report.verdicts.append(h.judge(ctx)[0].value)
            chip.behavior = saved
    finally:
        chip.behavior = saved
    return report


@dataclass
class ReplayReport:
    replayed: int
    acceptances: int
    duplicates: int
    distances: list[int]

    @property
    def mean_hd(self) -> Optional[float]:
        return float(np.mean(self.distances)) if self.distances else None


def recorded_responses(transcript: Iterable[TranscriptEntry]) -> list[TranscriptEntry]:
    out = [e for e in transcript if e.message.kind is MessageKind.RESPONSE and e.status != "dropped"]
    if not out or any(len(e.message.payload) != 32 for e in out):
        raise ValueError("transcript malformed: no well-formed response records")
    return out


def attack_replay(engine: AuthenTree, transcript: Iterable[TranscriptEntry],
                  ctx: SessionContext) -> ReplayReport:
    """Re-inject every recorded response into session ``ctx``.

    Cross-session injections must all be rejected. Injections into the
    recording session itself are duplicate deliveries: accepted once and
    flagged.
    """
    from .crypto import Digest256

    responses = recorded_responses(transcript)
    before = len(engine.duplicates)
    accepted, distances = 0, []
    for entry in responses:
        msg = entry.message
        observed = Digest256(msg.payload)
        expected = expected_digest(engine.manifest, msg.src, engine.manifest.challenge, ctx)
        distances.append(hamming_distance(observed, expected))
        if engine.accept_response(msg.dst, msg.src, observed, ctx, expected).value == "match":
            accepted += 1
    return ReplayReport(len(responses), accepted, len(engine.duplicates) - before, distances)


def _replay_trials(scenario: Scenario, trials: int, seed: int, target=None) -> HammingReport:
    h = Harness(scenario, target)
    report = HammingReport("replay", scenario.protocol.signature_bits)
    chip = h.target
    saved = (chip.behavior, chip.replay_digest)
    try:
        for i in range(trials):
            # record an honest session, then replay its response in a fresh one
            rec_ctx, _ = h.trial(seed, 2 * i)
            mark = len(h.engine.transcript)
            verdict, _ = h.judge(rec_ctx)
            if verdict is not Verdict.PASS:
                raise RuntimeError("recording session did not pass")
            recorded = [e for e in recorded_responses(h.engine.transcript[mark:]) if e.message.src == chip.id]
            chip.behavior = Behavior.REPLAY
            chip.replay_digest = session_digest(
                puf_response(chip.puf_secret, h.challenge, h.bits), rec_ctx, chip.id)
            assert recorded[0].message.payload == chip.replay_digest.value
            ctx, _ = h.trial(seed, 2 * i + 1)
            report.distances.append(hamming_distance(chip.replay_digest, h.expected(ctx)))
            report.verdicts.append(h.judge(ctx)[0].value)
            chip.behavior, chip.replay_digest = saved
    finally:
        chip.behavior, chip.replay_digest = saved
    return report


def _clone_trials(scenario: Scenario, trials: int, seed: int, target=None) -> HammingReport:
    h = Harness(scenario, target)
    report = HammingReport("clone", scenario.protocol.signature_bits)
    chip = h.target
    saved = chip.puf_secret
    try:
        for i in range(trials):
            ctx, rng = h.trial(seed, i)
            chip.puf_secret = rng.randbytes(32)
            forged = session_digest(puf_response(chip.puf_secret, h.challenge, h.bits), ctx, chip.id)
            report.distances.append(hamming_distance(forged, h.expected(ctx)))
            report.verdicts.append(h.judge(ctx)[0].value)
            chip.puf_secret = saved
    finally:
        chip.puf_secret = saved
    return report


def _silent_trials(scenario: Scenario, trials: int, seed: int, target=None) -> HammingReport:
    h = Harness(scenario, target)
    report = HammingReport("silent", scenario.protocol.signature_bits)
    chip = h.target
    saved = chip.behavior
    try:
        chip.behavior = Behavior.SILENT
        for i in range(trials):
            ctx, _ = h.trial(seed, i)
            report.verdicts.append(h.judge(ctx)[0].value)
    finally:
        chip.behavior = saved
    return report


@dataclass
class CloneResult:
    target: int
    final: Verdict
    classification: Optional[Classification]
    trusted: list[int]
    excluded: list[int]
    flags: list[str] = field(default_factory=list)


def attack_clone(scenario: Scenario, target: int, perfect: bool = False,
                 seed: Optional[int] = None) -> CloneResult:
    """Swap the chiplet's PUF secret (keeping id and manifest) and run the full flow.

    Works on third-party targets and on integrators; a cloned integrator
    should be dropped during cross-authentication.
    """
    chip = scenario.topology.chiplets[target]
    saved = chip.puf_secret
    seed = scenario.seed if seed is None else seed
    rng = random.Random(trial_seed(seed, 0))
    chip.puf_secret = saved if perfect else rng.randbytes(32)
    try:
        report = authenticate_sip(scenario.topology, scenario.manifest, scenario.protocol, scenario.seed)
    finally:
        chip.puf_secret = saved
    result = report.results[target]
    diag = result.diagnosis
    flags = []
    if perfect and result.final is Verdict.PASS:
        flags.append("model limit: perfect clone is outside the unclonable-PUF threat model")
    return CloneResult(target, result.final, diag.classification if diag else None,
                       list(report.tree.root_set), list(report.tree.excluded), flags)


def run_attack(scenario: Scenario, attack: str, trials: int = 1000, seed: Optional[int] = None,
               **params) -> HammingReport:
    if attack not in ATTACK_TYPES:
        raise ValueError(f"unknown attack {attack!r}; allowed: {', '.join(ATTACK_TYPES)}")
    seed = scenario.seed if seed is None else seed
    target = params.get("target")
    if attack == "bit_flip":
        return attack_bit_flip(scenario, params.get("k", 1), trials, seed, target)
    if attack == "share_removal":
        return attack_share_removal(scenario, params.get("victim"), trials, seed, target)
    if attack == "replay":
        return _replay_trials(scenario, trials, seed, target)
    if attack == "clone":
        return _clone_trials(scenario, trials, seed, target)
    return _silent_trials(scenario, trials, seed, target)


def _cell(args) -> HammingReport:
    doc, seed, attack, bits, trials, params = args
    scenario = Scenario.from_dict(doc, seed, signature_bits=bits)
    return run_attack(scenario, attack, trials, seed, **params)


def sweep(scenario: Scenario, lengths: Sequence[int] = DEFAULT_LENGTHS,
          attacks: Sequence = DEFAULT_ATTACKS, trials: int = 1000,
          seed: Optional[int] = None, jobs: int = 1) -> list[HammingReport]:
    """Attack x signature-length grid; ``attacks`` holds names or ``{"type": ...}`` dicts."""
    if not lengths:
        raise ValueError("lengths must be non-empty")
    seed = scenario.seed if seed is None else seed
    cells = []
    for attack in attacks:
        spec = {"type": attack} if isinstance(attack, str) else dict(attack)
        name = spec.pop("type")
        if name not in ATTACK_TYPES:
            raise ValueError(f"unknown attack {name!r}; allowed: {', '.join(ATTACK_TYPES)}")
        n = spec.pop("trials", trials)
        spec.pop("signature_length_bits", None)
        for bits in lengths:
            cells.append((scenario.doc, seed, name, bits, n, spec))
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            return list(pool.map(_cell, cells))
    return [_cell(c) for c in cells]


def to_csv(reports: Iterable[HammingReport]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in reports:
        writer.writerow(r.row())
    return buf.getvalue()


def to_jsonl(reports: Iterable[HammingReport]) -> str:
    return "".join(json.dumps(rec, sort_keys=True) + "\n" for r in reports for rec in r.raw_records())
