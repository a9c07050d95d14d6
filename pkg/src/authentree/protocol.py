"""AuthenTree protocol engine.

One :class:`AuthenTree` instance drives a simulated SiP through a session:

1. integrators cross-authenticate each other and the survivors form the
   trust tree;
2. the tree root deals a threshold sharing of every third-party chiplet's
   expected session digest to the trusted integrators;
3. every trusted integrator challenges every third-party chiplet in parallel
   and votes on the response against the digest the pooled shares
   reconstruct;
4. anomalous targets are re-authenticated over alternative routes until the
   fault is pinned on the chiplet, on a link, or on a transient.

All timing is in simulated cycles. Logical parallelism shows up only in the
latency bookkeeping; execution itself is sequential and deterministic.
"""

from __future__ import annotations

import enum
import json
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .chiplet import (
    CHALLENGE_BYTES, DEFAULT_HASH_CYCLES, TIMEOUT_FACTOR, Behavior, Chiplet, Manifest, Role,
    expected_digest, respond_to_auth,
)
from .crypto import Digest256, SessionContext, SessionSource
from .interposer import (
    Delivery, Link, Message, MessageKind, Path, Topology, path_links,
)
from .sharing import (
    CorruptedShare, InsufficientShares, Share, SharingPolicy, default_threshold,
    reconstruct, split, verify_commitment,
)

MAX_ROUNDS = 3
DEGRADED_FLAG = "localization degraded: shared-route evidence only"
SUBSET_FALLBACK_FLAG = "fallback: node-disjoint integrator subset"


class ProtocolError(RuntimeError):
    pass


class Verdict(enum.Enum):
    PASS = "pass"
    FAIL = "fail"
    ANOMALOUS = "anomalous"


class Outcome(enum.Enum):
    MATCH = "match"
    MISMATCH = "mismatch"
    NO_RESPONSE = "no_response"


class Classification(enum.Enum):
    AUTHENTIC = "authentic"
    CHIPLET_FAULT = "chiplet_fault"
    LINK_FAULT = "link_fault"
    TRANSIENT = "transient"


@dataclass
class ProtocolConfig:
    quorum_t: Optional[int] = None  # None: ceil(2n/3) of the trusted set
    signature_bits: int = 256
    fanout: int = 2
    clock_ghz: float = 1.0
    hash_cycles: int = DEFAULT_HASH_CYCLES
    comparator_cycles: int = 1
    max_rounds: int = MAX_ROUNDS
    retry_backoff: Optional[int] = None  # None: the response timeout

    def __post_init__(self):
        if self.fanout < 2:
            raise ValueError("fanout must be >= 2")
        if self.signature_bits < 1:
            raise ValueError("signature length must be positive")
        if self.clock_ghz <= 0:
            raise ValueError("clock must be positive")

    @property
    def timeout(self) -> int:
        return TIMEOUT_FACTOR * self.hash_cycles

    @property
    def backoff(self) -> int:
        return self.timeout if self.retry_backoff is None else self.retry_backoff


@dataclass
class TrustTree:
    root_set: list[int]
    fanout: int
    levels: dict[int, int]
    quorum: SharingPolicy
    excluded: list[int] = field(default_factory=list)

    @property
    def dealer(self) -> int:
        return self.root_set[0]

    def share_index(self, integrator_id: int) -> int:
        return self.root_set.index(integrator_id) + 1


@dataclass
class IntegratorVerdict:
    integrator_id: int
    target_id: int
    outcome: Outcome
    observed_digest: Optional[Digest256]
    route_used: int
    cycles_spent: int
    path: Path = ()
    round: int = 1

    def to_dict(self) -> dict:
        return {
            "integrator": self.integrator_id, "target": self.target_id,
            "outcome": self.outcome.value,
            "observed_digest": self.observed_digest.hex() if self.observed_digest else None,
            "route": self.route_used, "path": list(self.path),
            "cycles": self.cycles_spent, "round": self.round,
        }


@dataclass
class AuthRound:
    """Result of one quorum authentication of a single target."""

    verdict: Verdict
    verdicts: list[IntegratorVerdict]
    cause: Optional[str] = None
    start_cycle: int = 0
    end_cycle: int = 0

    @property
    def branch_cycles(self) -> int:
        return self.end_cycle - self.start_cycle

    def __iter__(self):
        return iter((self.verdict, self.verdicts))


@dataclass
class FaultDiagnosis:
    target_id: int
    classification: Classification
    links: frozenset = frozenset()
    evidence: list[tuple[int, int, Outcome, int]] = field(default_factory=list)
    rounds: int = 1
    flags: list[str] = field(default_factory=list)
    end_cycle: int = 0

    @property
    def rejects_chiplet(self) -> bool:
        return self.classification is Classification.CHIPLET_FAULT

    def to_dict(self) -> dict:
        return {
            "target": self.target_id,
            "classification": self.classification.value,
            "links": sorted(list(ln) for ln in self.links),
            "evidence": [
                {"integrator": i, "route": r, "outcome": o.value, "round": n}
                for i, r, o, n in self.evidence
            ],
            "rounds": self.rounds,
            "flags": list(self.flags),
        }


@dataclass
class ChipletResult:
    chiplet_id: int
    role: Role
    verdict: Verdict
    cause: Optional[str] = None
    first_round: list[IntegratorVerdict] = field(default_factory=list)
    diagnosis: Optional[FaultDiagnosis] = None

    @property
    def final(self) -> Verdict:
        """Verdict after escalation: link and transient faults do not reject."""
        if self.diagnosis is None:
            return self.verdict
        if self.diagnosis.rejects_chiplet:
            return Verdict.FAIL
        return Verdict.PASS

    def to_dict(self) -> dict:
        return {
            "id": self.chiplet_id, "role": self.role.value,
            "verdict": self.verdict.value, "final": self.final.value, "cause": self.cause,
            "integrator_verdicts": [v.to_dict() for v in self.first_round],
            "diagnosis": self.diagnosis.to_dict() if self.diagnosis else None,
        }


@dataclass
class TranscriptEntry:
    message: Message
    route: int
    status: str
    arrival_cycle: Optional[int]

    def to_dict(self) -> dict:
        doc = self.message.to_dict()
        doc.update(route=self.route, status=self.status, arrival_cycle=self.arrival_cycle)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "TranscriptEntry":
        return cls(Message.from_dict(doc), int(doc["route"]), doc["status"], doc["arrival_cycle"])


@dataclass
class AuthReport:
    session_id: int
    seed: int
    tree: TrustTree
    results: dict[int, ChipletResult]
    total_cycles: int
    critical_path_cycles: int
    branch_cycles: dict[int, int]
    aggregation_cycles: int
    clock_ghz: float
    share_retries: int
    hash_invocations: dict[int, int]
    transcripts: list[TranscriptEntry] = field(default_factory=list)

    @property
    def diagnoses(self) -> list[FaultDiagnosis]:
        return [r.diagnosis for r in self.results.values() if r.diagnosis is not None]

    @property
    def rejected(self) -> list[int]:
        return [cid for cid, r in sorted(self.results.items()) if r.final is not Verdict.PASS]

    @property
    def all_authenticated(self) -> bool:
        return not self.rejected

    def to_dict(self) -> dict:
        _, wall = latency_model(self, self.clock_ghz)
        return {
            "schema": 1,
            "session_id": self.session_id,
            "seed": self.seed,
            "trusted_integrators": list(self.tree.root_set),
            "excluded_integrators": list(self.tree.excluded),
            "quorum": {"n": self.tree.quorum.n, "t": self.tree.quorum.t},
            "fanout": self.tree.fanout,
            "chiplets": [self.results[k].to_dict() for k in sorted(self.results)],
            "total_cycles": self.total_cycles,
            "critical_path_cycles": self.critical_path_cycles,
            "branch_cycles": {str(k): v for k, v in sorted(self.branch_cycles.items())},
            "aggregation_cycles": self.aggregation_cycles,
            "clock_ghz": self.clock_ghz,
            "wall_time_ns": wall,
            "share_retries": self.share_retries,
            "hash_invocations": {str(k): v for k, v in sorted(self.hash_invocations.items())},
            "messages": len(self.transcripts),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def aggregation_cycles(fan_in: int, fanout: int = 2, comparator_cycles: int = 1) -> int:
    """Comparator cycles to fold ``fan_in`` results: one compare, or a tree of depth ceil(log_fanout)."""
    if fan_in <= 0:
        return 0
    depth, reach = 0, 1
    while reach < fan_in:
        reach *= fanout
        depth += 1
    return comparator_cycles * max(1, depth)


def latency_model(report: AuthReport, clock_ghz: Optional[float] = None) -> tuple[int, float]:
    """Critical path of the authentication phase and its wall time in ns.

    Branches run in parallel, so the critical path is the slowest
    challenge-hash-response branch plus the comparator tree folding every
    target's result.
    """
    clock_ghz = report.clock_ghz if clock_ghz is None else clock_ghz
    slowest = max(report.branch_cycles.values(), default=0)
    cycles = slowest + report.aggregation_cycles
    return cycles, cycles / clock_ghz


def _challenge_payload(challenge: bytes, ctx: SessionContext) -> bytes:
    return challenge + ctx.encode()


def _parse_challenge(payload: bytes) -> tuple[bytes, SessionContext]:
    return payload[:CHALLENGE_BYTES], SessionContext.decode(payload[CHALLENGE_BYTES:])


class AuthenTree:
    def __init__(self, topology: Topology, manifest: Manifest,
                 config: Optional[ProtocolConfig] = None, seed: int = 0):
        self.topology = topology
        self.manifest = manifest
        self.config = config or ProtocolConfig()
        self.seed = seed
        self.sessions = SessionSource(seed)
        self.rng = random.Random(seed)
        self.transcript: list[TranscriptEntry] = []
        self.holdings: dict[int, dict[int, Share]] = {}
        self.share_retries = 0
        self.hash_invocations: Counter = Counter()
        self._hash_cache: dict[tuple[int, bytes], tuple[Optional[Digest256], int]] = {}
        self._busy_until: dict[int, int] = {}
        self._accepted: dict[tuple[int, int, int], bytes] = {}
        self.duplicates: list[tuple[int, int, int]] = []

    def new_session(self) -> SessionContext:
        return self.sessions.next_context()

    # -- wire helpers ----------------------------------------------------------

    def _send(self, msg: Message, route: int) -> Delivery:
        d = self.topology.transmit(msg, route)
        self.transcript.append(TranscriptEntry(msg, route, d.status.value, d.arrival_cycle))
        return d

    def _respond(self, target: Chiplet, payload: bytes, arrival: int) -> tuple[Optional[Digest256], int]:
        key = (target.id, payload)
        if key in self._hash_cache:
            digest, ready = self._hash_cache[key]
            return digest, max(ready, arrival)
        challenge, ctx = _parse_challenge(payload)
        digest = respond_to_auth(target, challenge, ctx, self.config.signature_bits)
        start = max(arrival, self._busy_until.get(target.id, 0))
        ready = start
        if digest is not None and target.behavior is not Behavior.REPLAY:
            ready = start + target.hash_cycles
            self._busy_until[target.id] = ready
            self.hash_invocations[target.id] += 1
        self._hash_cache[key] = (digest, ready)
        return digest, ready

    def _exchange(self, verifier: int, target: Chiplet, route: int, emit: int,
                  ctx: SessionContext, expected: Optional[Digest256]):
        """One challenge/response over ``route``; returns (outcome, observed, done, path)."""
        deadline = emit + self.config.timeout
        out = self._send(Message(verifier, target.id, MessageKind.CHALLENGE,
                                 _challenge_payload(self.manifest.challenge, ctx),
                                 ctx.session_id, emit), route)
        if not out.arrived:
            return Outcome.NO_RESPONSE, None, deadline, out.path
        digest, ready = self._respond(target, out.payload, out.arrival_cycle)
        if digest is None:
            return Outcome.NO_RESPONSE, None, deadline, out.path
        back = self._send(Message(target.id, verifier, MessageKind.RESPONSE, digest.value,
                                  ctx.session_id, ready), route)
        if not back.arrived or back.arrival_cycle > deadline:
            return Outcome.NO_RESPONSE, None, deadline, out.path
        observed = Digest256(back.payload)
        outcome = self.accept_response(verifier, target.id, observed, ctx, expected)
        return outcome, observed, back.arrival_cycle, out.path

    def accept_response(self, verifier: int, target_id: int, observed: Digest256,
                        ctx: SessionContext, expected: Optional[Digest256] = None) -> Outcome:
        """Verifier-side comparison with per-session duplicate suppression.

        A byte-identical response already accepted in the same session is
        accepted again but logged in :attr:`duplicates`.
        """
        if expected is None:
            expected = expected_digest(self.manifest, target_id, self.manifest.challenge, ctx)
        if observed != expected:
            return Outcome.MISMATCH
        key = (ctx.session_id, verifier, target_id)
        if key in self._accepted and self._accepted[key] == observed.value:
            self.duplicates.append(key)
        self._accepted[key] = observed.value
        return Outcome.MATCH

    def _route_count(self, a: int, b: int) -> int:
        return len(self.topology.routes(a, b))

    # -- phase 1: trust tree ----------------------------------------------------

    def cross_authenticate_integrators(self, ctx: SessionContext,
                                       integrators: Optional[Sequence[Chiplet]] = None,
                                       start: int = 0) -> tuple[TrustTree, int]:
        """Pairwise challenge/response among integrators; returns (tree, end cycle).

        A peer check that fails on the primary route is retried once over an
        alternative route before the peer is excluded.
        """
        integrators = list(integrators if integrators is not None else self.topology.integrators)
        if len(integrators) < 3:
            raise ProtocolError("insufficient trusted integrators")
        failed: set[int] = set()
        end = start
        for verifier in integrators:
            for peer in integrators:
                if peer.id == verifier.id:
                    continue
                expected = expected_digest(self.manifest, peer.id, self.manifest.challenge, ctx)
                outcome, _, done, _ = self._exchange(verifier.id, peer, 0, start, ctx, expected)
                if outcome is not Outcome.MATCH and self._route_count(verifier.id, peer.id) > 1:
                    outcome, _, done, _ = self._exchange(verifier.id, peer, 1, done, ctx, expected)
                if outcome is not Outcome.MATCH:
                    failed.add(peer.id)
                end = max(end, done)
        survivors = sorted(c.id for c in integrators if c.id not in failed)
        if len(survivors) < 3:
            raise ProtocolError("insufficient trusted integrators")
        n = len(survivors)
        t = default_threshold(n) if self.config.quorum_t is None else min(self.config.quorum_t, n)
        tree = TrustTree(survivors, self.config.fanout, _tree_levels(survivors, self.config.fanout),
                         SharingPolicy(n, t), sorted(failed))
        return tree, end + self.config.comparator_cycles

    # -- phase 2: share distribution --------------------------------------------

    def distribute_shares(self, tree: TrustTree, ctx: SessionContext,
                          targets: Optional[Iterable[Chiplet]] = None,
                          rng: Optional[random.Random] = None, start: int = 0):
        """Deal each target's expected digest to the trusted integrators.

        Returns (holdings, end cycle), where holdings maps integrator id to the
        shares it received, in target order.
        """
        rng = rng or self.rng
        targets = list(targets if targets is not None else self.topology.third_parties)
        dealer = tree.dealer
        held: dict[int, list[Share]] = {i: [] for i in tree.root_set}
        end = start
        for target in targets:
            secret = expected_digest(self.manifest, target.id, self.manifest.challenge, ctx)
            shares = split(secret.value, tree.quorum, rng)
            self.holdings[target.id] = {}
            for holder, share in zip(tree.root_set, shares):
                if holder != dealer:
                    done = self._deliver_share(dealer, holder, share, ctx, start)
                    end = max(end, done)
                self.holdings[target.id][holder] = share
                held[holder].append(share)
        return held, end

    def _deliver_share(self, dealer: int, holder: int, share: Share, ctx: SessionContext,
                       emit: int) -> int:
        routes = self._route_count(dealer, holder)
        for attempt in range(2):
            route = min(attempt, routes - 1)
            d = self._send(Message(dealer, holder, MessageKind.SHARE, share.to_bytes(),
                                   ctx.session_id, emit), route)
            if d.arrived:
                got = Share.from_bytes(d.payload)
                if got.index == share.index and verify_commitment(got):
                    return d.arrival_cycle
                emit = d.arrival_cycle
            else:
                emit += self.config.timeout
            if attempt == 0:
                self.share_retries += 1
        raise ProtocolError(f"share distribution failed: integrator {holder}")

    # -- phase 3: quorum authentication -----------------------------------------

    def pooled_expected(self, tree: TrustTree, target_id: int) -> tuple[Optional[Digest256], Optional[str]]:
        """Reconstruct the expected digest from cooperating integrators' shares."""
        pool = []
        missing = []
        for integrator in tree.root_set:
            chiplet = self.topology.chiplets[integrator]
            share = self.holdings.get(target_id, {}).get(integrator)
            if share is None or chiplet.behavior is Behavior.WITHHOLD:
                missing.append(integrator)
            else:
                pool.append(share)
        cause = f"dos-suspected: missing shares from {missing}" if missing else None
        while True:
            try:
                return Digest256(reconstruct(pool, tree.quorum)), cause
            except CorruptedShare as exc:
                pool = [s for s in pool if s.index != exc.index]
                cause = f"{exc}" if cause is None else f"{cause}; {exc}"
            except InsufficientShares as exc:
                return None, f"dos-suspected: {exc}"

    def authenticate_chiplet(self, tree: TrustTree, target: Chiplet, ctx: SessionContext,
                             start: int = 0, routes: Optional[dict[int, int]] = None,
                             round_no: int = 1) -> AuthRound:
        if target.role is not Role.THIRD_PARTY:
            raise ValueError("only third-party chiplets are authenticated by the quorum")
        routes = routes or {}
        expected, cause = self.pooled_expected(tree, target.id)
        if expected is None:
            return AuthRound(Verdict.ANOMALOUS, [], cause, start, start)
        verdicts = []
        end = start
        for integrator in tree.root_set:
            behavior = self.topology.chiplets[integrator].behavior
            route = routes.get(integrator, 0)
            if behavior is Behavior.WITHHOLD:
                verdicts.append(IntegratorVerdict(integrator, target.id, Outcome.NO_RESPONSE,
                                                  None, route, 0, (), round_no))
                continue
            outcome, observed, done, path = self._exchange(integrator, target, route, start, ctx, expected)
            if behavior is Behavior.COLLUDE:
                outcome, observed = Outcome.MATCH, expected
            verdicts.append(IntegratorVerdict(integrator, target.id, outcome, observed, route,
                                              done - start, path, round_no))
            end = max(end, done)
        return AuthRound(_decide(verdicts, tree.quorum.t), verdicts,
                         cause or _inconsistency(verdicts), start, end)

    # -- phase 4: escalation ----------------------------------------------------

    def _pick_route(self, integrator: int, target: int, used: set[int],
                    avoid: set[Link]) -> tuple[int, bool, bool]:
        """Route for a retry: avoid suspect links first, then prefer an unused route.

        Returns (route index, touches a suspect link, reuses a tried route).
        """
        paths = self.topology.routes(integrator, target)
        touches = [bool(set(path_links(p)) & avoid) for p in paths]
        best = min(range(len(paths)), key=lambda i: (touches[i], i in used, i))
        return best, touches[best], best in used

    def localize_fault(self, tree: TrustTree, target: Chiplet, first_round: AuthRound,
                       ctx: SessionContext, start: Optional[int] = None) -> FaultDiagnosis:
        first = first_round.verdicts
        clock = (first_round.end_cycle if start is None else start)
        evidence = [(v.integrator_id, v.route_used, v.outcome, 1) for v in first]
        flags: list[str] = []
        matched = [v for v in first if v.outcome is Outcome.MATCH]
        failing = [v for v in first if v.outcome is not Outcome.MATCH]
        if len(matched) >= len(failing):
            dissent, majority = failing, matched
        else:
            dissent, majority = matched, failing
        match_links = {ln for v in matched for ln in path_links(v.path)}
        suspects = {ln for v in failing for ln in path_links(v.path)} - match_links
        controls = [v.integrator_id for v in majority[:2]]
        if len(controls) < 2:
            flags.append(SUBSET_FALLBACK_FLAG)
        used: dict[int, set[int]] = {v.integrator_id: {v.route_used} for v in first}
        rounds = 1
        for round_no in range(2, self.config.max_rounds + 1):
            clock += self.config.backoff
            rounds = round_no
            alt, reprobe = [], []
            end = clock
            for integrator in [v.integrator_id for v in dissent] + controls:
                route, _, reused = self._pick_route(integrator, target.id, used[integrator], suspects)
                if reused and self._route_count(integrator, target.id) == 1 and DEGRADED_FLAG not in flags:
                    flags.append(DEGRADED_FLAG)
                used[integrator].add(route)
                alt.append(self._probe(tree, target, integrator, route, ctx, clock, round_no, evidence))
                end = max(end, alt[-1][3])
            # the first-round failing routes again: a fault that persists is on the link
            for v in failing:
                reprobe.append(self._probe(tree, target, v.integrator_id, v.route_used, ctx,
                                           clock, round_no, evidence))
                end = max(end, reprobe[-1][3])
            for _, outcome, path, _ in alt + reprobe:
                if outcome is Outcome.MATCH:
                    match_links.update(path_links(path))
            clock = end
            if alt and all(o is Outcome.MATCH for _, o, _, _ in alt):
                still_bad = [set(path_links(p)) for _, o, p, _ in reprobe if o is not Outcome.MATCH]
                if not still_bad:
                    return FaultDiagnosis(target.id, Classification.TRANSIENT, frozenset(), evidence,
                                          rounds, flags, clock)
                links = set.intersection(*still_bad) - match_links
                if not links:
                    links = (set.union(*still_bad) - match_links) or set.union(*still_bad)
                return FaultDiagnosis(target.id, Classification.LINK_FAULT, frozenset(links),
                                      evidence, rounds, flags, clock)
            probes = alt + reprobe
            bad_paths = [p for _, o, p, _ in probes if o is not Outcome.MATCH]
            if len(bad_paths) == len(probes) and _has_disjoint_pair(bad_paths):
                return FaultDiagnosis(target.id, Classification.CHIPLET_FAULT, frozenset(), evidence,
                                      rounds, flags, clock)
            suspects |= {ln for p in bad_paths for ln in path_links(p)} - match_links
        # unresolved after the round cap: fail safe
        return FaultDiagnosis(target.id, Classification.CHIPLET_FAULT, frozenset(), evidence,
                              rounds, flags + ["unresolved after round cap"], clock)

    def _probe(self, tree, target, integrator, route, ctx, emit, round_no, evidence):
        behavior = self.topology.chiplets[integrator].behavior
        expected, _ = self.pooled_expected(tree, target.id)
        outcome, observed, done, path = self._exchange(integrator, target, route, emit, ctx, expected)
        if behavior is Behavior.COLLUDE:
            outcome = Outcome.MATCH
        evidence.append((integrator, route, outcome, round_no))
        return integrator, outcome, path, done

    # -- full pipeline ----------------------------------------------------------

    def run(self) -> AuthReport:
        ctx = self.new_session()
        tree, clock = self.cross_authenticate_integrators(ctx)
        _, clock = self.distribute_shares(tree, ctx, start=clock)
        results: dict[int, ChipletResult] = {}
        for i in tree.root_set:
            results[i] = ChipletResult(i, Role.INTEGRATOR, Verdict.PASS)
        for i in tree.excluded:
            results[i] = ChipletResult(i, Role.INTEGRATOR, Verdict.FAIL, "failed cross-authentication")
        auth_start = clock
        rounds = {}
        for target in self.topology.third_parties:
            rounds[target.id] = self.authenticate_chiplet(tree, target, ctx, start=auth_start)
        auth_end = max((r.end_cycle for r in rounds.values()), default=auth_start)
        end = auth_end
        for tid, rnd in rounds.items():
            target = self.topology.chiplets[tid]
            result = ChipletResult(tid, Role.THIRD_PARTY, rnd.verdict, rnd.cause, rnd.verdicts)
            if rnd.verdict is Verdict.FAIL:
                result.diagnosis = FaultDiagnosis(
                    tid, Classification.CHIPLET_FAULT, frozenset(),
                    [(v.integrator_id, v.route_used, v.outcome, 1) for v in rnd.verdicts], 1)
            elif rnd.verdict is Verdict.ANOMALOUS and not (rnd.cause or "").startswith("dos-suspected"):
                result.diagnosis = self.localize_fault(tree, target, rnd, ctx, start=auth_end)
                end = max(end, result.diagnosis.end_cycle)
            results[tid] = result
        fan_in = len(rounds)
        agg = aggregation_cycles(fan_in, self.config.fanout, self.config.comparator_cycles)
        branch = {tid: r.branch_cycles for tid, r in rounds.items()}
        report = AuthReport(
            session_id=ctx.session_id, seed=self.seed, tree=tree, results=results,
            total_cycles=end + agg, critical_path_cycles=0, branch_cycles=branch,
            aggregation_cycles=agg, clock_ghz=self.config.clock_ghz,
            share_retries=self.share_retries, hash_invocations=dict(self.hash_invocations),
            transcripts=list(self.transcript))
        report.critical_path_cycles, _ = latency_model(report)
        return report

    # -- reconfiguration --------------------------------------------------------

    def add_third_party(self, tree: TrustTree, chiplet: Chiplet, edges, signature,
                        ctx: SessionContext, start: int = 0):
        """Plug in a chiplet: only its own shares are dealt; existing holdings stay."""
        self.topology.add_chiplet(chiplet, edges)
        self.manifest.entries[chiplet.id] = signature
        return self.distribute_shares(tree, ctx, [chiplet], start=start)

    def add_integrator(self, chiplet: Chiplet, edges, signature, ctx: SessionContext, start: int = 0):
        """Plug in an integrator: rebuild the tree and re-share everything."""
        self.topology.add_chiplet(chiplet, edges)
        self.manifest.entries[chiplet.id] = signature
        self.holdings.clear()
        tree, clock = self.cross_authenticate_integrators(ctx, start=start)
        _, clock = self.distribute_shares(tree, ctx, start=clock)
        return tree, clock


def _tree_levels(members: Sequence[int], fanout: int) -> dict[int, int]:
    levels, level, width, pos = {}, 0, 1, 0
    while pos < len(members):
        for m in members[pos:pos + width]:
            levels[m] = level
        pos += width
        width *= fanout
        level += 1
    return levels


def _decide(verdicts: Sequence[IntegratorVerdict], t: int) -> Verdict:
    matches = sum(v.outcome is Outcome.MATCH for v in verdicts)
    if verdicts and matches == len(verdicts) and matches >= t:
        return Verdict.PASS
    if matches:
        # a Match alongside mismatches is an inconsistency, not a verdict
        return Verdict.ANOMALOUS
    agreeing = Counter(v.observed_digest for v in verdicts if v.outcome is Outcome.MISMATCH)
    if agreeing:
        digest, count = agreeing.most_common(1)[0]
        paths = [v.path for v in verdicts if v.observed_digest == digest]
        # agreement carried over one shared link is not independent evidence
        if count >= t and _has_disjoint_pair(paths):
            return Verdict.FAIL
    return Verdict.ANOMALOUS


def _inconsistency(verdicts: Sequence[IntegratorVerdict]) -> Optional[str]:
    kinds = Counter(v.outcome for v in verdicts)
    if len(kinds) <= 1:
        return None
    return "inconsistent outcomes: " + ", ".join(f"{k.value}={n}" for k, n in sorted(kinds.items(), key=lambda kv: kv[0].value))


def _has_disjoint_pair(paths: Sequence[Path]) -> bool:
    sets = [set(path_links(p)) for p in paths]
    return any(not (a & b) for i, a in enumerate(sets) for b in sets[i + 1:])


def authenticate_sip(topology: Topology, manifest: Manifest,
                     config: Optional[ProtocolConfig] = None, seed: int = 0) -> AuthReport:
    """Run one complete authentication session over ``topology``."""
    return AuthenTree(topology, manifest, config, seed).run()
