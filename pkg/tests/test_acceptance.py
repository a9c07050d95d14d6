"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Tolerances and runtime bounds are pinned here and must not be relaxed to
make a criterion pass.
"""

import itertools
import os
import subprocess
import sys
import time
from pathlib import Path

import pytest

from authentree import attacks
from authentree.crypto import load_vectors, sha256
from authentree.interposer import path_links
from authentree.protocol import Classification, Verdict, latency_model
from authentree.sharing import reconstruct

from conftest import SCENARIOS, build

HD_BAND = (120, 136)
LENGTHS = (64, 128, 256, 512)
TRIALS = 1000


@pytest.fixture
def criterion(capsys):
    """Yields a recorder; prints one line per criterion straight to the terminal."""
    state = {}

    def record(number, name, ok, detail, elapsed, budget):
        within = elapsed < budget
        verdict = "PASS" if ok and within else "FAIL"
        line = (f"ACCEPTANCE {number} {name}: {verdict} ({detail}; "
                f"{elapsed:.2f}s of {budget:g}s budget)")
        with capsys.disabled():
            print("\n" + line)
        state.update(ok=ok, within=within, line=line)

    yield record
    assert state, "criterion did not record a result"
    assert state["ok"], state["line"]
    assert state["within"], state["line"]


def test_1_hash_conformance(criterion):
    t0 = time.perf_counter()
    vectors = load_vectors(Path(__file__).parent / "data" / "sha256_vectors.txt")
    bad = [m.hex() for m, d in vectors if sha256(m) != d]
    have_empty = any(m == b"" for m, _ in vectors)
    have_abc = any(m == b"abc" for m, _ in vectors)
    ok = len(vectors) >= 10 and have_empty and have_abc and not bad
    criterion(1, "hash conformance", ok, f"{len(vectors)} vectors, {len(bad)} mismatches",
              time.perf_counter() - t0, 1)


def test_2_avalanche_fault_injection(criterion):
    t0 = time.perf_counter()
    sc = build()
    reports = attacks.sweep(sc, LENGTHS, ["bit_flip"], TRIALS)
    means = {r.signature_length_bits: r.mean for r in reports}
    passes = sum(r.passes for r in reports)
    ok = (len(reports) == 4 and all(r.trials == TRIALS for r in reports)
          and all(HD_BAND[0] <= m <= HD_BAND[1] for m in means.values()) and passes == 0)
    detail = ", ".join(f"{b}b mean {m:.2f}" for b, m in means.items()) + f", {passes} passes"
    criterion(2, "avalanche / fault injection", ok, detail, time.perf_counter() - t0, 10)


def test_3_share_removal(criterion):
    t0 = time.perf_counter()
    sc = build()
    victims = list(range(1, 5))
    specs = [{"type": "share_removal", "victim": v} for v in victims]
    reports = attacks.sweep(sc, LENGTHS, specs, TRIALS)
    passes = sum(r.passes for r in reports)
    means = [r.mean for r in reports]
    ok = (len(reports) == len(victims) * 4 and passes == 0
          and all(set(r.verdicts) == {"anomalous"} for r in reports)
          and all(HD_BAND[0] <= m <= HD_BAND[1] for m in means))
    detail = (f"{len(reports)} victim x length cells, {passes} passes, "
              f"mean HD {min(means):.2f}..{max(means):.2f}")
    criterion(3, "share removal / DoS", ok, detail, time.perf_counter() - t0, 10)


def test_4_replay_rejection(criterion):
    t0 = time.perf_counter()
    acceptances = replayed = recorded = 0
    for seed in range(100):
        sc = build(seed=seed)
        eng = sc.engine()
        report = eng.run()
        if not report.all_authenticated:
            continue
        recorded += 1
        rep = attacks.attack_replay(eng, report.transcripts, eng.new_session())
        acceptances += rep.acceptances
        replayed += rep.replayed
    ok = recorded == 100 and acceptances == 0
    criterion(4, "replay rejection", ok,
              f"{recorded} Pass transcripts, {replayed} responses replayed, {acceptances} acceptances",
              time.perf_counter() - t0, 5)


def test_5_threshold_security(criterion):
    t0 = time.perf_counter()
    forged, small, large, failed_reconstructions = 0, 0, 0, 0
    for n in (3, 4, 5):
        t = -(-2 * n // 3)
        for kind in ("star", "clique"):
            for size in range(t):
                for bad in itertools.combinations(range(1, n + 1), size):
                    sc = build(kind, n_int=n, third=(10,),
                               behaviors={10: "counterfeit", **{i: "collude" for i in bad}})
                    small += 1
                    forged += sc.authenticate().results[10].final is Verdict.PASS
        sc = build(n_int=n, third=(10,))
        eng = sc.engine()
        ctx = eng.new_session()
        tree, clock = eng.cross_authenticate_integrators(ctx)
        assert tree.quorum.t == t
        eng.distribute_shares(tree, ctx, start=clock)
        expected = eng.pooled_expected(tree, 10)[0]
        held = eng.holdings[10]
        for size in range(t, n + 1):
            for coalition in itertools.combinations(tree.root_set, size):
                large += 1
                got = reconstruct([held[i] for i in coalition], tree.quorum)
                failed_reconstructions += got != expected.value
    ok = forged == 0 and failed_reconstructions == 0 and small > 0 and large > 0
    criterion(5, "threshold security", ok,
              f"{small} sub-threshold coalitions, {forged} forged passes; "
              f"{large} quorum coalitions, {failed_reconstructions} failed reconstructions",
              time.perf_counter() - t0, 30)


def _matrix_case(kind, case):
    target = 13
    probe = build(kind)
    bad = list(path_links(probe.topology.routes(1, target)[0])[-1])
    faults, behaviors = [], {}
    if case == "counterfeit":
        behaviors = {target: "counterfeit"}
        truth = (Classification.CHIPLET_FAULT, frozenset())
    elif case == "corrupting":
        faults = [{"link": bad, "state": "corrupting", "bits": [0]}]
        truth = (Classification.LINK_FAULT, frozenset({tuple(bad)}))
    elif case == "dropping":
        faults = [{"link": bad, "state": "dropping"}]
        truth = (Classification.LINK_FAULT, frozenset({tuple(bad)}))
    else:
        faults = [{"link": bad, "state": "corrupting", "bits": [0], "from_cycle": 0, "to_cycle": 600}]
        truth = (Classification.TRANSIENT, frozenset())
    report = build(kind, behaviors=behaviors, faults=faults).authenticate()
    diags = report.diagnoses
    got = [(d.target_id, d.classification, d.links) for d in diags]
    correct = got == [(target, *truth)]
    if case == "counterfeit":
        correct = correct and report.rejected == [target]
    else:
        correct = correct and report.rejected == []
    return correct, got


def test_6_fault_localization(criterion):
    t0 = time.perf_counter()
    wrong = []
    cases = 0
    for kind in ("star", "mesh", "clique"):
        for case in ("counterfeit", "corrupting", "dropping", "transient"):
            cases += 1
            ok, got = _matrix_case(kind, case)
            if not ok:
                wrong.append(f"{kind}/{case}: {got}")
    criterion(6, "fault localization", cases == 12 and not wrong,
              f"{cases - len(wrong)}/{cases} cases match ground truth" + (f"; wrong: {wrong}" if wrong else ""),
              time.perf_counter() - t0, 10)


def test_7_latency_model(criterion):
    t0 = time.perf_counter()
    single = build(third=(10,)).authenticate()
    cycles, ns = latency_model(single, 1.0)
    hand = 96 + 2 + 1
    big = build(third=tuple(range(100, 164))).authenticate()
    big_cycles, big_ns = latency_model(big, 1.0)
    ok = cycles == hand and ns == 99.0 and big_cycles < 1000 and big_ns < 1000 and big.all_authenticated
    criterion(7, "latency model", ok,
              f"single target {cycles} cycles (hand trace {hand}); 64 targets {big_cycles} cycles = {big_ns:.0f} ns",
              time.perf_counter() - t0, 5)


def _cli(args, cwd):
    env = {k: v for k, v in os.environ.items() if k != "AUTHENTREE_SEED"}
    proc = subprocess.run([sys.executable, "-m", "authentree", *map(str, args)], cwd=cwd,
                          capture_output=True, env=env)
    return proc.returncode, proc.stdout, proc.stderr


def _snapshot(root: Path) -> dict:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_8_determinism(criterion, tmp_path):
    t0 = time.perf_counter()
    honest = SCENARIOS / "all_honest.json"
    runs = []
    for attempt in ("a", "b"):
        work = tmp_path / attempt
        work.mkdir()
        outputs = {}
        outputs["validate"] = _cli(["validate", honest], work)
        for name in ("all_honest", "counterfeit", "faulty_link", "transient"):
            outputs[f"authenticate {name}"] = _cli(
                ["authenticate", SCENARIOS / f"{name}.json", "--seed", 7, "--out", work / name], work)
        outputs["attack --sweep"] = _cli(["attack", honest, "--sweep", "--trials", 200, "--seed", 7,
                                          "--raw", "--out", work / "sweep.csv"], work)
        outputs["attack section"] = _cli(["attack", honest, "--trials", 50, "--seed", 7], work)
        outputs["replay audit"] = _cli(["replay", work / "all_honest" / "transcript.jsonl"], work)
        outputs["replay --as-attack"] = _cli(["replay", work / "all_honest" / "transcript.jsonl",
                                              "--as-attack"], work)
        files = _snapshot(work)
        runs.append((outputs, files))
    (out_a, files_a), (out_b, files_b) = runs
    codes_ok = all(code == 0 for code, _, _ in out_a.values())
    differing = [k for k in out_a if out_a[k] != out_b[k]]
    differing += [k for k in files_a if files_a.get(k) != files_b.get(k)]
    differing += [k for k in files_b if k not in files_a]
    ok = codes_ok and not differing and len(files_a) >= 13
    detail = (f"{len(out_a)} commands, {len(files_a)} files compared byte-for-byte, "
              f"{len(differing)} differ" + ("" if codes_ok else "; nonzero exit code"))
    criterion(8, "determinism", ok, detail, time.perf_counter() - t0, 30)
