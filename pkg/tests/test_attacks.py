import csv
import io
import json
import statistics

import pytest

from authentree import attacks
from authentree.crypto import SessionContext
from authentree.protocol import Classification, Verdict

from conftest import build, scenario_doc
from authentree.config import Scenario


@pytest.fixture
def star():
    return build()


def test_bit_flip_band_and_zero_passes(star):
    r = attacks.attack_bit_flip(star, k=1, trials=300)
    assert len(r.distances) == 300
    assert 120 <= r.mean <= 136
    assert r.passes == 0 and r.fail_rate == 1.0


@pytest.mark.parametrize("k", [0, 257])
def test_bit_flip_k_out_of_range(star, k):
    with pytest.raises(ValueError, match="k must be in"):
        attacks.attack_bit_flip(star, k=k, trials=1)


def test_bit_flip_multi_bit(star):
    r = attacks.attack_bit_flip(star, k=8, trials=50)
    assert r.passes == 0 and all(0 <= d <= 256 for d in r.distances)


def test_share_removal_modes(star):
    r = attacks.attack_share_removal(star, victim=2, trials=200)
    assert 120 <= r.mean <= 136
    assert set(r.verdicts) == {"anomalous"}


def test_share_removal_unknown_victim(star):
    with pytest.raises(ValueError, match="victim 99 not in trust tree"):
        attacks.attack_share_removal(star, victim=99, trials=1)


def test_share_removal_restores_baseline():
    baseline = build().authenticate().to_json()
    sc = build()
    attacks.attack_share_removal(sc, victim=3, trials=5)
    assert sc.authenticate().to_json() == baseline


def test_replay_zero_acceptances_and_band():
    sc = build()
    eng = sc.engine()
    r = eng.run()
    assert r.all_authenticated
    distances = []
    for _ in range(100):
        rep = attacks.attack_replay(eng, r.transcripts, eng.new_session())
        assert rep.acceptances == 0
        distances += rep.distances
    assert 120 <= statistics.mean(distances) <= 136


def test_replay_same_session_is_duplicate():
    sc = build()
    eng = sc.engine()
    r = eng.run()
    first = next(e for e in r.transcripts if e.message.kind.value == "challenge")
    ctx = SessionContext.decode(first.message.payload[16:])
    rep = attacks.attack_replay(eng, r.transcripts, ctx)
    assert rep.acceptances == rep.replayed
    assert rep.duplicates == rep.replayed


def test_replay_malformed_transcript():
    sc = build()
    eng = sc.engine()
    with pytest.raises(ValueError, match="transcript malformed"):
        attacks.attack_replay(eng, [], eng.new_session())


def test_replay_trials_fail_rate(star):
    r = attacks.run_attack(star, "replay", trials=100)
    assert r.fail_rate == 1.0 and 120 <= r.mean <= 136


def test_clone_random_secret(star):
    res = attacks.attack_clone(star, 12)
    assert res.final is Verdict.FAIL and res.classification is Classification.CHIPLET_FAULT
    assert res.flags == []


def test_perfect_clone_flagged(star):
    res = attacks.attack_clone(star, 12, perfect=True)
    assert res.final is Verdict.PASS
    assert any("model limit" in f for f in res.flags)


def test_clone_of_integrator_shrinks_tree(star):
    res = attacks.attack_clone(star, 3)
    assert res.excluded == [3] and len(res.trusted) == 3


def test_clone_and_silent_trials_never_pass(star):
    assert attacks.run_attack(star, "clone", trials=100).passes == 0
    assert attacks.run_attack(star, "silent", trials=20).passes == 0


def test_no_attack_baseline_has_no_fail():
    for kind in ("star", "clique", "mesh"):
        r = build(kind).authenticate()
        assert all(res.final is Verdict.PASS for res in r.results.values())


def test_unknown_attack(star):
    with pytest.raises(ValueError, match="allowed: bit_flip, share_removal, replay, clone, silent"):
        attacks.run_attack(star, "laser")


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_sweep_grid_and_determinism(star):
    reports = attacks.sweep(star, trials=60)
    text = attacks.to_csv(reports)
    rows = _rows(text)
    assert len(rows) == 12
    assert text.splitlines()[0] == "attack,length_bits,mean_hd,std_hd,min,max,fail_rate"
    assert "\r" not in text
    assert {(r["attack"], int(r["length_bits"])) for r in rows} == {
        (a, b) for a in attacks.DEFAULT_ATTACKS for b in (64, 128, 256, 512)}
    for r in rows:
        assert 120 <= float(r["mean_hd"]) <= 136
        assert float(r["fail_rate"]) == 1.0
    assert attacks.to_csv(attacks.sweep(build(), trials=60)) == text


def test_sweep_parallel_matches_serial(star):
    serial = attacks.to_csv(attacks.sweep(star, [64, 256], ["bit_flip"], trials=30))
    parallel = attacks.to_csv(attacks.sweep(build(), [64, 256], ["bit_flip"], trials=30, jobs=2))
    assert serial == parallel


def test_sweep_empty_lengths(star):
    with pytest.raises(ValueError):
        attacks.sweep(star, [], trials=1)


def test_statistics_recompute_from_raw(star):
    reports = attacks.sweep(star, [128], ["bit_flip", "share_removal"], trials=40)
    raw = [json.loads(ln) for ln in attacks.to_jsonl(reports).splitlines()]
    for rep, row in zip(reports, _rows(attacks.to_csv(reports))):
        hd = [r["hd"] for r in raw if r["attack"] == rep.attack]
        verdicts = [r["verdict"] for r in raw if r["attack"] == rep.attack]
        assert row["mean_hd"] == f"{statistics.fmean(hd):.4f}"
        assert row["std_hd"] == f"{statistics.pstdev(hd):.4f}"
        assert int(row["min"]) == min(hd) and int(row["max"]) == max(hd)
        assert row["fail_rate"] == f"{sum(v != 'pass' for v in verdicts) / len(verdicts):.4f}"


def test_single_trial_std_zero(star):
    row = attacks.sweep(star, [256], ["bit_flip"], trials=1)[0].row()
    assert row["std_hd"] == "0.0000"


def test_trial_seed_is_order_independent():
    a = attacks.run_attack(build(), "bit_flip", trials=20)
    b = attacks.run_attack(build(), "bit_flip", trials=10)
    assert a.distances[:10] == b.distances


def test_signature_length_controls_manifest():
    sc = Scenario.from_dict(scenario_doc(), signature_bits=512)
    assert sc.manifest.signature_bits == 512
    assert sc.authenticate().all_authenticated
