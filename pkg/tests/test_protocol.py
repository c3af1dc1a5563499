import json
import math
from dataclasses import replace

import numpy as np
import pytest

from flagcka.bell import CHSH_QUANTUM_MAX, GENERATION_INPUTS
from flagcka.protocol import (
    PARALLEL_QUANTUM_MAX,
    ProtocolConfig,
    RoundRecord,
    Transcript,
    alignment_test,
    apply_tamper,
    check_flag_agreement,
    config_from_json,
    config_to_json,
    postprocess,
    result_to_json,
    run_protocol,
    run_rounds,
    sift_pair_keys,
    transcript_to_jsonl,
    xor_reconcile,
    _default_threshold,
)


def test_config_validation():
    ProtocolConfig()
    with pytest.raises(ValueError):
        ProtocolConfig(n_rounds=0)
    with pytest.raises(ValueError):
        ProtocolConfig(gamma=0.0)
    with pytest.raises(ValueError):
        ProtocolConfig(gamma=1.0)
    with pytest.raises(ValueError):
        ProtocolConfig(bell_threshold=1.5)  # below the local bound
    with pytest.raises(ValueError):
        ProtocolConfig(bell_threshold=3.0)  # above the quantum maximum
    with pytest.raises(ValueError):
        ProtocolConfig(strategy_kind="parallel", bell_threshold=2.5)  # parallel range is [4, 4 sqrt 2]
    ProtocolConfig(strategy_kind="parallel", bell_threshold=5.0)
    with pytest.raises(ValueError):
        ProtocolConfig(backend="gpu")
    with pytest.raises(ValueError):
        ProtocolConfig(visibility=1.5)


def test_runs_are_deterministic():
    cfg = ProtocolConfig(n_rounds=400, seed=3)
    res1, tr1 = run_protocol(cfg)
    res2, tr2 = run_protocol(cfg)
    assert res1.keys == res2.keys
    assert res1.stats == res2.stats
    assert tr1.rounds == tr2.rounds
    res3, _ = run_protocol(ProtocolConfig(n_rounds=400, seed=4))
    assert res3.keys != res1.keys


def test_backends_agree_draw_for_draw():
    # The conditional-table device consumes the same uniform draws as the
    # explicit-collapse device and must produce identical transcripts.
    for seed in (0, 11):
        _, tr_table = run_protocol(ProtocolConfig(n_rounds=300, seed=seed, backend="table"))
        _, tr_collapse = run_protocol(ProtocolConfig(n_rounds=300, seed=seed, backend="collapse"))
        assert tr_table.rounds == tr_collapse.rounds


def test_backends_agree_under_noise_and_parallel():
    _, a = run_protocol(ProtocolConfig(n_rounds=200, seed=5, visibility=0.85, bell_threshold=2.0, backend="table"))
    _, b = run_protocol(ProtocolConfig(n_rounds=200, seed=5, visibility=0.85, bell_threshold=2.0, backend="collapse"))
    assert a.rounds == b.rounds
    _, c = run_protocol(ProtocolConfig(n_rounds=200, seed=5, strategy_kind="parallel", backend="table"))
    _, d = run_protocol(ProtocolConfig(n_rounds=200, seed=5, strategy_kind="parallel", backend="collapse"))
    assert c.rounds == d.rounds


def test_round_records_use_protocol_inputs():
    tr = run_rounds(ProtocolConfig(n_rounds=300, seed=1))
    assert len(tr.rounds) == 300
    saw_test = saw_gen = False
    for r in tr.rounds:
        assert all(len(out) == 2 for out in r.outputs)
        assert all(bit in (0, 1) for out in r.outputs for bit in out)
        if r.round_type == "generation":
            assert r.inputs == GENERATION_INPUTS
            saw_gen = True
        else:
            x, y, z = r.inputs
            assert x in (0, 1) and y in (0, 1) and z in (0, 1)
            saw_test = True
    assert saw_test and saw_gen


def test_per_round_event_schedule():
    # Devices only ever see (input, state): the round type is announced
    # before inputs are chosen, and every measurement happens after all
    # three inputs exist.
    tr = run_rounds(ProtocolConfig(n_rounds=50, seed=2))
    per_round = 1 + 3 + 1 + 3 + 3  # distribute, receipts, round_type, inputs, measures
    assert len(tr.events) == 50 * per_round
    for r in range(50):
        chunk = tr.events[r * per_round:(r + 1) * per_round]
        kinds = [e[0] for e in chunk]
        assert kinds == ["distribute"] + ["receipt"] * 3 + ["round_type"] + ["input"] * 3 + ["measure"] * 3
        assert all(e[1] == r for e in chunk)


def test_message_schedule_through_completion():
    cfg = ProtocolConfig(n_rounds=2000, seed=6)
    result, tr = run_protocol(cfg)
    assert result.outcome == "completed"
    kinds = [m.kind for m in tr.messages]
    # Per-round receipts and announcements first ...
    assert kinds[:4] == ["Receipt", "Receipt", "Receipt", "RoundTypeAnnounce"]
    # ... then the deferred flag and test-data announcements, then the XOR.
    tail = kinds[-7:]
    assert tail == ["FlagAnnounce"] * 3 + ["TestDataAnnounce"] * 3 + ["XorAnnounce"]
    senders = [m.sender for m in tr.messages if m.kind == "FlagAnnounce"]
    assert senders == ["alice", "bob", "carole"]


def test_check_flag_agreement_verdicts():
    assert check_flag_agreement("0101", "0101", "0101") == "ok"
    assert check_flag_agreement("0101", "0100", "0101") == "FlagMismatch"
    assert check_flag_agreement("0000", "0000", "0000") == "FlagConstant"
    assert check_flag_agreement("1111", "1111", "1111") == "FlagConstant"
    with pytest.raises(ValueError):
        check_flag_agreement("01", "011", "01")


def _synthetic_transcript(rows, kind="flagged"):
    rounds = [
        RoundRecord(index=i, round_type=rt, inputs=inputs, outputs=outputs)
        for i, (rt, inputs, outputs) in enumerate(rows)
    ]
    return Transcript(strategy_kind=kind, n_rounds=len(rounds), rounds=rounds)


def test_sift_routes_by_flag():
    rows = [
        ("generation", (0, 2, 2), ((1, 0), (1, 0), (0, 0))),   # ab, match
        ("test", (1, 1, 0), ((0, 0), (1, 0), (0, 0))),          # ignored
        ("generation", (0, 2, 2), ((1, 1), (0, 1), (1, 1))),   # ac, match
        ("generation", (0, 2, 2), ((0, 0), (1, 0), (1, 0))),   # ab, mismatch
        ("generation", (0, 2, 2), ((1, 1), (1, 1), (0, 1))),   # ac, mismatch
    ]
    sift = sift_pair_keys(_synthetic_transcript(rows))
    assert sift.alice_ab == "10" and sift.partner_ab == "11"
    assert sift.alice_ac == "11" and sift.partner_ac == "10"
    assert sift.mismatch_ab == 1 and sift.mismatch_ac == 1


def test_sift_respects_exclusions():
    rows = [
        ("generation", (0, 2, 2), ((1, 0), (1, 0), (0, 0))),
        ("generation", (0, 2, 2), ((0, 0), (0, 0), (0, 0))),
    ]
    sift = sift_pair_keys(_synthetic_transcript(rows), exclude_ab=frozenset({0}))
    assert sift.alice_ab == "0"


def test_sift_parallel_feeds_both_keys():
    rows = [
        ("generation", (0, 2, 2), ((1, 0), (1, 1), (1, 0))),
        ("generation", (0, 2, 2), ((0, 1), (0, 0), (0, 1))),
    ]
    sift = sift_pair_keys(_synthetic_transcript(rows, kind="parallel"))
    # First bits go to Alice-Bob, second bits to Alice-Carole.
    assert sift.alice_ab == "10" and sift.partner_ab == "10"
    assert sift.alice_ac == "01" and sift.partner_ac == "01"
    assert sift.mismatch_ab == 0 and sift.mismatch_ac == 0


def test_xor_reconcile():
    k_xor, k_cka = xor_reconcile("1010", "0110")
    assert k_cka == "1010"
    assert k_xor == "1100"
    # Carole's side: k_xor XOR k_ac recovers the conference key.
    recovered = "".join("1" if a != b else "0" for a, b in zip(k_xor, "0110"))
    assert recovered == k_cka
    # truncation to the shorter key
    k_xor, k_cka = xor_reconcile("10101", "011")
    assert len(k_xor) == len(k_cka) == 3
    with pytest.raises(ValueError):
        xor_reconcile("", "")


def test_alignment_vacuous_at_fraction_zero():
    tr = run_rounds(ProtocolConfig(n_rounds=200, seed=8))
    res = alignment_test(tr, 0.0, 0.98, np.random.default_rng(0))
    assert res.ok
    assert res.match_rates == {"ab": None, "ac": None}
    assert res.excluded_ab == frozenset() and res.excluded_ac == frozenset()


def test_alignment_passes_on_honest_run():
    tr = run_rounds(ProtocolConfig(n_rounds=400, seed=8))
    res = alignment_test(tr, 0.25, 0.98, np.random.default_rng(1))
    assert res.ok
    assert res.match_rates["ab"] == 1.0
    assert res.match_rates["ac"] == 1.0
    n_ab = sum(1 for r in tr.rounds if r.round_type == "generation" and r.outputs[0][1] == 0)
    assert len(res.excluded_ab) == math.ceil(0.25 * n_ab)


def test_alignment_catches_value_corruption():
    tr = run_rounds(ProtocolConfig(n_rounds=400, seed=9))
    rounds = [
        replace(r, outputs=((r.outputs[0][0], r.outputs[0][1]), (1 - r.outputs[1][0], r.outputs[1][1]), r.outputs[2]))
        if r.round_type == "generation"
        else r
        for r in tr.rounds
    ]
    bad = Transcript(strategy_kind="flagged", n_rounds=tr.n_rounds, rounds=rounds)
    res = alignment_test(bad, 0.3, 0.98, np.random.default_rng(2))
    assert not res.ok
    assert res.match_rates["ab"] == pytest.approx(0.0)


def test_default_threshold_clamps():
    assert _default_threshold("flagged", 0) == CHSH_QUANTUM_MAX
    assert _default_threshold("flagged", 4) == 2.0  # 1 - 10/2 < 0 clamps to the local bound
    n = 10_000
    expected = CHSH_QUANTUM_MAX * (1.0 - 10.0 / math.sqrt(n))
    assert _default_threshold("flagged", n) == pytest.approx(expected)
    assert _default_threshold("parallel", 4) == 4.0
    assert _default_threshold("parallel", 0) == PARALLEL_QUANTUM_MAX


def test_honest_runs_complete_with_identical_keys():
    for seed in range(5):
        result, _ = run_protocol(ProtocolConfig(n_rounds=2000, gamma=0.2, seed=seed))
        assert result.outcome == "completed"
        assert result.keys["alice"] == result.keys["bob"] == result.keys["carole"]
        assert result.stats["mismatch_ab"] == 0
        assert result.stats["mismatch_ac"] == 0
        assert len(result.keys["alice"]) == result.stats["key_length"] > 0


def test_flag_flip_tamper_aborts():
    cfg = ProtocolConfig(n_rounds=1000, seed=13)
    tr = run_rounds(cfg)
    for rate in (0.001, 0.05, 1.0):
        bad = apply_tamper(tr, f"flag-flip:{rate}", np.random.default_rng(0))
        res = postprocess(bad, cfg)
        assert res.outcome == "aborted"
        assert res.abort_reason == "FlagMismatch"
        assert res.keys == {}


def test_flag_constant_tamper_aborts():
    cfg = ProtocolConfig(n_rounds=1000, seed=13)
    tr = run_rounds(cfg)
    for t in (0, 1):
        bad = apply_tamper(tr, f"flag-constant:{t}", np.random.default_rng(0))
        res = postprocess(bad, cfg)
        assert res.outcome == "aborted"
        assert res.abort_reason == "FlagConstant"


def test_tamper_validation():
    tr = run_rounds(ProtocolConfig(n_rounds=50, seed=0))
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        apply_tamper(tr, "flag-flip:0", rng)
    with pytest.raises(ValueError):
        apply_tamper(tr, "flag-flip:abc", rng)
    with pytest.raises(ValueError):
        apply_tamper(tr, "flag-constant:2", rng)
    with pytest.raises(ValueError):
        apply_tamper(tr, "bit-flip:0.1", rng)
    tr_par = run_rounds(ProtocolConfig(n_rounds=50, seed=0, strategy_kind="parallel"))
    with pytest.raises(ValueError):
        apply_tamper(tr_par, "flag-flip:0.1", rng)


def test_tamper_does_not_mutate_original():
    cfg = ProtocolConfig(n_rounds=200, seed=14)
    tr = run_rounds(cfg)
    before = list(tr.rounds)
    apply_tamper(tr, "flag-constant:0", np.random.default_rng(0))
    assert tr.rounds == before
    assert postprocess(tr, cfg).outcome == "completed"


def test_low_visibility_aborts_below_threshold():
    res, _ = run_protocol(ProtocolConfig(n_rounds=3000, seed=2, visibility=0.5))
    assert res.outcome == "aborted"
    assert res.abort_reason == "BellBelowThreshold"
    assert res.stats["bell_estimate"] < res.stats["bell_threshold"]


def test_mismatch_rate_tracks_visibility():
    v = 0.9
    res, _ = run_protocol(ProtocolConfig(n_rounds=30000, seed=2, visibility=v, bell_threshold=2.0))
    assert res.outcome == "completed"
    expected = (1.0 - v) / 2.0
    for pair in ("ab", "ac"):
        n = res.stats[f"len_{pair}"]
        rate = res.stats[f"mismatch_rate_{pair}"]
        sigma = math.sqrt(expected * (1.0 - expected) / n)
        assert abs(rate - expected) < 3.0 * sigma


def test_sifted_rate_near_half():
    res, _ = run_protocol(ProtocolConfig(n_rounds=10000, gamma=0.2, seed=21))
    assert res.outcome == "completed"
    assert abs(res.stats["sifted_rate"] - 0.5) < 0.02


def test_parallel_protocol_completes():
    res, tr = run_protocol(ProtocolConfig(n_rounds=3000, seed=9, strategy_kind="parallel"))
    assert res.outcome == "completed"
    assert res.keys["alice"] == res.keys["bob"] == res.keys["carole"]
    # No flag register: the flag steps are skipped entirely.
    assert not any(m.kind == "FlagAnnounce" for m in tr.messages)
    assert "p_t0_estimate" not in res.stats
    # Every generation round feeds both pair keys.
    assert res.stats["len_ab"] == res.stats["len_ac"] == res.stats["n_gen"]
    assert res.stats["bell_threshold"] >= 4.0


def test_config_json_roundtrip():
    cfg = ProtocolConfig(
        n_rounds=5000,
        gamma=0.25,
        bell_threshold=2.4,
        alignment_fraction=0.1,
        alignment_floor=0.95,
        seed=77,
        strategy_kind="flagged",
        visibility=0.97,
        backend="collapse",
    )
    back = config_from_json(config_to_json(cfg))
    assert back == cfg
    # default threshold survives as null
    assert config_from_json(config_to_json(ProtocolConfig())).bell_threshold is None


def test_config_json_rejects_unknown_keys():
    with pytest.raises(ValueError):
        config_from_json('{"n_rounds": 100, "rounds": 7}')


def test_transcript_jsonl():
    tr = run_rounds(ProtocolConfig(n_rounds=40, seed=1))
    lines = transcript_to_jsonl(tr).strip().splitlines()
    assert len(lines) == 40
    first = json.loads(lines[0])
    assert first["index"] == 0
    assert first["type"] in ("test", "generation")
    assert len(first["outputs"]) == 3


def test_result_json():
    res, _ = run_protocol(ProtocolConfig(n_rounds=500, seed=4))
    doc = json.loads(result_to_json(res))
    assert doc["outcome"] == "completed"
    assert set(doc["keys"]) == {"alice", "bob", "carole"}
    assert doc["stats"]["key_length"] == len(doc["keys"]["alice"])


def test_run_rounds_rejects_mismatched_strategy():
    from flagcka.strategies import honest_parallel_strategy

    with pytest.raises(ValueError):
        run_rounds(ProtocolConfig(n_rounds=10, strategy_kind="flagged"), honest_parallel_strategy())
