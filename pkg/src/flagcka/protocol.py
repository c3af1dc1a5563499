"""Round-by-round simulation of the conference key agreement protocol.

One run proceeds in seven steps:

  1. the source distributes a fresh share of the strategy state; every
     party stores it before anything about the round is decided
  2. Alice announces the round type (test with probability gamma);
     parties pick inputs, uniformly from the first two settings on test
     rounds and the fixed generation settings otherwise
  3. parties measure; each measurement device sees only its input and
     the shared state handle, never the round type
  4. flag strings are announced; the run aborts if they differ anywhere
     (FlagMismatch) or if the common string is constant (FlagConstant)
  5. test-round data is announced, the Bell value estimated and compared
     against the threshold (BellBelowThreshold on failure); optionally a
     fraction of generation rounds is sacrificed to an alignment check
     (AlignmentFailure below the floor)
  6. generation rounds are sifted into the Alice-Bob key (flag 0) and
     the Alice-Carole key (flag 1)
  7. Alice announces the XOR of her two sifted keys so Carole can
     recover the Alice-Bob string as the conference key

All announcements are deferred to after the last round, so devices can
gain nothing from the public transcript. One RNG stream seeded from the
config drives the rounds; per round the draw order is fixed: round
type, then inputs (Alice, Bob, Carole; test rounds only), then one
collapse draw per party in the same order. Post-round sampling (the
alignment spot check, Alice-Bob pair before Alice-Carole) uses a
stream derived from the same seed, so it is insensitive to how the
transcript was produced or restored. Two runs with the same config are
bit-identical.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .bell import (
    CHSH_QUANTUM_MAX,
    GENERATION_INPUTS,
    bell_value,
    bell_value_stderr,
    estimate_behavior,
    parallel_bell_value,
)
from .qops import measure_collapse
from .strategies import (
    N_INPUTS,
    NoiseParams,
    Strategy,
    honest_flagged_strategy,
    honest_parallel_strategy,
)

__all__ = [
    "ABORT_REASONS",
    "PARTY_NAMES",
    "ProtocolConfig",
    "RoundRecord",
    "Message",
    "Transcript",
    "SiftResult",
    "AlignmentResult",
    "ProtocolResult",
    "run_rounds",
    "postprocess",
    "run_protocol",
    "check_flag_agreement",
    "sift_pair_keys",
    "xor_reconcile",
    "alignment_test",
    "apply_tamper",
    "config_to_json",
    "config_from_json",
    "transcript_to_jsonl",
    "result_to_json",
]

PARTY_NAMES = ("alice", "bob", "carole")
ABORT_REASONS = ("FlagMismatch", "FlagConstant", "BellBelowThreshold", "AlignmentFailure")
PARALLEL_QUANTUM_MAX = 2.0 * CHSH_QUANTUM_MAX


@dataclass(frozen=True)
class ProtocolConfig:
    n_rounds: int = 1000
    gamma: float = 0.2
    bell_threshold: float | None = None      # None: 2*sqrt(2)*(1 - 10/sqrt(n_test))
    alignment_fraction: float = 0.0
    alignment_floor: float = 0.98
    seed: int = 0
    strategy_kind: str = "flagged"
    visibility: float = 1.0
    backend: str = "table"

    def __post_init__(self):
        if self.n_rounds < 1:
            raise ValueError(f"n_rounds must be positive, got {self.n_rounds}")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must be in (0, 1), got {self.gamma}")
        if self.strategy_kind not in ("flagged", "parallel"):
            raise ValueError(f"unknown strategy kind {self.strategy_kind!r}")
        if self.bell_threshold is not None:
            lo = 2.0 if self.strategy_kind == "flagged" else 4.0
            hi = CHSH_QUANTUM_MAX if self.strategy_kind == "flagged" else PARALLEL_QUANTUM_MAX
            if not lo - 1e-12 <= self.bell_threshold <= hi + 1e-9:
                raise ValueError(f"bell_threshold must lie in [{lo}, {hi:.6f}], got {self.bell_threshold}")
        if not 0.0 <= self.alignment_fraction < 1.0:
            raise ValueError(f"alignment_fraction must be in [0, 1), got {self.alignment_fraction}")
        if not 0.0 < self.alignment_floor <= 1.0:
            raise ValueError(f"alignment_floor must be in (0, 1], got {self.alignment_floor}")
        if not 0.0 <= self.visibility <= 1.0:
            raise ValueError(f"visibility must be in [0, 1], got {self.visibility}")
        if self.backend not in ("table", "collapse"):
            raise ValueError(f"backend must be 'table' or 'collapse', got {self.backend!r}")


@dataclass(frozen=True, slots=True)
class RoundRecord:
    index: int
    round_type: str                          # "test" | "generation"
    inputs: tuple[int, int, int]
    outputs: tuple[tuple[int, int], ...]     # one (value, flag) pair per party


@dataclass(frozen=True, slots=True)
class Message:
    sender: str
    kind: str
    round_index: int | None
    payload: object


@dataclass
class Transcript:
    strategy_kind: str
    n_rounds: int
    rounds: list = field(default_factory=list)
    messages: list = field(default_factory=list)
    events: list = field(default_factory=list)   # (kind, round_index, party or None)


@dataclass(frozen=True)
class SiftResult:
    alice_ab: str
    partner_ab: str
    alice_ac: str
    partner_ac: str
    mismatch_ab: int
    mismatch_ac: int


@dataclass(frozen=True)
class AlignmentResult:
    ok: bool
    match_rates: dict
    excluded_ab: frozenset
    excluded_ac: frozenset


@dataclass(frozen=True)
class ProtocolResult:
    outcome: str                              # "completed" | "aborted"
    abort_reason: str | None
    keys: dict                                # party -> bit string
    k_xor: str
    stats: dict


class RoundState:
    """Shared handle for one round; carries the collapse history."""

    __slots__ = ("prefix", "rho")

    def __init__(self, rho=None):
        self.prefix = []
        self.rho = rho


class TableDevice:
    """Measurement device sampling the exact sequential Born chain.

    Conditional outcome tables are precomputed from the strategy
    behavior; per round the device reads the collapse history recorded
    on the state handle (earlier parties' inputs and outcomes, the
    classical shadow of the collapsed state) and consumes one uniform
    draw. Outcome intervals follow ascending label order, so given the
    same draws this device reproduces the explicit-collapse device's
    outcomes exactly.
    """

    def __init__(self, party: int, tables):
        self.party = party
        self.tables = tables

    def measure(self, x: int, state: RoundState, draw: float):
        prefix = state.prefix
        if len(prefix) != self.party:
            raise RuntimeError("parties must measure in fixed order")
        if self.party == 0:
            cum = self.tables.cum_a[x]
        elif self.party == 1:
            (xa, oa) = prefix[0]
            cum = self.tables.cum_b[xa][oa][x]
        else:
            (xa, oa), (xb, ob) = prefix
            cum = self.tables.cum_c[xa][oa][xb][ob][x]
        idx = _pick(cum, draw)
        prefix.append((x, idx))
        return (idx >> 1, idx & 1)


class CollapseDevice:
    """Measurement device performing an explicit projective collapse."""

    def __init__(self, party: int, strategy: Strategy):
        self.party = party
        self.initial = strategy.state
        self.effects = {
            x: {label: strategy.effect(party, x, label) for label in strategy.measurements[party][x]}
            for x in range(N_INPUTS[party])
        }

    def measure(self, x: int, state: RoundState, draw: float):
        if state.rho is None:
            state.rho = self.initial
        label, state.rho = measure_collapse(state.rho, self.effects[x], draw)
        state.prefix.append((x, (label[0] << 1) | label[1]))
        return label


def _pick(cum, draw: float) -> int:
    for i in range(4):
        if draw < cum[i]:
            return i
    # Float dust above the last edge: take the last positive-width bin.
    for i in (3, 2, 1):
        if cum[i] > cum[i - 1]:
            return i
    return 0


class _ConditionalTables:
    """Cumulative conditional outcome tables, nested lists for fast lookup."""

    def __init__(self, strategy: Strategy):
        from .bell import behavior_from_strategy

        b6 = behavior_from_strategy(strategy).table.reshape(2, 3, 3, 4, 4, 4)
        p_a = b6[:, 0, 0].sum(axis=(2, 3))                      # (x, oa)
        joint_ab = b6[:, :, 0].sum(axis=4)                      # (x, y, oa, ob)
        cond_b = np.divide(
            joint_ab,
            p_a[:, None, :, None],
            out=np.zeros_like(joint_ab),
            where=p_a[:, None, :, None] > 1e-15,
        )
        cond_c = np.divide(
            b6,
            joint_ab[:, :, None, :, :, None],
            out=np.zeros_like(b6),
            where=joint_ab[:, :, None, :, :, None] > 1e-15,
        )
        self.cum_a = np.cumsum(p_a, axis=-1).tolist()
        # Reorder bob: (x, oa, y, ob); carole: (x, oa, y, ob, z, oc).
        self.cum_b = np.cumsum(cond_b, axis=-1).transpose(0, 2, 1, 3).tolist()
        self.cum_c = np.cumsum(cond_c, axis=-1).transpose(0, 3, 1, 4, 2, 5).tolist()


class Party:
    """One protocol participant: private data plus an untrusted device."""

    def __init__(self, name: str, index: int, device):
        self.name = name
        self.index = index
        self.device = device
        self.inputs: list[int] = []
        self.outputs: list[tuple[int, int]] = []
        self._state: RoundState | None = None
        self._input: int | None = None

    def receive_state(self, state: RoundState):
        self._state = state

    def choose_input(self, is_test: bool, rng) -> int:
        self._input = int(rng.integers(2)) if is_test else GENERATION_INPUTS[self.index]
        self.inputs.append(self._input)
        return self._input

    def measure(self, rng) -> tuple[int, int]:
        outcome = self.device.measure(self._input, self._state, float(rng.random()))
        self.outputs.append(outcome)
        return outcome


def _build_strategy(config: ProtocolConfig) -> Strategy:
    noise = NoiseParams(visibility=config.visibility)
    if config.strategy_kind == "parallel":
        return honest_parallel_strategy(noise)
    return honest_flagged_strategy(noise)


def run_rounds(config: ProtocolConfig, strategy: Strategy | None = None) -> Transcript:
    """Steps 1-3: distribute, announce round type, choose inputs, measure.

    See the module docstring for the documented draw order. The returned
    transcript holds the raw per-round records and every broadcast
    message so far; announcements of flags and test data happen in
    postprocess.
    """
    strategy = _build_strategy(config) if strategy is None else strategy
    if strategy.kind != config.strategy_kind:
        raise ValueError(f"strategy kind {strategy.kind!r} does not match config {config.strategy_kind!r}")
    rng = np.random.default_rng(config.seed)
    if config.backend == "table":
        tables = _ConditionalTables(strategy)
        devices = [TableDevice(p, tables) for p in range(3)]
    else:
        devices = [CollapseDevice(p, strategy) for p in range(3)]
    parties = [Party(name, i, devices[i]) for i, name in enumerate(PARTY_NAMES)]
    transcript = Transcript(strategy_kind=strategy.kind, n_rounds=config.n_rounds)
    rounds = transcript.rounds
    messages = transcript.messages
    events = transcript.events
    for r in range(config.n_rounds):
        state = RoundState()
        events.append(("distribute", r, None))
        for party in parties:
            party.receive_state(state)
            messages.append(Message(party.name, "Receipt", r, None))
            events.append(("receipt", r, party.name))
        is_test = bool(rng.random() < config.gamma)
        round_type = "test" if is_test else "generation"
        messages.append(Message("alice", "RoundTypeAnnounce", r, round_type))
        events.append(("round_type", r, "alice"))
        inputs = []
        for party in parties:
            inputs.append(party.choose_input(is_test, rng))
            events.append(("input", r, party.name))
        outputs = []
        for party in parties:
            outputs.append(party.measure(rng))
            events.append(("measure", r, party.name))
        rounds.append(RoundRecord(index=r, round_type=round_type, inputs=tuple(inputs), outputs=tuple(outputs)))
    return transcript


def check_flag_agreement(flags_a: str, flags_b: str, flags_c: str) -> str:
    """Step-4 verdict: 'ok', 'FlagMismatch' or 'FlagConstant'.

    Any position where the three announced strings differ is a mismatch;
    identical but constant strings mean the source never alternated and
    the run must abort too.
    """
    if not (len(flags_a) == len(flags_b) == len(flags_c)):
        raise ValueError("flag strings must have equal length")
    if flags_a != flags_b or flags_a != flags_c:
        return "FlagMismatch"
    if len(set(flags_a)) == 1:
        return "FlagConstant"
    return "ok"


def sift_pair_keys(transcript: Transcript, exclude_ab=frozenset(), exclude_ac=frozenset()) -> SiftResult:
    """Step-6 sifting into the two pairwise raw keys.

    Flagged strategies: generation rounds route by the (verified common)
    flag, Alice-Bob on flag 0, Alice-Carole on flag 1. The two-pair
    strategy has no flags and every generation round feeds both keys:
    first output bits for Alice-Bob, second bits for Alice-Carole.
    Mismatch counts compare Alice's bit against the partner's.
    """
    ab_alice, ab_partner, ac_alice, ac_partner = [], [], [], []
    for record in transcript.rounds:
        if record.round_type != "generation":
            continue
        (a, ta), (b, tb), (c, tc) = record.outputs
        if transcript.strategy_kind == "flagged":
            if ta == 0 and record.index not in exclude_ab:
                ab_alice.append(a)
                ab_partner.append(b)
            elif ta == 1 and record.index not in exclude_ac:
                ac_alice.append(a)
                ac_partner.append(c)
        else:
            if record.index not in exclude_ab:
                ab_alice.append(a)
                ab_partner.append(b)
            if record.index not in exclude_ac:
                ac_alice.append(ta)
                ac_partner.append(tc)
    join = "".join
    return SiftResult(
        alice_ab=join(map(str, ab_alice)),
        partner_ab=join(map(str, ab_partner)),
        alice_ac=join(map(str, ac_alice)),
        partner_ac=join(map(str, ac_partner)),
        mismatch_ab=sum(1 for u, v in zip(ab_alice, ab_partner) if u != v),
        mismatch_ac=sum(1 for u, v in zip(ac_alice, ac_partner) if u != v),
    )


def _xor_strings(u: str, v: str) -> str:
    return "".join("1" if a != b else "0" for a, b in zip(u, v))


def xor_reconcile(k_ab: str, k_ac: str) -> tuple[str, str]:
    """Step-7 announcement: truncate to the shorter key, XOR the two.

    Returns (k_xor, k_cka) where k_cka is the truncated Alice-Bob key;
    anyone holding the Alice-Carole key recovers k_cka as
    k_xor XOR k_ac. Raises if both keys are empty.
    """
    if not k_ab and not k_ac:
        raise ValueError("both pair keys are empty; nothing to reconcile")
    m = min(len(k_ab), len(k_ac))
    k_ab, k_ac = k_ab[:m], k_ac[:m]
    return _xor_strings(k_ab, k_ac), k_ab


def alignment_test(transcript: Transcript, fraction: float, floor: float, rng) -> AlignmentResult:
    """Optional step-5 spot check on matched generation rounds.

    For each pair, ceil(fraction * n_pair) of that pair's generation
    rounds are sampled (Alice-Bob first, then Alice-Carole, consuming
    draws in that order), their outputs compared in public, and the
    sampled rounds excluded from key material. fraction 0 passes
    vacuously.
    """
    if not 0.0 <= fraction < 1.0:
        raise ValueError(f"fraction must be in [0, 1), got {fraction}")
    pair_rounds = {"ab": [], "ac": []}
    for record in transcript.rounds:
        if record.round_type != "generation":
            continue
        if transcript.strategy_kind == "flagged":
            pair_rounds["ab" if record.outputs[0][1] == 0 else "ac"].append(record)
        else:
            pair_rounds["ab"].append(record)
            pair_rounds["ac"].append(record)
    rates = {}
    excluded = {}
    ok = True
    for pair in ("ab", "ac"):
        rounds = pair_rounds[pair]
        k = math.ceil(fraction * len(rounds))
        if k == 0:
            rates[pair] = None
            excluded[pair] = frozenset()
            continue
        chosen = rng.choice(len(rounds), size=k, replace=False)
        matches = 0
        sampled = set()
        for i in chosen:
            record = rounds[int(i)]
            sampled.add(record.index)
            (a, ta), (b, tb), (c, tc) = record.outputs
            if transcript.strategy_kind == "flagged":
                partner_bit = b if pair == "ab" else c
                alice_bit = a
            else:
                alice_bit, partner_bit = (a, b) if pair == "ab" else (ta, tc)
            matches += int(alice_bit == partner_bit)
        rates[pair] = matches / k
        excluded[pair] = frozenset(sampled)
        if rates[pair] < floor:
            ok = False
    return AlignmentResult(ok=ok, match_rates=rates, excluded_ab=excluded["ab"], excluded_ac=excluded["ac"])


def _default_threshold(kind: str, n_test: int) -> float:
    hi = CHSH_QUANTUM_MAX if kind == "flagged" else PARALLEL_QUANTUM_MAX
    lo = 2.0 if kind == "flagged" else 4.0
    if n_test <= 0:
        return hi
    return min(max(hi * (1.0 - 10.0 / math.sqrt(n_test)), lo), hi)


def postprocess(transcript: Transcript, config: ProtocolConfig) -> ProtocolResult:
    """Steps 4-7 on a finished transcript: announcements, checks, keys."""
    rounds = transcript.rounds
    messages = transcript.messages
    stats = {
        "n_rounds": len(rounds),
        "n_test": sum(1 for r in rounds if r.round_type == "test"),
        "n_gen": sum(1 for r in rounds if r.round_type == "generation"),
        "strategy_kind": transcript.strategy_kind,
        "backend": config.backend,
    }

    def aborted(reason):
        messages.append(Message("alice", "AbortNotice", None, reason))
        return ProtocolResult(outcome="aborted", abort_reason=reason, keys={}, k_xor="", stats=stats)

    flagged = transcript.strategy_kind == "flagged"
    if flagged:
        flag_strings = {
            name: "".join(str(r.outputs[i][1]) for r in rounds) for i, name in enumerate(PARTY_NAMES)
        }
        for name in PARTY_NAMES:
            messages.append(Message(name, "FlagAnnounce", None, flag_strings[name]))
        verdict = check_flag_agreement(*(flag_strings[name] for name in PARTY_NAMES))
        if verdict != "ok":
            return aborted(verdict)
        common = flag_strings["alice"]
        stats["p_t0_estimate"] = common.count("0") / len(common)
        stats["p_t1_estimate"] = common.count("1") / len(common)

    test_rounds = [r for r in rounds if r.round_type == "test"]
    for i, name in enumerate(PARTY_NAMES):
        payload = [(r.index, r.inputs[i], r.outputs[i]) for r in test_rounds]
        messages.append(Message(name, "TestDataAnnounce", None, payload))
    estimate = estimate_behavior([(r.inputs, r.outputs) for r in test_rounds])
    if flagged:
        report = bell_value(estimate.behavior)
        observed = report.total
        stats["bell_stderr"] = bell_value_stderr(estimate)
        stats["bell_branches"] = {"ab_t0": report.chsh_ab_t0, "ac_t1": report.chsh_ac_t1}
    else:
        report = parallel_bell_value(estimate.behavior)
        observed = report.total
        stats["bell_branches"] = {"pair_ab": report.chsh_pair_ab, "pair_ac": report.chsh_pair_ac}
    threshold = config.bell_threshold
    if threshold is None:
        threshold = _default_threshold(transcript.strategy_kind, stats["n_test"])
    stats["bell_estimate"] = observed
    stats["bell_threshold"] = threshold
    stats["missing_test_inputs"] = [t for t in estimate.missing_inputs if all(v < 2 for v in t)]
    if observed < threshold:
        return aborted("BellBelowThreshold")

    rng = np.random.default_rng([config.seed, 1])  # derived post-round stream
    alignment = alignment_test(transcript, config.alignment_fraction, config.alignment_floor, rng)
    stats["alignment_match_rates"] = alignment.match_rates
    if not alignment.ok:
        return aborted("AlignmentFailure")

    sift = sift_pair_keys(transcript, alignment.excluded_ab, alignment.excluded_ac)
    stats["len_ab"] = len(sift.alice_ab)
    stats["len_ac"] = len(sift.alice_ac)
    stats["mismatch_ab"] = sift.mismatch_ab
    stats["mismatch_ac"] = sift.mismatch_ac
    stats["mismatch_rate_ab"] = sift.mismatch_ab / len(sift.alice_ab) if sift.alice_ab else None
    stats["mismatch_rate_ac"] = sift.mismatch_ac / len(sift.alice_ac) if sift.alice_ac else None
    if sift.alice_ab or sift.alice_ac:
        k_xor, k_cka = xor_reconcile(sift.alice_ab, sift.alice_ac)
    else:
        k_xor, k_cka = "", ""
    messages.append(Message("alice", "XorAnnounce", None, k_xor))
    m = len(k_cka)
    keys = {
        "alice": k_cka,
        "bob": sift.partner_ab[:m],
        "carole": _xor_strings(k_xor, sift.partner_ac[:m]),
    }
    stats["key_length"] = m
    stats["sifted_rate"] = m / stats["n_gen"] if stats["n_gen"] else None
    return ProtocolResult(outcome="completed", abort_reason=None, keys=keys, k_xor=k_xor, stats=stats)


def run_protocol(config: ProtocolConfig, strategy: Strategy | None = None) -> tuple[ProtocolResult, Transcript]:
    """Run all seven steps; returns the result and the full transcript."""
    transcript = run_rounds(config, strategy)
    return postprocess(transcript, config), transcript


def apply_tamper(transcript: Transcript, spec: str, rng) -> Transcript:
    """Transcript-level fault injection, applied before postprocessing.

    'flag-flip:RATE' flips Bob's flag bit in ceil(RATE * n) distinct
    random rounds; 'flag-constant:T' rewrites every party's flag to T.
    Only meaningful for flagged strategies.
    """
    if transcript.strategy_kind != "flagged":
        raise ValueError("tampering with flags requires a flagged strategy")
    kind, _, arg = spec.partition(":")
    rounds = list(transcript.rounds)
    if kind == "flag-flip":
        try:
            rate = float(arg)
        except ValueError:
            raise ValueError(f"bad tamper rate {arg!r}") from None
        if not 0.0 < rate <= 1.0:
            raise ValueError(f"tamper rate must be in (0, 1], got {rate}")
        n_flip = math.ceil(rate * len(rounds))
        for i in rng.choice(len(rounds), size=n_flip, replace=False):
            record = rounds[int(i)]
            (a, ta), (b, tb), (c, tc) = record.outputs
            rounds[int(i)] = replace(record, outputs=((a, ta), (b, 1 - tb), (c, tc)))
    elif kind == "flag-constant":
        t = int(arg) if arg else 0
        if t not in (0, 1):
            raise ValueError(f"tamper flag value must be 0 or 1, got {arg!r}")
        for i, record in enumerate(rounds):
            (a, _), (b, _), (c, _) = record.outputs
            rounds[i] = replace(record, outputs=((a, t), (b, t), (c, t)))
    else:
        raise ValueError(f"unknown tamper kind {kind!r}")
    return Transcript(
        strategy_kind=transcript.strategy_kind,
        n_rounds=transcript.n_rounds,
        rounds=rounds,
        messages=list(transcript.messages),
        events=list(transcript.events),
    )


_CONFIG_KEYS = {
    "n_rounds",
    "gamma",
    "threshold",
    "alignment_fraction",
    "alignment_floor",
    "seed",
    "strategy",
    "backend",
}


def config_to_json(config: ProtocolConfig) -> str:
    return json.dumps(
        {
            "n_rounds": config.n_rounds,
            "gamma": config.gamma,
            "threshold": config.bell_threshold,
            "alignment_fraction": config.alignment_fraction,
            "alignment_floor": config.alignment_floor,
            "seed": config.seed,
            "strategy": {"kind": config.strategy_kind, "visibility": config.visibility},
            "backend": config.backend,
        }
    )


def config_from_json(text: str) -> ProtocolConfig:
    doc = json.loads(text)
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    strategy = doc.get("strategy", {})
    if not isinstance(strategy, dict) or set(strategy) - {"kind", "visibility"}:
        raise ValueError("config 'strategy' must be an object with keys 'kind' and 'visibility'")
    kwargs = {}
    if "n_rounds" in doc:
        kwargs["n_rounds"] = int(doc["n_rounds"])
    if "gamma" in doc:
        kwargs["gamma"] = float(doc["gamma"])
    if "threshold" in doc and doc["threshold"] is not None:
        kwargs["bell_threshold"] = float(doc["threshold"])
    if "alignment_fraction" in doc:
        kwargs["alignment_fraction"] = float(doc["alignment_fraction"])
    if "alignment_floor" in doc:
        kwargs["alignment_floor"] = float(doc["alignment_floor"])
    if "seed" in doc:
        kwargs["seed"] = int(doc["seed"])
    if "kind" in strategy:
        kwargs["strategy_kind"] = str(strategy["kind"])
    if "visibility" in strategy:
        kwargs["visibility"] = float(strategy["visibility"])
    if "backend" in doc:
        kwargs["backend"] = str(doc["backend"])
    return ProtocolConfig(**kwargs)


def transcript_to_jsonl(transcript: Transcript) -> str:
    lines = []
    for r in transcript.rounds:
        lines.append(
            json.dumps(
                {
                    "index": r.index,
                    "type": r.round_type,
                    "inputs": list(r.inputs),
                    "outputs": [list(o) for o in r.outputs],
                }
            )
        )
    return "\n".join(lines) + "\n"


def result_to_json(result: ProtocolResult) -> str:
    def clean(v):
        if isinstance(v, dict):
            return {str(k): clean(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [clean(x) for x in v]
        if isinstance(v, (np.floating,)):
            return float(v)
        if isinstance(v, (np.integer,)):
            return int(v)
        if v is None or isinstance(v, (str, int, float, bool)):
            return v
        return repr(v)

    return json.dumps(
        {
            "outcome": result.outcome,
            "abort_reason": result.abort_reason,
            "keys": result.keys,
            "k_xor": result.k_xor,
            "stats": clean(result.stats),
        }
    )
