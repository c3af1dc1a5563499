"""Behaviors and Bell functionals for the flagged three-party scenario.

Alice chooses from two inputs, Bob and Carole from three; every party
outputs a pair of bits. A behavior is the full conditional table
p(outputs | inputs), stored dense with axes (x, y, z, a, ta, b, tb, c, tc).

The Bell functional is a sum of two flag-gated CHSH blocks: the
Alice-Bob block counts only events where all three announced flags read
0, the Alice-Carole block only events where all three read 1. Any
disagreeing-flag mass contributes nothing and so can only lower the
value. Each block is evaluated with the third party's input fixed at 0
(test rounds never use the generation input, and no-signalling makes
the choice immaterial for exact behaviors).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .qops import SQRT2
from .strategies import N_INPUTS, OUTCOME_LABELS, Strategy

__all__ = [
    "CHSH_QUANTUM_MAX",
    "GENERATION_INPUTS",
    "Scenario",
    "SCENARIO",
    "Behavior",
    "FlagStats",
    "BellReport",
    "ParallelBellReport",
    "BehaviorEstimate",
    "behavior_from_strategy",
    "deterministic_behavior",
    "flag_stats",
    "bell_value",
    "parallel_bell_value",
    "local_bound_bruteforce",
    "estimate_behavior",
    "bell_value_stderr",
    "behavior_to_json",
    "behavior_from_json",
]

CHSH_QUANTUM_MAX = 2.0 * SQRT2
GENERATION_INPUTS = (0, 2, 2)
TABLE_SHAPE = (2, 3, 3, 2, 2, 2, 2, 2, 2)

# Spectator input used when a CHSH block marginalizes the third party.
_SPECTATOR_INPUT = 0


@dataclass(frozen=True)
class Scenario:
    """Shape of the scenario; the constructor rejects anything else."""

    n_inputs: tuple[int, int, int] = N_INPUTS
    n_values: int = 2
    n_flags: int = 2

    def __post_init__(self):
        if self.n_inputs != (2, 3, 3) or self.n_values != 2 or self.n_flags != 2:
            raise ValueError("only the (2,3,3)-input, four-outcome scenario is supported")


SCENARIO = Scenario()


@dataclass(frozen=True, eq=False)
class Behavior:
    """Dense conditional probability table p(a,ta,b,tb,c,tc | x,y,z)."""

    table: np.ndarray

    def __post_init__(self):
        table = np.asarray(self.table, dtype=float)
        if table.shape != TABLE_SHAPE:
            raise ValueError(f"behavior table must have shape {TABLE_SHAPE}, got {table.shape}")
        object.__setattr__(self, "table", table)

    def normalization_deviation(self) -> float:
        sums = self.table.reshape(2, 3, 3, -1).sum(axis=-1)
        return float(np.abs(sums - 1.0).max())

    def no_signalling_deviation(self) -> float:
        """Largest drift of any single-party marginal across the others' inputs."""
        t = self.table
        dev = 0.0
        marg_a = t.sum(axis=(5, 6, 7, 8))          # x,y,z,a,ta
        dev = max(dev, float(np.ptp(marg_a, axis=(1, 2)).max()))
        marg_b = t.sum(axis=(3, 4, 7, 8))          # x,y,z,b,tb
        dev = max(dev, float(np.ptp(marg_b, axis=(0, 2)).max()))
        marg_c = t.sum(axis=(3, 4, 5, 6))          # x,y,z,c,tc
        dev = max(dev, float(np.ptp(marg_c, axis=(0, 1)).max()))
        return dev

    def validate(self, atol_norm: float = 1e-10, atol_ns: float = 1e-9, atol_range: float = 1e-12) -> "Behavior":
        lo, hi = float(self.table.min()), float(self.table.max())
        if lo < -atol_range or hi > 1.0 + atol_range:
            raise ValueError(f"behavior entries outside [0, 1]: min {lo}, max {hi}")
        dn = self.normalization_deviation()
        if dn > atol_norm:
            raise ValueError(f"behavior not normalized (max deviation {dn:.3e})")
        ds = self.no_signalling_deviation()
        if ds > atol_ns:
            raise ValueError(f"behavior signals (max marginal drift {ds:.3e})")
        return self


@dataclass(frozen=True)
class FlagStats:
    """Flag branch weights and the probability all three flags agree."""

    p0: float
    p1: float
    agreement_prob: float

    def __post_init__(self):
        if self.p0 + self.p1 > 1.0 + 1e-10:
            raise ValueError(f"branch weights sum to {self.p0 + self.p1} > 1")


@dataclass(frozen=True)
class BellReport:
    """Flag-gated CHSH blocks, raw and normalized by branch weight.

    Normalized entries are None when the corresponding branch weight
    vanishes (the block is then undefined, not zero).
    """

    chsh_ab_t0: float
    chsh_ac_t1: float
    normalized_ab: float | None
    normalized_ac: float | None
    total: float


@dataclass(frozen=True)
class ParallelBellReport:
    """Marginal CHSH per pair for the two-pair strategy (no flags)."""

    chsh_pair_ab: float
    chsh_pair_ac: float
    total: float


def behavior_from_strategy(strategy: Strategy) -> Behavior:
    """Born-rule behavior of a strategy, validated."""
    da, db, dc = strategy.party_dims
    rho = strategy.state.reshape(da, db, dc, da, db, dc)
    stacks = []
    for party, d in enumerate(strategy.party_dims):
        per_input = []
        for x in range(N_INPUTS[party]):
            fam = strategy.measurements[party][x]
            per_input.append(np.stack([fam[label] for label in OUTCOME_LABELS]))
        stacks.append(per_input)
    table = np.empty(TABLE_SHAPE, dtype=float)
    flat = table.reshape(2, 3, 3, 4, 4, 4)
    for x in range(2):
        for y in range(3):
            for z in range(3):
                # p(alpha,beta,gamma) = Tr[rho (A (x) B (x) C)]
                p = np.einsum(
                    "abcdef,ida,jeb,kfc->ijk",
                    rho,
                    stacks[0][x],
                    stacks[1][y],
                    stacks[2][z],
                    optimize=True,
                )
                flat[x, y, z] = p.real
    return Behavior(table).validate()


def deterministic_behavior(alice: dict, bob: dict, carole: dict) -> Behavior:
    """Indicator behavior for deterministic outcome maps input -> (bit, bit)."""
    table = np.zeros(TABLE_SHAPE)
    for x in range(2):
        for y in range(3):
            for z in range(3):
                a, ta = alice[x]
                b, tb = bob[y]
                c, tc = carole[z]
                table[x, y, z, a, ta, b, tb, c, tc] = 1.0
    return Behavior(table)


def _all_flags_mass(table: np.ndarray, x: int, y: int, z: int, t: int) -> float:
    return float(table[x, y, z, :, t, :, t, :, t].sum())


def flag_stats(behavior: Behavior, atol: float = 1e-9) -> FlagStats:
    """Branch weights read at inputs (0,0,0) after an input-independence check.

    Raises when the all-flags-agree mass or any single-party flag
    marginal drifts with the inputs beyond `atol`: flags that signal
    have no well-defined branch weights.
    """
    t = behavior.table
    agree = np.empty((2, 3, 3, 2))
    for ft in (0, 1):
        agree[..., ft] = t[:, :, :, :, ft, :, ft, :, ft].sum(axis=(3, 4, 5))
    agreement = agree.sum(axis=-1)
    if float(np.ptp(agreement)) > atol:
        raise ValueError(f"flag agreement probability varies with inputs by {np.ptp(agreement):.3e}")
    flag_a = t.sum(axis=(3, 5, 6, 7, 8))  # x,y,z,ta
    flag_b = t.sum(axis=(3, 4, 5, 7, 8))
    flag_c = t.sum(axis=(3, 4, 5, 6, 7))
    for name, marg in (("Alice", flag_a), ("Bob", flag_b), ("Carole", flag_c)):
        if float(np.ptp(marg, axis=(0, 1, 2)).max()) > atol:
            raise ValueError(f"{name} flag marginal depends on the inputs beyond {atol}")
    return FlagStats(
        p0=float(agree[0, 0, 0, 0]),
        p1=float(agree[0, 0, 0, 1]),
        agreement_prob=float(agreement[0, 0, 0]),
    )


def _chsh_block(table: np.ndarray, pair: str, t: int) -> float:
    """Signed, flag-gated CHSH sum for one pair, third party marginalized."""
    total = 0.0
    for x in (0, 1):
        for w in (0, 1):
            if pair == "ab":
                cell = table[x, w, _SPECTATOR_INPUT, :, t, :, t, :, t]
                joint = cell.sum(axis=2)  # sum Carole's value -> p(a, b)
            else:
                cell = table[x, _SPECTATOR_INPUT, w, :, t, :, t, :, t]
                joint = cell.sum(axis=1)  # sum Bob's value -> p(a, c)
            sign = np.array([[1.0, -1.0], [-1.0, 1.0]])
            total += ((-1.0) ** (x * w)) * float((sign * joint).sum())
    return total


def bell_value(behavior: Behavior) -> BellReport:
    """Evaluate both flag-gated CHSH blocks of the Bell functional.

    Branch weights for normalization are read at inputs (0,0,0); a
    vanishing weight leaves that normalized entry undefined (None).
    """
    t = behavior.table
    ab = _chsh_block(t, "ab", 0)
    ac = _chsh_block(t, "ac", 1)
    p0 = _all_flags_mass(t, 0, 0, 0, 0)
    p1 = _all_flags_mass(t, 0, 0, 0, 1)
    return BellReport(
        chsh_ab_t0=ab,
        chsh_ac_t1=ac,
        normalized_ab=ab / p0 if p0 > 0.0 else None,
        normalized_ac=ac / p1 if p1 > 0.0 else None,
        total=ab + ac,
    )


def parallel_bell_value(behavior: Behavior) -> ParallelBellReport:
    """Sum of the two marginal CHSH values for the two-pair strategy.

    Outcome labels are read as (first-pair bit, second-pair bit): the
    Alice-Bob CHSH uses each party's first bit, the Alice-Carole CHSH
    the second bits. No flag gating is involved.
    """
    t = behavior.table
    ab = 0.0
    ac = 0.0
    for x in (0, 1):
        for w in (0, 1):
            pab = t[x, w, _SPECTATOR_INPUT].sum(axis=(1, 3, 4, 5))  # -> p(a1, b1)
            pac = t[x, _SPECTATOR_INPUT, w].sum(axis=(0, 2, 3, 4))  # -> p(a2, c2)
            sign = np.array([[1.0, -1.0], [-1.0, 1.0]])
            ab += ((-1.0) ** (x * w)) * float((sign * pab).sum())
            ac += ((-1.0) ** (x * w)) * float((sign * pac).sum())
    return ParallelBellReport(chsh_pair_ab=ab, chsh_pair_ac=ac, total=ab + ac)


def local_bound_bruteforce() -> tuple[float, dict]:
    """Exact local (classical) maximum of the Bell functional.

    Enumerates all 16 * 64 * 64 deterministic assignments of a four-way
    outcome to every input of every party and evaluates the functional
    directly. Returns the maximum and the first maximizer in
    lexicographic (Alice, Bob, Carole) enumeration order.
    """
    # Encode outcome index o = 2*value + flag; party strategies are rows of
    # per-input outcome indices.
    alice = np.array([[o0, o1] for o0 in range(4) for o1 in range(4)])          # (16, 2)
    partner = np.array(
        [[o0, o1, o2] for o0 in range(4) for o1 in range(4) for o2 in range(4)]
    )                                                                            # (64, 3)
    a_val, a_flag = alice >> 1, alice & 1
    p_val, p_flag = partner >> 1, partner & 1

    def block(flag_t: int):
        # CHSH sum between Alice and a partner, all flags gated to flag_t;
        # shape (16, 64), before gating on the spectator's flag.
        out = np.zeros((alice.shape[0], partner.shape[0]))
        for x in (0, 1):
            for w in (0, 1):
                signs = ((-1.0) ** (a_val[:, x][:, None] + p_val[:, w][None, :] + x * w))
                gate = (a_flag[:, x][:, None] == flag_t) & (p_flag[:, w][None, :] == flag_t)
                out += signs * gate
        return out

    ab = block(0)                       # (16, 64) Alice x Bob
    ac = block(1)                       # (16, 64) Alice x Carole
    carole_gate = (p_flag[:, _SPECTATOR_INPUT] == 0).astype(float)   # (64,)
    bob_gate = (p_flag[:, _SPECTATOR_INPUT] == 1).astype(float)
    values = ab[:, :, None] * carole_gate[None, None, :] + ac[:, None, :] * bob_gate[None, :, None]
    flat = int(values.argmax())
    ia, ib, ic = np.unravel_index(flat, values.shape)
    best = float(values[ia, ib, ic])
    maximizer = {
        "alice": {x: (int(a_val[ia, x]), int(a_flag[ia, x])) for x in range(2)},
        "bob": {y: (int(p_val[ib, y]), int(p_flag[ib, y])) for y in range(3)},
        "carole": {z: (int(p_val[ic, z]), int(p_flag[ic, z])) for z in range(3)},
    }
    return best, maximizer


@dataclass(frozen=True, eq=False)
class BehaviorEstimate:
    """Plug-in estimate from counts; zero-count input triples are flagged."""

    behavior: Behavior
    counts: np.ndarray                      # same 9-axis shape, integer counts
    missing_inputs: tuple[tuple[int, int, int], ...]

    def triple_totals(self) -> np.ndarray:
        return self.counts.reshape(2, 3, 3, -1).sum(axis=-1)


def estimate_behavior(records) -> BehaviorEstimate:
    """Empirical conditional frequencies from per-round (inputs, outputs).

    Accepts an iterable of ((x, y, z), ((a, ta), (b, tb), (c, tc)))
    pairs, or an (N, 9) integer array with the same columns. Cells of
    input triples that never occur are left at zero and the triple is
    reported in missing_inputs.
    """
    if isinstance(records, np.ndarray):
        rows = records.astype(np.int64, copy=False)
        if rows.ndim != 2 or rows.shape[1] != 9:
            raise ValueError(f"record array must have shape (N, 9), got {rows.shape}")
    else:
        rows = np.array(
            [
                (x, y, z, out[0][0], out[0][1], out[1][0], out[1][1], out[2][0], out[2][1])
                for (x, y, z), out in records
            ],
            dtype=np.int64,
        ).reshape(-1, 9)
    counts = np.zeros(TABLE_SHAPE, dtype=np.int64)
    if rows.shape[0]:
        idx = np.ravel_multi_index(tuple(rows.T), TABLE_SHAPE)
        counts = np.bincount(idx, minlength=counts.size).reshape(TABLE_SHAPE)
    totals = counts.reshape(2, 3, 3, -1).sum(axis=-1)
    table = np.zeros(TABLE_SHAPE)
    nz = totals > 0
    table[nz] = counts[nz] / totals[nz].reshape(-1, 1, 1, 1, 1, 1, 1)
    missing = tuple(
        (int(x), int(y), int(z)) for x, y, z in np.argwhere(~nz)
    )
    return BehaviorEstimate(behavior=Behavior(table), counts=counts, missing_inputs=missing)


def _bell_coefficients() -> np.ndarray:
    """Coefficient tensor c with bell = sum c * p over conditional cells."""
    coeff = np.zeros(TABLE_SHAPE)
    for x in (0, 1):
        for w in (0, 1):
            for a in (0, 1):
                for b in (0, 1):
                    s = (-1.0) ** (a + b + x * w)
                    coeff[x, w, _SPECTATOR_INPUT, a, 0, b, 0, :, 0] += s
                    coeff[x, _SPECTATOR_INPUT, w, a, 1, :, 1, b, 1] += s
    return coeff


def bell_value_stderr(estimate: BehaviorEstimate) -> float:
    """Multinomial delta-method standard error of the estimated Bell value.

    The Bell value is linear in the per-triple conditionals, so its
    variance is the sum over input triples of
    (sum c^2 p - (sum c p)^2) / N. Returns inf if a triple the
    functional depends on was never sampled.
    """
    coeff = _bell_coefficients()
    table = estimate.behavior.table
    totals = estimate.triple_totals()
    var = 0.0
    for x in range(2):
        for y in range(3):
            for z in range(3):
                c = coeff[x, y, z]
                if not c.any():
                    continue
                if totals[x, y, z] == 0:
                    return math.inf
                p = table[x, y, z]
                mean = float((c * p).sum())
                second = float((c * c * p).sum())
                var += max(second - mean * mean, 0.0) / totals[x, y, z]
    return math.sqrt(var)


def behavior_to_json(behavior: Behavior) -> str:
    doc = {}
    t = behavior.table
    for x in range(2):
        for y in range(3):
            for z in range(3):
                cell = {}
                for a in (0, 1):
                    for ta in (0, 1):
                        for b in (0, 1):
                            for tb in (0, 1):
                                for c in (0, 1):
                                    for tc in (0, 1):
                                        key = f"{a} {ta} {b} {tb} {c} {tc}"
                                        cell[key] = float(t[x, y, z, a, ta, b, tb, c, tc])
                doc[f"{x},{y},{z}"] = cell
    return json.dumps(doc)


def behavior_from_json(text: str) -> Behavior:
    doc = json.loads(text)
    table = np.zeros(TABLE_SHAPE)
    for triple, cell in doc.items():
        x, y, z = (int(v) for v in triple.split(","))
        for key, p in cell.items():
            a, ta, b, tb, c, tc = (int(v) for v in key.split())
            table[x, y, z, a, ta, b, tb, c, tc] = float(p)
    return Behavior(table)
