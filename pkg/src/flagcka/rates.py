"""Asymptotic key-rate bounds from Bell-value statistics.

Eavesdropper entropies are bounded through the standard single-CHSH
trade-off curves, one per flag branch, after converting the observed
Bell data into a per-branch CHSH score:

  two_scores  each branch is certified by its own flag-gated block,
              normalized by the branch weight: s_t = <block_t>/p_T(t).
  one_score   only the total Bell value s is certified. The adversary
              may split it adversarially between branches, but the
              other branch's block can never exceed its own weighted
              Tsirelson cap 2*sqrt(2)*p_T(1-t), so branch t is floored
              at s_t >= (s - 2*sqrt(2)*p_T(1-t)) / p_T(t), clamped to
              the classical value 2 from below.

The per-branch rate is the certified entropy minus the error-correction
cost of the generation data; the conference rate is the worse of the
two branches weighted by how often each branch occurs.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .bell import CHSH_QUANTUM_MAX, GENERATION_INPUTS, Behavior, BellReport, bell_value, flag_stats

__all__ = [
    "BOUND_METHODS",
    "SCORE_MODES",
    "BoundMethod",
    "RateReport",
    "binary_entropy",
    "conditional_entropy_classical",
    "chsh_min_entropy_bound",
    "chsh_von_neumann_bound",
    "branch_scores",
    "rate_report",
    "robustness_curve",
    "curve_to_csv",
    "no_flag_reference_rate",
]

BOUND_METHODS = ("min_entropy_analytic", "von_neumann_analytic")
SCORE_MODES = ("one_score", "two_scores")


@dataclass(frozen=True)
class BoundMethod:
    """Selector for the entropy bound and the branch-score mode."""

    selector: str = "von_neumann_analytic"
    score_mode: str = "two_scores"

    def __post_init__(self):
        if self.selector not in BOUND_METHODS:
            raise ValueError(f"selector must be one of {BOUND_METHODS}, got {self.selector!r}")
        if self.score_mode not in SCORE_MODES:
            raise ValueError(f"score_mode must be one of {SCORE_MODES}, got {self.score_mode!r}")

    def bound(self, score: float) -> float:
        if self.selector == "min_entropy_analytic":
            return chsh_min_entropy_bound(score)
        return chsh_von_neumann_bound(score)


def binary_entropy(p: float) -> float:
    """h2(p) in bits; h2(0) = h2(1) = 0."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability must be in [0, 1], got {p}")
    if p == 0.0 or p == 1.0:
        return 0.0
    return float(-p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p))


def _normalize_score(s: float) -> float:
    if s > CHSH_QUANTUM_MAX + 1e-9:
        raise ValueError(f"CHSH score {s} exceeds the quantum maximum {CHSH_QUANTUM_MAX}")
    return min(max(s, 2.0), CHSH_QUANTUM_MAX)


def chsh_min_entropy_bound(score: float) -> float:
    """Certified min-entropy of the key bit: 1 - log2(1 + sqrt(2 - s^2/4)).

    Valid for CHSH scores s in [2, 2*sqrt(2)]; scores below 2 certify
    nothing and clamp to 2 (bound 0). Scores above the quantum maximum
    raise.
    """
    s = _normalize_score(score)
    return 1.0 - math.log2(1.0 + math.sqrt(max(2.0 - s * s / 4.0, 0.0)))


def chsh_von_neumann_bound(score: float) -> float:
    """Certified von Neumann entropy: 1 - h2(1/2 + sqrt(s^2/4 - 1)/2).

    Same domain handling as the min-entropy bound; pointwise at least as
    large, with the same endpoints 0 at s = 2 and 1 at s = 2*sqrt(2).
    """
    s = _normalize_score(score)
    return 1.0 - binary_entropy(0.5 + math.sqrt(max(s * s / 4.0 - 1.0, 0.0)) / 2.0)


def conditional_entropy_classical(behavior: Behavior, t: int) -> float:
    """H(value_A | value_partner) in branch t at the generation inputs.

    The partner is Bob for t = 0 and Carole for t = 1. The joint
    distribution is read from the generation input triple, gated on all
    flags agreeing at t, and normalized by the branch weight; a
    vanishing weight raises.
    """
    if t not in (0, 1):
        raise ValueError(f"branch must be 0 or 1, got {t}")
    x, y, z = GENERATION_INPUTS
    cell = behavior.table[x, y, z, :, t, :, t, :, t]  # axes (a, b, c)
    joint = cell.sum(axis=2) if t == 0 else cell.sum(axis=1)
    weight = float(joint.sum())
    if weight <= 1e-12:
        raise ValueError(f"flag branch {t} has no weight at the generation inputs")
    joint = joint / weight

    def ent(p):
        p = p[p > 1e-15]
        return float(-(p * np.log2(p)).sum())

    return ent(joint.ravel()) - ent(joint.sum(axis=0))


def branch_scores(report: BellReport, p0: float, p1: float, mode: str) -> tuple[float, float]:
    """Per-branch normalized CHSH scores under the chosen certification mode.

    See the module docstring for the one_score floor derivation. Raises
    when a needed branch weight vanishes.
    """
    if mode not in SCORE_MODES:
        raise ValueError(f"mode must be one of {SCORE_MODES}, got {mode!r}")
    if p0 <= 0.0 or p1 <= 0.0:
        raise ValueError(f"branch weights must be positive, got ({p0}, {p1})")
    if mode == "two_scores":
        if report.normalized_ab is None or report.normalized_ac is None:
            raise ValueError("normalized branch values undefined; cannot use two_scores")
        return (_normalize_score(report.normalized_ab), _normalize_score(report.normalized_ac))
    s = report.total
    floor0 = (s - CHSH_QUANTUM_MAX * p1) / p0
    floor1 = (s - CHSH_QUANTUM_MAX * p0) / p1
    return (_normalize_score(floor0), _normalize_score(floor1))


@dataclass(frozen=True)
class RateReport:
    """Per-branch certified entropies, costs and rates, plus the conference rate.

    r0/r1 are clamped at zero; the raw differences are kept alongside.
    """

    method: str
    score_mode: str
    p0: float
    p1: float
    score0: float
    score1: float
    entropy_bound0: float
    entropy_bound1: float
    ec_cost0: float
    ec_cost1: float
    r0_raw: float
    r1_raw: float
    r0: float
    r1: float
    r_cka: float

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def rate_report(behavior: Behavior, method: BoundMethod = BoundMethod()) -> RateReport:
    """Asymptotic rate report for a behavior under the chosen bound."""
    report = bell_value(behavior)
    stats = flag_stats(behavior)
    if stats.p0 <= 0.0 or stats.p1 <= 0.0:
        raise ValueError(f"degenerate flag distribution: p_T = ({stats.p0}, {stats.p1})")
    s0, s1 = branch_scores(report, stats.p0, stats.p1, method.score_mode)
    h0, h1 = method.bound(s0), method.bound(s1)
    ec0 = conditional_entropy_classical(behavior, 0)
    ec1 = conditional_entropy_classical(behavior, 1)
    r0_raw, r1_raw = h0 - ec0, h1 - ec1
    r0, r1 = max(r0_raw, 0.0), max(r1_raw, 0.0)
    return RateReport(
        method=method.selector,
        score_mode=method.score_mode,
        p0=stats.p0,
        p1=stats.p1,
        score0=s0,
        score1=s1,
        entropy_bound0=h0,
        entropy_bound1=h1,
        ec_cost0=ec0,
        ec_cost1=ec1,
        r0_raw=r0_raw,
        r1_raw=r1_raw,
        r0=r0,
        r1=r1,
        r_cka=min(stats.p0 * r0, stats.p1 * r1),
    )


def robustness_curve(scores, method: BoundMethod = BoundMethod()) -> list[tuple[float, float]]:
    """Entropy bound as a function of the total Bell value, p_T = (1/2, 1/2).

    In two_scores mode each branch block scales with the total, so the
    normalized branch score equals the total Bell value itself. In
    one_score mode the branch floor (s - sqrt(2))/0.5 applies.
    """
    out = []
    for s in scores:
        s = float(s)
        if s < 2.0 - 1e-12 or s > CHSH_QUANTUM_MAX + 1e-9:
            raise ValueError(f"total Bell value {s} outside [2, 2*sqrt(2)]")
        if method.score_mode == "two_scores":
            eff = s
        else:
            eff = max(2.0, (s - CHSH_QUANTUM_MAX * 0.5) / 0.5)
        out.append((s, method.bound(eff)))
    return out


def curve_to_csv(points, method: BoundMethod) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["s", "entropy_bound", "method", "mode"])
    for s, h in points:
        writer.writerow([repr(float(s)), repr(float(h)), method.selector, method.score_mode])
    return buf.getvalue()


def no_flag_reference_rate() -> float:
    """Rate of the comparison variant that corrects instead of discarding.

    Without flag communication each pairwise key sees a 1/4 error rate
    from the rounds where that partner held the uncorrelated qubit, so
    the whole-string error-correction cost is h2(1/4) per round.
    """
    return 1.0 - binary_entropy(0.25)
