"""Record-level detection metrics (AUROC, TPR at fixed FPR) and dataset-level
inference: a one-sided Welch t-test on member vs non-member score groups,
repeated over sampled groups of growing size to find how few records suffice
for significance.

The t-distribution survival function is computed from the regularized
incomplete beta function (continued-fraction evaluation), keeping this module
dependency-free so the test suite can check it against an independent
statistics implementation.
"""

from __future__ import annotations

import csv
import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .corpus import Label
from .mia import ScoredDocument, read_scores_csv


class DetectionError(ValueError):
    pass


@dataclass
class DetectionReport:
    method: str
    auroc: float
    tpr_at_fpr: dict[float, float]
    n_member: int
    n_nonmember: int


@dataclass(frozen=True)
class SweepResult:
    group_size: int
    mean_p_value: float
    repetitions: int
    seed: int


def _win_tie_counts(
    member_scores: Sequence[float], nonmember_scores: Sequence[float]
) -> tuple[int, int]:
    non_sorted = sorted(nonmember_scores)
    wins = 0
    ties = 0
    for s in member_scores:
        lo = bisect_left(non_sorted, s)
        hi = bisect_right(non_sorted, s)
        wins += lo
        ties += hi - lo
    return wins, ties


def auroc_exact(
    member_scores: Sequence[float], nonmember_scores: Sequence[float]
) -> Fraction:
    """AUROC as an exact rational: (wins + ties/2) / (n_m * n_n)."""
    if not member_scores or not nonmember_scores:
        raise DetectionError("both score groups must be non-empty")
    wins, ties = _win_tie_counts(member_scores, nonmember_scores)
    return Fraction(2 * wins + ties, 2 * len(member_scores) * len(nonmember_scores))


def auroc(member_scores: Sequence[float], nonmember_scores: Sequence[float]) -> float:
    """Probability a random member outscores a random non-member, ties 0.5."""
    return float(auroc_exact(member_scores, nonmember_scores))


def tpr_at_fpr(
    member_scores: Sequence[float],
    nonmember_scores: Sequence[float],
    fpr_level: float,
) -> float:
    """TPR at the smallest threshold whose empirical FPR is <= ``fpr_level``.

    Classification is score >= threshold; candidate thresholds are the
    observed scores, without interpolation. When even the strictest observed
    threshold exceeds the FPR budget the TPR is 0.
    """
    if not member_scores or not nonmember_scores:
        raise DetectionError("both score groups must be non-empty")
    if not (0.0 <= fpr_level < 1.0):
        raise DetectionError(f"fpr level {fpr_level} outside [0, 1)")
    n_m = len(member_scores)
    n_n = len(nonmember_scores)
    mem_sorted = sorted(member_scores)
    non_sorted = sorted(nonmember_scores)
    for threshold in sorted(set(mem_sorted) | set(non_sorted)):
        fp = n_n - bisect_left(non_sorted, threshold)
        if fp / n_n <= fpr_level:
            tp = n_m - bisect_left(mem_sorted, threshold)
            return tp / n_m
    return 0.0


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    max_iter = 300
    eps = 3e-16
    fpmin = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < fpmin:
        d = fpmin
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    return h


def _betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_bt = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    bt = math.exp(ln_bt)
    if x < (a + 1.0) / (a + b + 2.0):
        return bt * _betacf(a, b, x) / a
    return 1.0 - bt * _betacf(b, a, 1.0 - x) / b


def _t_sf(t: float, dof: float) -> float:
    """P(T > t) for Student's t with ``dof`` degrees of freedom."""
    if dof <= 0:
        raise DetectionError(f"degrees of freedom must be positive, got {dof}")
    if t == 0.0:
        return 0.5
    x = dof / (dof + t * t)
    tail = 0.5 * _betainc(dof / 2.0, 0.5, x)
    return tail if t > 0 else 1.0 - tail


def welch_t_test(
    member_scores: Sequence[float], nonmember_scores: Sequence[float]
) -> tuple[float, float, float]:
    """One-sided Welch test of mean(member) > mean(nonmember).

    Returns (t, Welch-Satterthwaite dof, one-sided p). Each group needs at
    least two values and nonzero variance.
    """
    t_stat, dof = _welch_statistic(member_scores, nonmember_scores)
    return t_stat, dof, _t_sf(t_stat, dof)


def _welch_statistic(
    member_scores: Sequence[float], nonmember_scores: Sequence[float]
) -> tuple[float, float]:
    for name, group in (("member", member_scores), ("nonmember", nonmember_scores)):
        if len(group) < 2:
            raise DetectionError(f"{name} group needs at least 2 values")
    m = np.asarray(member_scores, dtype=float)
    n = np.asarray(nonmember_scores, dtype=float)
    vm = float(m.var(ddof=1))
    vn = float(n.var(ddof=1))
    for name, v in (("member", vm), ("nonmember", vn)):
        if v == 0.0:
            raise DetectionError(f"{name} group has zero variance")
    sm = vm / len(m)
    sn = vn / len(n)
    se2 = sm + sn
    t_stat = (float(m.mean()) - float(n.mean())) / math.sqrt(se2)
    dof = se2 * se2 / (sm * sm / (len(m) - 1) + sn * sn / (len(n) - 1))
    return t_stat, dof


def _welch_p_lenient(member: np.ndarray, nonmember: np.ndarray) -> float:
    """Welch p for sweep repetitions, with degenerate draws resolved by the
    limit behavior: both groups constant -> 0.5 on equal means, else 0 or 1."""
    vm = float(member.var(ddof=1))
    vn = float(nonmember.var(ddof=1))
    if vm == 0.0 and vn == 0.0:
        dm = float(member.mean()) - float(nonmember.mean())
        if dm > 0:
            return 0.0
        if dm < 0:
            return 1.0
        return 0.5
    sm = vm / len(member)
    sn = vn / len(nonmember)
    se2 = sm + sn
    t_stat = (float(member.mean()) - float(nonmember.mean())) / math.sqrt(se2)
    num = sm * sm / (len(member) - 1) + sn * sn / (len(nonmember) - 1)
    dof = se2 * se2 / num
    return _t_sf(t_stat, dof)


def dataset_inference_sweep(
    member_scores: Sequence[float],
    nonmember_scores: Sequence[float],
    sizes: Sequence[int],
    repetitions: int = 100,
    seed: int = 0,
) -> list[SweepResult]:
    """Mean one-sided Welch p over ``repetitions`` random groups per size.

    Groups are sampled without replacement from each pool. Each repetition's
    RNG stream derives from (seed, size, repetition index), so results do not
    depend on evaluation order.
    """
    if repetitions < 1:
        raise DetectionError("repetitions must be >= 1")
    member = np.asarray(member_scores, dtype=float)
    nonmember = np.asarray(nonmember_scores, dtype=float)
    results = []
    for size in sizes:
        if size < 2:
            raise DetectionError(f"group size {size} too small for a t-test")
        if size > len(member) or size > len(nonmember):
            raise DetectionError(
                f"group size {size} exceeds pool sizes "
                f"({len(member)} member / {len(nonmember)} nonmember)"
            )
        total = 0.0
        for rep in range(repetitions):
            rng = np.random.default_rng(
                np.random.SeedSequence(seed, spawn_key=(size, rep))
            )
            gm = rng.choice(member, size=size, replace=False)
            gn = rng.choice(nonmember, size=size, replace=False)
            total += _welch_p_lenient(gm, gn)
        results.append(
            SweepResult(
                group_size=size,
                mean_p_value=total / repetitions,
                repetitions=repetitions,
                seed=seed,
            )
        )
    return results


def report_from_scored(
    scored: Sequence[ScoredDocument],
    methods: Sequence[str],
    fpr_levels: Sequence[float] = (0.05,),
) -> list[DetectionReport]:
    members = [sd for sd in scored if sd.label is Label.MEMBER]
    nonmembers = [sd for sd in scored if sd.label is Label.NONMEMBER]
    if not members or not nonmembers:
        raise DetectionError(
            "need both member and nonmember labels "
            f"(got {len(members)} member / {len(nonmembers)} nonmember)"
        )
    reports = []
    for method in methods:
        try:
            ms = [sd.scores[method] for sd in members]
            ns = [sd.scores[method] for sd in nonmembers]
        except KeyError:
            raise DetectionError(f"score column {method!r} missing") from None
        reports.append(
            DetectionReport(
                method=method,
                auroc=auroc(ms, ns),
                tpr_at_fpr={lvl: tpr_at_fpr(ms, ns, lvl) for lvl in fpr_levels},
                n_member=len(ms),
                n_nonmember=len(ns),
            )
        )
    return reports


def report(
    scores_csv_path,
    methods: Sequence[str] | None = None,
    fpr_levels: Sequence[float] = (0.05,),
) -> list[DetectionReport]:
    """Per-method AUROC and TPR@FPR from a score CSV with both labels."""
    columns, scored = read_scores_csv(scores_csv_path)
    if methods is None:
        methods = columns
    return report_from_scored(scored, methods, fpr_levels)


def write_report_csv(reports: Sequence[DetectionReport], path) -> None:
    if not reports:
        raise DetectionError("no reports to write")
    levels = sorted(reports[0].tpr_at_fpr)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["method", "auroc", *[f"tpr_at_{lvl}" for lvl in levels],
             "n_member", "n_nonmember"]
        )
        for rep in reports:
            writer.writerow(
                [rep.method, repr(rep.auroc),
                 *[repr(rep.tpr_at_fpr[lvl]) for lvl in levels],
                 rep.n_member, rep.n_nonmember]
            )


def format_report_table(reports: Sequence[DetectionReport]) -> str:
    if not reports:
        return "(no reports)"
    levels = sorted(reports[0].tpr_at_fpr)
    header = ["method", "auroc", *[f"tpr@{lvl:g}" for lvl in levels], "n_m", "n_n"]
    rows = [header]
    for rep in reports:
        rows.append(
            [rep.method, f"{rep.auroc:.4f}",
             *[f"{rep.tpr_at_fpr[lvl]:.4f}" for lvl in levels],
             str(rep.n_member), str(rep.n_nonmember)]
        )
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)) for row in rows]
    return "\n".join(lines)


def write_sweep_csv(results: Sequence[SweepResult], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["group_size", "mean_p", "repetitions", "seed"])
        for res in results:
            writer.writerow(
                [res.group_size, repr(res.mean_p_value), res.repetitions, res.seed]
            )
