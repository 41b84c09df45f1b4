"""Summary statistics over trial records and the two-sample t test."""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import stats as sp_stats

from .errors import DegenerateSample, EmptyDataset
from .trajectories import TrajectoryRecord


@dataclass(frozen=True)
class TTestResult:
    t: float
    p: float
    df: float
    welch: bool


def two_sample_t_test(
    sample_a: Sequence[float], sample_b: Sequence[float], welch: bool = False
) -> TTestResult:
    """Two-sided two-sample t test, pooled variance by default.

    Raises DegenerateSample for samples below size 2 or zero pooled variance
    (e.g. two distinct constant samples), where the statistic is undefined.
    """
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    na, nb = len(a), len(b)
    if na < 2 or nb < 2:
        raise DegenerateSample("each sample needs at least 2 observations")
    va = float(np.var(a, ddof=1))
    vb = float(np.var(b, ddof=1))
    if welch:
        if va == 0.0 and vb == 0.0:
            raise DegenerateSample("zero variance in both samples")
        se2 = va / na + vb / nb
        t = (float(np.mean(a)) - float(np.mean(b))) / np.sqrt(se2)
        df = se2**2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    else:
        pooled = ((na - 1) * va + (nb - 1) * vb) / (na + nb - 2)
        if pooled == 0.0:
            raise DegenerateSample("zero pooled variance")
        t = (float(np.mean(a)) - float(np.mean(b))) / np.sqrt(pooled * (1 / na + 1 / nb))
        df = na + nb - 2
    p = 2.0 * float(sp_stats.t.sf(abs(t), df))
    return TTestResult(t=float(t), p=p, df=float(df), welch=welch)


_QUANTILE_KEYS = ("min", "q25", "median", "q75", "max")


def _quantiles(values: np.ndarray) -> dict[str, float]:
    qs = np.percentile(values, [0, 25, 50, 75, 100])
    return {k: float(v) for k, v in zip(_QUANTILE_KEYS, qs)}


def summarize(
    records: Iterable[TrajectoryRecord],
    condition: str | None = None,
    phase: str | None = None,
) -> dict:
    """Success rates, percentage-score quantiles, and per-trial means.

    Grouped by (condition, phase) after optional filtering; raises
    EmptyDataset when nothing matches.
    """
    recs = [
        r
        for r in records
        if (condition is None or r.condition == condition)
        and (phase is None or r.phase == phase)
    ]
    if not recs:
        raise EmptyDataset("no records match the selector")

    groups: dict[tuple[str, str], list[TrajectoryRecord]] = {}
    for r in recs:
        groups.setdefault((r.condition, r.phase), []).append(r)

    out = []
    for (cond, ph) in sorted(groups):
        rs = groups[(cond, ph)]
        pcts = np.asarray([r.pct for r in rs], dtype=float)
        by_trial: dict[int, list[float]] = {}
        for r in rs:
            by_trial.setdefault(r.trial_index, []).append(r.pct)
        out.append(
            {
                "condition": cond,
                "phase": ph,
                "count": len(rs),
                "success_rate": float(np.mean([r.solved for r in rs])),
                "pct_quantiles": _quantiles(pcts),
                "per_trial_mean_pct": {
                    str(t): float(np.mean(v)) for t, v in sorted(by_trial.items())
                },
            }
        )
    return {"groups": out}


def summary_csv(bundle: dict) -> str:
    buf = io.StringIO()
    buf.write("condition,phase,count,success_rate,min,q25,median,q75,max\n")
    for g in bundle["groups"]:
        q = g["pct_quantiles"]
        buf.write(
            f"{g['condition']},{g['phase']},{g['count']},{g['success_rate']!r},"
            f"{q['min']!r},{q['q25']!r},{q['median']!r},{q['q75']!r},{q['max']!r}\n"
        )
    return buf.getvalue()


def per_trial_csv(bundle: dict) -> str:
    buf = io.StringIO()
    buf.write("condition,phase,trial_index,mean_pct\n")
    for g in bundle["groups"]:
        for trial, mean in g["per_trial_mean_pct"].items():
            buf.write(f"{g['condition']},{g['phase']},{trial},{mean!r}\n")
    return buf.getvalue()


def summary_json(bundle: dict) -> str:
    return json.dumps(bundle, sort_keys=True, indent=2)
