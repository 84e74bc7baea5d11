"""Replication accuracy scoring and run-to-run comparison reports.

The accuracy of a replication is scored per metric from four numbers: the
original team's values under two treatments and the replicating team's
values under the same two treatments. Each team is reduced to its within-
team min/max ratio, so the score only measures whether the *relative* effect
survived, not whether absolute magnitudes did:

    accuracy = 1 - | min(x1A, x2A)/max(x1A, x2A) - min(x1R, x2R)/max(x1R, x2R) |

A score of 1.0 means the treatment ratio was preserved exactly. Alongside
the score, each metric gets an ordering-consistency verdict: did both teams
see the treatment difference point the same way.
"""

from __future__ import annotations

import json
import math
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

__all__ = [
    "MetricQuad",
    "SummaryStat",
    "MetricComparison",
    "ReplicabilityReport",
    "PairSpec",
    "MetricsError",
    "rep_accuracy",
    "ordering_consistent",
    "mean_ci95",
    "student_t_quantile",
    "compare_runs",
]


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class MetricQuad:
    """One metric's values: (treatment1, treatment2) for team A and team R."""

    x1a: float
    x2a: float
    x1r: float
    x2r: float

    def __post_init__(self):
        for v in (self.x1a, self.x2a, self.x1r, self.x2r):
            if not v > 0:
                raise MetricsError(f"metric values must be strictly positive, got {v}")


def rep_accuracy(quad: MetricQuad) -> float:
    """Replication accuracy in [0, 1]; 1.0 preserves the treatment ratio exactly."""
    ratio_a = min(quad.x1a, quad.x2a) / max(quad.x1a, quad.x2a)
    ratio_r = min(quad.x1r, quad.x2r) / max(quad.x1r, quad.x2r)
    return 1.0 - abs(ratio_a - ratio_r)


def _sign(a: float, b: float) -> int:
    return (a > b) - (a < b)


def ordering_consistent(quad: MetricQuad) -> bool:
    """Whether both teams saw the treatment difference point the same way.

    Ties count as consistent only when both sides are tied.
    """
    return _sign(quad.x1a, quad.x2a) == _sign(quad.x1r, quad.x2r)


# ---------------------------------------------------------------------------
# Student-t confidence intervals
# ---------------------------------------------------------------------------


def _betacf(a: float, b: float, x: float) -> float:
    # Modified Lentz continued fraction for the regularized incomplete beta.
    max_iter = 300
    eps = 3e-16
    fpmin = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
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
    raise MetricsError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def _betai(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        a * math.log(x)
        + b * math.log1p(-x)
        - (math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b))
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def _t_cdf(t: float, df: float) -> float:
    if t == 0.0:
        return 0.5
    tail = 0.5 * _betai(df / 2.0, 0.5, df / (df + t * t))
    return 1.0 - tail if t > 0 else tail


def student_t_quantile(p: float, df: int) -> float:
    """Quantile of Student's t with ``df`` degrees of freedom, via bisection
    on the incomplete-beta CDF. Accurate to roughly machine precision."""
    if not 0.0 < p < 1.0:
        raise MetricsError(f"quantile probability must be in (0, 1), got {p}")
    if df < 1:
        raise MetricsError(f"degrees of freedom must be >= 1, got {df}")
    if p == 0.5:
        return 0.0
    if p < 0.5:
        return -student_t_quantile(1.0 - p, df)
    lo, hi = 0.0, 1.0
    while _t_cdf(hi, df) < p:
        hi *= 2.0
        if hi > 1e300:
            raise MetricsError(f"quantile out of range for p={p}, df={df}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if _t_cdf(mid, df) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class SummaryStat:
    mean: float
    ci95_half_width: float
    n: int


def mean_ci95(samples: list[float], confidence: float = 0.95) -> SummaryStat:
    """Sample mean with a two-sided Student-t confidence interval.

    Requires n >= 2; the interval is undefined for a single observation.
    """
    n = len(samples)
    if n < 2:
        raise MetricsError(f"confidence interval needs at least 2 samples, got {n}")
    if not 0.0 < confidence < 1.0:
        raise MetricsError(f"confidence must be in (0, 1), got {confidence}")
    mean = statistics.fmean(samples)
    s = statistics.stdev(samples)
    t = student_t_quantile((1.0 + confidence) / 2.0, n - 1)
    return SummaryStat(mean=mean, ci95_half_width=t * s / math.sqrt(n), n=n)


# ---------------------------------------------------------------------------
# run-to-run comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PairSpec:
    """Where a report row's four numbers come from: one source metric and the
    labels of the treatment-1 and treatment-2 runs inside each campaign."""

    metric: str
    treatment1: str
    treatment2: str


@dataclass(frozen=True)
class MetricComparison:
    quad: MetricQuad
    accuracy: float
    ordering_consistent: bool
    unit: str = ""


@dataclass(frozen=True)
class ReplicabilityReport:
    per_metric: Mapping[str, MetricComparison]
    overall_min_accuracy: float

    def render(self) -> str:
        width = max((len(name) for name in self.per_metric), default=6)
        lines = [f"{'metric'.ljust(width)}  accuracy  ordering"]
        for name, cmp in self.per_metric.items():
            verdict = "consistent" if cmp.ordering_consistent else "INCONSISTENT"
            lines.append(f"{name.ljust(width)}  {cmp.accuracy:8.3f}  {verdict}")
        lines.append(f"{'minimum'.ljust(width)}  {self.overall_min_accuracy:8.3f}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "per_metric": {
                name: {
                    "quad": [cmp.quad.x1a, cmp.quad.x2a, cmp.quad.x1r, cmp.quad.x2r],
                    "accuracy": cmp.accuracy,
                    "ordering_consistent": cmp.ordering_consistent,
                    "unit": cmp.unit,
                }
                for name, cmp in self.per_metric.items()
            },
            "overall_min_accuracy": self.overall_min_accuracy,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _metric_mean(run_dir: Path, metric: str) -> tuple[float, str]:
    from .engine import load_samples  # local import: engine depends on nothing here

    values = []
    unit = ""
    for sample in load_samples(run_dir):
        if sample.metric == metric:
            values.append(sample.value)
            unit = sample.unit
    if not values:
        raise MetricsError(f"run {run_dir} has no samples for metric {metric!r}")
    return statistics.fmean(values), unit


def _resolve_run(campaign_dir: Path, label: str) -> Path:
    from .engine import load_run_meta

    matches = []
    for child in sorted(campaign_dir.iterdir()):
        if not (child / "run.json").is_file():
            continue
        meta = load_run_meta(child)
        if meta.get("label") == label or child.name == label:
            matches.append(child)
    if not matches:
        raise MetricsError(f"no run labeled {label!r} under {campaign_dir}")
    if len(matches) > 1:
        raise MetricsError(f"label {label!r} is ambiguous under {campaign_dir}")
    return matches[0]


def compare_runs(
    campaign_a: Path | str,
    campaign_b: Path | str,
    pairing: Mapping[str, PairSpec],
) -> ReplicabilityReport:
    """Score campaign B as a replication of campaign A.

    Each campaign directory holds one results archive per run. For every
    report row the pairing names the source metric and the two treatment run
    labels; the row's quad is built from the four per-treatment means.
    """
    campaign_a = Path(campaign_a)
    campaign_b = Path(campaign_b)
    per_metric: dict[str, MetricComparison] = {}
    for row, spec in pairing.items():
        x1a, unit_a1 = _metric_mean(_resolve_run(campaign_a, spec.treatment1), spec.metric)
        x2a, unit_a2 = _metric_mean(_resolve_run(campaign_a, spec.treatment2), spec.metric)
        x1r, unit_r1 = _metric_mean(_resolve_run(campaign_b, spec.treatment1), spec.metric)
        x2r, unit_r2 = _metric_mean(_resolve_run(campaign_b, spec.treatment2), spec.metric)
        units = {unit_a1, unit_a2, unit_r1, unit_r2}
        if len(units) != 1:
            raise MetricsError(f"metric {spec.metric!r}: mismatched units {sorted(units)}")
        quad = MetricQuad(x1a, x2a, x1r, x2r)
        per_metric[row] = MetricComparison(
            quad=quad,
            accuracy=rep_accuracy(quad),
            ordering_consistent=ordering_consistent(quad),
            unit=units.pop(),
        )
    if not per_metric:
        raise MetricsError("pairing is empty, nothing to compare")
    overall = min(cmp.accuracy for cmp in per_metric.values())
    return ReplicabilityReport(per_metric=per_metric, overall_min_accuracy=overall)
