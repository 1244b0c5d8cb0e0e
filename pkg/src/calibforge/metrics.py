"""Reliability binning and calibration metrics for two-class predictions.

Confidence here means the maximum class probability a model assigns to its
prediction. The dataset is partitioned into M equal-width, right-closed
confidence bins ((m-1)/M, m/M]; per-bin accuracy and mean confidence feed
the expected and maximum calibration errors, and the negative log-likelihood
is computed directly from the predicted probability of the true label.

All arithmetic is plain Python floats accumulated in record order, so every
number in a report can be reproduced exactly by a straightforward loop over
the raw per-sample records.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_left
from dataclasses import dataclass

DEFAULT_BINS = 10

# Lower clamp applied to a probability before taking its log. Probabilities
# equal to 1 are left untouched so a perfect prediction scores exactly 0.
PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class PredictionRecord:
    """One scored sample: class probabilities plus the true label.

    ``confidence`` must equal ``max(prob_vector)`` and ``predicted_label``
    the argmax (ties break to the lower class index); ``from_probs`` builds
    a consistent record from the probability vector alone.
    """

    confidence: float
    predicted_label: int
    true_label: int
    prob_vector: tuple[float, float]

    @classmethod
    def from_probs(cls, prob_vector, true_label: int) -> "PredictionRecord":
        p0, p1 = float(prob_vector[0]), float(prob_vector[1])
        predicted = 0 if p0 >= p1 else 1
        return cls(
            confidence=max(p0, p1),
            predicted_label=predicted,
            true_label=int(true_label),
            prob_vector=(p0, p1),
        )

    def validate(self) -> None:
        p0, p1 = self.prob_vector
        if p0 < 0.0 or p1 < 0.0:
            raise ValueError("prob_vector entries must be nonnegative")
        if abs((p0 + p1) - 1.0) > 1e-9:
            raise ValueError("prob_vector must sum to 1 within 1e-9")
        if self.confidence != max(p0, p1):
            raise ValueError("confidence must equal max(prob_vector)")
        if self.predicted_label != (0 if p0 >= p1 else 1):
            raise ValueError("predicted_label must be the argmax class")
        if self.true_label not in (0, 1):
            raise ValueError("true_label must be 0 or 1")


@dataclass
class BinStats:
    """Statistics of one confidence bin ((index-1)/M, index/M].

    ``accuracy`` and ``mean_confidence`` are None for empty bins; such bins
    contribute nothing to ECE and are skipped by MCE, but they stay in the
    report so diagrams show the full partition.
    """

    index: int
    lo: float
    hi: float
    count: int
    accuracy: float | None
    mean_confidence: float | None

    @property
    def empty(self) -> bool:
        return self.count == 0

    @property
    def gap(self) -> float | None:
        if self.empty:
            return None
        return abs(self.accuracy - self.mean_confidence)


@dataclass
class CalibrationReport:
    """Summary of a prediction set: accuracy, ECE, MCE, NLL and the bins.

    ``nll_sum`` is the plain sum of per-sample negative log-likelihoods;
    ``nll_mean`` divides by the sample count and is the comparable quantity
    across datasets of different size.
    """

    accuracy: float
    ece: float
    mce: float
    nll_sum: float
    nll_mean: float
    n: int
    bins: list[BinStats]


def bin_index(confidence: float, m_bins: int) -> int:
    """Return the 1-based bin of ``confidence`` among M right-closed bins.

    Bin m covers ((m-1)/M, m/M]. A confidence of exactly 0 falls into bin 1
    so the bins partition [0, 1] completely.
    """
    if m_bins < 1:
        raise ValueError("m_bins must be a positive integer")
    if not 0.0 <= confidence <= 1.0:
        raise ValueError(f"confidence {confidence!r} outside [0, 1]")
    edges = [m / m_bins for m in range(1, m_bins + 1)]
    return min(bisect_left(edges, confidence) + 1, m_bins)


def compute_bins(records: list[PredictionRecord], m_bins: int) -> list[BinStats]:
    """Partition records by confidence and compute per-bin accuracy and
    mean confidence. Always returns exactly ``m_bins`` entries."""
    if not records:
        raise ValueError("records must be nonempty")
    if m_bins < 1:
        raise ValueError("m_bins must be a positive integer")
    counts = [0] * m_bins
    hits = [0] * m_bins
    conf_sums = [0.0] * m_bins
    for rec in records:
        b = bin_index(rec.confidence, m_bins) - 1
        counts[b] += 1
        if rec.predicted_label == rec.true_label:
            hits[b] += 1
        conf_sums[b] += rec.confidence
    bins = []
    for b in range(m_bins):
        if counts[b] > 0:
            acc = hits[b] / counts[b]
            conf = conf_sums[b] / counts[b]
        else:
            acc = None
            conf = None
        bins.append(
            BinStats(
                index=b + 1,
                lo=b / m_bins,
                hi=(b + 1) / m_bins,
                count=counts[b],
                accuracy=acc,
                mean_confidence=conf,
            )
        )
    return bins


def ece(bins: list[BinStats], n: int) -> float:
    """Expected calibration error: count-weighted mean of per-bin
    |accuracy - mean confidence|. Empty bins contribute 0."""
    if n <= 0:
        raise ValueError("n must be positive")
    if sum(b.count for b in bins) != n:
        raise ValueError("bin counts do not sum to n")
    total = 0.0
    for b in bins:
        if not b.empty:
            total += (b.count / n) * abs(b.accuracy - b.mean_confidence)
    return total


def mce(bins: list[BinStats]) -> float:
    """Maximum calibration error: the largest per-bin gap over nonempty bins."""
    gaps = [abs(b.accuracy - b.mean_confidence) for b in bins if not b.empty]
    if not gaps:
        raise ValueError("all bins are empty")
    return max(gaps)


def nll(records: list[PredictionRecord]) -> float:
    """Summed negative log-likelihood of the true labels.

    Probabilities are floored at PROB_FLOOR before the log; a probability of
    exactly 1 therefore contributes exactly 0.
    """
    if not records:
        raise ValueError("records must be nonempty")
    total = 0.0
    for rec in records:
        p = rec.prob_vector[rec.true_label]
        total -= math.log(max(p, PROB_FLOOR))
    return total


def accuracy(records: list[PredictionRecord]) -> float:
    """Fraction of records whose predicted label matches the true label."""
    if not records:
        raise ValueError("records must be nonempty")
    hits = sum(1 for rec in records if rec.predicted_label == rec.true_label)
    return hits / len(records)


def build_report(
    records: list[PredictionRecord], m_bins: int = DEFAULT_BINS
) -> CalibrationReport:
    """Compute the full calibration summary of a prediction set."""
    bins = compute_bins(records, m_bins)
    n = len(records)
    nll_sum = nll(records)
    return CalibrationReport(
        accuracy=accuracy(records),
        ece=ece(bins, n),
        mce=mce(bins),
        nll_sum=nll_sum,
        nll_mean=nll_sum / n,
        n=n,
        bins=bins,
    )


def report_to_dict(report: CalibrationReport) -> dict:
    """JSON-ready view of a report. Empty bins carry null accuracy and
    confidence plus an explicit empty marker."""
    return {
        "accuracy": report.accuracy,
        "ece": report.ece,
        "mce": report.mce,
        "nll_sum": report.nll_sum,
        "nll_mean": report.nll_mean,
        "n": report.n,
        "bins": [
            {
                "m": b.index,
                "lo": b.lo,
                "hi": b.hi,
                "count": b.count,
                "acc": b.accuracy,
                "conf": b.mean_confidence,
                "empty": b.empty,
            }
            for b in report.bins
        ],
    }


def write_report_json(report: CalibrationReport, path, extra: dict | None = None) -> None:
    """Write the report as JSON, optionally merged with extra top-level
    fields (tool version, resolved config, oracle metrics)."""
    doc = report_to_dict(report)
    if extra:
        doc.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def write_reliability_csv(report: CalibrationReport, path, comment: str | None = None) -> None:
    """Write the per-bin reliability table.

    Columns: bin_lo,bin_hi,count,accuracy,confidence,gap. Empty bins keep
    their row with blank statistics so the partition stays visible.
    """
    lines = []
    if comment:
        lines.append(f"# {comment}")
    lines.append("bin_lo,bin_hi,count,accuracy,confidence,gap")
    for b in report.bins:
        if b.empty:
            lines.append(f"{b.lo!r},{b.hi!r},0,,,")
        else:
            lines.append(
                f"{b.lo!r},{b.hi!r},{b.count},{b.accuracy!r},{b.mean_confidence!r},{b.gap!r}"
            )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def render_reliability_svg(report: CalibrationReport, title: str = "reliability") -> str:
    """Render the reliability diagram as a standalone SVG string.

    Accuracy bars per bin against the identity diagonal, with a tick at each
    bin's mean confidence. Output is deterministic for identical reports.
    """
    size, margin = 420, 50
    plot = size - 2 * margin

    def sx(v: float) -> float:
        return margin + v * plot

    def sy(v: float) -> float:
        return size - margin - v * plot

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        f'<text x="{size / 2:.1f}" y="20" text-anchor="middle" font-size="14" '
        f'font-family="sans-serif">{title}</text>',
    ]
    for b in report.bins:
        if b.empty:
            continue
        x0, x1 = sx(b.lo), sx(b.hi)
        y = sy(b.accuracy)
        parts.append(
            f'<rect x="{x0:.2f}" y="{y:.2f}" width="{x1 - x0:.2f}" '
            f'height="{sy(0.0) - y:.2f}" fill="#7a9cc6" stroke="#33557f" stroke-width="1"/>'
        )
        cx = sx(b.mean_confidence)
        parts.append(
            f'<line x1="{cx:.2f}" y1="{sy(0.0):.2f}" x2="{cx:.2f}" y2="{sy(1.0):.2f}" '
            f'stroke="#c04040" stroke-width="1" stroke-dasharray="3,3"/>'
        )
    parts.append(
        f'<line x1="{sx(0.0):.2f}" y1="{sy(0.0):.2f}" x2="{sx(1.0):.2f}" y2="{sy(1.0):.2f}" '
        f'stroke="#333333" stroke-width="1.5"/>'
    )
    # axes with ticks every 0.2
    parts.append(
        f'<rect x="{margin}" y="{margin}" width="{plot}" height="{plot}" '
        f'fill="none" stroke="#000000" stroke-width="1"/>'
    )
    for i in range(6):
        v = i / 5
        parts.append(
            f'<text x="{sx(v):.2f}" y="{size - margin + 18}" text-anchor="middle" '
            f'font-size="11" font-family="sans-serif">{v:.1f}</text>'
        )
        parts.append(
            f'<text x="{margin - 8}" y="{sy(v) + 4:.2f}" text-anchor="end" '
            f'font-size="11" font-family="sans-serif">{v:.1f}</text>'
        )
    parts.append(
        f'<text x="{size / 2:.1f}" y="{size - 12}" text-anchor="middle" font-size="12" '
        f'font-family="sans-serif">confidence</text>'
    )
    parts.append(
        f'<text x="16" y="{size / 2:.1f}" text-anchor="middle" font-size="12" '
        f'font-family="sans-serif" transform="rotate(-90 16 {size / 2:.1f})">accuracy</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_reliability_svg(
    report: CalibrationReport, path, title: str = "reliability", comment: str | None = None
) -> None:
    svg = render_reliability_svg(report, title=title)
    if comment:
        svg = f"<!-- {comment} -->\n" + svg
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(svg)
