"""Reliability binning and calibration metrics on a hand-built prediction set.

Builds two small prediction sets, one overconfident and one calibrated,
and walks through the per-bin statistics, ECE, MCE and NLL. Writes the
reliability diagram of the overconfident set next to this script.
"""

from pathlib import Path

import numpy as np

from calibforge import metrics
from calibforge.metrics import PredictionRecord

rng = np.random.default_rng(0)

print("== an overconfident predictor ==")
print("it claims 90% confidence but is right only ~70% of the time\n")
records = []
for i in range(200):
    correct = rng.random() < 0.70
    true_label = 0 if correct else 1
    records.append(PredictionRecord.from_probs((0.90, 0.10), true_label))
# add a smattering of mid-confidence predictions that are roughly honest
for i in range(100):
    conf = float(rng.uniform(0.5, 0.65))
    correct = rng.random() < conf
    records.append(PredictionRecord.from_probs((conf, 1 - conf), 0 if correct else 1))

report = metrics.build_report(records, m_bins=10)
print(f"n = {report.n}, accuracy = {report.accuracy:.3f}")
print(f"ECE = {report.ece:.4f}   MCE = {report.mce:.4f}")
print(f"NLL = {report.nll_sum:.2f} (sum), {report.nll_mean:.4f} (per sample)\n")
print("bin        count   accuracy   confidence   gap")
for b in report.bins:
    lo, hi = b.lo, b.hi
    if b.empty:
        print(f"({lo:.1f},{hi:.1f}]    0        -          -         -")
    else:
        print(
            f"({lo:.1f},{hi:.1f}]  {b.count:5d}     {b.accuracy:.3f}      "
            f"{b.mean_confidence:.3f}     {b.gap:.3f}"
        )

out = Path(__file__).with_name("reliability_overconfident.svg")
metrics.write_reliability_svg(report, out, title="overconfident predictor")
print(f"\nwrote {out.name}: accuracy bars vs the identity diagonal")

print("\n== the same metrics on a perfectly calibrated set ==")
calibrated = []
for conf in (0.55, 0.65, 0.75, 0.85, 0.95):
    for i in range(100):
        correct = i < round(conf * 100)
        calibrated.append(PredictionRecord.from_probs((conf, 1 - conf), 0 if correct else 1))
report = metrics.build_report(calibrated, m_bins=10)
print(f"ECE = {report.ece:.4f}   MCE = {report.mce:.4f}  (both ~0 by construction)")
