"""Ranking many variables with one shared null distribution.

A matrix with 20 informative and 980 pure-noise variables is ranked by
exact p-value, Benjamini-Hochberg adjusted, and written to a report.
"""

import tempfile
from pathlib import Path

import numpy as np

from etctest import NDCache, OperatingCondition, VariableMatrix, rank_variables, write_report

rng = np.random.default_rng(7)
n0 = n1 = 15
signal, noise = 20, 980
data = rng.normal(size=(n0 + n1, signal + noise))
data[n0:, :signal] += 1.8
names = [f"sig{j:02d}" for j in range(signal)] + [f"noise{j:03d}" for j in range(noise)]
labels = np.r_[np.zeros(n0, dtype=int), np.ones(n1, dtype=int)]

m = VariableMatrix(names, data, labels)
report = rank_variables(m, OperatingCondition(1, 1, "1/2"), NDCache())

print("rank name       statistic   p          p (BH)")
for r in report.records[:10]:
    print(f"{r.rank:4d} {r.name:10s} {float(r.statistic):9.4f} {float(r.p):10.3g} {float(r.p_adjusted):10.3g}")

hits = sum(r.name.startswith("sig") for r in report.records[:signal])
print(f"{hits} of the top {signal} variables are informative")
print(f"{sum(r.p_adjusted <= 0.05 for r in report.records)} variables pass BH at 5%")

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "report.csv"
    write_report(report, path, top=5)
    print(path.read_text())
