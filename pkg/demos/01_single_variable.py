"""Testing one variable for threshold separability.

Two small classes are drawn, the statistic and its optimal threshold are
computed, and the exact p-value is read from the null distribution.
"""

import numpy as np

from etctest import LabeledSample, OperatingCondition, etc_hat_conservative, null_distribution, p_value

rng = np.random.default_rng(42)
n0 = n1 = 9
values = np.r_[rng.normal(0.0, 1.0, n0), rng.normal(1.5, 1.0, n1)]
labels = np.r_[np.zeros(n0, dtype=int), np.ones(n1, dtype=int)]
sample = LabeledSample(values, labels)

# Missing a positive costs twice as much as a false alarm.
oc = OperatingCondition(c0=1, c1=2, pi1="1/2")

est = etc_hat_conservative(sample, oc)
print(f"statistic       {est.value} = {float(est.value):.4f}")
print(f"rule            positives {est.direction.value} x = {est.threshold:.3f}")
print(f"errors          fn={est.fn}, fp={est.fp}")
print(f"largest value   {oc.max_value} (the better trivial classifier)")

# The null distribution depends only on n0, n1 and the operating condition,
# so it can be computed once and reused for any variable of this shape.
nd = null_distribution(n0, n1, oc)
p = p_value(nd, est.value)
print(f"p-value         {p} = {float(p):.3g}")

# The same labels with a monotone transform of the values give the same answer.
again = etc_hat_conservative(LabeledSample(np.exp(values), labels), oc)
assert (again.value, again.fn, again.fp) == (est.value, est.fn, est.fp)
print("exp(x) gives the identical statistic and errors")
