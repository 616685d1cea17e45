"""Looking inside the exact null distribution.

Prints the support, probabilities and cumulative probabilities for
n0 = n1 = 9 under costs (1, 2), checks one cell against full
enumeration, and compares the cost of counting with and without
memoization.
"""

import math
import time

from etctest import OperatingCondition, count_cell, enumerate_cells_bruteforce, null_distribution
from etctest.permutation import CellIndex

oc = OperatingCondition(1, 2, "1/2")
nd = null_distribution(9, 9, oc)

print(f"{'value':>10} {'count':>7} {'P':>9} {'cumulative':>10}")
for (v, c), cum in zip(nd.support, nd.cumulative()):
    print(f"{float(v):10.4f} {c:7d} {c / nd.total:9.5f} {float(cum):10.5f}")
print(f"total = C(18, 9) = {nd.total} = {math.comb(18, 9)}")

# The cell with one false negative and two false positives, counted by the
# recursive engine and by visiting all 48620 label orderings.
tally = enumerate_cells_bruteforce(9, 9, oc)
by_enumeration = sum(c for (cell, _), c in tally.items() if cell == CellIndex(1, 2))
print(f"cell (1, 2): engine {count_cell((1, 2), 9, 9, oc)}, enumeration {by_enumeration}")

for n in (8, 10, 12):
    times = {}
    for memo in (True, False):
        start = time.perf_counter()
        null_distribution(n, n, oc, memo=memo)
        times[memo] = time.perf_counter() - start
    print(f"n0 = n1 = {n:2d}: memo {times[True]:.4f}s, plain {times[False]:.4f}s")
