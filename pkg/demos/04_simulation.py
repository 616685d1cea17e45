"""A reduced simulation study: ETC against Gaussian LDA and QDA filters.

Study A (equal-variance Gaussians) favours LDA; study C adds outliers, and
the filtering performance of the parametric methods drops faster than
that of ETC.  Scales are kept small so the script finishes in seconds.
"""

from etctest.simbench import StudyConfig, run_study

common = dict(signal_count=50, noise_count=1950, n0=20, n1=20, replications=3, delta_grid=(1.0, 2.0))

a = run_study(StudyConfig.desk("A", **common))
print("study A, share of signal in the top 50")
for delta in common["delta_grid"]:
    row = ", ".join(f"{m} {a.mean(m, delta=delta):.2f}" for m in a.methods)
    print(f"  delta {delta}: {row}")

c = run_study(StudyConfig.desk("C", **common, phi_grid=(0.0, 0.2)))
print("study C, change in filtering performance at 20% outliers")
for delta in common["delta_grid"]:
    row = ", ".join(
        f"{m} {sum(c.delta_fp(m, delta=delta, phi=0.2)) / common['replications']:+.2f}" for m in c.methods
    )
    print(f"  delta {delta}: {row}")
