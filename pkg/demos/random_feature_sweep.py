"""Best-in-run cost against the number of random log-cosh features.

A small version of the desk-scale sweep on the damped integrator: for each
feature count a fresh random feature matrix is drawn per run, both learners
run for a few rounds and the best test cost is kept. Pass ``--full`` for the
five-run, nineteen-round version (about ten minutes).

    python3 demos/random_feature_sweep.py
"""
import sys

from gradctl.experiments import reproduce_fig4

full = "--full" in sys.argv
counts = (5, 30, 100) if full else (5, 30)
runs, rounds = (5, 19) if full else (2, 5)
_, summary, reference = reproduce_fig4(counts, runs_per_count=runs, rounds=rounds)

print(f"reference (best cost seen anywhere): {reference:.4f}")
for (n, method), median in summary.items():
    print(f"{n:4d} features  {method:7s} median best {median:.4f}  {100 * (median / reference - 1):+6.2f}%")
