"""Regenerate crates/core/tests/fixtures/sobol_reference_dims_1_10.txt with SciPy.

Each row holds a dimension followed by its first 64 points after the initial
zero, as integer numerators over 2^32.
"""
import sys

from scipy.stats import qmc

out = sys.argv[1] if len(sys.argv) > 1 else "crates/core/tests/fixtures/sobol_reference_dims_1_10.txt"
points = qmc.Sobol(d=10, scramble=False).random(65)
assert (points[0] == 0).all()
points = points[1:]
lines = ["# dimension, then 64 post-skip values as numerators over 2^32"]
for k in range(10):
    nums = [int(round(v * 2**32)) for v in points[:, k]]
    assert all(v * 2**32 == n for v, n in zip(points[:, k], nums))
    lines.append(str(k + 1) + " " + " ".join(map(str, nums)))
with open(out, "w") as f:
    f.write("\n".join(lines) + "\n")
