"""Write a Joe-Kuo style direction-number table from the copy shipped with SciPy.

Usage: python3 tools/gen_direction_table.py OUT_PATH [MAX_DIMENSION]
The bundled table is crates/core/data/new-joe-kuo-6.1024 (MAX_DIMENSION=1024).
"""
import os
import sys

import numpy as np
import scipy


def rows(max_dimension):
    path = os.path.join(os.path.dirname(scipy.__file__), "stats", "_sobol_direction_numbers.npz")
    d = np.load(path)
    poly, vinit = d["poly"], d["vinit"]
    out = ["d       s       a       m_i"]
    for idx in range(1, max_dimension):
        pv = int(poly[idx])
        s = pv.bit_length() - 1
        a = (pv >> 1) & ((1 << (s - 1)) - 1) if s > 1 else 0
        m = [int(x) for x in vinit[idx][:s]]
        for i, mi in enumerate(m, 1):
            assert mi % 2 == 1 and mi < 2**i
        out.append(" ".join(str(x) for x in [idx + 1, s, a] + m))
    return "\n".join(out) + "\n"


if __name__ == "__main__":
    max_dimension = int(sys.argv[2]) if len(sys.argv) > 2 else 1024
    with open(sys.argv[1], "w") as f:
        f.write(rows(max_dimension))
