"""
Exact attribution analysis: when does chunking win?
===================================================

A trajectory earns reward +1 from most of its steps, but m steps near
the middle pull the other way. Uniform trajectory-level attribution
gets those m steps wrong; chunk-level attribution dilutes the error.
Rational arithmetic makes the comparison exact, with no tolerance.
"""
from fractions import Fraction

from driftlab.oracle import (
    build_vectors,
    chunk_distance_sq,
    chunk_wins,
    chunk_wins_by_distance,
    grpo_distance_sq,
)

# The squared distance between the true per-step labels and what
# trajectory-level attribution assigns is exactly 8m, independent of T.
for T, m in ((6, 1), (10, 2), (12, 3)):
    assert grpo_distance_sq(T, m) == 8 * m
print("trajectory-level attribution error: exactly 8m for every (T, m)")

# Chunk-level attribution (two half-trajectory chunks) lands at
# 2T - 4 + (8m + 2)/T, again exactly.
for T, m in ((6, 1), (10, 2), (12, 3)):
    expected = 2 * T - 4 + Fraction(8 * m + 2, T)
    assert chunk_distance_sq(T, m) == expected
print("chunk-level attribution error: exactly 2T - 4 + (8m + 2)/T")

# Two win criteria exist. The closed-form quadratic threshold says
# chunking wins iff T^2 - (2m + 4)T + (4m + 1) <= 0; comparing the
# exact distances directly says chunking wins iff T <= 4m + 1. They
# agree for m = 1 but the quadratic undercounts for larger m.
print("\n  T  m   quadratic  distance")
for T in range(2, 13):
    for m in (1, 2, 3):
        if m > T:
            continue
        q = chunk_wins(T, m)
        d = chunk_wins_by_distance(T, m)
        flag = "  <-- disagree" if q != d else ""
        if q or d:
            print(f"{T:4d} {m:2d}   {str(q):9s} {str(d):9s}{flag}")

# The coefficient vectors behind the distances are available too;
# here step 3 of trajectory one is the mis-attributed one.
vectors = build_vectors(T=6, m=1, ia_set=(3,))
print("\ntarget coefficients (T=6, m=1):", [str(v) for v in vectors.j_hat[:6]])
print("trajectory-level estimate:     ", [str(v) for v in vectors.j_grpo[:6]])
print("chunk-level estimate:          ", [str(v) for v in vectors.j_chunk[:6]])
