"""Exact t-values of Sobol' prefixes, before and after scrambling."""

from rqmc import netgen, verify
from rqmc.scramble import ScrambleSpec, scramble_points

m_max = 10
print("exact t of the first 2^m Sobol' points\n")
print("d  " + " ".join(f"{m:>2d}" for m in range(m_max + 1)))
for d in range(1, 7):
    P = netgen.generate_points(netgen.sobol_matrices(None, d), 0, 2**m_max)
    ts = [verify.exact_t(P[: 2**m], m) for m in range(m_max + 1)]
    print(f"{d}  " + " ".join(f"{t:>2d}" for t in ts))

# Scrambling permutes digits within the tree of elementary intervals, so
# every interval keeps its count and t cannot change.
d, m = 4, 9
P = netgen.generate_points(netgen.sobol_matrices(None, d), 0, 2**m)
t0 = verify.exact_t(P, m)
same = sum(
    verify.exact_t(scramble_points(P, ScrambleSpec(kind, 2, 32, seed)), m) == t0
    for kind in ("nested_uniform", "linear", "digital_shift")
    for seed in range(10)
)
print(f"\nd={d}, m={m}: unscrambled t={t0}; scrambled sets with the same t: {same}/30")

# Faure points in base 3 are (0, m, d)-nets for d <= 3
F = netgen.generate_points(netgen.faure_matrices(3, 3), 0, 3**5)
print(f"Faure b=3, d=3, 243 points: t = {verify.exact_t(F, 5)}")
