"""Plain random points, Sobol' points and scrambled Sobol' points in 2D.

Writes nothing; prints how evenly each set fills the square.
"""

import numpy as np

from rqmc import netgen, verify
from rqmc.estimate import MCSampler
from rqmc.scramble import ScrambleSpec, scramble_points

n = 512
G = netgen.sobol_matrices(None, 2)
P = netgen.generate_points(G, 0, n)

sets = {
    "plain MC": MCSampler(2).sample(n, seed=1),
    "Sobol'": P.points,
    "scrambled Sobol'": scramble_points(P, ScrambleSpec("nested_uniform", 2, 32, seed=1)).points,
}

print(f"{n} points in the unit square\n")
print(f"{'set':<18}{'D* lower bound':>16}{'empty 1/64 cells':>18}")
for name, x in sets.items():
    d = verify.star_discrepancy_lower_bound(x, 20000, seed=0).value
    cells = np.floor(x * 8).astype(int)
    empty = 64 - len({tuple(c) for c in cells})
    print(f"{name:<18}{d:>16.4f}{empty:>18d}")

print("\nThe Sobol' sets put exactly 8 points in each 1/8 x 1/8 cell:")
for name in ("Sobol'", "scrambled Sobol'"):
    x = sets[name]
    counts = np.bincount((np.floor(x[:, 0] * 8) * 8 + np.floor(x[:, 1] * 8)).astype(int), minlength=64)
    print(f"  {name}: min {counts.min()}, max {counts.max()}")

# The same data as a CSV for plotting:  rqmc figure1 -o figure1.csv
