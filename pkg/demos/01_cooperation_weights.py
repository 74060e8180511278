"""
How the server turns similarity and overlap into mixing weights
===============================================================

Each row of the cooperation matrix starts from the clients' relative data
sizes ``p``, is pulled towards peers with similar parameters and pushed away
from peers whose feature subspaces overlap with the client's own. The row is
then projected back onto the probability simplex.
"""

import numpy as np

from fedsac import project_simplex, solve_row

np.set_printoptions(precision=3, suppress=True)

# Projection onto the simplex: the closest non-negative vector that sums to one.
for c in ([0.6, 0.6], [1.2, 0.2], [0.3, 0.7], [2.0, -1.0, 0.5]):
    print(f"project {c} -> {project_simplex(np.array(c))}")

# Three clients of different sizes. Client 0 and 1 have near-identical models
# (high S) and overlapping features (high C); client 2 is a little less similar
# but sees a different part of feature space (low C).
p = np.array([0.5, 0.3, 0.2])
S = np.array([[1.0, 0.95, 0.85], [0.95, 1.0, 0.85], [0.85, 0.85, 1.0]])
C = np.array([[1.0, 0.95, 0.40], [0.95, 1.0, 0.40], [0.40, 0.40, 1.0]])

print("\nrow 0 for a few (alpha, beta) settings")
for alpha, beta in [(0, 0), (0, 1.4), (0.9, 0), (0.9, 1.4), (0.5, 1.6)]:
    print(f"  alpha={alpha:<4} beta={beta:<4} W_0 = {solve_row(0, p, S, C, alpha, beta)}")

# With both weights at zero the row is exactly p, which is FedAvg's weighting.
# Similarity alone keeps weight on the two look-alike clients; the
# complementarity term moves mass to client 2, whose features are different.
