"""
Feature subspaces and principal angles
======================================

A client summarizes its data by the top singular directions of its
representation matrix (samples x 84 features). Comparing two clients'
subspaces by principal angles tells the server how much their feature
distributions overlap, without any raw data leaving the clients.
"""

import numpy as np

from fedsac import data, model
from fedsac.numerics import principal_angles, representative_subspace, thin_svd
from fedsac.server import complementarity_matrix

np.set_printoptions(precision=4, suppress=True)

# The SVD used throughout is a one-sided Jacobi iteration.
x = np.random.default_rng(0).normal(size=(256, 84))
u, s, v = thin_svd(x)
print("reconstruction error", np.linalg.norm(x - u @ np.diag(s) @ v.T))
print("largest singular values", s[:4])

# Angles between coordinate subspaces have closed forms.
e = np.eye(3)
a = representative_subspace(np.array([e[0], e[1], e[0] + e[1]]), 2)
b = representative_subspace(np.array([e[0], e[2], e[0] - e[2]]), 2)
print("angles span{e1,e2} vs span{e1,e3}:", principal_angles(a, b))

# Now the real thing: the same random network applied to data from three
# distributions. Client B sees a shifted copy of A's distribution, client C a
# fully shifted one.
spec = model.MlpSpec(32, 10)
theta = model.init(spec, 0)
subspaces = []
for level in (0.0, 0.5, 1.0):
    ds = data.generate_synthetic(1, 10, 32, 50, data.ShiftSpec(level, 0.0))
    _, feats = model.forward(theta, ds.features)
    subspaces.append(representative_subspace(feats, 3))

# C_ij = cos(mean principal angle): 1 for identical subspaces, lower as the
# feature distributions drift apart.
print("complementarity matrix\n", complementarity_matrix(subspaces))
