"""
Three ways to split one dataset across clients
==============================================

Label histograms per client for homogeneous, Dirichlet and pathological
partitions of the same 10-class synthetic dataset.
"""

import numpy as np

from fedsac import data

ds = data.generate_synthetic(0, num_classes=10, feature_dim=32, samples_per_class=200)


def show(title, shards):
    print(title)
    for s in shards:
        labels = np.concatenate([s.train.labels, s.test.labels])
        hist = np.bincount(labels, minlength=10)
        print(f"  client {s.client_id}: p={s.relative_size:.3f}  {' '.join(f'{h:3d}' for h in hist)}")


show("homogeneous", data.partition_homogeneous(ds, 5, seed=0))
show("Dirichlet, alpha = 0.5", data.partition_dirichlet(ds, 5, 0.5, seed=0))
show("Dirichlet, alpha = 0.1", data.partition_dirichlet(ds, 5, 0.1, seed=0))
show("pathological, 2 classes each", data.partition_pathological(ds, 5, 2, seed=0))

# Every partition is disjoint and covers the dataset; relative sizes are the
# training-split fractions and feed the server's weighting.
