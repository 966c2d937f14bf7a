# Copyright 2026 The BSConv Authors
# SPDX-License-Identifier: Apache-2.0
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Monte-Carlo interval for the mean PC1 explained-variance ratio of iid
Gaussian kernel sets (N=64 filters, M=128 input channels, 3x3).

Each filter's M depth slices are treated as M samples in R^9; the PC1 ratio
is the largest eigenvalue of the (optionally centered) scatter matrix over
its trace. The statistic is the mean ratio over the N filters of one set.

The frozen interval is mean +/- 6 standard deviations of that statistic over
1000 independent sets. Run: python3 pc1_gaussian_interval.py
"""

import numpy as np

N, M, K, SEEDS = 64, 128, 3, 1000


def set_mean(rng, center):
    w = rng.standard_normal((N, M, K * K))
    if center:
        w = w - w.mean(axis=1, keepdims=True)
    scatter = np.einsum("nmi,nmj->nij", w, w)
    ev = np.linalg.eigvalsh(scatter)
    return float((ev[:, -1] / ev.sum(axis=1)).mean())


for center in (True, False):
    stats = np.array([set_mean(np.random.default_rng(s), center) for s in range(SEEDS)])
    mu, sd = stats.mean(), stats.std(ddof=1)
    print(f"center={center} mean={mu:.6f} sd={sd:.6f} min={stats.min():.6f} max={stats.max():.6f} "
          f"interval=[{mu - 6 * sd:.4f}, {mu + 6 * sd:.4f}]")
