# %% [markdown]
# # Simplex ETF classifiers
#
# A fixed classifier head built from a centring matrix and a random
# row-orthonormal factor. All rows have unit norm and every pair meets
# at the same obtuse angle.

# %%
import numpy as np

from nclab import SeedSpec, centering_matrix, make_etf, verify_etf

etf = make_etf(4, 16, SeedSpec(0))
w = etf.weights
print(np.round(w @ w.T, 6))

# %% [markdown]
# The Gram matrix is a scaled centring matrix, so the cosines are all -1/(k-1).

# %%
k = etf.k
print(np.max(np.abs(w @ w.T - k / (k - 1) * centering_matrix(k))))
print("\n".join(verify_etf(w).lines()))

# %% [markdown]
# The singular values do not depend on the seed: only the orientation does.

# %%
for s in range(3):
    print(np.round(np.linalg.svd(make_etf(4, 16, SeedSpec(s)).weights, compute_uv=False), 6))

# %% [markdown]
# An identity matrix is not an ETF (its cosines are 0, not -1/(k-1)).

# %%
print(verify_etf(np.eye(3)).is_etf)
