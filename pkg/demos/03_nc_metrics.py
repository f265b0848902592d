# %% [markdown]
# # Collapse diagnostics
#
# Three numbers per feature set: the normalised trace of the pooled
# within-class covariance, how far the centred class means are from an
# equiangular arrangement, and how well a classifier lines up with the means.

# %%
import numpy as np

from nclab import LabeledDataset, SeedSpec, isotropic_spec, make_etf, nc_report, sample_gmm

etf = make_etf(3, 8, SeedSpec(2))

# %% [markdown]
# Features clustered tightly around ETF-shaped means score near zero on all three.

# %%
for sigma2 in (1.0, 0.1, 0.001):
    ds = sample_gmm(isotropic_spec(4 * etf.weights.T, sigma2=sigma2), 600, SeedSpec(3))
    r = nc_report(ds, etf.weights)
    print(f"sigma2={sigma2:<6} " + "  ".join(f"{n}={v:.4f}" for n, v in r.rows()))

# %% [markdown]
# Standard-basis means are already equiangular once centred. The alignment
# metric compares the classifier with the centred means, so an uncentred
# identity head is only partly aligned and its negation is close to opposite.

# %%
x = np.repeat(np.eye(3), 5, axis=1)
ds = LabeledDataset(x, np.repeat(np.arange(3), 5), 3)
print(nc_report(ds, np.eye(3)).rows())
print(nc_report(ds, -np.eye(3)).rows())
