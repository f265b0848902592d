# %% [markdown]
# # Synthetic mixtures and domain shifts
#
# Samples are class means plus a covariance square root applied to noise
# drawn uniformly from the radius-sqrt(p) sphere.

# %%
import numpy as np

from nclab import SeedSpec, ShiftSpec, make_shifted_domain, random_spec, sample_gmm, sample_sphere

z = sample_sphere(8, 20000, SeedSpec(1))
print("norm range", np.linalg.norm(z, axis=0).min(), np.linalg.norm(z, axis=0).max())
print("second moment error", np.max(np.abs(z @ z.T / z.shape[1] - np.eye(8))))

# %%
spec = random_spec(4, 16, SeedSpec(11), mean_norm=3.0, anisotropy=2.0)
ds = sample_gmm(spec, 1000, SeedSpec(12))
print(ds.x.shape, ds.counts())

# %% [markdown]
# Class counts come from stratified rounding of the priors, so they do not
# wander from sample to sample.

# %% [markdown]
# A shifted target domain: rotate part of the way towards a random rotation,
# translate all means by a shared offset and scale the covariances.

# %%
for shift in (ShiftSpec(0, 0, 1), ShiftSpec(0.3, 0.5, 1.0), ShiftSpec(1, 2, 2)):
    tgt = make_shifted_domain(spec, shift, SeedSpec(13))
    moved = np.linalg.norm(tgt.means - spec.means, axis=0)
    label = "out of domain" if shift.is_out_of_domain else "in domain"
    print(f"{label:13s} mean displacement {np.round(moved, 2)}  trace ratio "
          f"{np.trace(tgt.covs[0]) / np.trace(spec.covs[0]):.2f}")
