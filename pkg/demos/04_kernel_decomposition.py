# %% [markdown]
# # Random-feature kernel
#
# Push data through a random projection and a quadratic activation, then
# average the Gram matrix over draws. A linear activation keeps only the
# means-carrying XᵀX term; the quadratic part adds a covariance term whose
# weight grows as 2·a2².

# %%
import numpy as np

from nclab import PolyActivation, SeedSpec, covariance_term_residual, linear_fit, poly_coeffs, random_spec, rf_kernel_mc, sample_gmm

x = sample_gmm(random_spec(4, 64, SeedSpec(1), mean_norm=3.0), 128, SeedSpec(2)).x

# %%
for a2 in (0.0, 0.25, 0.5, 1.0):
    act = PolyActivation(1.0, a2)
    est = rf_kernel_mc(x, act, m=32, draws=500, seed=SeedSpec(6))
    c, resid = linear_fit(est.gram, x)
    print(f"a2={a2:<5} (d1, d2)={poly_coeffs(act)}  fitted c={c:.5f}  residual={resid:.4f}")

# %% [markdown]
# The residual roughly quadruples from a2 = 0.5 to a2 = 1, matching the
# quadratic dependence of d2. With the linear activation the fitted scalar
# is about 1/p.

# %%
print(1 / x.shape[0])
