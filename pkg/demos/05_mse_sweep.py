# %% [markdown]
# # Ridge error as a function of the quadratic coefficient
#
# Random features with activation t + a2·t², ridge regression onto one-hot
# targets, test MSE averaged over projector draws.

# %%
from pathlib import Path

from nclab import SeedSpec, mse_sweep, parse_grid, random_spec, sample_gmm
from nclab.svg import line_plot

spec = random_spec(4, 32, SeedSpec(100), mean_norm=4.0, anisotropy=2.0)
ds = sample_gmm(spec, 600, SeedSpec(200))
grid = parse_grid("-1:0.2:1")
rows = mse_sweep(ds.x, ds, grid, m=16, draws=200, seed=SeedSpec(300))
for a2, mse in rows:
    print(f"{a2:+.1f}  {mse:.4f}  " + "#" * int(40 * mse / max(r[1] for r in rows)))

# %% [markdown]
# The curve is symmetric in a2 and bottoms out at the linear activation.

# %%
Path("mse-sweep.svg").write_text(line_plot([r[0] for r in rows], [r[1] for r in rows], "a2", "test MSE", "sweep"))
