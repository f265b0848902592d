# %% [markdown]
# # Pretrain, then fine-tune under a shift
#
# Three head strategies for a small ReLU network: a trainable linear head,
# a fixed ETF head, and a trainable head behind ZCA whitening. Each is
# pretrained on a source mixture and fine-tuned on a shifted target.

# %%
from pathlib import Path

import numpy as np

from nclab import HeadKind, bundled_config, load_experiment, run_experiment

here = Path(__file__).resolve().parent
spec = load_experiment(here / "out_of_domain.json")
print(spec.domain_label, spec.target)

# %%
result = run_experiment(spec, out_dir="transfer-out")
for row in result.summary():
    print({k: (round(v, 4) if isinstance(v, float) else v) for k, v in row.items()})

# %% [markdown]
# Per-seed detail for one strategy, and its seed-averaged within-class
# covariance on the target test set.

# %%
for cell in result.for_strategy(HeadKind.FIXED_ETF):
    print(cell.row())
cov = np.mean([c.target_cov for c in result.for_strategy(HeadKind.FIXED_ETF)], axis=0)
print("trace / p", np.trace(cov) / cov.shape[0])

# %% [markdown]
# The same run with no shift. The bundled copy of each config is also
# available through ``bundled_config``.

# %%
same = run_experiment(load_experiment(bundled_config("in_domain")))
for row in same.summary():
    print(row["strategy"], round(row["target_acc"], 4))
