"""Pools of RBFs only, MLPs only, and half of each.

Compare each mixed row with the better of the two homogeneous rows; on this
synthetic cohort the ranking depends on the seed block, so treat it as a tool
for checking the question on new data rather than a settled answer.

Run:  python3 demos/06_mixed_pools.py      (about 1 min)
"""
from cervispec.models import CostPolicy
from cervispec.pipeline import PipelineConfig, run_one_step
from cervispec.spectra import canonical_datasets

train, test = canonical_datasets(42)
cfg = PipelineConfig(pool_size=10, repetitions=3)
print("family  combiner  sensitivity       specificity")
for family in ("rbf", "mlp", "mixed"):
    for r in run_one_step(cfg, train, test, CostPolicy(2.5), family):
        (sm, ss), (pm, ps) = r.sensitivity, r.specificity
        print(f"{family:6s}  {r.combiner:8s}  {sm:5.1f} +/- {ss:4.1f}    {pm:5.1f} +/- {ps:4.1f}")
