"""One-step RBF classifier: a single network versus average and median pools.

The spread of specificity over repetitions shrinks when outputs are pooled.
Run:  python3 demos/03_ensemble_variance.py      (about 15 s)
"""
from cervispec.metrics import text_table
from cervispec.models import CostPolicy
from cervispec.pipeline import PipelineConfig, run_one_step
from cervispec.spectra import canonical_datasets

train, test = canonical_datasets(42)
cfg = PipelineConfig(pool_size=20, repetitions=10)
reports = run_one_step(cfg, train, test, CostPolicy(sil_cost=2.5))
print(text_table(reports, include_reference=False))
for r in reports:
    print(f"{r.combiner:8s} specificity std {r.specificity[1]:.2f}")
