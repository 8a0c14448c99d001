"""Sweep the SIL misclassification cost and watch sensitivity trade against
specificity for the pooled one-step classifier.

Run:  python3 demos/05_cost_tradeoff.py      (about 30 s)
"""
from cervispec.models import CostPolicy
from cervispec.pipeline import PipelineConfig, cost_sweep
from cervispec.spectra import canonical_datasets

train, test = canonical_datasets(42)
cfg = PipelineConfig(pool_size=10, repetitions=4, cost=CostPolicy())
rows = cost_sweep(cfg, train, test, [1, 2, 2.5, 3, 4, 5])
print("cost  combiner  sensitivity  specificity")
for r in rows:
    if r.combiner != "single":
        print(f"{r.cost:4.1f}  {r.combiner:8s}  {r.sensitivity[0]:10.1f}  {r.specificity[0]:10.1f}")
