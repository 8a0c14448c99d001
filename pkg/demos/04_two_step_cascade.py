"""Two-step cascade: step 1 screens SIL vs NS, step 2 (SIL vs NC) only sees
step-1 positives.  Compared against both constituents on their own problems.

Run:  python3 demos/04_two_step_cascade.py
"""
from cervispec.metrics import text_table
from cervispec.models import CostPolicy
from cervispec.pipeline import ALGO1, ALGO2, PipelineConfig, run_constituent, run_two_step
from cervispec.spectra import canonical_datasets

train, test = canonical_datasets(42)
cfg = PipelineConfig(pool_size=10, repetitions=3)
reports = (run_constituent(ALGO1, train, test, cfg, CostPolicy(2.5))
           + run_constituent(ALGO2, train, test, cfg, CostPolicy())
           + run_two_step(train, test, cfg))
print(text_table(reports, include_reference=False))
