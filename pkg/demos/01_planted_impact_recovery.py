#!/usr/bin/env python3
"""Recovering a planted linear price-impact slope from synthetic book data.

Generates one noise-free stock where every tick of mid-price movement costs
exactly 2*D shares of best-level order flow imbalance, then shows that a
plain regression of mid-price changes on bucketed OFI recovers the slope
1/(2*D) to machine precision, and that adding return noise degrades window
R^2 toward the share of variance the flow actually explains.
"""

import numpy as np

from ofi_lab.experiments import ModelSpec, run_contemporaneous
from ofi_lab.pipeline import MODEL_SESSION, build_panel
from ofi_lab.regression import DesignMatrix, ols_fit
from ofi_lab.synth import SynthConfig, generate

# --- noise-free: the slope is structural -----------------------------------

cfg = SynthConfig(n_stocks=1, n_levels=3, depth=100, n_days=1,
                  session=(34200.0, 41400.0), bucket_seconds=10.0,
                  events_per_second=1.0, move_std=1.0, noise_std=0.0,
                  deep_flow_std=50.0, seed=3)
streams, truth = generate(cfg)
ledger = truth.ledgers[("S00", "2017-01-03")]

x = ledger.ofi[1:, 0].astype(float)          # best-level OFI per bucket
y = np.diff(ledger.mid_end) * 1e-4           # dollar mid change per bucket
fit = ols_fit(DesignMatrix(x=x[:, None], y=y, labels=["ofi1"]))
print(f"planted slope : {truth.slope_dollars_per_share:.3e} $/share")
print(f"recovered     : {fit.beta[0]:.3e} $/share  (R^2 = {fit.r2:.6f})")

# --- with noise: window R^2 tracks the planted explained share -------------

cfg_noisy = SynthConfig(n_stocks=1, n_levels=3, depth=100, n_days=6,
                        session=(34200.0, 57600.0), bucket_seconds=10.0,
                        events_per_second=1.0, move_std=1.0, noise_std=0.5,
                        deep_flow_std=50.0, seed=3)
streams, truth = generate(cfg_noisy)
panel = build_panel({k: sd.book for k, sd in streams.items()}, MODEL_SESSION, 10.0)
report = run_contemporaneous(panel, ModelSpec(family="pi", levels=1))
share = truth.explained_share("S00", session=MODEL_SESSION)
print(f"\nplanted explained-variance share : {share:.3f}")
print(f"mean windowed in-sample  R^2     : {report.mean_is():.3f}")
print(f"mean windowed out-of-sample R^2  : {report.mean_oos():.3f} "
      f"({len(report.results)} thirty-minute windows)")
