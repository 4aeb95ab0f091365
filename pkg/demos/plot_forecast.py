"""
One-hour-ahead forecast on a synthetic series
=============================================

A small dense average network trained for a few epochs on 90 days of
synthetic load, scored on the last two weeks.  The full desk-scale
benchmark (width 64, 300 epochs) lives in the acceptance tests.
"""

import numpy as np

from danet.data import synthesize_series
from danet.features import NormStats, SplitSpec, build_bundles
from danet.layers import ModelSpec, parameter_count
from danet.metrics import evaluate
from danet.training import TrainConfig, predict, train

series = synthesize_series(90, seed=0)
split = SplitSpec.default(series, test_days=14, validation_days=14)
stats = NormStats.fit(series, *split.fit_range)
bundles = build_bundles(series, split, stats)
print(len(bundles.train), "training hours,", len(bundles.test), "test hours")

# %%
spec = ModelSpec(width=16)
print("parameters:", parameter_count(spec), "hidden depth:", spec.hidden_depth())
config = TrainConfig(epochs=40, lr_step=20, init_sd=0.2)
model = train(bundles.train, config, spec, stats, bundles.validation)
for h in model.history[::10]:
    print(f"epoch {h['epoch']:>3} lr {h['lr']:.0e} train {h['train_loss']:.4f} val {h['val_loss']:.4f}")

# %%
forecast = predict(model, bundles.test)
report = evaluate(forecast, bundles.test.actual)
print(f"MAPE {report.mape:.2f}%  MAE {report.mae:.1f} MW  RMSE {report.rmse:.1f} MW  "
      f"max |bias| {report.max_abs_bias:.1f} MW")

# %%
# Persistence (same hour yesterday) as a sanity baseline
i = series.index_of(bundles.test.timestamps[0])
naive = series.load[i - 24:i - 24 + len(bundles.test)]
print(f"persistence MAPE {evaluate(naive, bundles.test.actual).mape:.2f}%")
