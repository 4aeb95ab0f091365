"""Forecast error metrics and residual statistics."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from danet.errors import ContractError, MetricDomainError


@dataclass(frozen=True)
class EvaluationReport:
    """Errors of a forecast over a test range.

    ``residuals`` are ``actual - forecast`` in megawatts; ``max_abs_bias`` is
    their largest magnitude and ``bias_sd`` their (population) standard
    deviation.  ``mape`` is a percentage.
    """

    mape: float
    mae: float
    rmse: float
    max_abs_bias: float
    bias_sd: float
    n: int
    residuals: np.ndarray = field(repr=False)

    def to_document(self, with_residuals: bool = False) -> dict:
        doc = {"mape": self.mape, "mae": self.mae, "rmse": self.rmse,
               "max_abs_bias": self.max_abs_bias, "bias_sd": self.bias_sd, "n": self.n}
        if with_residuals:
            doc["residuals"] = [float(r) for r in self.residuals]
        return doc

    def to_json(self, with_residuals: bool = False) -> str:
        return json.dumps(self.to_document(with_residuals), indent=2, sort_keys=True) + "\n"


def evaluate(forecasts, actuals) -> EvaluationReport:
    """MAPE (%), MAE and RMSE of ``forecasts`` against positive ``actuals``."""
    f = np.asarray(forecasts, dtype=np.float64).reshape(-1)
    y = np.asarray(actuals, dtype=np.float64).reshape(-1)
    if f.shape != y.shape:
        raise ContractError(f"{f.size} forecasts for {y.size} actuals")
    if f.size == 0:
        raise ContractError("cannot evaluate an empty forecast")
    zero = np.flatnonzero(y == 0)
    if zero.size:
        raise MetricDomainError("MAPE undefined for zero actual load", zero)
    r = y - f
    abs_r = np.abs(r)
    return EvaluationReport(
        mape=float(np.mean(abs_r / np.abs(y)) * 100.0),
        mae=float(np.mean(abs_r)),
        rmse=float(np.sqrt(np.mean(r * r))),
        max_abs_bias=float(abs_r.max()),
        bias_sd=float(np.std(r)),
        n=int(r.size),
        residuals=r,
    )
