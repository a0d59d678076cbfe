"""Linear zero-variance extrapolation of energies against the normalized
energy variance of the trial state."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFit


@dataclass(frozen=True)
class ExtrapolationInput:
    """Family of (variance, energy[, stderr]) points to extrapolate."""

    points: tuple[tuple[float, float, float | None], ...]
    label: str = ""

    def __post_init__(self):
        if len(self.points) < 2:
            raise ValueError("need at least two points")
        variances = [p[0] for p in self.points]
        if any(v <= 0 for v in variances):
            raise ValueError("variances must be strictly positive")
        if len(set(variances)) != len(variances):
            raise DegenerateFit("duplicate variances")
        for p in self.points:
            if p[2] is not None and p[2] < 0:
                raise ValueError("stderr must be non-negative")

    @property
    def has_stderrs(self) -> bool:
        return all(p[2] is not None for p in self.points)


@dataclass(frozen=True)
class FitResult:
    intercept: float
    slope: float
    residuals: np.ndarray
    r_squared: float
    intercept_stderr: float | None
    weighted: bool


def fit_linear(inp: ExtrapolationInput) -> FitResult:
    """Weighted least squares E = intercept + slope * variance.

    Weights are 1/stderr^2 when every point carries a stderr, else uniform.
    The intercept is the zero-variance energy estimate; its standard error is
    propagated from the point stderrs when available.
    """
    x = np.array([p[0] for p in inp.points])
    y = np.array([p[1] for p in inp.points])
    weighted = inp.has_stderrs and any(p[2] > 0 for p in inp.points)
    if weighted:
        errs = np.array([p[2] for p in inp.points], dtype=float)
        floor = max(errs.max() * 1e-12, 1e-300)
        w = 1.0 / np.maximum(errs, floor) ** 2
    else:
        w = np.ones_like(x)

    sw = w.sum()
    xbar = (w * x).sum() / sw
    ybar = (w * y).sum() / sw
    sxx = (w * (x - xbar) ** 2).sum()
    if sxx == 0.0:
        raise DegenerateFit("variance spread is zero")
    slope = (w * (x - xbar) * (y - ybar)).sum() / sxx
    intercept = ybar - slope * xbar

    fitted = intercept + slope * x
    residuals = y - fitted
    ss_res = (w * residuals**2).sum()
    ss_tot = (w * (y - ybar) ** 2).sum()
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot

    intercept_stderr = None
    if weighted:
        # var(intercept) = sum_i c_i^2 sigma_i^2 with c_i the WLS coefficients
        c = w / sw - w * (x - xbar) * xbar / sxx
        intercept_stderr = float(np.sqrt(np.sum(c**2 * errs**2)))
    return FitResult(
        intercept=float(intercept), slope=float(slope), residuals=residuals,
        r_squared=float(r_squared), intercept_stderr=intercept_stderr,
        weighted=weighted,
    )
