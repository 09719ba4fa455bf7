"""Minimal Gaussian-process regression for the steady-state objective model.

One-dimensional squared-exponential GP with a zero-mean prior on targets
normalised by their standard deviation.  Hyperparameters come from an
exhaustive log-grid search over the marginal likelihood; with the handful
of points this model is meant for, that is both robust and fast.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

__all__ = ["GpModel", "fit", "predict_mean", "load_training_csv", "save_training_csv"]

_JITTER = 1e-8


@dataclass(frozen=True)
class GpModel:
    train_inputs: np.ndarray
    train_targets: np.ndarray
    kernel_variance: float
    lengthscale: float
    noise_variance: float
    target_scale: float
    alpha: np.ndarray  # K^{-1} y in normalised target space
    chol: np.ndarray  # Cholesky factor of K + noise I


def _kernel(xa, xb, variance, lengthscale):
    d = np.subtract.outer(np.asarray(xa, float), np.asarray(xb, float))
    return variance * np.exp(-0.5 * (d / lengthscale) ** 2)


def _log_marginal_likelihood(x, y, variance, lengthscale, noise):
    n = x.size
    K = _kernel(x, x, variance, lengthscale) + (noise + _JITTER) * np.eye(n)
    try:
        L = np.linalg.cholesky(K)
    except np.linalg.LinAlgError:
        return -np.inf, None, None
    alpha = np.linalg.solve(L.T, np.linalg.solve(L, y))
    lml = -0.5 * y @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * n * np.log(2.0 * np.pi)
    return float(lml), alpha, L


def fit(inputs, targets) -> GpModel:
    """Fit a squared-exponential GP by grid-searching the marginal likelihood.

    Needs at least three distinct inputs.  Targets are divided by their
    standard deviation for the fit (so the zero prior mean is meaningful far
    from data) and rescaled on prediction.
    """
    x = np.asarray(inputs, dtype=float).ravel()
    y_raw = np.asarray(targets, dtype=float).ravel()
    if x.size != y_raw.size:
        raise ValueError("inputs and targets must have the same length")
    if x.size < 3:
        raise ValueError("need at least three training points")
    if np.unique(np.round(x, 12)).size != x.size:
        raise ValueError("training inputs must be distinct")

    scale = float(np.std(y_raw))
    if scale <= 0.0:
        scale = 1.0
    y = y_raw / scale

    # Grid ranges are relative to the data: signal variance near the (unit)
    # normalised target variance, lengthscales between span/40 and span/4 so
    # the mean neither collapses to interpolation spikes on clustered
    # noise-free samples nor rings across data gaps, and enough noise floor
    # to absorb structure below the lengthscale resolution.
    span = max(float(x.max() - x.min()), 1e-6)
    variances = np.logspace(-1.0, 0.3, 20)
    lengthscales = np.logspace(np.log10(span / 40.0), np.log10(span / 4.0), 20)
    noises = np.logspace(-4.0, -1.0, 10)

    best = (-np.inf, None)
    for v in variances:
        for ell in lengthscales:
            for nz in noises:
                lml, alpha, L = _log_marginal_likelihood(x, y, v, ell, nz)
                if lml > best[0]:
                    best = (lml, (v, ell, nz, alpha, L))
    if best[1] is None:
        raise RuntimeError("kernel matrix singular for every hyperparameter choice")
    v, ell, nz, alpha, L = best[1]
    return GpModel(
        train_inputs=x,
        train_targets=y_raw,
        kernel_variance=float(v),
        lengthscale=float(ell),
        noise_variance=float(nz),
        target_scale=scale,
        alpha=alpha,
        chol=L,
    )


def predict_mean(model: GpModel, x):
    """Posterior mean at ``x`` (scalar or array), in original target units."""
    xq = np.asarray(x, dtype=float)
    k = _kernel(xq.ravel(), model.train_inputs, model.kernel_variance, model.lengthscale)
    mean = k @ model.alpha * model.target_scale
    return float(mean[0]) if xq.ndim == 0 else mean.reshape(xq.shape)


def predict_mean_gradient(model: GpModel, x):
    """Derivative of the posterior mean, exact for the SE kernel."""
    xq = np.asarray(x, dtype=float)
    k = _kernel(xq.ravel(), model.train_inputs, model.kernel_variance, model.lengthscale)
    diff = np.subtract.outer(model.train_inputs, xq.ravel()).T  # (q, n)
    grad = (k * diff / model.lengthscale**2) @ model.alpha * model.target_scale
    return float(grad[0]) if xq.ndim == 0 else grad.reshape(xq.shape)


def load_training_csv(path):
    """Read (biomass_concentration, productivity) columns from a CSV file."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = [(float(r["biomass_concentration"]), float(r["productivity"])) for r in reader]
    if not rows:
        raise ValueError(f"no rows in {path}")
    arr = np.array(rows)
    return arr[:, 0], arr[:, 1]


def save_training_csv(path, inputs, targets) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["biomass_concentration", "productivity"])
        for a, b in zip(inputs, targets):
            writer.writerow([repr(float(a)), repr(float(b))])
