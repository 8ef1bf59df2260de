"""Probability primitives: normal fits and CDFs, distance sampling, 1-D GMM."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.special import erfc

from .errors import DegenerateSample

#: CDF values are clamped into [CDF_FLOOR, 1 - CDF_FLOOR] so logs stay finite.
CDF_FLOOR = 1e-12

DEFAULT_CALIB_SAMPLES = 1_000_000


@dataclass(frozen=True)
class NormalParams:
    mu: float
    sigma: float


@dataclass(frozen=True)
class Gmm2Params:
    weight: tuple[float, float]
    mean: tuple[float, float]
    variance: tuple[float, float]
    converged: bool = True
    n_iter: int = 0
    loglik_trace: tuple[float, ...] = field(default=(), repr=False, compare=False)

    def component(self, idx: int) -> NormalParams:
        return NormalParams(self.mean[idx], math.sqrt(self.variance[idx]))


def fit_normal(samples) -> NormalParams:
    """Mean and population standard deviation of ``samples``."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 2 or np.all(x == x[0]):
        raise DegenerateSample(
            f"cannot fit a normal to {x.size} value(s) with no spread"
        )
    mu = float(np.mean(x))
    sigma = float(np.sqrt(np.mean((x - mu) ** 2)))
    if not sigma > 0.0:
        raise DegenerateSample("sample standard deviation is zero")
    return NormalParams(mu, sigma)


def normal_cdf(x, params: NormalParams, floor: float = CDF_FLOOR):
    """P(Z <= x) for Z ~ N(mu, sigma^2), clamped to [floor, 1 - floor].

    Accepts scalars or arrays; scalars come back as ``float``.
    """
    z = (np.asarray(x, dtype=np.float64) - params.mu) / (params.sigma * math.sqrt(2.0))
    p = np.clip(0.5 * erfc(-z), floor, 1.0 - floor)
    if p.ndim == 0:
        return float(p)
    return p


def cosine_distances_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise cosine distance between equally shaped matrices ``a`` and ``b``."""
    na = np.maximum(np.sqrt(np.einsum("ij,ij->i", a, a)), 1e-12)
    nb = np.maximum(np.sqrt(np.einsum("ij,ij->i", b, b)), 1e-12)
    return 1.0 - np.einsum("ij,ij->i", a, b) / (na * nb)


def sample_pair_indices(n: int, n_samples: int, rng_seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``n_samples`` ordered index pairs (i, j), i != j, uniformly with replacement."""
    if n < 2:
        raise DegenerateSample("need at least two vectors to sample pairs")
    rng = np.random.default_rng(rng_seed)
    i = rng.integers(0, n, size=n_samples)
    j = rng.integers(0, n - 1, size=n_samples)
    j = j + (j >= i)
    return i, j


@numba.njit(nogil=True, cache=True)
def _pair_dots(U, i, j):
    out = np.empty(i.shape[0])
    for s in range(i.shape[0]):
        a, b = i[s], j[s]
        acc = 0.0
        for t in range(U.shape[1]):
            acc += U[a, t] * U[b, t]
        out[s] = acc
    return out


def sample_distance_distribution(vectors, n_samples: int = DEFAULT_CALIB_SAMPLES,
                                 rng_seed: int = 0) -> NormalParams:
    """Fit a normal to cosine distances between randomly sampled vector pairs.

    The pair list is drawn serially from ``rng_seed``; distances are evaluated
    by one serial kernel, so the result does not depend on the caller's
    threading.
    """
    v = np.asarray(vectors, dtype=np.float64)
    if v.ndim != 2:
        raise ValueError("vectors must be a 2-D array (one vector per row)")
    if n_samples < 1000:
        raise ValueError("n_samples must be >= 1000")
    i, j = sample_pair_indices(v.shape[0], n_samples, rng_seed)
    norms = np.maximum(np.sqrt(np.einsum("ij,ij->i", v, v)), 1e-12)
    d = 1.0 - _pair_dots(np.ascontiguousarray(v / norms[:, None]), i, j)
    return fit_normal(d)


def _gmm_loglik(x, w, m, var):
    # log-sum-exp over the two components, per sample
    logp = (np.log(w)[:, None]
            - 0.5 * np.log(2.0 * np.pi * var)[:, None]
            - 0.5 * (x[None, :] - m[:, None]) ** 2 / var[:, None])
    top = np.max(logp, axis=0)
    ll = top + np.log(np.sum(np.exp(logp - top), axis=0))
    return logp, ll


def fit_gmm2(samples, max_iters: int = 200, tol: float = 1e-6,
             rng_seed: int = 0) -> Gmm2Params:
    """Two-component univariate Gaussian mixture fitted by EM.

    Means start at the 25th/75th percentiles with equal weights and the pooled
    variance. Stops when the mean log-likelihood improves by less than ``tol``
    or after ``max_iters`` iterations; in the latter case ``converged`` is
    False and the last iterate is returned.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 10 or np.all(x == x[0]):
        raise DegenerateSample("GMM fit needs >= 10 samples with >= 2 distinct values")

    total_var = float(np.var(x))
    m = np.percentile(x, [25.0, 75.0]).astype(np.float64)
    if m[0] == m[1]:
        jitter = np.random.default_rng(rng_seed).standard_normal(2) * 1e-3 * math.sqrt(total_var)
        m = np.sort(m + jitter)
        if m[0] == m[1]:
            m[1] += 1e-3 * math.sqrt(total_var)
    w = np.array([0.5, 0.5])
    var = np.array([total_var, total_var])
    var_floor = 1e-6 * total_var

    logp, ll = _gmm_loglik(x, w, m, var)
    prev = float(np.mean(ll))
    trace = [prev]
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        resp = np.exp(logp - ll[None, :])
        nk = resp.sum(axis=1)
        nk = np.maximum(nk, 1e-300)
        w = nk / x.size
        m = (resp @ x) / nk
        var = np.maximum((resp * (x[None, :] - m[:, None]) ** 2).sum(axis=1) / nk, var_floor)
        logp, ll = _gmm_loglik(x, w, m, var)
        cur = float(np.mean(ll))
        trace.append(cur)
        if cur - prev < tol:
            converged = True
            break
        prev = cur

    order = np.argsort(m, kind="stable")
    w = w[order] / w.sum()
    return Gmm2Params(
        weight=(float(w[0]), float(w[1])),
        mean=(float(m[order][0]), float(m[order][1])),
        variance=(float(var[order][0]), float(var[order][1])),
        converged=converged,
        n_iter=it,
        loglik_trace=tuple(trace),
    )
