"""Gaussian mixture over the embedding space: densities, EM, sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_VAR_FLOOR = 1e-4


@dataclass
class GmmParams:
    weights: np.ndarray        # (T,), simplex
    means: np.ndarray          # (T, V)
    covariances: np.ndarray    # diagonal: (T, V) variances; full: (T, V, V)
    mode: str = "diagonal"     # "diagonal" | "full"

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def validate(self, floor: float = 0.0) -> None:
        if abs(self.weights.sum() - 1.0) > 1e-12 or (self.weights < 0).any():
            raise ValueError("mixture weights must form a simplex")
        if self.mode == "diagonal":
            if (self.covariances < floor).any():
                raise ValueError("variance below floor")
        elif self.mode == "full":
            for k in range(self.n_components):
                eig = np.linalg.eigvalsh(self.covariances[k])
                if (eig < floor).any():
                    raise ValueError("covariance eigenvalue below floor")
        else:
            raise ValueError(f"unknown covariance mode {self.mode!r}")


def standard_normal_params(n_components: int, dim: int, mode: str = "diagonal") -> GmmParams:
    """Uniform weights, zero means, identity covariances."""
    weights = np.full(n_components, 1.0 / n_components)
    means = np.zeros((n_components, dim))
    if mode == "diagonal":
        cov = np.ones((n_components, dim))
    else:
        cov = np.tile(np.eye(dim), (n_components, 1, 1))
    return GmmParams(weights=weights, means=means, covariances=cov, mode=mode)


def _component_log_densities(x: np.ndarray, params: GmmParams) -> np.ndarray:
    """log N(x | mu_k, Sigma_k) for each component; x is (N, V) or (V,)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    T, V = params.means.shape
    out = np.empty((x.shape[0], T))
    if params.mode == "diagonal":
        var = params.covariances                    # (T, V)
        log_norm = -0.5 * (V * np.log(2 * np.pi) + np.log(var).sum(axis=1))
        for k in range(T):
            diff = x - params.means[k]
            out[:, k] = log_norm[k] - 0.5 * np.sum(diff * diff / var[k], axis=1)
    else:
        for k in range(T):
            chol = np.linalg.cholesky(params.covariances[k])
            diff = x - params.means[k]
            sol = np.linalg.solve(chol, diff.T)     # (V, N)
            maha = np.sum(sol * sol, axis=0)
            log_det = 2.0 * np.log(np.diag(chol)).sum()
            out[:, k] = -0.5 * (V * np.log(2 * np.pi) + log_det + maha)
    return out


def _log_joint(x: np.ndarray, params: GmmParams) -> np.ndarray:
    with np.errstate(divide="ignore"):
        log_w = np.log(params.weights)
    return _component_log_densities(x, params) + log_w


def _logsumexp(a: np.ndarray, axis: int = -1) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    return np.squeeze(m, axis) + np.log(np.exp(a - m).sum(axis=axis))


def log_density(x: np.ndarray, params: GmmParams) -> float:
    """log sum_k pi_k N(x | mu_k, Sigma_k), via log-sum-exp."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input vector")
    if x.ndim == 1:
        return float(_logsumexp(_log_joint(x, params), axis=1)[0])
    return _logsumexp(_log_joint(x, params), axis=1)


def log_responsibilities(x: np.ndarray, params: GmmParams) -> np.ndarray:
    lj = _log_joint(x, params)
    out = lj - _logsumexp(lj, axis=1)[:, None]
    return out[0] if np.asarray(x).ndim == 1 else out


def responsibilities(x: np.ndarray, params: GmmParams) -> np.ndarray:
    """Posterior component probabilities; nonnegative, sums to 1."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input vector")
    return np.exp(log_responsibilities(x, params))


def log_density_grad(x: np.ndarray, params: GmmParams) -> np.ndarray:
    """Gradient of log_density w.r.t. x: sum_k r_k Sigma_k^{-1} (mu_k - x)."""
    x = np.asarray(x, dtype=np.float64)
    r = responsibilities(x, params)
    grad = np.zeros_like(x)
    for k in range(params.n_components):
        diff = params.means[k] - x
        if params.mode == "diagonal":
            grad += r[k] * diff / params.covariances[k]
        else:
            grad += r[k] * np.linalg.solve(params.covariances[k], diff)
    return grad


def log_density_and_grad(x: np.ndarray, params: GmmParams):
    """Batched (log-density, gradient) for rows of x; one pass over the
    components instead of one call per vector."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    lj = _log_joint(x, params)                       # (N, T)
    lse = _logsumexp(lj, axis=1)                     # (N,)
    r = np.exp(lj - lse[:, None])                    # (N, T)
    grad = np.zeros_like(x)
    for k in range(params.n_components):
        diff = params.means[k] - x
        if params.mode == "diagonal":
            grad += r[:, k][:, None] * (diff / params.covariances[k])
        else:
            grad += r[:, k][:, None] * np.linalg.solve(params.covariances[k], diff.T).T
    return lse, grad


def sample(params: GmmParams, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw component ~ pi, then x ~ N(mu_k, Sigma_k)."""
    n = 1 if size is None else size
    ks = rng.choice(params.n_components, size=n, p=params.weights)
    out = np.empty((n, params.dim))
    for i, k in enumerate(ks):
        z = rng.standard_normal(params.dim)
        if params.mode == "diagonal":
            out[i] = params.means[k] + np.sqrt(params.covariances[k]) * z
        else:
            chol = np.linalg.cholesky(params.covariances[k])
            out[i] = params.means[k] + chol @ z
    return out[0] if size is None else out


def _kmeanspp_means(data: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = data.shape[0]
    means = np.empty((k, data.shape[1]))
    means[0] = data[rng.integers(n)]
    d2 = np.sum((data - means[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            means[j] = data[rng.integers(n)]
            continue
        means[j] = data[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((data - means[j]) ** 2, axis=1))
    return means


def _floor_covariances(cov: np.ndarray, mode: str, floor: float) -> np.ndarray:
    if mode == "diagonal":
        return np.maximum(cov, floor)
    out = np.empty_like(cov)
    for k in range(cov.shape[0]):
        sym = 0.5 * (cov[k] + cov[k].T)
        eigval, eigvec = np.linalg.eigh(sym)
        eigval = np.maximum(eigval, floor)
        out[k] = (eigvec * eigval) @ eigvec.T
    return out


def _initial_params(
    data: np.ndarray, n_components: int, mode: str, floor: float, rng: np.random.Generator
) -> GmmParams:
    # k-means++ seeding of means, uniform weights, pooled diagonal covariance.
    means = _kmeanspp_means(data, n_components, rng)
    pooled = np.maximum(data.var(axis=0), floor)
    if mode == "diagonal":
        cov = np.tile(pooled, (n_components, 1))
    else:
        cov = np.tile(np.diag(pooled), (n_components, 1, 1))
    weights = np.full(n_components, 1.0 / n_components)
    return GmmParams(weights=weights, means=means, covariances=cov, mode=mode)


def fit_em(
    vectors: np.ndarray,
    n_components: int,
    max_iters: int = 100,
    tol: float = 1e-4,
    rng: np.random.Generator | None = None,
    mode: str = "diagonal",
    var_floor: float = DEFAULT_VAR_FLOOR,
    init: GmmParams | None = None,
    return_trace: bool = False,
):
    """EM fit; stops when per-sample log-likelihood improves by < tol.

    ``init`` warm-starts from existing parameters; otherwise means are
    seeded k-means++-style from the data.
    """
    data = np.asarray(vectors, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError("vectors must be a 2-D array")
    n, dim = data.shape
    if n_components < 1:
        raise ValueError("need at least one component")
    if n < n_components:
        raise ValueError(f"need at least {n_components} vectors, got {n}")
    if rng is None:
        rng = np.random.default_rng(0)

    params = init if init is not None else _initial_params(data, n_components, mode, var_floor, rng)
    trace: list[float] = []
    prev_ll = -np.inf
    for _ in range(max_iters):
        lj = _log_joint(data, params)                     # (N, T)
        lse = _logsumexp(lj, axis=1)                      # (N,)
        ll = float(lse.mean())
        trace.append(ll)
        resp = np.exp(lj - lse[:, None])                  # (N, T)
        nk = resp.sum(axis=0)
        nk = np.maximum(nk, 1e-300)
        weights = nk / n
        means = (resp.T @ data) / nk[:, None]
        if mode == "diagonal":
            sq = resp.T @ (data * data) / nk[:, None]
            cov = sq - means * means
        else:
            cov = np.empty((n_components, dim, dim))
            for k in range(n_components):
                diff = data - means[k]
                cov[k] = (resp[:, k][:, None] * diff).T @ diff / nk[k]
        cov = _floor_covariances(cov, mode, var_floor)
        params = GmmParams(weights=weights, means=means, covariances=cov, mode=mode)
        if ll - prev_ll < tol and np.isfinite(prev_ll):
            break
        prev_ll = ll
    params.validate(floor=var_floor * (1 - 1e-9))
    return (params, trace) if return_trace else params
