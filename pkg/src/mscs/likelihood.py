"""Maximum-likelihood fits of the five model families, restricted to a candidate model.

Parameterizations (``theta`` as accepted by :func:`loglik_at`):

* normal-location: mean vector, length p (unit covariance).
* normal-block-cov: p x p covariance matrix (mean fixed at 0).
* logistic / poisson: coefficient vector, length p, with the negative-sign
  links ``logit(pi) = -x'theta`` and ``log(lambda) = -x'theta``.
* ising: p x p upper-triangular matrix; ``theta[j, j]`` are main effects and
  ``theta[j, k]`` (j < k) interactions. ``P(y) = exp(sum_{j<=k} theta_jk y_j y_k + psi)``
  with ``psi`` the negative log normalizer over {0, 1}^p.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import expit, gammaln, logsumexp

from .errors import (
    FitDiverged,
    InvalidData,
    ModelSpaceMismatch,
    RankDeficientDesign,
    SingularBlock,
    StateSpaceTooLarge,
)
from .model_space import PARTITION, SUBSET, ModelIndex

LOG_2PI = math.log(2.0 * math.pi)

GRAD_TOL = 1e-8
MAX_ITER = 100
MAX_HALVINGS = 30
MAX_ISING_P = 20
_ROUNDOFF = 1e-13


class Family(str, enum.Enum):
    NORMAL_LOCATION = "normal-location"
    NORMAL_BLOCK_COV = "normal-block-cov"
    LOGISTIC = "logistic"
    POISSON = "poisson"
    ISING = "ising"

    @property
    def model_kind(self) -> str:
        if self in (Family.NORMAL_BLOCK_COV, Family.ISING):
            return PARTITION
        return SUBSET

    @property
    def is_regression(self) -> bool:
        return self in (Family.LOGISTIC, Family.POISSON)


@dataclass(frozen=True)
class Dataset:
    family: Family
    y: np.ndarray
    x: np.ndarray | None = None

    def __post_init__(self):
        family = Family(self.family)
        object.__setattr__(self, "family", family)
        y = np.asarray(self.y, dtype=float)
        if family.is_regression:
            y = y.reshape(-1)
            if self.x is None:
                raise InvalidData("regression families need a covariate matrix")
            x = np.asarray(self.x, dtype=float)
            if x.ndim != 2 or x.shape[0] != y.shape[0]:
                raise InvalidData(f"x has shape {x.shape}, expected ({y.shape[0]}, p)")
            if not np.all(np.isfinite(x)):
                raise InvalidData("covariates must be finite")
            object.__setattr__(self, "x", x)
        else:
            if y.ndim != 2:
                raise InvalidData("multivariate families need an n x p response matrix")
        if y.shape[0] < 1:
            raise InvalidData("no observations")
        if not np.all(np.isfinite(y)):
            raise InvalidData("responses must be finite")
        if family in (Family.LOGISTIC, Family.ISING) and not np.all((y == 0) | (y == 1)):
            raise InvalidData(f"{family.value} responses must be 0/1")
        if family == Family.POISSON and not np.all((y >= 0) & (y == np.round(y))):
            raise InvalidData("poisson responses must be non-negative integers")
        if family == Family.ISING and y.shape[1] > MAX_ISING_P:
            raise StateSpaceTooLarge(f"exact Ising likelihood limited to p <= {MAX_ISING_P}")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        if self.family.is_regression:
            return self.x.shape[1]
        return self.y.shape[1]


@dataclass
class FitResult:
    model: ModelIndex
    theta_hat: np.ndarray
    loglik: float
    p_gamma: int
    converged: bool = True
    iterations: int = 0
    grad_norm: float = 0.0
    notes: list[str] = field(default_factory=list)


def free_parameter_count(family: Family, model: ModelIndex) -> int:
    family = Family(family)
    if model.kind == SUBSET:
        return len(model.items)
    sizes = [len(b) for b in model.blocks]
    if family == Family.NORMAL_BLOCK_COV:
        return sum(s * (s + 1) // 2 for s in sizes)
    return len(model.items) + sum(s * (s - 1) // 2 for s in sizes)


def _check_model(data: Dataset, model: ModelIndex) -> None:
    if model.kind != data.family.model_kind:
        raise ModelSpaceMismatch(f"{model.kind} model given for {data.family.value} data")
    if model.kind == PARTITION and len(model.items) != data.p:
        raise ModelSpaceMismatch(f"partition of length {len(model.items)} for p={data.p}")
    if model.kind == SUBSET and model.items and model.items[-1] > data.p:
        raise ModelSpaceMismatch(f"model {model} references variables beyond p={data.p}")


def fit(data: Dataset, model: ModelIndex) -> FitResult:
    """MLE of ``data.family`` restricted to ``model``."""
    _check_model(data, model)
    family = data.family
    if family == Family.NORMAL_LOCATION:
        return _fit_normal_location(data, model)
    if family == Family.NORMAL_BLOCK_COV:
        return _fit_block_cov(data, model)
    if family.is_regression:
        return _fit_glm(data, model)
    return _fit_ising(data, model)


def loglik_at(data: Dataset, theta) -> float:
    """Exact log-likelihood (nats) at ``theta`` in the family's native parameterization."""
    return _loglik_grad(data, np.asarray(theta, dtype=float), want_grad=False)[0]


def loglik_grad(data: Dataset, theta) -> np.ndarray:
    """Gradient of :func:`loglik_at` with the same shape as ``theta``.

    For the covariance and Ising families each upper-triangular entry is one
    parameter, so off-diagonal covariance entries pick up a factor 2.
    """
    return _loglik_grad(data, np.asarray(theta, dtype=float), want_grad=True)[1]


def _loglik_grad(data: Dataset, theta: np.ndarray, want_grad: bool):
    family = data.family
    n, p = data.n, data.p
    y = data.y
    if family == Family.NORMAL_LOCATION:
        resid = y - theta
        ll = -0.5 * n * p * LOG_2PI - 0.5 * float(np.sum(resid**2))
        return ll, (resid.sum(axis=0) if want_grad else None)
    if family == Family.NORMAL_BLOCK_COV:
        s = _scatter(data)
        sign, logdet = np.linalg.slogdet(theta)
        if sign <= 0:
            return -math.inf, None
        inv = np.linalg.inv(theta)
        ll = -0.5 * n * (logdet + float(np.sum(inv * s)) + p * LOG_2PI)
        if not want_grad:
            return ll, None
        g = 0.5 * n * (inv @ s @ inv - inv)
        return ll, np.triu(2.0 * g - np.diag(np.diag(g)))
    if family.is_regression:
        eta = -(data.x @ theta)
        ll = _glm_loglik(family, y, eta)
        if not want_grad:
            return ll, None
        mu = expit(eta) if family == Family.LOGISTIC else np.exp(eta)
        return ll, -(data.x.T @ (y - mu))
    states, tri = _ising_states(p)
    vec = theta[tri]
    stats = _ising_suff(data)
    energies = _ising_design(p) @ vec
    log_z = logsumexp(energies)
    ll = float(stats @ vec) - n * log_z
    if not want_grad:
        return ll, None
    probs = np.exp(energies - log_z)
    g = np.zeros((p, p))
    g[tri] = stats - n * (probs @ _ising_design(p))
    return ll, g


# -- normal location -------------------------------------------------------


def _fit_normal_location(data: Dataset, model: ModelIndex) -> FitResult:
    theta = np.zeros(data.p)
    idx = [j - 1 for j in model.items]
    theta[idx] = data.y[:, idx].mean(axis=0)
    return FitResult(model, theta, loglik_at(data, theta), len(idx))


# -- block-diagonal covariance ---------------------------------------------


def _scatter(data: Dataset) -> np.ndarray:
    return data.y.T @ data.y / data.n


def _fit_block_cov(data: Dataset, model: ModelIndex) -> FitResult:
    n, p = data.n, data.p
    s = _scatter(data)
    sigma = np.zeros((p, p))
    logdet = 0.0
    for block in model.blocks:
        idx = np.array(block) - 1
        sub = s[np.ix_(idx, idx)]
        try:
            chol = np.linalg.cholesky(sub)
        except np.linalg.LinAlgError:
            raise SingularBlock(
                f"block {block} of model {model} is not positive definite (n={n})"
            ) from None
        logdet += 2.0 * float(np.sum(np.log(np.diag(chol))))
        sigma[np.ix_(idx, idx)] = sub
    # tr(Sigma^-1 S) = p at the block MLE
    ll = -0.5 * n * (logdet + p * LOG_2PI + p)
    return FitResult(model, sigma, ll, free_parameter_count(data.family, model))


# -- GLMs ------------------------------------------------------------------


def _glm_loglik(family: Family, y: np.ndarray, eta: np.ndarray) -> float:
    with np.errstate(over="ignore", invalid="ignore"):
        if family == Family.LOGISTIC:
            val = float(np.sum(y * eta - np.logaddexp(0.0, eta)))
        else:
            val = float(np.sum(y * eta - np.exp(eta) - gammaln(y + 1.0)))
    return val if math.isfinite(val) else -math.inf


def _newton(objective, k: int, start=None):
    """Maximize a concave function by Newton steps with step halving.

    ``objective(beta, need_hess)`` returns ``(value, grad, hess)``.
    Returns ``(beta, value, grad_norm, iterations, converged)``.
    """
    beta = np.zeros(k) if start is None else np.array(start, dtype=float)
    value, grad, hess = objective(beta, True)
    for it in range(MAX_ITER + 1):
        gnorm = float(np.max(np.abs(grad))) if k else 0.0
        if gnorm <= GRAD_TOL:
            return beta, value, gnorm, it, True
        if it == MAX_ITER:
            break
        try:
            step = np.linalg.solve(-hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(-hess, grad, rcond=None)[0]
        if not np.all(np.isfinite(step)):
            step = np.linalg.lstsq(-hess, grad, rcond=None)[0]
        # "no decrease" up to round-off in the summed log-likelihood
        floor = value - _ROUNDOFF * max(1.0, abs(value))
        t = 1.0
        for _ in range(MAX_HALVINGS + 1):
            cand = beta + t * step
            cval = objective(cand, False)[0]
            if cval >= floor:
                break
            t *= 0.5
        else:
            return beta, value, gnorm, it, False
        beta = cand
        value, grad, hess = objective(beta, True)
    return beta, value, gnorm, MAX_ITER, False


def _fit_glm(data: Dataset, model: ModelIndex) -> FitResult:
    family = data.family
    idx = [j - 1 for j in model.items]
    xs = data.x[:, idx]
    y = data.y
    k = len(idx)
    theta = np.zeros(data.p)
    if k == 0:
        ll = _glm_loglik(family, y, np.zeros_like(y))
        return FitResult(model, theta, ll, 0)
    try:
        np.linalg.cholesky(xs.T @ xs)
    except np.linalg.LinAlgError:
        raise RankDeficientDesign(
            f"design columns {list(model.items)} are rank deficient"
        ) from None

    # internal coefficients b = -theta so that eta = xs @ b
    def objective(b, need_hess):
        eta = xs @ b
        ll = _glm_loglik(family, y, eta)
        if not need_hess:
            return ll, None, None
        with np.errstate(over="ignore"):
            mu = expit(eta) if family == Family.LOGISTIC else np.exp(eta)
        w = mu * (1.0 - mu) if family == Family.LOGISTIC else mu
        grad = xs.T @ (y - mu)
        hess = -(xs.T * w) @ xs
        return ll, grad, hess

    b, ll, gnorm, iters, ok = _newton(objective, k)
    if not ok:
        raise FitDiverged(
            f"{family.value} fit of model {model} did not converge "
            f"(|grad|={gnorm:.3g} after {iters} iterations)"
        )
    theta[idx] = -b
    notes = []
    if family == Family.LOGISTIC and np.max(np.abs(xs @ b)) > 30:
        notes.append("fitted probabilities numerically 0 or 1 (separation)")
    return FitResult(model, theta, ll, k, True, iters, gnorm, notes)


# -- Ising -----------------------------------------------------------------


@lru_cache(maxsize=None)
def _ising_states(p: int):
    if p > MAX_ISING_P:
        raise StateSpaceTooLarge(f"exact Ising enumeration limited to p <= {MAX_ISING_P}")
    codes = np.arange(2**p)
    states = ((codes[:, None] >> np.arange(p)) & 1).astype(float)
    tri = np.triu_indices(p)
    states.setflags(write=False)
    return states, tri


@lru_cache(maxsize=None)
def _ising_design(p: int) -> np.ndarray:
    # sufficient statistics y_j y_k (j <= k) for every state
    states, tri = _ising_states(p)
    out = states[:, tri[0]] * states[:, tri[1]]
    out.setflags(write=False)
    return out


def _ising_suff(data: Dataset) -> np.ndarray:
    tri = np.triu_indices(data.p)
    return (data.y[:, tri[0]] * data.y[:, tri[1]]).sum(axis=0)


def ising_log_normalizer(theta) -> float:
    """psi(theta) = -log sum_y exp(sum_{j<=k} theta_jk y_j y_k)."""
    theta = np.asarray(theta, dtype=float)
    p = theta.shape[0]
    _, tri = _ising_states(p)
    return -float(logsumexp(_ising_design(p) @ theta[tri]))


def ising_state_probabilities(theta) -> tuple[np.ndarray, np.ndarray]:
    """All 2^p states (rows) and their exact probabilities."""
    theta = np.asarray(theta, dtype=float)
    p = theta.shape[0]
    states, tri = _ising_states(p)
    energies = _ising_design(p) @ theta[tri]
    return states, np.exp(energies - logsumexp(energies))


def ising_free_mask(model: ModelIndex) -> np.ndarray:
    """Boolean p x p upper-triangular mask of the free parameters of a partition."""
    p = len(model.items)
    labels = np.array(model.items)
    mask = labels[:, None] == labels[None, :]
    return np.triu(mask)


def _fit_ising(data: Dataset, model: ModelIndex) -> FitResult:
    p, n = data.p, data.n
    _, tri = _ising_states(p)
    design = _ising_design(p)
    free = ising_free_mask(model)[tri]
    d = design[:, free]
    stats = _ising_suff(data)[free]

    def objective(v, need_hess):
        energies = d @ v
        log_z = logsumexp(energies)
        ll = float(stats @ v) - n * log_z
        if not need_hess:
            return ll, None, None
        probs = np.exp(energies - log_z)
        mean = probs @ d
        cov = (d * probs[:, None]).T @ d - np.outer(mean, mean)
        return ll, stats - n * mean, -n * cov

    v, ll, gnorm, iters, ok = _newton(objective, int(free.sum()))
    if not ok:
        raise FitDiverged(
            f"ising fit of model {model} did not converge "
            f"(|grad|={gnorm:.3g} after {iters} iterations)"
        )
    vec = np.zeros(len(tri[0]))
    vec[free] = v
    theta = np.zeros((p, p))
    theta[tri] = vec
    return FitResult(model, theta, ll, int(free.sum()), True, iters, gnorm)
