"""Synthetic designs and the Monte Carlo harness for coverage, cardinality and importance.

Designs (``ScenarioSpec.setting``):

* ``1``: theta_j = psi for the first p/2 coordinates, 0 elsewhere.
* ``2``: theta_j = psi / j for the first p/2 coordinates, 0 elsewhere.
* ``"sampler"``: Models 3-4 with fixed leading coefficients and AR(0.5)
  correlated covariates, used for the adaptive-search experiments.

Model 2 ignores psi; its covariance is block diagonal with the first p/2
variables correlated (0.5 for setting 1, 0.5 / |i - j| for setting 2) and the
remaining variables independent.

Run ``r`` of a scenario draws everything from ``SeedSequence(seed, spawn_key=(r,))``.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .adaptive import AsConfig, run_mscs_as
from .core import ImportanceReport, build_mscs, importance_from_survivors, inclusion_importance
from .errors import InvalidSpec, MscsError, StateSpaceTooLarge
from .likelihood import MAX_ISING_P, Dataset, Family, fit, ising_state_probabilities
from .model_space import ModelIndex, ModelSpace, features_of

log = logging.getLogger(__name__)

SAMPLER = "sampler"

DEFAULT_PSI = {
    (1, 1): 1.0,
    (3, 1): 1.0,
    (4, 1): 0.2,
    (1, 2): 1.0,
    (3, 2): 2.0,
    (4, 2): 0.4,
}

SAMPLER_THETA = {
    3: (2.5, -1.9, 2.8, -2.2, 3.0),
    4: (1.25, -0.95, 0.9, -1.1, 0.6),
}

FAMILY_OF_MODEL = {
    1: Family.NORMAL_LOCATION,
    2: Family.NORMAL_BLOCK_COV,
    3: Family.LOGISTIC,
    4: Family.POISSON,
}

MAX_DISCARD_FRACTION = 0.05


@dataclass(frozen=True)
class ScenarioSpec:
    model_id: int
    setting: int | str = 1
    n: int = 100
    p: int = 8
    psi: float | None = None
    seed: int = 0
    runs: int = 500
    alphas: tuple[float, ...] = (0.10, 0.05, 0.01)

    def __post_init__(self):
        if self.model_id not in FAMILY_OF_MODEL:
            raise InvalidSpec(f"model must be 1..4, got {self.model_id}")
        if self.setting not in (1, 2, SAMPLER):
            raise InvalidSpec(f"setting must be 1, 2 or {SAMPLER!r}, got {self.setting!r}")
        if self.setting == SAMPLER and self.model_id not in SAMPLER_THETA:
            raise InvalidSpec("the sampler design exists for models 3 and 4 only")
        if self.setting == SAMPLER and self.p < 5:
            raise InvalidSpec("the sampler design needs p >= 5")
        if self.setting != SAMPLER and (self.p < 2 or self.p % 2):
            raise InvalidSpec("settings 1 and 2 need an even p >= 2")
        if self.n < 1 or self.runs < 1:
            raise InvalidSpec("n and runs must be positive")
        if not self.alphas or any(not 0 < a < 1 for a in self.alphas):
            raise InvalidSpec("alphas must lie in (0, 1)")
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))

    @property
    def family(self) -> Family:
        return FAMILY_OF_MODEL[self.model_id]

    @property
    def signal(self) -> float:
        if self.psi is not None:
            return float(self.psi)
        return DEFAULT_PSI.get((self.model_id, self.setting), 1.0)

    def default_space(self) -> ModelSpace:
        if self.model_id == 2:
            return ModelSpace.partitions(self.p)
        return ModelSpace.subsets(self.p)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["psi"] = self.signal if self.model_id != 2 else None
        d["alphas"] = list(self.alphas)
        return d


def true_theta(spec: ScenarioSpec) -> np.ndarray:
    """True coefficient vector (models 1, 3, 4)."""
    if spec.model_id == 2:
        raise InvalidSpec("model 2 is parameterized by its covariance; see true_covariance")
    theta = np.zeros(spec.p)
    if spec.setting == SAMPLER:
        lead = SAMPLER_THETA[spec.model_id]
        theta[: len(lead)] = lead
        return theta
    half = spec.p // 2
    j = np.arange(1, half + 1)
    theta[:half] = spec.signal if spec.setting == 1 else spec.signal / j
    return theta


def true_covariance(spec: ScenarioSpec) -> np.ndarray:
    if spec.model_id != 2:
        raise InvalidSpec("only model 2 has a structured covariance")
    p, half = spec.p, spec.p // 2
    sigma = np.eye(p)
    for i in range(half):
        for k in range(i + 1, half):
            v = 0.5 if spec.setting == 1 else 0.5 / abs(i - k)
            sigma[i, k] = sigma[k, i] = v
    return sigma


def true_model(spec: ScenarioSpec) -> ModelIndex:
    if spec.model_id == 2:
        half = spec.p // 2
        return ModelIndex.partition([0] * half + list(range(1, spec.p - half + 1)))
    return ModelIndex.subset(int(j) + 1 for j in np.flatnonzero(true_theta(spec)))


def run_stream(seed: int, run_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(run_index,))))


def _covariates(spec: ScenarioSpec, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((spec.n, spec.p))
    if spec.setting != SAMPLER:
        return z
    idx = np.arange(spec.p)
    chol = np.linalg.cholesky(0.5 ** np.abs(idx[:, None] - idx[None, :]))
    return z @ chol.T


def gen_dataset(spec: ScenarioSpec, run_index: int) -> tuple[Dataset, ModelIndex]:
    """Data for one Monte Carlo replicate, plus the true model."""
    rng = run_stream(spec.seed, run_index)
    n, p = spec.n, spec.p
    if spec.model_id == 1:
        y = true_theta(spec) + rng.standard_normal((n, p))
        return Dataset(Family.NORMAL_LOCATION, y), true_model(spec)
    if spec.model_id == 2:
        chol = np.linalg.cholesky(true_covariance(spec))
        y = rng.standard_normal((n, p)) @ chol.T
        return Dataset(Family.NORMAL_BLOCK_COV, y), true_model(spec)
    x = _covariates(spec, rng)
    eta = -(x @ true_theta(spec))
    if spec.model_id == 3:
        y = (rng.random(n) < 1.0 / (1.0 + np.exp(-eta))).astype(float)
        return Dataset(Family.LOGISTIC, y, x), true_model(spec)
    y = rng.poisson(np.exp(eta)).astype(float)
    return Dataset(Family.POISSON, y, x), true_model(spec)


def gen_ising(theta, n: int, rng: np.random.Generator) -> Dataset:
    """Exact draws from the Ising law by inverse-CDF sampling over all 2^p states."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape[0] > MAX_ISING_P:
        raise StateSpaceTooLarge(f"exact Ising sampling limited to p <= {MAX_ISING_P}")
    states, probs = ising_state_probabilities(theta)
    cdf = np.cumsum(probs)
    idx = np.searchsorted(cdf, rng.random(n) * cdf[-1], side="right")
    return Dataset(Family.ISING, states[np.minimum(idx, len(probs) - 1)])


# -- Monte Carlo harness ---------------------------------------------------


@dataclass
class Replicate:
    run: int
    covered: list[bool] | None = None
    cardinality: list[int] | None = None
    ii: list[np.ndarray] | None = None
    error: str = ""


def _replicate(spec: ScenarioSpec, space: ModelSpace, run: int, keep_ii: bool) -> Replicate:
    data, truth = gen_dataset(spec, run)
    try:
        base = build_mscs(data, space, min(spec.alphas))
    except MscsError as exc:
        log.warning("run %d discarded: %s", run, exc)
        return Replicate(run, error=f"{type(exc).__name__}: {exc}")
    covered, card, iis = [], [], []
    for alpha in spec.alphas:
        res = base.at_alpha(alpha)
        members = set(res.survivors)
        covered.append(truth in members)
        card.append(len(members))
        if keep_ii:
            iis.append(inclusion_importance(res).ii)
    return Replicate(run, covered, card, iis if keep_ii else None)


def _replicate_task(args):
    return _replicate(*args)


def run_replicates(
    spec: ScenarioSpec, space: ModelSpace | None = None, *, keep_ii: bool = False, workers: int = 1
) -> list[Replicate]:
    space = spec.default_space() if space is None else space
    tasks = [(spec, space, r, keep_ii) for r in range(spec.runs)]
    if workers <= 1:
        return [_replicate(*t) for t in tasks]
    with ProcessPoolExecutor(workers) as ex:
        return list(ex.map(_replicate_task, tasks, chunksize=max(1, len(tasks) // (8 * workers))))


@dataclass
class McSummary:
    spec: ScenarioSpec
    alphas: tuple[float, ...]
    coverage: list[float]
    mean_cardinality: list[float]
    completed: int
    discarded: int
    failures: list[str] = field(default_factory=list)

    @property
    def flagged(self) -> bool:
        return self.discarded > MAX_DISCARD_FRACTION * (self.completed + self.discarded)

    def coverage_se(self, i: int) -> float:
        c = self.coverage[i]
        return math.sqrt(c * (1 - c) / self.completed) if self.completed else math.nan

    def rows(self) -> list[dict]:
        """Table layout: one row per (metric, alpha), one column per (n, p)."""
        col = f"n={self.spec.n},p={self.spec.p}"
        out = []
        for metric, values in (("coverage_pct", self.coverage), ("cardinality", self.mean_cardinality)):
            for a, v in zip(self.alphas, values):
                scale = 100.0 if metric == "coverage_pct" else 1.0
                out.append({"metric": metric, "alpha": a, col: round(v * scale, 6)})
        return out

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "alphas": list(self.alphas),
            "coverage": self.coverage,
            "mean_cardinality": self.mean_cardinality,
            "completed": self.completed,
            "discarded": self.discarded,
            "flagged": self.flagged,
            "failures": self.failures,
        }


def summarize(spec: ScenarioSpec, reps: list[Replicate]) -> McSummary:
    done = [r for r in reps if not r.error]
    failed = [f"run {r.run}: {r.error}" for r in reps if r.error]
    k = len(spec.alphas)
    if done:
        coverage = [float(np.mean([r.covered[i] for r in done])) for i in range(k)]
        card = [float(np.mean([r.cardinality[i] for r in done])) for i in range(k)]
    else:
        coverage = [math.nan] * k
        card = [math.nan] * k
    summary = McSummary(spec, spec.alphas, coverage, card, len(done), len(failed), failed)
    if summary.flagged:
        log.warning("%d of %d runs discarded for %s", len(failed), len(reps), spec)
    return summary


def mc_coverage(spec: ScenarioSpec, space: ModelSpace | None = None, workers: int = 1) -> McSummary:
    """Coverage of the true model and mean confidence-set size over ``spec.runs`` replicates."""
    return summarize(spec, run_replicates(spec, space, workers=workers))


def ii_null_bound(alpha: float, delta: float) -> float:
    """Asymptotic bound alpha (1 + 2 delta) / (4 delta) on P(II_k > 1/2 + delta) for null k."""
    if not 0 < delta < 0.5 + 1e-12:
        raise ValueError("delta must lie in (0, 1/2]")
    return alpha * (1 + 2 * delta) / (4 * delta)


@dataclass
class NullBoundReport:
    alpha: float
    delta: float
    bound: float
    features: list
    exceed_prob: np.ndarray
    se: np.ndarray
    runs: int

    @property
    def passed(self) -> np.ndarray:
        return self.exceed_prob <= self.bound + 3 * self.se

    def rows(self) -> list[dict]:
        return [
            {
                "feature": str(f),
                "exceed_prob": float(e),
                "se": float(s),
                "bound": self.bound,
                "within_bound": bool(ok),
            }
            for f, e, s, ok in zip(self.features, self.exceed_prob, self.se, self.passed)
        ]


def ii_null_bound_check(
    spec: ScenarioSpec,
    space: ModelSpace | None = None,
    delta: float = 1 / 6,
    alpha: float = 0.05,
    workers: int = 1,
) -> NullBoundReport:
    """Monte Carlo frequency of II_k > 1/2 + delta for every feature outside the true model."""
    space = spec.default_space() if space is None else space
    spec = ScenarioSpec(**{**asdict(spec), "alphas": (alpha,)})
    reps = [r for r in run_replicates(spec, space, keep_ii=True, workers=workers) if not r.error]
    features = space.features()
    true_feats = features_of(space, true_model(spec))
    null_idx = [i for i, f in enumerate(features) if f not in true_feats]
    ii = np.array([r.ii[0] for r in reps])
    exceed = (ii[:, null_idx] > 0.5 + delta).mean(axis=0)
    se = np.sqrt(exceed * (1 - exceed) / len(reps))
    return NullBoundReport(
        alpha, delta, ii_null_bound(alpha, delta), [features[i] for i in null_idx], exceed, se, len(reps)
    )


# -- parametric bootstrap --------------------------------------------------


def simulate_from_fit(data: Dataset, full_theta, rng: np.random.Generator) -> Dataset:
    """A dataset of the same shape drawn from the fitted full model (covariates held fixed)."""
    n, p = data.n, data.p
    fam = data.family
    theta = np.asarray(full_theta, dtype=float)
    if fam == Family.NORMAL_LOCATION:
        return Dataset(fam, theta + rng.standard_normal((n, p)))
    if fam == Family.NORMAL_BLOCK_COV:
        chol = np.linalg.cholesky(theta)
        return Dataset(fam, rng.standard_normal((n, p)) @ chol.T)
    if fam == Family.LOGISTIC:
        prob = 1.0 / (1.0 + np.exp(data.x @ theta))
        return Dataset(fam, (rng.random(n) < prob).astype(float), data.x)
    if fam == Family.POISSON:
        return Dataset(fam, rng.poisson(np.exp(-(data.x @ theta))).astype(float), data.x)
    return gen_ising(theta, n, rng)


def _importance(data, space, alpha, method, as_config, seed) -> ImportanceReport:
    if method == "exhaustive":
        return inclusion_importance(build_mscs(data, space, alpha))
    cfg = as_config or AsConfig(alpha_star=alpha)
    cfg = AsConfig(**{**cfg.to_dict(), "alpha_star": alpha, "seed": seed})
    res = run_mscs_as(data, space, cfg)
    return importance_from_survivors(space, res.survivors)


def bootstrap_ii(
    data: Dataset,
    space: ModelSpace,
    alpha: float,
    S: int,
    method: str = "exhaustive",
    *,
    seed: int = 0,
    as_config: AsConfig | None = None,
    level: float = 0.95,
) -> ImportanceReport:
    """Inclusion importance on ``data`` with parametric-bootstrap percentile intervals."""
    if method not in ("exhaustive", "adaptive"):
        raise InvalidSpec(f"unknown method {method!r}")
    if S < 1:
        raise InvalidSpec("need at least one bootstrap replicate")
    point = _importance(data, space, alpha, method, as_config, seed)
    full = fit(data, space.full_model())
    reps = []
    for s in range(S):
        rng = run_stream(seed, s)
        boot = simulate_from_fit(data, full.theta_hat, rng)
        reps.append(_importance(boot, space, alpha, method, as_config, seed + s + 1).ii)
    reps = np.array(reps)
    tail = 100 * (1 - level) / 2
    lo, hi = np.percentile(reps, [tail, 100 - tail], axis=0)
    return ImportanceReport(point.features, point.ii, lo, hi)
