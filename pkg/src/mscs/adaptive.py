"""Adaptive stochastic search for confidence-set members over subset spaces.

Models are drawn from independent Bernoulli inclusion weights. Each iteration
screens a batch of B models, raises the working level to the (1 - zeta)
empirical quantile of the batch p-values (capped at the target level), and
moves the weights towards the inclusion frequencies of the batch survivors.

Ranking uses log p-values: early batches in large spaces routinely produce
p-values that underflow to 0, and the ordering must survive that.

Random streams: iteration ``t`` draws from ``SeedSequence(seed, spawn_key=(1, t))``
and the final draw from ``spawn_key=(2,)``; model fits never touch the RNG,
so evaluating a batch in parallel leaves results unchanged.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .core import LrtRecord, importance_from_survivors, screen_models
from .errors import InvalidSpec, ModelSpaceMismatch, NoSurvivors
from .likelihood import Dataset, FitResult, fit
from .model_space import ALL_SUBSETS, ModelIndex, ModelSpace


@dataclass
class AsConfig:
    B: int = 300
    zeta: float = 0.25
    xi: float = 0.2
    alpha_star: float = 0.05
    alpha0: float | None = None
    stall_d: int = 10
    max_iters: int = 200
    fixed_iters: int | None = None
    omega0: Sequence[float] | None = None
    clamp: tuple[float, float] = (0.01, 0.99)
    final_draw: int = 10**6
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.B < 1 or self.final_draw < 1 or self.max_iters < 1:
            raise InvalidSpec("B, final_draw and max_iters must be positive")
        if not 0.0 < self.zeta < 1.0:
            raise InvalidSpec("zeta must lie in (0, 1)")
        if not 0.0 < self.xi <= 1.0:
            raise InvalidSpec("xi must lie in (0, 1]")
        if not 0.0 < self.alpha_star < 1.0:
            raise InvalidSpec("alpha_star must lie in (0, 1)")
        if self.alpha0 is not None and not 0.0 < self.alpha0 <= self.alpha_star:
            raise InvalidSpec("alpha0 must lie in (0, alpha_star]")
        if self.stall_d < 0:
            raise InvalidSpec("stall_d must be non-negative")
        if self.fixed_iters is not None and self.fixed_iters < 1:
            raise InvalidSpec("fixed_iters must be positive")
        lo, hi = self.clamp
        if not 0.0 < lo < hi < 1.0:
            raise InvalidSpec("clamp must satisfy 0 < lo < hi < 1")
        self.clamp = (float(lo), float(hi))
        if self.omega0 is not None:
            w = np.asarray(self.omega0, dtype=float)
            if np.any((w < 0) | (w > 1)):
                raise InvalidSpec("omega0 entries must lie in [0, 1]")

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["omega0"] is not None:
            d["omega0"] = [float(v) for v in d["omega0"]]
        d["clamp"] = list(d["clamp"])
        return d


@dataclass
class SamplerState:
    omega: np.ndarray
    t: int = 0
    alpha_t: float = 0.0
    stall: int = 0
    trajectory: list[dict] = field(default_factory=list)


@dataclass
class AsResult:
    omega: np.ndarray
    members: list[LrtRecord]
    hit_rate: float
    trajectory: list[dict]
    iterations: int
    converged: bool
    n_draws: int
    n_distinct: int
    alpha_star: float
    space: ModelSpace
    config: AsConfig | None = None

    @property
    def survivors(self) -> list[ModelIndex]:
        return [r.model for r in self.members]

    def importance(self):
        return importance_from_survivors(self.space, self.survivors)

    def trajectory_rows(self) -> list[dict]:
        rows = []
        for snap in self.trajectory:
            row = {
                "iteration": snap["iteration"],
                "alpha_t": snap["alpha_t"],
                "survivor_fraction": snap["survivor_fraction"],
            }
            for j, w in enumerate(snap["omega"], start=1):
                row[f"w{j}"] = float(w)
            rows.append(row)
        return rows

    def to_dict(self) -> dict:
        return {
            "alpha_star": self.alpha_star,
            "hit_rate": self.hit_rate,
            "iterations": self.iterations,
            "converged": self.converged,
            "n_draws": self.n_draws,
            "n_distinct": self.n_distinct,
            "omega": [float(w) for w in self.omega],
            "cardinality": len(self.members),
            "members": [r.to_dict() for r in self.members],
            "config": None if self.config is None else self.config.to_dict(),
        }


def rng_stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def _sample_masks(omega, B: int, rng: np.random.Generator, forced=()) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    masks = rng.random((B, omega.size)) < omega
    if forced:
        masks[:, [j - 1 for j in forced]] = True
    return masks


def sample_models(omega, B: int, rng: np.random.Generator, forced=()) -> list[ModelIndex]:
    """B independent draws with variable j kept with probability omega[j]."""
    return [ModelIndex.from_mask(m) for m in _sample_masks(omega, B, rng, forced)]


def _quantile_position(B: int, zeta: float) -> int:
    # 1-based position floor((1 - zeta) B), clipped to [1, B]
    return min(max(int(math.floor((1.0 - zeta) * B + 1e-9)), 1), B)


def update_alpha(pvalues, zeta: float, alpha_star: float) -> float:
    """min(p-value at sorted position floor((1 - zeta) B), alpha_star)."""
    pv = np.sort(np.asarray(pvalues, dtype=float), kind="stable")
    if pv.size == 0:
        raise ValueError("update_alpha needs at least one p-value")
    return float(min(pv[_quantile_position(pv.size, zeta) - 1], alpha_star))


def update_weights(
    models,
    pvalues,
    alpha_t: float,
    omega_prev,
    xi: float,
    clamp: tuple[float, float] = (0.01, 0.99),
    forced=(),
) -> np.ndarray:
    """Smoothed survivor inclusion frequencies.

    ``models`` is a boolean (B, p) array or a list of subset models. Survivors
    are the models with p-value strictly above ``alpha_t``. Raises
    :class:`NoSurvivors` when there are none.
    """
    omega_prev = np.asarray(omega_prev, dtype=float)
    masks = _as_masks(models, omega_prev.size)
    alive = np.asarray(pvalues, dtype=float) > alpha_t
    if not alive.any():
        raise NoSurvivors(f"no sampled model has p-value above {alpha_t:.3g}")
    freq = masks[alive].mean(axis=0)
    omega = xi * freq + (1.0 - xi) * omega_prev
    omega = np.clip(omega, clamp[0], clamp[1])
    if forced:
        omega[[j - 1 for j in forced]] = clamp[1]
    return omega


def _as_masks(models, p: int) -> np.ndarray:
    if isinstance(models, np.ndarray):
        return models.astype(bool)
    return np.array([m.mask(p) for m in models], dtype=bool).reshape(-1, p)


class _Evaluator:
    """LRT records with a per-model cache; the full fit is computed once."""

    def __init__(self, data: Dataset, space: ModelSpace, full_fit: FitResult | None, workers: int):
        self.data = data
        self.full = full_fit if full_fit is not None else fit(data, space.full_model())
        self.workers = workers
        self.cache: dict[ModelIndex, LrtRecord] = {}

    def __call__(self, models: list[ModelIndex]) -> list[LrtRecord]:
        todo = list(dict.fromkeys(m for m in models if m not in self.cache))
        if todo:
            for rec in screen_models(self.data, todo, self.full, self.workers):
                self.cache[rec.model] = rec
        return [self.cache[m] for m in models]


def _check_space(data: Dataset, space: ModelSpace) -> None:
    if space.kind != ALL_SUBSETS:
        raise ModelSpaceMismatch("adaptive sampling runs on subset spaces only")
    if space.p != data.p:
        raise ModelSpaceMismatch(f"space has p={space.p}, data has p={data.p}")


def estimate_hit_rate(
    omega,
    data: Dataset,
    space: ModelSpace,
    alpha_star: float,
    N: int,
    rng: np.random.Generator,
    *,
    full_fit: FitResult | None = None,
    workers: int = 1,
) -> float:
    """Monte Carlo estimate of the probability that a draw lies in the confidence set.

    Every draw counts (no deduplication); each distinct model is screened once.
    """
    _check_space(data, space)
    evaluate = _Evaluator(data, space, full_fit, workers)
    models = sample_models(omega, N, rng, sorted(space.forced))
    records = evaluate(models)
    return float(np.mean([r.pvalue >= alpha_star for r in records]))


def run_mscs_as(
    data: Dataset, space: ModelSpace, cfg: AsConfig, *, full_fit: FitResult | None = None
) -> AsResult:
    """Adaptive search followed by a verified final draw."""
    _check_space(data, space)
    p = space.p
    forced = sorted(space.forced)
    lo, hi = cfg.clamp
    omega = np.full(p, 0.5) if cfg.omega0 is None else np.asarray(cfg.omega0, dtype=float).copy()
    if omega.size != p:
        raise InvalidSpec(f"omega0 has length {omega.size}, expected {p}")
    if forced:
        omega[[j - 1 for j in forced]] = hi
    evaluate = _Evaluator(data, space, full_fit, cfg.workers)
    log_star = math.log(cfg.alpha_star)
    state = SamplerState(omega=omega, alpha_t=0.0 if cfg.alpha0 is None else cfg.alpha0)
    log_alpha = -math.inf if cfg.alpha0 is None else math.log(cfg.alpha0)
    pos = _quantile_position(cfg.B, cfg.zeta)
    converged = False

    while state.t < cfg.max_iters:
        state.t += 1
        rng = rng_stream(cfg.seed, 1, state.t)
        masks = _sample_masks(state.omega, cfg.B, rng, forced)
        models = [ModelIndex.from_mask(m) for m in masks]
        records = evaluate(models)
        logp = np.array([r.log_pvalue for r in records])
        # ties broken by canonical model order for determinism
        order = sorted(range(cfg.B), key=lambda b: (logp[b], models[b]))
        # the working level never decreases
        log_alpha = max(log_alpha, min(float(logp[order[pos - 1]]), log_star))
        state.alpha_t = math.exp(log_alpha)
        alive = logp > log_alpha
        try:
            state.omega = update_weights(masks, logp, log_alpha, state.omega, cfg.xi, cfg.clamp, forced)
        except NoSurvivors:
            pass
        state.stall = state.stall + 1 if log_alpha >= log_star else 0
        state.trajectory.append(
            {
                "iteration": state.t,
                "alpha_t": state.alpha_t,
                "survivor_fraction": float(alive.mean()),
                "omega": state.omega.copy(),
            }
        )
        if cfg.fixed_iters is not None:
            if state.t >= cfg.fixed_iters:
                converged = True
                break
        elif state.stall >= cfg.stall_d + 1:
            converged = True
            break

    rng = rng_stream(cfg.seed, 2)
    masks = _sample_masks(state.omega, cfg.final_draw, rng, forced)
    models = [ModelIndex.from_mask(m) for m in masks]
    records = evaluate(models)
    hits = np.array([r.pvalue >= cfg.alpha_star for r in records])
    distinct = {r.model: r for r in records}
    members = sorted(
        (r.at(cfg.alpha_star) for r in distinct.values() if r.pvalue >= cfg.alpha_star),
        key=lambda r: r.model,
    )
    return AsResult(
        omega=state.omega,
        members=members,
        hit_rate=float(hits.mean()),
        trajectory=state.trajectory,
        iterations=state.t,
        converged=converged,
        n_draws=cfg.final_draw,
        n_distinct=len(distinct),
        alpha_star=cfg.alpha_star,
        space=space,
        config=cfg,
    )
