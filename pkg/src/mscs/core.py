"""Likelihood-ratio screening, exhaustive confidence-set construction and inclusion importance."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from . import stats
from .errors import FitDiverged, NestingViolation, UnsupportedFamily
from .likelihood import Dataset, Family, FitResult, fit, free_parameter_count
from .model_space import (
    FeatureId,
    ModelIndex,
    ModelSpace,
    feature_label,
    features_of,
)

NEGATIVE_LAMBDA_TOL = 1e-6


@dataclass
class LrtRecord:
    model: ModelIndex
    lam: float
    df: int
    pvalue: float
    log_pvalue: float
    survived: bool | None = None
    note: str = ""

    def at(self, alpha: float) -> "LrtRecord":
        return replace(self, survived=self.pvalue >= alpha)

    def to_dict(self) -> dict:
        return {
            "model": self.model.encode(),
            "lambda": self.lam,
            "df": self.df,
            "pvalue": self.pvalue,
            "survived": self.survived,
            "note": self.note,
        }


def lrt(data: Dataset, model: ModelIndex, full_fit: FitResult) -> LrtRecord:
    """Likelihood-ratio test of ``model`` against the fitted full model."""
    cand = full_fit if model == full_fit.model else fit(data, model)
    return lrt_from_fits(cand, full_fit)


def lrt_from_fits(cand: FitResult, full_fit: FitResult) -> LrtRecord:
    df = full_fit.p_gamma - cand.p_gamma
    lam = 2.0 * (full_fit.loglik - cand.loglik)
    if lam < 0:
        if lam < -NEGATIVE_LAMBDA_TOL:
            raise NestingViolation(
                f"model {cand.model} has loglik {cand.loglik:.10g} above the full "
                f"model's {full_fit.loglik:.10g}"
            )
        lam = 0.0
    if df == 0:
        # the full model (or an equivalent parameterization) is never rejected
        return LrtRecord(cand.model, lam, 0, 1.0, 0.0)
    log_p = stats.chi2_logsf(lam, df)
    return LrtRecord(cand.model, lam, df, math.exp(log_p), log_p)


def rejected_record(model: ModelIndex, df: int, note: str) -> LrtRecord:
    return LrtRecord(model, math.inf, df, 0.0, -math.inf, False, note)


@dataclass
class MscsResult:
    alpha: float
    records: list[LrtRecord]
    space: ModelSpace
    exhaustive: bool = True
    full_loglik: float = math.nan
    survivors: list[ModelIndex] = field(init=False)

    def __post_init__(self):
        self.records = [r.at(self.alpha) for r in self.records]
        self.survivors = [r.model for r in self.records if r.survived]

    def at_alpha(self, alpha: float) -> "MscsResult":
        """Same screening statistics, thresholded at another level."""
        return MscsResult(alpha, self.records, self.space, self.exhaustive, self.full_loglik)

    @property
    def cardinality(self) -> int:
        return len(self.survivors)

    def __contains__(self, model: ModelIndex) -> bool:
        return model in set(self.survivors)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "space": {
                "kind": self.space.kind,
                "p": self.space.p,
                "forced": sorted(self.space.forced),
            },
            "exhaustive": self.exhaustive,
            "full_loglik": self.full_loglik,
            "cardinality": self.cardinality,
            "survivors": [m.encode() for m in self.survivors],
            "records": [r.to_dict() for r in self.records],
        }


def _record_for(data: Dataset, model: ModelIndex, full_fit: FitResult) -> LrtRecord:
    try:
        return lrt(data, model, full_fit)
    except FitDiverged as exc:
        df = full_fit.p_gamma - free_parameter_count(data.family, model)
        return rejected_record(model, df, f"fit diverged: {exc}")


# worker-process state for parallel screening
_WORKER: dict = {}


def _init_worker(data, full_fit):
    _WORKER["data"] = data
    _WORKER["full"] = full_fit


def _screen_chunk(models):
    return [_record_for(_WORKER["data"], m, _WORKER["full"]) for m in models]


def screen_models(
    data: Dataset, models: Sequence[ModelIndex], full_fit: FitResult, workers: int = 1
) -> list[LrtRecord]:
    """LRT records for ``models``, in input order."""
    models = list(models)
    if workers <= 1 or len(models) < 64:
        return [_record_for(data, m, full_fit) for m in models]
    size = max(16, len(models) // (4 * workers))
    chunks = [models[i : i + size] for i in range(0, len(models), size)]
    with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(data, full_fit)) as ex:
        out: list[LrtRecord] = []
        for part in ex.map(_screen_chunk, chunks):
            out.extend(part)
    return out


def build_mscs(data: Dataset, space: ModelSpace, alpha: float, workers: int = 1) -> MscsResult:
    """Exhaustive confidence set: every model of ``space`` screened against the full model."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    full_fit = fit(data, space.full_model())
    records = screen_models(data, list(space.enumerate()), full_fit, workers)
    records.sort(key=lambda r: r.model)
    return MscsResult(alpha, records, space, True, full_fit.loglik)


@dataclass
class ImportanceReport:
    features: list[FeatureId]
    ii: np.ndarray
    ci_lo: np.ndarray | None = None
    ci_hi: np.ndarray | None = None

    def __getitem__(self, feature: FeatureId) -> float:
        return float(self.ii[self.features.index(feature)])

    def as_dict(self) -> dict:
        return {f: float(v) for f, v in zip(self.features, self.ii)}

    def rows(self) -> list[dict]:
        out = []
        for i, f in enumerate(self.features):
            out.append(
                {
                    "feature": feature_label(f),
                    "ii": float(self.ii[i]),
                    "ci_lo": "" if self.ci_lo is None else float(self.ci_lo[i]),
                    "ci_hi": "" if self.ci_hi is None else float(self.ci_hi[i]),
                }
            )
        return out


def importance_from_survivors(space: ModelSpace, survivors: Iterable[ModelIndex]) -> ImportanceReport:
    features = space.features()
    pos = {f: i for i, f in enumerate(features)}
    counts = np.zeros(len(features))
    total = 0
    for model in survivors:
        total += 1
        for f in features_of(space, model):
            counts[pos[f]] += 1
    if total == 0:
        raise ValueError("inclusion importance needs at least one surviving model")
    return ImportanceReport(features, counts / total)


def inclusion_importance(mscs: MscsResult) -> ImportanceReport:
    """Fraction of surviving models that contain each feature."""
    return importance_from_survivors(mscs.space, mscs.survivors)


def detectability_margin(
    theta_star, space: ModelSpace, n: int, family: Family = Family.NORMAL_LOCATION
) -> tuple[float, ModelIndex | None]:
    """min over models missing a true variable of noncentrality / K_n(d).

    Only the normal-location family is supported: its KL projection onto a
    model is coordinate truncation and its total information is n * I.
    Ties are broken towards the larger deficiency d.
    """
    if Family(family) != Family.NORMAL_LOCATION:
        raise UnsupportedFamily("detectability margin is implemented for normal-location only")
    theta_star = np.asarray(theta_star, dtype=float)
    p = space.p
    truth = set(int(j) + 1 for j in np.flatnonzero(theta_star))
    fisher = n * np.eye(p)
    scored = []
    for model in space.enumerate():
        if truth <= set(model.items):
            continue
        projected = theta_star * model.mask(p)
        delta = stats.noncentrality(theta_star, projected, fisher)
        d = p - len(model.items)
        rate = stats.kn(d, p)
        scored.append((delta / rate if rate > 0 else math.inf, d, model))
    if not scored:
        return math.inf, None
    best = min(r for r, _, _ in scored)
    tied = [s for s in scored if s[0] <= best * (1 + 1e-12)]
    _, _, arg = max(tied, key=lambda s: s[1])
    return best, arg
