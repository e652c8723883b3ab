"""Hyperparameter search: stratified cross-validation scoring and
Gaussian-process optimization with an upper-confidence-bound rule.

The surrogate is deliberately fixed (Matern 5/2, unit signal variance,
length scale 1.0 over the rescaled unit cube, noise 1e-6): the contract
here is the acquisition behavior, not surrogate fit quality.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize as sp_optimize
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.spatial.distance import cdist

DEFAULT_KAPPA = 2.576
_NOISE = 1e-6
_N_CANDIDATES = 1000


class TuningError(Exception):
    pass


@dataclass(frozen=True)
class ParamDim:
    name: str
    low: float
    high: float
    integer: bool = False

    def __post_init__(self):
        if not self.low < self.high:
            raise ValueError(f"dim {self.name!r}: low must be < high")


@dataclass(frozen=True)
class ParamSpace:
    dims: tuple[ParamDim, ...]

    def __post_init__(self):
        names = [d.name for d in self.dims]
        if len(set(names)) != len(names):
            raise ValueError("dimension names must be unique")

    def __len__(self) -> int:
        return len(self.dims)

    def to_unit(self, point) -> np.ndarray:
        pt = np.asarray(point, dtype=np.float64)
        lo = np.array([d.low for d in self.dims])
        hi = np.array([d.high for d in self.dims])
        return (pt - lo) / (hi - lo)

    def from_unit(self, unit) -> np.ndarray:
        u = np.asarray(unit, dtype=np.float64)
        lo = np.array([d.low for d in self.dims])
        hi = np.array([d.high for d in self.dims])
        return lo + u * (hi - lo)

    def snap(self, point) -> tuple[float, ...]:
        """Clip to bounds and round integer dims half-up."""
        out = []
        for d, v in zip(self.dims, point):
            v = min(max(float(v), d.low), d.high)
            if d.integer:
                v = float(math.floor(v + 0.5))
                v = min(max(v, math.ceil(d.low)), math.floor(d.high))
            out.append(v)
        return tuple(out)

    def as_dict(self, point) -> dict:
        return {d.name: (int(v) if d.integer else v)
                for d, v in zip(self.dims, point)}


@dataclass(frozen=True)
class Observation:
    point: tuple[float, ...]
    score: float


@dataclass(frozen=True)
class TuneConfig:
    init_points: int = 5
    n_iter: int = 25
    kappa: float = DEFAULT_KAPPA
    seed: int = 0
    folds: int = 10

    def __post_init__(self):
        if self.init_points < 1:
            raise ValueError("init_points must be >= 1")
        if self.n_iter < 0:
            raise ValueError("n_iter must be >= 0")
        if self.kappa <= 0:
            raise ValueError("kappa must be > 0")


@dataclass
class TuneResult:
    best_point: tuple[float, ...]
    best_score: float
    history: list[Observation]


def rf_param_space() -> ParamSpace:
    return ParamSpace(dims=(
        ParamDim("max_depth", 5, 60, integer=True),
        ParamDim("min_samples_split", 10, 100, integer=True),
        ParamDim("max_features", 0.1, 0.999),
        ParamDim("min_samples_leaf", 10, 50, integer=True),
        ParamDim("n_estimators", 100, 400, integer=True),
    ))


def dt_param_space() -> ParamSpace:
    return ParamSpace(dims=(
        ParamDim("max_depth", 3, 10, integer=True),
        ParamDim("min_samples_split", 3, 10, integer=True),
        ParamDim("max_features", 0.1, 0.999),
        ParamDim("min_samples_leaf", 3, 10, integer=True),
    ))


def stratified_kfold(labels, k: int, seed: int) -> list[np.ndarray]:
    """Partition indices into k folds with per-class counts differing by
    at most one across folds."""
    labels = np.asarray(labels)
    n = len(labels)
    if k < 2:
        raise TuningError("k must be >= 2")
    if k > n:
        raise TuningError(f"k={k} exceeds sample count {n}")
    rng = np.random.default_rng([seed])
    folds = [[] for _ in range(k)]
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        rng.shuffle(idx)
        for j, i in enumerate(idx):
            folds[j % k].append(int(i))
    return [np.array(sorted(f), dtype=np.intp) for f in folds]


def cross_val_score(X, y, k: int, seed: int,
                    train_fn: Callable) -> float:
    """Mean held-out accuracy over stratified folds.

    `train_fn(X_train, y_train)` must return a `predict(X) -> labels`
    callable.
    """
    y = np.asarray(y)
    folds = stratified_kfold(y, k, seed)
    accs = []
    for held in folds:
        mask = np.ones(len(y), dtype=bool)
        mask[held] = False
        train_idx = np.flatnonzero(mask)
        predict = train_fn(X[train_idx], y[train_idx])
        pred = np.asarray(predict(X[held]))
        accs.append(float((pred == y[held]).mean()))
    return float(np.mean(accs))


class GaussianProcess:
    """Zero-mean GP with a fixed Matern 5/2 kernel on unit-cube inputs."""

    def __init__(self, X: np.ndarray, y: np.ndarray):
        self.X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        self.y = np.asarray(y, dtype=np.float64)
        K = _matern52(cdist(self.X, self.X))
        K[np.diag_indices_from(K)] += _NOISE
        self._chol = cho_factor(K, lower=True)
        self._alpha = cho_solve(self._chol, self.y)

    def posterior(self, Xq) -> tuple[np.ndarray, np.ndarray]:
        Xq = np.atleast_2d(np.asarray(Xq, dtype=np.float64))
        Ks = _matern52(cdist(Xq, self.X))
        mean = Ks @ self._alpha
        v = solve_triangular(self._chol[0], Ks.T, lower=True)
        var = np.maximum(1.0 - np.einsum("ij,ij->j", v, v), 0.0)
        return mean, np.sqrt(var)


def _matern52(d: np.ndarray) -> np.ndarray:
    z = math.sqrt(5.0) * d
    return (1.0 + z + z * z / 3.0) * np.exp(-z)


def gp_fit(observations: Sequence[Observation], space: ParamSpace) -> GaussianProcess:
    """Fit the surrogate on observations rescaled to the unit cube.

    The noise term keeps the solve well-posed even with duplicate points.
    """
    if not observations:
        raise TuningError("need at least one observation")
    X = np.array([space.to_unit(o.point) for o in observations])
    y = np.array([o.score for o in observations])
    return GaussianProcess(X, y)


def acquire_next(gp: GaussianProcess, space: ParamSpace, kappa: float,
                 rng: np.random.Generator) -> tuple[float, ...]:
    """Maximize mean + kappa * std via seeded multistart sampling plus a
    local gradient-free refinement; integer dims are rounded before the
    acquisition is evaluated."""
    d = len(space)
    unit_candidates = rng.uniform(size=(_N_CANDIDATES, d))
    snapped = np.array([space.snap(space.from_unit(u)) for u in unit_candidates])
    unit_snapped = np.array([space.to_unit(p) for p in snapped])
    mean, std = gp.posterior(unit_snapped)
    ucb = mean + kappa * std
    best = int(np.argmax(ucb))
    best_point = tuple(snapped[best])
    best_ucb = float(ucb[best])

    def neg_ucb(u):
        pt = space.snap(space.from_unit(u))
        m, s = gp.posterior([space.to_unit(pt)])
        return -(m[0] + kappa * s[0])

    res = sp_optimize.minimize(neg_ucb, unit_snapped[best], method="Nelder-Mead",
                               bounds=[(0.0, 1.0)] * d,
                               options={"maxiter": 60 * d, "xatol": 1e-4,
                                        "fatol": 1e-8})
    refined = space.snap(space.from_unit(np.clip(res.x, 0.0, 1.0)))
    if -neg_ucb(space.to_unit(refined)) > best_ucb:
        best_point = tuple(refined)
    return best_point


def optimize(objective: Callable, space: ParamSpace,
             config: TuneConfig = TuneConfig()) -> TuneResult:
    """Seeded-uniform exploration followed by GP/UCB acquisitions.

    A failing objective records score 0 and the run continues; the best
    observation is the maximum score, earliest on ties.
    """
    rng = np.random.default_rng([config.seed])
    history: list[Observation] = []

    def evaluate(point):
        try:
            score = float(objective(point))
        except Exception:
            score = 0.0
        history.append(Observation(point=tuple(point), score=score))

    for _ in range(config.init_points):
        u = rng.uniform(size=len(space))
        evaluate(space.snap(space.from_unit(u)))
    for _ in range(config.n_iter):
        gp = gp_fit(history, space)
        evaluate(acquire_next(gp, space, config.kappa, rng))

    best = max(history, key=lambda o: o.score)
    return TuneResult(best_point=best.point, best_score=best.score,
                      history=history)


def write_tuning_trace(result: TuneResult, space: ParamSpace, path,
                       config_hash: str = "", seed: Optional[int] = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iteration", *(d.name for d in space.dims),
                         "score", "config_hash", "seed"])
        for i, obs in enumerate(result.history):
            writer.writerow([i, *(repr(v) for v in obs.point),
                             repr(obs.score), config_hash,
                             "" if seed is None else seed])
