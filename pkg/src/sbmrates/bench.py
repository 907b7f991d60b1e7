"""Monte Carlo risk sweeps over sample size and theta.

Each (n, theta) cell runs ``trials`` independent draws.  Trial ``t`` of cell
``c`` gets its own Philox stream keyed by ``(master_seed, c, t)``, so results
do not depend on how trials are scheduled across worker processes.
"""

from __future__ import annotations

import csv
import io
import json
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .functionals import tau_exact, tau_plugin
from .likelihood import mle_k_class, mle_two_class
from .model import (Graphon, Labelling, SbmSpec, SubmodelK, build_qtheta, sample_fixed_design,
                    sample_graphon, sample_random_design)
from .io import model_from_dict, model_to_dict
from .spectral import spec_theta, spectral_two_class, spectral_two_class_sparse

ESTIMATORS = ("spectral2", "spectral2-sparse", "spec-theta", "mle2", "mle-k", "tau-plugin")
DESIGNS = ("random", "fixed")
CSV_COLUMNS = ("n", "k", "theta", "alpha", "estimator", "trials", "emp_risk", "std_err",
               "seed", "design", "flags")
WORKERS_ENV = "SBMRATES_WORKERS"


@dataclass(frozen=True)
class ExperimentPlan:
    model: object
    estimator: str
    n_grid: tuple[int, ...]
    theta_grid: tuple[float, ...]
    alpha: float = 1.0
    trials: int = 100
    master_seed: int = 0
    design: str = "random"
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if self.design not in DESIGNS:
            raise ValueError(f"design must be one of {DESIGNS}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.n_grid or not self.theta_grid:
            raise ValueError("grids must be nonempty")
        if any(abs(t) > 0.5 for t in self.theta_grid):
            raise ValueError("theta values must lie in [-1/2, 1/2]")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        object.__setattr__(self, "theta_grid", tuple(float(t) for t in self.theta_grid))

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentPlan":
        d = dict(d)
        model = d.pop("model")
        if isinstance(model, dict):
            model = model_from_dict(model)
        return cls(model=model, **d)

    @classmethod
    def from_json(cls, path) -> "ExperimentPlan":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {"model": model_to_dict(self.model), "estimator": self.estimator,
                "n_grid": list(self.n_grid), "theta_grid": list(self.theta_grid),
                "alpha": self.alpha, "trials": self.trials, "master_seed": self.master_seed,
                "design": self.design, "options": dict(self.options)}

    def cells(self) -> list[tuple[int, float]]:
        return [(n, t) for n in self.n_grid for t in self.theta_grid]


@dataclass(frozen=True)
class RiskRow:
    n: int
    k: int
    theta: float
    alpha: float
    estimator: str
    trials: int
    emp_risk: float
    std_err: float
    seed: int
    design: str
    flags: str


@dataclass(frozen=True)
class RiskCurve:
    rows: tuple[RiskRow, ...]

    def risk(self, n: int, theta: float) -> float:
        for r in self.rows:
            if r.n == n and r.theta == theta:
                return r.emp_risk
        raise KeyError((n, theta))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([r.n, r.k, repr(r.theta), repr(r.alpha), r.estimator, r.trials,
                        repr(r.emp_risk), repr(r.std_err), r.seed, r.design, r.flags])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv())


def trial_rng(master_seed: int, cell: int, trial: int) -> np.random.Generator:
    ss = np.random.SeedSequence(master_seed, spawn_key=(cell, trial))
    return np.random.Generator(np.random.Philox(ss))


def _model_k(model) -> int:
    if isinstance(model, (SbmSpec, SubmodelK)):
        return model.k
    if isinstance(model, Graphon) and model.variant == "block":
        return model.pi.size
    return 0


def cell_setup(plan: ExperimentPlan, theta: float):
    """Sampling target for one theta value and the quantity the estimator should hit.

    Returns ``(kind, obj, truth)`` where ``kind`` is ``"sbm"`` or ``"graphon"``.
    """
    m = plan.model
    est = plan.estimator
    if isinstance(m, Graphon):
        if est != "tau-plugin":
            raise ValueError("graphon models only support tau-plugin")
        return "graphon", m, tau_exact(m).tau
    if isinstance(m, SubmodelK):
        spec = m.with_theta(theta).spec(plan.alpha)
    elif isinstance(m, SbmSpec) and m.k == 2:
        spec = SbmSpec(m.pi, build_qtheta(theta, 1.0, float(m.pi[0])), plan.alpha)
    elif isinstance(m, SbmSpec):
        if est != "tau-plugin":
            raise ValueError("theta sweeps need a two-class model or a submodel")
        spec = SbmSpec(m.pi, m.M, plan.alpha)
    else:
        raise TypeError(f"unsupported model {type(m).__name__}")
    if est == "tau-plugin":
        truth = tau_exact(Graphon.block(spec.pi, spec.connectivity)).tau
    else:
        truth = theta
    if est in ("spec-theta", "mle-k") and not isinstance(m, SubmodelK):
        raise ValueError(f"{est} needs a k-class submodel")
    if est in ("spec-theta", "mle-k") and m.k < 3:
        raise ValueError(f"{est} needs k >= 3")
    if est in ("spectral2", "spectral2-sparse", "mle2") and spec.k != 2:
        raise ValueError(f"{est} needs a two-class model")
    return "sbm", spec, truth


def _estimate(plan: ExperimentPlan, X, rng):
    est, opt = plan.estimator, plan.options
    if est == "spectral2":
        r = spectral_two_class(X)
        return r.theta, r.flags
    if est == "spectral2-sparse":
        r = spectral_two_class_sparse(X, plan.alpha)
        return r.theta, r.flags
    if est == "spec-theta":
        r = spec_theta(X, plan.model.k, plan.alpha, rng, opt.get("kappa"))
        return r.theta, r.flags
    if est == "mle2":
        r = mle_two_class(X, opt.get("mode", "heuristic"))
        return r.theta_hat, ()
    if est == "mle-k":
        r = mle_k_class(X, plan.model, opt.get("mode", "heuristic"), rng)
        return r.theta_hat, ()
    r = tau_plugin(X, opt.get("k"), rng)
    return r.tau, r.flags


def _run_trials(plan: ExperimentPlan, cell: int, trials: range):
    n, theta = plan.cells()[cell]
    kind, obj, truth = cell_setup(plan, theta)
    out = []
    for t in trials:
        rng = trial_rng(plan.master_seed, cell, t)
        if kind == "graphon":
            X = sample_graphon(obj, n, rng)
        elif plan.design == "fixed":
            X = sample_fixed_design(obj.connectivity, Labelling.round_robin(n, obj.k), rng)
        else:
            X = sample_random_design(obj, n, rng)[0]
        value, flags = _estimate(plan, X, rng)
        out.append(((value - truth) ** 2, tuple(flags)))
    return out


def _format_flags(counter: Counter) -> str:
    return ";".join(f"{k}:{counter[k]}" for k in sorted(counter))


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def run_plan(plan: ExperimentPlan, workers: int | None = None, chunk: int = 50) -> RiskCurve:
    """Empirical quadratic risk and its standard error for every grid cell.

    Cells the estimator cannot handle produce a row with ``emp_risk = nan``
    and an ``error:`` flag.  ``workers > 1`` spreads trial chunks over
    processes; the output is identical to a serial run.
    """
    workers = default_workers() if workers is None else workers
    cells = plan.cells()
    errors: dict[int, str] = {}
    jobs = []
    for c, (n, theta) in enumerate(cells):
        try:
            cell_setup(plan, theta)
        except (ValueError, TypeError) as err:
            errors[c] = str(err)
            continue
        for start in range(0, plan.trials, chunk):
            jobs.append((c, range(start, min(plan.trials, start + chunk))))
    results: dict[int, list] = {c: [] for c in range(len(cells))}
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            futs = [ex.submit(_run_trials, plan, c, r) for c, r in jobs]
            for (c, _), f in zip(jobs, futs):
                results[c].extend(f.result())
    else:
        for c, r in jobs:
            results[c].extend(_run_trials(plan, c, r))
    rows = []
    k = _model_k(plan.model)
    for c, (n, theta) in enumerate(cells):
        if c in errors:
            rows.append(RiskRow(n, k, theta, plan.alpha, plan.estimator, plan.trials,
                                float("nan"), float("nan"), plan.master_seed, plan.design,
                                "error:" + errors[c].replace(";", ",")))
            continue
        sq = np.array([r[0] for r in results[c]])
        flags = Counter(f for r in results[c] for f in r[1])
        se = float(sq.std(ddof=1) / np.sqrt(sq.size)) if sq.size > 1 else 0.0
        rows.append(RiskRow(n, k, theta, plan.alpha, plan.estimator, plan.trials,
                            float(sq.mean()), se, plan.master_seed, plan.design,
                            _format_flags(flags)))
    return RiskCurve(tuple(rows))
