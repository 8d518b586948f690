"""Seeded parameter sweeps with long-format CSV output."""
from __future__ import annotations

import csv
import dataclasses
import datetime as _dt
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .dynamics import run_dynamic
from .engine import MEMBERSHIP, FormationDefect, equal_allocation_partition, run_formation
from .model import ConfigError, DynamicsConfig, HistoryBook, ScenarioConfig
from .polling import AS_PRINTED, EQ4_FORMS
from .scenario import generate_scenario
from .value import CoalitionValuer

STATIC_VARS = ("task_count", "agent_count", "beta")
DYNAMIC_VARS = ("speed", "churn_rate")
SWEEP_VARS = STATIC_VARS + DYNAMIC_VARS
ALGORITHMS = ("hedonic", "equal")
COLUMNS = ("sweep_var", "value", "replication", "order_index", "algorithm", "metric", "amount")
DEFAULT_DYNAMICS = DynamicsConfig(psi=10.0, speed=0.0, churn_rate=0.0, horizon=300.0)


@dataclass(frozen=True)
class ExperimentPlan:
    name: str
    sweep_var: str
    values: tuple
    replications: int = 30
    orders: int = 10
    seed: int = 0
    base: ScenarioConfig = field(default_factory=ScenarioConfig)
    algorithms: tuple = ALGORITHMS
    eq4_form: str = AS_PRINTED
    max_switches: Optional[int] = 3000
    workers: int = 1
    out: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        if not self.name or any(c in self.name for c in "/\\"):
            raise ConfigError("plan name must be a non-empty path segment")
        if self.sweep_var not in SWEEP_VARS:
            raise ConfigError(f"sweep_var must be one of {SWEEP_VARS}")
        if not self.values:
            raise ConfigError("values must be non-empty")
        if self.replications < 1 or self.orders < 1 or self.workers < 1:
            raise ConfigError("replications, orders and workers must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in 64 unsigned bits")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown or not self.algorithms:
            raise ConfigError(f"algorithms must be a non-empty subset of {ALGORITHMS}")
        if self.eq4_form not in EQ4_FORMS:
            raise ConfigError(f"eq4_form must be one of {EQ4_FORMS}")
        if self.max_switches is not None and self.max_switches < 0:
            raise ConfigError("max_switches must be non-negative")
        for v in self.values:
            self.config_for(v)  # surface invalid combinations early

    @property
    def dynamic(self) -> bool:
        return self.sweep_var in DYNAMIC_VARS

    def config_for(self, value) -> ScenarioConfig:
        try:
            if self.sweep_var in STATIC_VARS:
                return self.base.replace(**{self.sweep_var: value})
            dyn = self.base.dynamics or DEFAULT_DYNAMICS
            return self.base.replace(dynamics=dataclasses.replace(dyn, **{self.sweep_var: float(value)}))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{self.sweep_var}={value!r}: {exc}") from exc

    def replace(self, **changes) -> "ExperimentPlan":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
        d["values"] = list(self.values)
        d["algorithms"] = list(self.algorithms)
        d["base"] = self.base.to_dict()
        return d

    @classmethod
    def from_dict(cls, data) -> "ExperimentPlan":
        if not isinstance(data, dict):
            raise ConfigError("plan document must be a JSON object")
        allowed = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - allowed)
        if unknown:
            raise ConfigError(f"unknown plan field(s): {', '.join(unknown)}")
        kw = dict(data)
        if "base" in kw:
            kw["base"] = ScenarioConfig.from_dict(kw["base"])
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, text: str) -> "ExperimentPlan":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(data)


def _avg_payoff(partition, valuer) -> float:
    n = len(partition.players)
    return sum(valuer.value(c) for c in partition) / n if n else 0.0


def _partition_rows(partition, valuer) -> dict:
    sizes = [len(c) for c in partition]
    return {"avg_payoff": _avg_payoff(partition, valuer), "avg_size": float(np.mean(sizes)),
            "max_size": float(max(sizes))}


def _static_cell(plan: ExperimentPlan, vi: int, rep: int) -> list:
    value = plan.values[vi]
    cfg = plan.config_for(value)
    ss = np.random.SeedSequence([plan.seed, vi, rep])
    scen_ss, *order_ss = ss.spawn(1 + plan.orders)
    scenario = generate_scenario(cfg, np.random.default_rng(scen_ss))
    valuer = CoalitionValuer(scenario, plan.eq4_form)
    rows = []

    def emit(order, alg, metrics):
        for m in sorted(metrics):
            rows.append((plan.sweep_var, value, rep, order, alg, m, float(metrics[m])))

    if "hedonic" in plan.algorithms:
        for k, oss in enumerate(order_ss):
            try:
                part, log, _ = run_formation(valuer, rng=np.random.default_rng(oss), hist=HistoryBook(),
                                             max_switches=plan.max_switches, history=MEMBERSHIP)
            except FormationDefect as exc:
                part, log = exc.partition, exc.log
            m = _partition_rows(part, valuer)
            m.update(switches=log.n_switches, turns=log.turns, converged=float(log.converged))
            emit(k, "hedonic", m)
    if "equal" in plan.algorithms:
        emit(0, "equal", _partition_rows(equal_allocation_partition(scenario), valuer))
    return rows


def _dynamic_cell(plan: ExperimentPlan, vi: int, rep: int) -> list:
    value = plan.values[vi]
    cfg = plan.config_for(value)
    rng = np.random.default_rng(np.random.SeedSequence([plan.seed, vi, rep]))
    res = run_dynamic(cfg, rng=rng, eq4_form=plan.eq4_form, max_switches=plan.max_switches)
    met = res.metrics
    sizes = [s for _, s in met.size_samples]
    m = {"switch_frequency": met.switch_frequency, "mean_lifespan": met.mean_lifespan,
         "avg_size": float(np.mean(sizes)) if sizes else 0.0, "non_converged": met.non_converged}
    return [(plan.sweep_var, value, rep, 0, "hedonic", k, float(m[k])) for k in sorted(m)]


def _cell(args) -> list:
    plan, vi, rep = args
    return (_dynamic_cell if plan.dynamic else _static_cell)(plan, vi, rep)


@dataclass
class ExperimentResult:
    plan: ExperimentPlan
    rows: list  # tuples in COLUMNS order

    def to_csv(self) -> str:
        return _csv(COLUMNS, self.rows)

    def summary(self) -> list:
        """Max/avg/min over orders per replication, then the mean over replications."""
        cells: dict = {}
        for sv, value, rep, order, alg, metric, amount in self.rows:
            cells.setdefault((value, alg, metric), {}).setdefault(rep, []).append(amount)
        out = []
        index = {v: i for i, v in enumerate(self.plan.values)}
        for (value, alg, metric), reps in sorted(cells.items(), key=lambda kv: (index[kv[0][0]],) + kv[0][1:]):
            per = list(reps.values())
            for stat, fn in (("max", max), ("avg", lambda a: sum(a) / len(a)), ("min", min)):
                out.append((self.plan.sweep_var, value, alg, metric, stat,
                            float(np.mean([fn(a) for a in per])), len(per)))
        return out

    def summary_csv(self) -> str:
        return _csv(("sweep_var", "value", "algorithm", "metric", "statistic", "amount", "replications"),
                    self.summary())

    def mean(self, value, algorithm: str, metric: str) -> float:
        """Mean of ``metric`` over replications and orders for one sweep value."""
        xs = [r[6] for r in self.rows if r[1] == value and r[4] == algorithm and r[5] == metric]
        if not xs:
            raise KeyError((value, algorithm, metric))
        return float(np.mean(xs))


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def run_experiment(plan: ExperimentPlan) -> ExperimentResult:
    jobs = [(plan, vi, rep) for vi in range(len(plan.values)) for rep in range(plan.replications)]
    if plan.workers > 1:
        with ProcessPoolExecutor(max_workers=plan.workers) as pool:
            chunks = list(pool.map(_cell, jobs))
    else:
        chunks = [_cell(j) for j in jobs]
    index = {v: i for i, v in enumerate(plan.values)}
    rows = sorted((r for c in chunks for r in c), key=lambda r: (index[r[1]], r[2], r[3], r[4], r[5]))
    return ExperimentResult(plan, rows)


def timestamp() -> str:
    return _dt.datetime.now(_dt.timezone.utc).strftime("%Y%m%dT%H%M%SZ")


def write_results(result: ExperimentResult, root, stamp: Optional[str] = None) -> Path:
    """Write ``<root>/<plan name>/<stamp>/{raw,summary}.csv`` plus the plan itself."""
    d = Path(root) / result.plan.name / (stamp or timestamp())
    d.mkdir(parents=True, exist_ok=True)
    (d / "raw.csv").write_text(result.to_csv(), encoding="utf-8", newline="")
    (d / "summary.csv").write_text(result.summary_csv(), encoding="utf-8", newline="")
    (d / "plan.json").write_text(json.dumps(result.plan.to_dict(), indent=2) + os.linesep, encoding="utf-8")
    return d
