"""Command line: run, sweep, dynamics, verify.

Exit status is 0 on success, 1 when a verification fails and 2 for bad
configuration.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .dynamics import run_dynamic
from .engine import FormationDefect
from .estimator import EqualAllocation, HedonicCoalitionFormation
from .experiments import ExperimentPlan, run_experiment, timestamp, write_results
from .model import ConfigError, ScenarioConfig
from .polling import EQ4_FORMS
from .verify import CHECKS

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG = 0, 1, 2


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _read_json(path: Optional[str]):
    if path is None:
        return None
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc


def _scenario(args) -> ScenarioConfig:
    data = _read_json(args.config)
    cfg = ScenarioConfig.from_dict(data) if data is not None else ScenarioConfig()
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def _out_dir(args, name: str) -> Optional[Path]:
    if args.out is None:
        return None
    d = Path(args.out) / name / timestamp()
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_run(args) -> int:
    cfg = _scenario(args)
    try:
        hed = HedonicCoalitionFormation(eq4_form=args.eq4_form, random_state=cfg.seed,
                                        max_switches=args.max_switches).fit(cfg)
        log, part = hed.log_, hed.partition_
    except FormationDefect as exc:
        print(f"formation stopped: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    base = EqualAllocation(eq4_form=args.eq4_form).fit(cfg)
    print(f"switches={log.n_switches} rounds={log.rounds} coalitions={len(part)}")
    print(f"avg_payoff hedonic={hed.score():.6g} equal={base.score():.6g}")
    for c in sorted(part, key=lambda c: sorted(c)):
        print(f"  {sorted(c)} value={hed.valuer_.value(c):.6g}")
    d = _out_dir(args, "run")
    if d is not None:
        (d / "formation_log.csv").write_text(log.to_csv(), encoding="utf-8", newline="")
        (d / "scenario.json").write_text(cfg.to_json(indent=2), encoding="utf-8")
        print(d)
    return EXIT_OK


def cmd_sweep(args) -> int:
    data = _read_json(args.config)
    if data is None:
        raise ConfigError("sweep needs --config with a plan document")
    plan = ExperimentPlan.from_dict(data)
    changes = {}
    for flag, key in (("seed", "seed"), ("eq4_form", "eq4_form"), ("orders", "orders"),
                      ("replications", "replications"), ("workers", "workers")):
        v = getattr(args, flag)
        if v is not None:
            changes[key] = v
    plan = plan.replace(**changes)
    result = run_experiment(plan)
    root = args.out or plan.out
    if root is None:
        sys.stdout.write(result.summary_csv())
    else:
        print(write_results(result, root))
    return EXIT_OK


def cmd_dynamics(args) -> int:
    cfg = _scenario(args)
    if cfg.dynamics is None:
        raise ConfigError("scenario has no dynamics section")
    try:
        res = run_dynamic(cfg, rng=np.random.default_rng(cfg.seed), eq4_form=args.eq4_form,
                          max_switches=args.max_switches)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    m = res.metrics
    print(f"switch_frequency={m.switch_frequency:.6g} mean_lifespan={m.mean_lifespan:.6g} "
          f"non_converged={m.non_converged}")
    d = _out_dir(args, "dynamics")
    if d is not None:
        (d / "metrics.csv").write_text(res.to_csv(), encoding="utf-8", newline="")
        print(d)
    return EXIT_OK


def cmd_verify(args) -> int:
    fn = CHECKS[args.check]
    kw = {"seed": args.seed or 0}
    if args.count is not None:
        kw["count"] = args.count
    if args.check in ("stability", "oracle"):
        kw["eq4_form"] = args.eq4_form
    report = fn(**kw)
    print(report.render())
    return EXIT_OK if report.passed else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON scenario (run, dynamics) or plan (sweep)")
    common.add_argument("--seed", type=_u64)
    common.add_argument("--out", help="output root; files go to <out>/<name>/<timestamp>/")
    common.add_argument("--eq4-form", dest="eq4_form", choices=EQ4_FORMS, default=None)

    p = argparse.ArgumentParser(prog="hedonic-tasks", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", parents=[common], help="form coalitions for one scenario")
    r.add_argument("--max-switches", type=int, default=None)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", parents=[common], help="run an experiment plan")
    s.add_argument("--orders", type=_positive)
    s.add_argument("--replications", type=_positive)
    s.add_argument("--workers", type=_positive)
    s.set_defaults(func=cmd_sweep)

    d = sub.add_parser("dynamics", parents=[common], help="epoch loop with mobility and churn")
    d.add_argument("--max-switches", type=int, default=3000)
    d.set_defaults(func=cmd_dynamics)

    v = sub.add_parser("verify", parents=[common], help="self-checks")
    v.add_argument("check", choices=sorted(CHECKS))
    v.add_argument("--count", type=_positive)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.command != "sweep" and args.eq4_form is None:
        args.eq4_form = EQ4_FORMS[0]
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
