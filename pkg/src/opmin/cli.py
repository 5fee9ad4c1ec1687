"""Command-line entry point: ``opmin {plan,simulate,sweep,bounds,oracle-check}``.

Experiments are described by a YAML file; ``--out``, ``--seed``, ``--threads``,
``--budget``, ``--gamma`` and ``--steps`` override it. Every CSV starts with
``#`` lines holding the tool version and the fully resolved configuration.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import yaml

from . import __version__
from .bounds import (AssumptionOneData, LinearBoundParams, StabilityCertificate,
                     bound_curves, certificate_report)
from .errors import ConfigError, OPminError
from .oracle import run_oracle_check
from .planner import ExpansionTrace, check_budget, guaranteed_depth, plan
from .sim import (check_practical_stability, closed_loop, fit_exponential_envelope,
                  fitted_certificate, lyapunov_diagnostic, running_cost,
                  verify_running_cost_bounds, write_trajectory_csv)
from .system import make_system


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".17g")
    return v


@dataclass
class ExperimentConfig:
    system: str = "cubic_integrator"
    system_params: dict = field(default_factory=dict)
    gamma: float = 1.0
    budget: object = 3000
    initial_states: list = field(default_factory=lambda: [[-1.0, 1.5]])
    steps: int = 200
    bounds: dict = field(default_factory=dict)
    gamma_star: float = 1.0
    certificate: object = None
    d_range: list = field(default_factory=lambda: [1, 100])
    delta: float = 1e-3
    output_dir: str = "out"
    seed: int = 7
    instances: int = 100
    tolerance: float = 1e-9
    trace: bool = False
    threads: int = 1

    @classmethod
    def from_mapping(cls, data):
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a mapping")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        data = dict(data)
        if isinstance(data.get("system"), dict):
            spec = dict(data["system"])
            data["system"] = spec.pop("name", None)
            data.setdefault("system_params", spec.pop("params", {}))
            if spec:
                raise ConfigError(f"unknown system keys: {', '.join(sorted(spec))}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def validate(self):
        if not isinstance(self.system, str):
            raise ConfigError("system must be a name")
        try:
            self.gamma = float(self.gamma)
            self.gamma_star = float(self.gamma_star)
            self.delta = float(self.delta)
            self.tolerance = float(self.tolerance)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"non-numeric value: {exc}") from None
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError(f"gamma must lie in (0, 1], got {self.gamma}")
        if not isinstance(self.initial_states, list) or not self.initial_states:
            raise ConfigError("initial_states must be a non-empty list of vectors")
        self.initial_states = [[float(v) for v in x] for x in self.initial_states]
        for key in ("steps", "seed", "instances", "threads"):
            value = getattr(self, key)
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{key} must be an integer, got {value!r}")
        if self.steps < 1 or self.instances < 1 or self.threads < 1:
            raise ConfigError("steps, instances and threads must be >= 1")
        if isinstance(self.budget, list):
            if not all(isinstance(b, int) and not isinstance(b, bool) for b in self.budget):
                raise ConfigError("budget list must contain integers")
        elif isinstance(self.budget, bool) or not isinstance(self.budget, int):
            raise ConfigError(f"budget must be an integer or a list, got {self.budget!r}")
        if self.bounds:
            extra = set(self.bounds) - {"a_W", "bar_a_V", "bar_a_W", "W"}
            if extra:
                raise ConfigError(f"unknown bounds keys: {', '.join(sorted(extra))}")
            if self.bounds.get("W", "zero") != "zero":
                raise ConfigError("only W: zero is supported in configuration files")
        if self.certificate not in (None, "fit") and not isinstance(self.certificate, dict):
            raise ConfigError("certificate must be 'fit' or a mapping")
        if isinstance(self.certificate, dict):
            extra = set(self.certificate) - {"K", "lambda", "gamma_star", "d_bar"}
            if extra:
                raise ConfigError(f"unknown certificate keys: {', '.join(sorted(extra))}")
        if len(self.d_range) != 2 or self.d_range[0] > self.d_range[1]:
            raise ConfigError("d_range must be [first, last]")

    def budgets(self):
        return list(self.budget) if isinstance(self.budget, list) else [self.budget]

    def linear_params(self):
        if not self.bounds:
            raise ConfigError("this command needs a bounds section (a_W, bar_a_V, bar_a_W)")
        return LinearBoundParams(float(self.bounds["a_W"]), float(self.bounds["bar_a_V"]),
                                 float(self.bounds.get("bar_a_W", 0.0)))

    def header(self):
        resolved = json.dumps(asdict(self), sort_keys=True)
        return [f"opmin {__version__}", f"config {resolved}"]


def load_config(path, overrides):
    data = {}
    if path is not None:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping")
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_mapping(data)


def _write_csv(path, header, columns, rows):
    with open(path, "w", newline="") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _system(cfg):
    return make_system(cfg.system, **cfg.system_params)


def _single_budget(cfg):
    budgets = cfg.budgets()
    if len(budgets) != 1:
        raise ConfigError("this command needs a single budget")
    return check_budget(budgets[0])


def cmd_plan(cfg):
    if len(cfg.initial_states) != 1:
        raise ConfigError("plan needs exactly one initial state")
    budget = _single_budget(cfg)
    system = _system(cfg)
    trace = ExpansionTrace() if cfg.trace else None
    result = plan(system, cfg.initial_states[0], cfg.gamma, budget, callback=trace)
    s = result.stats
    _write_csv(os.path.join(cfg.output_dir, "plan_result.csv"), cfg.header(),
               ["horizon", "value", "sequence", "nodes_expanded", "nodes_created",
                "max_depth_reached", "open_list_peak"],
               [[result.horizon, result.value, " ".join(map(str, result.sequence)),
                 s.nodes_expanded, s.nodes_created, s.max_depth_reached, s.open_list_peak]])
    if trace is not None:
        trace.write_csv(os.path.join(cfg.output_dir, "expansion_trace.csv"), cfg.header())
    print(f"horizon={result.horizon} value={result.value!r} first_input={result.sequence[0]}")
    return 0


def cmd_simulate(cfg):
    budget = _single_budget(cfg)
    system = _system(cfg)
    lines = [f"# {h}" for h in cfg.header()]
    failed = False
    for i, x0 in enumerate(cfg.initial_states):
        traj = closed_loop(system, x0, cfg.gamma, budget, cfg.steps)
        write_trajectory_csv(traj, os.path.join(cfg.output_dir, f"trajectory_{i}.csv"),
                             cfg.header())
        lines.append(f"[initial state {i}] x0={x0}")
        lines.append(f"running cost = {running_cost(traj)!r}")
        lines.append(f"horizons: min={min(traj.horizons)} max={max(traj.horizons)}")
        if traj.sigmas[0] > 0:
            rep = check_practical_stability(traj, cfg.delta, max(traj.sigmas[0], cfg.delta))
            lines.append(f"practical stability (delta={cfg.delta!r}): entered={rep.entered} "
                         f"entry_time={rep.entry_time} remains={rep.remains} "
                         f"peak_sigma={rep.peak_sigma!r}")
            try:
                fit = fit_exponential_envelope(traj)
                lines.append(f"envelope fit: K={fit.K!r} lambda={fit.lambda_!r} "
                             f"residual={fit.residual!r} window=[{fit.start},{fit.stop})")
            except OPminError as exc:
                lines.append(f"envelope fit: unavailable ({exc})")
        if cfg.bounds:
            params = cfg.linear_params()
            data = AssumptionOneData.from_linear(params, W=lambda x: 0.0)
            d_bar = max(min(traj.horizons), 1)
            diag = lyapunov_diagnostic(traj, data, d_bar)
            lines.append(f"lyapunov diagnostic (d_bar={d_bar}): "
                         f"{len(diag.violations)} violations")
            failed |= not diag.ok
            cert = _certificate(cfg, traj, params)
            if cert is not None:
                rep = verify_running_cost_bounds(traj, params, cert, cert.d_bar)
                lines.append(
                    f"running-cost chain: {rep.lower!r} <= {rep.running_cost!r} <= {rep.upper!r} "
                    f"holds={rep.holds} slack={rep.slack!r} certified={rep.certified} "
                    f"(K={cert.K!r}, lambda={cert.lambda_!r}, d_bar={cert.d_bar}, "
                    f"{cert.provenance})")
                failed |= not rep.holds
    with open(os.path.join(cfg.output_dir, "simulate_report.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print("\n".join(lines[2:]))
    return 1 if failed else 0


def _certificate(cfg, traj, params):
    if cfg.certificate is None:
        return None
    if cfg.certificate == "fit":
        try:
            return fitted_certificate(traj, params)
        except OPminError:
            return None
    c = cfg.certificate
    return StabilityCertificate(float(c["gamma_star"]), int(c["d_bar"]), float(c["K"]),
                                float(c["lambda"]))


def _sweep_cell(args):
    name, params, x0, gamma, budget, steps = args
    system = make_system(name, **params)
    return running_cost(closed_loop(system, x0, gamma, budget, steps))


def cmd_sweep(cfg):
    budgets = [check_budget(b) for b in cfg.budgets()]
    cells = [(cfg.system, cfg.system_params, x0, cfg.gamma, b, cfg.steps)
             for x0 in cfg.initial_states for b in budgets]
    if cfg.threads > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            values = list(pool.map(_sweep_cell, cells))
    else:
        values = [_sweep_cell(c) for c in cells]
    rows = []
    for i, x0 in enumerate(cfg.initial_states):
        rows.append([" ".join(format(v, ".17g") for v in x0)]
                    + values[i * len(budgets):(i + 1) * len(budgets)])
    _write_csv(os.path.join(cfg.output_dir, "sweep.csv"), cfg.header(),
               ["initial_state"] + [f"budget_{b}" for b in budgets], rows)
    for row in rows:
        print(row[0], *(format(v, ".6g") for v in row[1:]))
    return 0


def cmd_bounds(cfg):
    params = cfg.linear_params()
    M = _system(cfg).mode_count
    report = certificate_report(params, cfg.gamma_star, M)
    text = report.render()
    with open(os.path.join(cfg.output_dir, "certificate_report.txt"), "w") as fh:
        for line in cfg.header():
            fh.write(f"# {line}\n")
        fh.write(text)
    first, last = cfg.d_range
    rows = bound_curves(params, cfg.gamma_star, M, range(int(first), int(last) + 1))
    _write_csv(os.path.join(cfg.output_dir, "bound_curves.csv"), cfg.header(),
               ["d", "error_bound_per_unit_sigma", "ges_margin", "ges_holds",
                "stability_budget"],
               [[d, e, m, int(h), str(b)] for d, e, m, h, b in rows])
    print(text, end="")
    return 0


def cmd_oracle_check(cfg):
    rows = run_oracle_check(cfg.seed, cfg.instances, cfg.tolerance)
    _write_csv(os.path.join(cfg.output_dir, "oracle_check.csv"), cfg.header(),
               ["instance", "system_seed", "M", "n", "gamma", "budget", "horizon",
                "plan_value", "oracle_value", "rel_error", "first_input_ok", "pass"],
               [[r.instance, r.system_seed, r.M, r.n, r.gamma, r.budget, r.horizon,
                 r.plan_value, r.oracle_value, r.rel_error, int(r.first_input_ok),
                 int(r.passed)] for r in rows])
    failures = sum(not r.passed for r in rows)
    print(f"oracle-check: {len(rows) - failures}/{len(rows)} passed (seed {cfg.seed})")
    return 1 if failures else 0


COMMANDS = {
    "plan": cmd_plan,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "bounds": cmd_bounds,
    "oracle-check": cmd_oracle_check,
}


def _budget_arg(text):
    parts = [int(p) for p in text.split(",")]
    return parts[0] if len(parts) == 1 else parts


def build_parser():
    parser = argparse.ArgumentParser(prog="opmin", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"opmin {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML experiment file")
        p.add_argument("--out", dest="output_dir", help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int)
        p.add_argument("--budget", type=_budget_arg, help="budget or comma-separated list")
        p.add_argument("--gamma", type=float)
        p.add_argument("--steps", type=int)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    overrides = {k: getattr(args, k) for k in
                 ("output_dir", "seed", "threads", "budget", "gamma", "steps")}
    try:
        cfg = load_config(args.config, overrides)
        os.makedirs(cfg.output_dir, exist_ok=True)
        return COMMANDS[args.command](cfg)
    except (OPminError, OSError, yaml.YAMLError, KeyError, TypeError) as exc:
        msg = str(exc).replace("\n", " ")
        print(f"error: {args.command}: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
