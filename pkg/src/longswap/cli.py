"""
Command-line entry point.

    longswap simulate | sweep | paths | ambiguity-table | equilibrium [flags]

Settings come from built-in defaults, then an optional JSON ``--config`` file,
then explicit flags. Every command is deterministic given its settings; all
randomness derives from ``--seed``.

Exit codes: 0 success, 2 invalid input, 3 I/O failure, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .cohort import BENCHMARK, CohortSpec, cohort_covariance, point_estimate_set, sample_cohort_paths
from .contract import KINDS, payment_fan, write_payment_fan_csv, write_static_payments_csv
from .dynamic import dynamic_equilibrium
from .errors import LongswapError, ValidationError
from .mortality import (
    FIXTURE_SEED,
    MortalityScenarioSet,
    estimate_curve,
    load_fixture_parameters,
    load_parameters,
    load_scenarios,
    save_scenarios,
    simulate_scenarios,
)
from .stackelberg import (
    Market,
    buyer_welfare_profile,
    lambda_interval,
    optimize_eta,
    write_equilibrium_json,
)
from .static import static_best_response
from .svgplot import write_line_chart

TABLE_ALPHAS = (0.05, 0.1, 0.15, 0.2, 0.4)
REPORT_YEARS = (1, 5, 10, 20, 30)


@dataclass(frozen=True)
class RunConfig:
    params: str | None = None
    scenarios: str | None = None
    age: int = 65
    horizon: int = 35
    initial_count: int = 10_000
    rate: float = 0.02
    buyer_initial: float = 0.0
    seller_initial: float = 0.0
    gamma_b: float = 0.3
    gamma_s: float = 0.1
    alphas: tuple[float, ...] = (0.0,)
    kinds: tuple[str, ...] = KINDS
    paths: int = 2000
    chains: int = 100_000
    seed: int = FIXTURE_SEED
    eta: float | None = None
    eta_max: float = 1.0
    eta_step: float = 5e-3
    eta_tol: float = 1e-4
    lambda_points: int = 101
    moment_mode: str = "point-estimate"
    response: str = "prior"
    out: str = "out"
    threads: int | None = None
    svg: bool = False

    def __post_init__(self):
        if self.paths < 1:
            raise ValidationError(f"--paths must be >= 1, got {self.paths}")
        if self.chains < 1:
            raise ValidationError(f"--chains must be >= 1, got {self.chains}")
        if any(k not in KINDS for k in self.kinds):
            raise ValidationError(f"contract kinds must be among {KINDS}, got {list(self.kinds)}")
        if self.moment_mode not in ("point-estimate", "mixture"):
            raise ValidationError(f"unknown moment mode {self.moment_mode!r}")
        if not (self.eta_step > 0 and self.eta_max > 0 and self.eta_tol > 0):
            raise ValidationError("eta grid settings must be positive")
        if self.lambda_points < 2:
            raise ValidationError("--lambda-points must be >= 2")
        if self.threads is not None and self.threads < 1:
            raise ValidationError("--threads must be >= 1")

    def worker_count(self) -> int:
        if self.threads is not None:
            return self.threads
        env = os.environ.get("LONGSWAP_THREADS")
        if env:
            try:
                n = int(env)
            except ValueError:
                raise ValidationError(f"LONGSWAP_THREADS must be an integer, got {env!r}") from None
            if n < 1:
                raise ValidationError("LONGSWAP_THREADS must be >= 1")
            return n
        return os.cpu_count() or 1


def _field_types() -> dict[str, type]:
    casts = {"alphas": lambda v: tuple(float(a) for a in v), "kinds": lambda v: tuple(str(k) for k in v)}
    out = {}
    for f in fields(RunConfig):
        if f.name in casts:
            out[f.name] = casts[f.name]
        elif f.name in ("params", "scenarios", "out", "moment_mode", "response"):
            out[f.name] = lambda v: None if v is None else str(v)
        elif f.name in ("age", "horizon", "initial_count", "paths", "chains", "seed", "lambda_points"):
            out[f.name] = int
        elif f.name in ("threads",):
            out[f.name] = lambda v: None if v is None else int(v)
        elif f.name == "eta":
            out[f.name] = lambda v: None if v is None else float(v)
        elif f.name == "svg":
            out[f.name] = bool
        else:
            out[f.name] = float
    return out


def load_config(path: str | Path | None, overrides: dict) -> RunConfig:
    """Merge defaults, a JSON config file and explicit overrides."""
    values: dict = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config file {path} is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ValidationError("config file must hold a JSON object")
        values.update(data)
    values.update(overrides)
    casts = _field_types()
    unknown = set(values) - set(casts)
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    try:
        return RunConfig(**{k: casts[k](v) for k, v in values.items()})
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"bad config value: {exc}") from None


# =============================================================================
# Shared setup
# =============================================================================

def _scenarios(cfg: RunConfig) -> MortalityScenarioSet:
    if cfg.scenarios is not None:
        scen = load_scenarios(cfg.scenarios)
        if scen.initial_age != cfg.age:
            raise ValidationError(f"scenario file is for age {scen.initial_age}, config asks for {cfg.age}")
        return scen.truncate(cfg.horizon)
    params = load_parameters(cfg.params) if cfg.params is not None else load_fixture_parameters()
    return simulate_scenarios(params, cfg.age, cfg.horizon, cfg.paths, cfg.seed)


def _market(cfg: RunConfig, scen: MortalityScenarioSet) -> Market:
    return Market(
        curve=estimate_curve(scen),
        cohort=CohortSpec(cfg.age, cfg.initial_count, cfg.horizon),
        rate=cfg.rate,
        gamma_b=cfg.gamma_b,
        gamma_s=cfg.gamma_s,
        scenarios=scen,
        buyer_initial=cfg.buyer_initial,
        seller_initial=cfg.seller_initial,
        moment_mode=cfg.moment_mode,
        response=cfg.response,
    )


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _solve(cfg: RunConfig, market: Market, alpha: float):
    amb = lambda_interval(market.curve, alpha, cfg.lambda_points)
    return [
        optimize_eta(market, kind, amb, cfg.eta_max, cfg.eta_step, cfg.eta_tol, cfg.worker_count())
        for kind in cfg.kinds
    ]


def _with_benchmark(alphas) -> tuple[float, ...]:
    """Complete information first, then the requested ambiguity degrees."""
    return (0.0,) + tuple(a for a in alphas if a != 0.0)


def _tag(alpha: float) -> str:
    return f"alpha{alpha:g}"


# =============================================================================
# Commands
# =============================================================================

def cmd_simulate(cfg: RunConfig) -> Path:
    params = load_parameters(cfg.params) if cfg.params is not None else load_fixture_parameters()
    scen = simulate_scenarios(params, cfg.age, cfg.horizon, cfg.paths, cfg.seed)
    path = _out_dir(cfg) / "scenarios.lswp"
    save_scenarios(scen, path)
    curve = estimate_curve(scen)
    print(f"wrote {path} (K={scen.n_paths}, T={scen.horizon}, x={scen.initial_age}, seed={cfg.seed})")
    print(f"e_{cfg.age} over {cfg.horizon} years: {curve.life_expectancy():.6f}")
    for t in REPORT_YEARS:
        if t <= curve.horizon:
            print(f"  {t}p_{cfg.age} = {curve.multi_year[t - 1]:.6f}")
    return path


def cmd_sweep(cfg: RunConfig) -> list[Path]:
    market = _market(cfg, _scenarios(cfg))
    out = _out_dir(cfg)
    written, solutions = [], []
    for alpha in _with_benchmark(cfg.alphas):
        sols = _solve(cfg, market, alpha)
        solutions.extend(sols)
        path = out / f"sweep_{_tag(alpha)}.csv"
        for i, sol in enumerate(sols):
            sol.sweep.write_csv(path, mode="w" if i == 0 else "a", header=i == 0)
        written.append(path)
        if cfg.svg:
            write_line_chart(
                out / f"sweep_{_tag(alpha)}.svg",
                {s.contract_kind: (s.sweep.eta, s.sweep.seller_gain) for s in sols},
                title=f"worst-case seller gain, alpha={alpha:g}", xlabel="eta", ylabel="seller gain",
            )
    eq = out / "equilibrium.json"
    write_equilibrium_json(solutions, eq)
    written.append(eq)
    for s in solutions:
        print(json.dumps(s.summary()))
    return written


def cmd_equilibrium(cfg: RunConfig) -> list[Path]:
    market = _market(cfg, _scenarios(cfg))
    out = _out_dir(cfg)
    written, solutions = [], []
    for alpha in _with_benchmark(cfg.alphas):
        amb = lambda_interval(market.curve, alpha, cfg.lambda_points)
        for sol in _solve(cfg, market, alpha):
            solutions.append(sol)
            if sol.no_trade or alpha == 0.0:
                continue
            rows = buyer_welfare_profile(market, sol.contract_kind, sol.eta_star, amb)
            path = out / f"buyer_profile_{_tag(alpha)}_{sol.contract_kind}.csv"
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["lambda", "buyer_gain"])
                writer.writerows([repr(float(a)), repr(float(b))] for a, b in rows)
            written.append(path)
    eq = out / "equilibrium.json"
    write_equilibrium_json(solutions, eq)
    written.append(eq)
    print(json.dumps([s.summary() for s in solutions], indent=2))
    return written


def cmd_paths(cfg: RunConfig) -> list[Path]:
    scen = _scenarios(cfg)
    market = _market(cfg, scen)
    out = _out_dir(cfg)
    alpha = cfg.alphas[0]
    if cfg.eta is not None:
        etas = {kind: cfg.eta for kind in cfg.kinds}
    else:
        etas = {s.contract_kind: (0.0 if s.no_trade else s.eta_star) for s in _solve(cfg, market, alpha)}
    written = []
    T = cfg.horizon
    if "static" in etas:
        contract = market.contract("static", etas["static"])
        moment_set = scen if cfg.moment_mode == "mixture" else point_estimate_set(market.curve)
        moments = cohort_covariance(market.cohort, moment_set, BENCHMARK, cfg.moment_mode)
        sol = static_best_response(contract, moments, market.curve, cfg.gamma_b)
        pay = out / "static_payments.csv"
        write_static_payments_csv(contract, market.curve, pay)
        hedge = out / "static_hedge.csv"
        with open(hedge, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "u_star"])
            writer.writerows([t, repr(float(sol.u_star))] for t in range(T))
        written += [pay, hedge]
    if "dynamic" in etas:
        contract = market.contract("dynamic", etas["dynamic"])
        sol = dynamic_equilibrium(contract, market.curve, cfg.gamma_b)
        hedge = out / "dynamic_hedge.csv"
        with open(hedge, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "u_star", "f", "F"])
            for t in range(T):
                writer.writerow([t] + [repr(float(v)) for v in (sol.u_path[t], sol.f[t], sol.F[t])])
        chain_set = scen if cfg.moment_mode == "mixture" else point_estimate_set(market.curve, "one_year")
        lives = sample_cohort_paths(market.cohort, chain_set, BENCHMARK, cfg.chains, cfg.seed)
        fan = out / "dynamic_payment_fan.csv"
        write_payment_fan_csv(payment_fan(contract, market.curve, lives), fan)
        written += [hedge, fan]
        if cfg.svg:
            write_line_chart(out / "dynamic_hedge.svg", {"u*_t": (np.arange(T), sol.u_path)},
                             title="dynamic hedge ratio", xlabel="t", ylabel="u*")
    for path in written:
        print(f"wrote {path}")
    return written


def cmd_ambiguity_table(cfg: RunConfig) -> Path:
    scen = _scenarios(cfg)
    curve = estimate_curve(scen)
    path = _out_dir(cfg) / "ambiguity_table.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["alpha", "lambda_lo", "lambda_hi"])
        for alpha in cfg.alphas:
            amb = lambda_interval(curve, alpha, cfg.lambda_points)
            writer.writerow([repr(float(alpha)), repr(amb.lambda_lo), repr(amb.lambda_hi)])
            print(f"alpha={alpha:<5g} lambda in [{amb.lambda_lo:.4f}, {amb.lambda_hi:.4f}]")
    return path


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "paths": cmd_paths,
    "ambiguity-table": cmd_ambiguity_table,
    "equilibrium": cmd_equilibrium,
}


# =============================================================================
# Argument parsing
# =============================================================================

def _flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    add = p.add_argument
    add("--config", help="JSON file of RunConfig fields; flags override it")
    add("--params", help="APCI parameter JSON (default: bundled fixture)")
    add("--scenarios", help="scenario file to load instead of simulating")
    add("-x", "--age", type=int)
    add("-T", "--horizon", type=int)
    add("--l0", dest="initial_count", type=int, help="initial annuitant count")
    add("-r", "--rate", type=float)
    add("--b0", dest="buyer_initial", type=float, help="buyer initial surplus")
    add("--s0", dest="seller_initial", type=float, help="seller initial surplus")
    add("--gamma-b", dest="gamma_b", type=float)
    add("--gamma-s", dest="gamma_s", type=float)
    add("--alpha", dest="alphas", type=float, nargs="+", help="ambiguity degrees")
    add("--kind", dest="kinds", nargs="+", choices=KINDS)
    add("-K", "--paths", type=int, help="mortality scenario paths")
    add("-N", "--chains", type=int, help="sampled survivor chains")
    add("--seed", type=int)
    add("--eta", type=float, help="fixed loading for `paths` (default: solve for eta*)")
    add("--eta-max", dest="eta_max", type=float)
    add("--eta-step", dest="eta_step", type=float)
    add("--eta-tol", dest="eta_tol", type=float)
    add("--lambda-points", dest="lambda_points", type=int)
    add("--moment-mode", dest="moment_mode", choices=("point-estimate", "mixture"))
    add("--response", choices=("prior", "benchmark"))
    add("--out", help="output directory")
    add("--threads", type=int, help="worker threads (fallback: LONGSWAP_THREADS, then all cores)")
    add("--svg", action="store_true", default=None, help="also write SVG plots")
    p.set_defaults(**{f.name: None for f in fields(RunConfig)})
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="longswap", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    flags = _flags()
    for name in COMMANDS:
        sub.add_parser(name, parents=[flags])
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    ns = vars(args)
    command, config_path = ns.pop("command"), ns.pop("config")
    overrides = {k: v for k, v in ns.items() if v is not None}
    try:
        cfg = load_config(config_path, overrides)
        if command == "ambiguity-table" and "alphas" not in overrides:
            file_has_alphas = config_path is not None and "alphas" in json.loads(Path(config_path).read_text())
            if not file_has_alphas:
                cfg = replace(cfg, alphas=TABLE_ALPHAS)
        with np.errstate(over="raise", invalid="raise", divide="ignore"):
            COMMANDS[command](cfg)
    except LongswapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
