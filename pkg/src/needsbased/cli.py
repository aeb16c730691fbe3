"""needsbased command line: solve, synth, loglik, estimate, verify.

Exit codes: 0 ok, 2 usage/config error, 3 infeasible, 4 verification failure.
"""
from __future__ import annotations

import argparse
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import batch, config, io
from .empirical import SimulatedLikelihood
from .errors import ConfigError, DomainError, HorizonCapError, InfeasibleError

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_VERIFY = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=None, help="random seed (default: config value or 0)")
    p.add_argument("--threads", type=int, default=None, help="worker thread cap (default: all cores)")
    p.add_argument("--plot", action="store_true", help="also render PNG figures next to the outputs")
    return p


def build_parser():
    common = _common()
    ap = _Parser(prog="needsbased", description="Multi-day needs-based activity model toolkit.")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", parents=[common], help="solve one individual's deterministic model")
    s.add_argument("config", help="TOML with [model] and [scenario]")
    s.add_argument("--scenario", help="scenario inputs JSON (overrides [scenario])")
    s.add_argument("--conditioned", metavar="PATTERN", help="JSON file with delta (and loc) to condition on")
    s.add_argument("--multiweek", action="store_true", help="extend weeks until the objective is non-negative")
    s.add_argument("--max-weeks", type=int, default=8)
    s.add_argument("--location-policy", choices=["single", "any"], default="single")
    s.add_argument("--out", default="solve.json")

    s = sub.add_parser("synth", parents=[common], help="generate a synthetic sample")
    s.add_argument("--config", help="TOML with optional [synth] and [population]")
    s.add_argument("--preset", choices=["grocery", "ecommerce"])
    s.add_argument("--n", type=int, help="number of persons")
    s.add_argument("--zones", type=int, help="number of zones (grocery preset)")
    s.add_argument("--out-dir", required=True)

    for name, hlp in (("loglik", "simulated log-likelihood or a 2-D surface"),
                      ("estimate", "maximize the simulated log-likelihood")):
        s = sub.add_parser(name, parents=[common], help=hlp)
        s.add_argument("--config", help="TOML with [population] and [estimation]")
        s.add_argument("--data", help="observations CSV (default: [estimation].data)")
        s.add_argument("--scenario", help="zone scenario JSON (default: [estimation].scenario)")
        s.add_argument("--draws", type=int)
        s.add_argument("--choice-set-size", type=int)
        s.add_argument("--out-dir", required=True)
        if name == "loglik":
            s.add_argument("--surface", nargs=2, metavar="NAME=LO:HI:N")
        else:
            s.add_argument("--free", help="comma-separated parameter names")
            s.add_argument("--budget", type=int)
            s.add_argument("--init", help="comma-separated NAME=VALUE starting values")

    s = sub.add_parser("verify", parents=[common], help="run a self-check suite")
    s.add_argument("--suite", choices=["solver", "slopes", "density", "speed", "pwl", "all"], default="solver")
    s.add_argument("--out", help="write the JSON report here")
    return ap


# ------------------------------------------------------------ commands

def _summary_lines(mode, res):
    days = [i + 1 for i, x in enumerate(res.pattern.delta) if x]
    yield f"mode: {mode}"
    yield f"participation days: {days}"
    yield "durations (hr): " + ", ".join(f"{x:.4f}" for x in res.pattern.d)
    yield f"objective: {res.objective:.10g}"
    yield f"weeks (K*): {res.weeks}"


def cmd_solve(args):
    from .solver import ConditionedProblem, solve_conditioned, solve_full, solve_multiweek
    cfg = config.load_config(args.config)
    params = config.model_params(cfg)
    h = config.horizon(cfg)
    inputs = config.scenario_inputs(cfg, args.scenario)
    if inputs.H != h.H:
        raise ConfigError(f"scenario has {inputs.H} days but [model] H = {h.H}")
    delta = loc = None
    if args.conditioned:
        doc = io.read_json(args.conditioned)
        try:
            delta = np.asarray(doc["delta"], dtype=np.int64)
        except (KeyError, TypeError, ValueError):
            raise ConfigError("pattern file needs a 'delta' list") from None
        loc = np.asarray(doc.get("loc", np.zeros(delta.shape[0], int)), dtype=np.int64)
        if delta.shape[0] != h.H:
            raise ConfigError(f"pattern has {delta.shape[0]} days, expected {h.H}")
    if args.multiweek:
        mode = "multiweek"
        res = solve_multiweek(inputs, params, h, delta=delta, loc=loc, location_policy=args.location_policy,
                              max_weeks=args.max_weeks)
    elif delta is not None:
        mode = "conditioned"
        res = solve_conditioned(ConditionedProblem(delta, loc, inputs, params, h))
    else:
        mode = "full"
        res = solve_full(inputs, params, h, args.location_policy)
    doc = {"mode": mode, "params": params.to_dict(), "result": res.to_dict()}
    io.validate(doc, "solve_result")
    out = Path(args.out)
    io.write_json(out, doc)
    for line in _summary_lines(mode, res):
        print(line)
    if args.plot:
        from .plotting import plot_solve
        plot_solve(doc["result"], out.with_suffix(".png"))
    return EXIT_OK


def cmd_synth(args):
    from .synth import ecommerce_preset, generate_population, generate_scenario, simulate_patterns, summary_stats
    cfg = config.load_config(args.config) if args.config else config.parse_config({})
    opts = config.synth_options(cfg)
    preset = args.preset or opts["preset"]
    n = args.n if args.n is not None else int(opts["n_persons"])
    zones = args.zones if args.zones is not None else int(opts["n_zones"])
    seed = args.seed if args.seed is not None else int(opts["seed"])
    if n < 1 or zones < 1:
        raise ConfigError("--n and --zones must be positive")
    if preset == "ecommerce":
        scen, base = ecommerce_preset()
    else:
        scen, base = generate_scenario(zones, seed), None
    pop = config.population_params(cfg, base)
    persons = generate_population(n, scen, seed)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        res = simulate_patterns(persons, scen, pop, seed, max_weeks=int(opts["max_weeks"]))
    for w in caught:
        if "excluded" in str(w.message):
            print(f"warning: {w.message}", file=sys.stderr)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_observations(out / "observations.csv", res.observations)
    io.write_json(out / "scenario.json", scen.to_dict())
    summ = summary_stats(res.observations, scen)
    summ.update({"preset": preset, "seed": seed, "n_requested": n, "excluded": res.excluded.tolist()})
    io.validate(summ, "synth_summary")
    io.write_json(out / "summary.json", summ)
    io.write_json(out / "population.json", pop.to_dict())
    (out / "participation_by_day.csv").write_text(
        io.table_csv(("day", "participations"), enumerate(summ["participation_by_day"], 1)))
    e = summ["duration_hist"]["edges_hr"]
    (out / "duration_hist.csv").write_text(
        io.table_csv(("lo_hr", "hi_hr", "count"), zip(e[:-1], e[1:], summ["duration_hist"]["counts"])))
    e = summ["tt_hist"]["edges_min"]
    (out / "tt_hist.csv").write_text(
        io.table_csv(("lo_min", "hi_min", "count"), zip(e[:-1], e[1:], summ["tt_hist"]["counts"])))
    print(f"{summ['n_persons']} persons, mean weekly participation {summ['mean_weekly_participation']:.3f}, "
          f"mean one-way travel time {summ['mean_one_way_tt_min']:.1f} min")
    if args.plot:
        from .plotting import plot_synth
        plot_synth(summ, out / "synth.png")
    return EXIT_OK


def _parse_axis(text):
    try:
        name, rng = text.split("=")
        lo, hi, n = rng.split(":")
        return name, np.linspace(float(lo), float(hi), int(n))
    except ValueError:
        raise ConfigError(f"bad surface axis {text!r}; expected NAME=LO:HI:N") from None


def _likelihood_setup(args):
    cfg = config.load_config(args.config) if args.config else config.parse_config({})
    est = config.estimation_options(cfg)
    data_path = args.data or est.get("data")
    scen_path = args.scenario or est.get("scenario")
    if not data_path or not scen_path:
        raise ConfigError("need --data and --scenario (or [estimation] data/scenario)")
    base = cfg.base_dir if not args.data else Path(".")
    data = io.read_observations(Path(data_path) if args.data else base / data_path)
    scen = io.zone_scenario_from_dict(io.read_json(Path(scen_path) if args.scenario else cfg.base_dir / scen_path))
    pop = config.population_params(cfg)
    R = args.draws if args.draws is not None else int(est["draws"])
    seed = args.seed if args.seed is not None else int(est["seed"])
    cs = args.choice_set_size if args.choice_set_size is not None else est["choice_set_size"]
    if R < 1:
        raise ConfigError("--draws must be >= 1")
    try:
        L = SimulatedLikelihood(data, scen, R, seed, choice_sets=cs, max_weeks=int(est["max_weeks"]),
                                threads=args.threads)
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    return cfg, est, data, scen, pop, R, seed, L


def _param_values(pop, names):
    return {n: pop.get(n) for n in names}


def cmd_loglik(args):
    from .empirical import PARAM_NAMES
    from .estimate import loglik_surface
    cfg, est, data, scen, pop, R, seed, L = _likelihood_setup(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    named = [n for n in PARAM_NAMES if n != "q1" or pop.xi.q1 is not None]
    doc = {"draws": R, "seed": seed, "n_persons": len(data), "params": _param_values(pop, named)}
    axes = args.surface or None
    if axes is None and est.get("surface"):
        axes = [f"{k}={v[0]}:{v[1]}:{int(v[2])}" for k, v in est["surface"].items()]
    if axes:
        if len(axes) != 2:
            raise ConfigError("a surface needs exactly two axes")
        a1, a2 = _parse_axis(axes[0]), _parse_axis(axes[1])
        surf = loglik_surface(data, pop, a1, a2, R, seed, scen, likelihood=L)
        rows = [[float(a)] + [float(v) for v in surf.values[i]] for i, a in enumerate(surf.grid1)]
        header = [f"{a1[0]}\\{a2[0]}"] + [repr(float(b)) for b in surf.grid2]
        (out / "surface.csv").write_text(io.table_csv(header, rows))
        doc["surface"] = {"axes": list(surf.names), "grid1": surf.grid1.tolist(), "grid2": surf.grid2.tolist(),
                          "argmax": list(surf.argmax_point)}
        print(f"surface {surf.values.shape[0]}x{surf.values.shape[1]}, argmax "
              f"{surf.names[0]}={surf.argmax_point[0]:.4g}, {surf.names[1]}={surf.argmax_point[1]:.4g}")
        if args.plot:
            from .plotting import plot_surface
            plot_surface(surf.names, surf.grid1, surf.grid2, surf.values, out / "surface.png")
    else:
        ll = L(pop)
        doc["loglik"] = ll if np.isfinite(ll) else None
        doc["zero_probability_persons"] = L.zero_persons.tolist()
        print(f"log-likelihood {ll:.10g} ({len(L.zero_persons)} persons at the probability floor)")
    io.validate(doc, "loglik_report")
    io.write_json(out / "loglik.json", doc)
    return EXIT_OK


def cmd_estimate(args):
    from .estimate import maximize
    cfg, est, data, scen, pop, R, seed, L = _likelihood_setup(args)
    free = [x.strip() for x in args.free.split(",") if x.strip()] if args.free is not None else list(est["free"])
    budget = args.budget if args.budget is not None else int(est["budget"])
    init = dict(est.get("init", {}))
    if args.init:
        for item in args.init.split(","):
            try:
                k, v = item.split("=")
                init[k.strip()] = float(v)
            except ValueError:
                raise ConfigError(f"bad --init item {item!r}") from None
    try:
        start = pop.with_values(**init) if init else pop
        res = maximize(data, start, free, budget, R, seed, scen, likelihood=L)
    except KeyError as exc:
        raise ConfigError(f"unknown parameter {exc}") from None
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trace.csv").write_text(io.table_csv(["iteration"] + free + ["loglik"],
                                                [[r["iteration"]] + [r[n] for n in free] + [r["loglik"]]
                                                 for r in res.trace]))
    doc = {"free": free, "budget": budget, "draws": R, "seed": seed,
           "estimates": _param_values(res.estimates, free), "loglik": res.loglik,
           "iterations": len(res.trace), "evaluations": res.n_evals, "converged": res.converged,
           "params": res.estimates.to_dict()}
    io.validate(doc, "estimate_report")
    io.write_json(out / "estimate.json", doc)
    print("estimates: " + ", ".join(f"{k}={v:.4f}" for k, v in doc["estimates"].items())
          + f"; log-likelihood {res.loglik:.6f} after {len(res.trace)} iterations")
    if args.plot and res.trace:
        from .plotting import plot_trace
        plot_trace(res.trace, free, out / "trace.png")
    return EXIT_OK


def cmd_verify(args):
    from .verify import run_suite
    seed = args.seed if args.seed is not None else 0
    checks = run_suite(args.suite, seed)
    for c in checks:
        print(c.line())
    ok = all(c.passed for c in checks)
    doc = {"suite": args.suite, "seed": seed, "passed": ok,
           "checks": [{"name": c.name, "passed": bool(c.passed), "detail": None if c.timed else c.detail}
                      for c in checks]}
    io.validate(doc, "verify_report")
    if args.out:
        io.write_json(args.out, doc)
    return EXIT_OK if ok else EXIT_VERIFY


COMMANDS = {"solve": cmd_solve, "synth": cmd_synth, "loglik": cmd_loglik, "estimate": cmd_estimate,
            "verify": cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("needsbased: error: --threads must be >= 1", file=sys.stderr)
            return EXIT_CONFIG
        batch.set_threads(args.threads)
    try:
        return COMMANDS[args.cmd](args)
    except (ConfigError, DomainError) as exc:
        print(f"needsbased: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InfeasibleError, HorizonCapError) as exc:
        print(f"needsbased: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
