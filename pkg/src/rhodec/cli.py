"""Command line interface.

Subcommands: solve, evaluate, simulate, sweep, mav-domain, track-sim,
validate. Exit codes: 0 success, 2 input error, 3 resource cap hit.
Commands that write delimited output can also render a figure next to it
via --plot.
"""

import argparse
import csv
import json
import sys

import numpy as np

from .errors import ModelFormatError, ResourceExhausted, RhodecError
from .mav import BASELINE_KINDS, MavDomainParams, build_mav_domain, make_baseline_policy
from .model import validate_model
from .modelfile import parse_model, policy_from_dict, policy_to_dict, write_model
from .policy import policy_value
from .search import solve_maastar
from .simulate import (CONTROLLER_KINDS, EpisodeConfig, aggregate_stats,
                       prior_sweep_evaluation, run_batch)
from .tracking import TRACKING_CONTROLLERS, TrackingScenario, simulate_tracking

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_RESOURCE = 3


def _load_model(source):
    if source == "mav":
        return build_mav_domain()
    with open(source) as handle:
        return parse_model(handle.read())


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)


def _parse_grid(spec):
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid must be start:step:stop, got {spec!r}")
    start, step, stop = (float(p) for p in parts)
    if step <= 0 or stop < start:
        raise ValueError(f"bad grid {spec!r}")
    count = int(round((stop - start) / step)) + 1
    return np.linspace(start, stop, count)


def _cmd_validate(args):
    model = _load_model(args.model)
    violations = validate_model(model)
    if not violations:
        print(f"ok: {len(model.states)} states, {model.n_agents} agents, "
              f"{model.n_joint_actions} joint actions, "
              f"{model.n_joint_observations} joint observations")
        return EXIT_OK
    for v in violations:
        print(str(v))
    print(f"{len(violations)} violation(s)")
    return EXIT_INPUT


def _cmd_mav_domain(args):
    params = MavDomainParams(p_stay_neutral=args.p0, p_stay_hostile=args.p1,
                             prior_neutral=args.p_neutral, alpha=args.alpha)
    text = write_model(build_mav_domain(params))
    if args.out:
        with open(args.out, "w") as handle:
            handle.write(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_solve(args):
    model = _load_model(args.model)
    result = solve_maastar(model, args.horizon, heuristic=args.heuristic,
                           expansion_cap=args.expansion_cap)
    print(f"value {result.value:.6f}  expanded {result.nodes_expanded}  "
          f"generated {result.nodes_generated}  time {result.wall_time:.3f}s")
    if args.out:
        with open(args.out, "w") as handle:
            json.dump(policy_to_dict(model, result.policy), handle, indent=2)
        print(f"wrote policy to {args.out}")
    if args.json:
        with open(args.json, "w") as handle:
            json.dump(result.to_dict(), handle, indent=2)
    return EXIT_OK


def _cmd_evaluate(args):
    model = _load_model(args.model)
    if args.policy:
        with open(args.policy) as handle:
            policy = policy_from_dict(model, json.load(handle))
    elif args.baseline:
        horizon = args.horizon or 3
        policy = make_baseline_policy(args.baseline, horizon, seed=args.seed)
    else:
        raise ValueError("evaluate needs --policy or --baseline")
    horizon = args.horizon or policy.depth
    value = policy_value(model, policy, horizon)
    print(f"value {value:.6f} (horizon {horizon})")
    if args.json:
        with open(args.json, "w") as handle:
            json.dump({"value": value, "horizon": horizon}, handle, indent=2)
    return EXIT_OK


def _cmd_simulate(args):
    model = _load_model(args.model)
    config = EpisodeConfig(planning_horizon=args.horizon, comm_period=args.comm,
                           total_decisions=args.steps, run_count=args.runs,
                           rng_seed=args.seed, controller=args.controller)
    traces = run_batch(model, config, workers=args.threads)
    totals = [t.total_reward for t in traces]
    if len(totals) >= 2:
        mean, half = aggregate_stats(totals)
        print(f"{args.controller}: mean total reward {mean:.2f} +/- {half:.2f} "
              f"(95% CI, {len(totals)} runs)")
    else:
        mean, half = totals[0], 0.0
        print(f"{args.controller}: total reward {mean:.2f} (single run)")
    if args.csv:
        rows = []
        for run, trace in enumerate(traces):
            for rec in trace.records:
                a = [model.actions_per_agent[i][c] for i, c in enumerate(rec.action)]
                z = [model.observations_per_agent[i][c]
                     for i, c in enumerate(rec.observation)]
                rows.append([run, rec.step, *a, *z,
                             f"{rec.reward:.10g}", f"{rec.cumulative:.10g}"])
        _write_csv(args.csv, ["run", "step", "action_1", "action_2",
                              "obs_1", "obs_2", "reward", "cumulative"], rows)
        print(f"wrote {args.csv}")
    if args.json:
        with open(args.json, "w") as handle:
            json.dump({"controller": args.controller, "runs": len(totals),
                       "mean": mean, "ci95_half_width": half,
                       "totals": totals}, handle, indent=2)
    if args.plot:
        from . import plotting
        plotting.save_figure(plotting.simulation_figure(traces, args.controller),
                             args.plot)
        print(f"wrote {args.plot}")
    return EXIT_OK


def _cmd_sweep(args):
    grid = _parse_grid(args.grid)
    rows = prior_sweep_evaluation(grid, args.horizon, workers=args.threads)
    if args.csv:
        _write_csv(args.csv, ["prior_neutral", "policy", "value"],
                   [[f"{r.prior_neutral:.10g}", r.policy, f"{r.value:.10g}"]
                    for r in rows])
        print(f"wrote {args.csv}")
    else:
        for r in rows:
            print(f"{r.prior_neutral:.3f} {r.policy} {r.value:.6f}")
    if args.plot:
        from . import plotting
        plotting.save_figure(plotting.sweep_figure(rows), args.plot)
        print(f"wrote {args.plot}")
    return EXIT_OK


def _cmd_track_sim(args):
    scenario = TrackingScenario(controller=args.controller, steps=args.steps,
                                seed=args.seed)
    result = simulate_tracking(scenario)
    print(f"{args.controller}: mean entropy {result.mean_entropy:.3f} nats, "
          f"{result.interference_steps} interfered steps, "
          f"SSE vs baseline {result.sse_vs_baseline:.2f}")
    if args.csv:
        _write_csv(args.csv,
                   ["step", "entropy_nats", "interfered", "err_x", "err_y",
                    "baseline_err_x", "baseline_err_y", "action_1", "action_2"],
                   [[r.step, f"{r.entropy_nats:.10g}", r.interfered,
                     f"{r.err_x:.10g}", f"{r.err_y:.10g}",
                     f"{r.baseline_err_x:.10g}", f"{r.baseline_err_y:.10g}",
                     r.action_1, r.action_2] for r in result.rows])
        print(f"wrote {args.csv}")
    if args.json:
        with open(args.json, "w") as handle:
            json.dump({"controller": result.controller, "seed": result.seed,
                       "mean_entropy": result.mean_entropy,
                       "interference_steps": result.interference_steps,
                       "sse_vs_baseline": result.sse_vs_baseline},
                      handle, indent=2)
    if args.plot:
        from . import plotting
        plotting.save_figure(plotting.tracking_figure(result.rows, args.controller),
                             args.plot)
        print(f"wrote {args.plot}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rhodec",
        description="Cooperative planning with belief-entropy rewards: "
                    "optimal multi-agent search and tracking simulators.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a model file")
    p.add_argument("model", help="model file, or 'mav' for the built-in domain")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("mav-domain", help="write the two-observer tracking domain")
    p.add_argument("--p-neutral", type=float, default=0.5,
                   help="prior probability the target is neutral")
    p.add_argument("--p0", type=float, default=0.85, help="neutral stay probability")
    p.add_argument("--p1", type=float, default=0.6, help="hostile stay probability")
    p.add_argument("--alpha", type=float, default=1.0, help="entropy penalty weight")
    p.add_argument("--out", help="output file (stdout when omitted)")
    p.set_defaults(func=_cmd_mav_domain)

    p = sub.add_parser("solve", help="find an optimal joint policy")
    p.add_argument("--model", required=True)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--heuristic", choices=("pomdp", "mdp"), default="pomdp")
    p.add_argument("--expansion-cap", type=int, default=None)
    p.add_argument("--out", help="write the policy tree as JSON")
    p.add_argument("--json", help="write solver statistics as JSON")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("evaluate", help="exact value of a policy")
    p.add_argument("--model", required=True)
    p.add_argument("--policy", help="policy JSON produced by solve --out")
    p.add_argument("--baseline", choices=BASELINE_KINDS)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("simulate", help="closed-loop episodes with periodic "
                                        "communication")
    p.add_argument("--model", required=True)
    p.add_argument("--controller", choices=CONTROLLER_KINDS, default="optimal")
    p.add_argument("--horizon", type=int, default=3)
    p.add_argument("--comm", type=int, default=3, help="communication period")
    p.add_argument("--steps", type=int, default=51, help="decisions per episode")
    p.add_argument("--runs", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1,
                   help="worker processes for independent runs")
    p.add_argument("--csv")
    p.add_argument("--json")
    p.add_argument("--plot")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sweep", help="policy values across status priors")
    p.add_argument("--grid", default="0:0.05:1", help="start:step:stop")
    p.add_argument("--horizon", type=int, default=3)
    p.add_argument("--threads", type=int, default=1,
                   help="worker processes for independent grid points")
    p.add_argument("--csv")
    p.add_argument("--plot")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("track-sim", help="continuous tracking with sector control")
    p.add_argument("--controller", choices=TRACKING_CONTROLLERS, default="rho_dec")
    p.add_argument("--steps", type=int, default=150)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv")
    p.add_argument("--json")
    p.add_argument("--plot")
    p.set_defaults(func=_cmd_track_sim)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ResourceExhausted as exc:
        print(f"resource cap hit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ModelFormatError, RhodecError, FileNotFoundError, ValueError,
            KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
