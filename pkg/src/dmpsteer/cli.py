"""Command line entry points.

    dmpsteer run --scenario F --user U --record R [--dt]
    dmpsteer serve --scenario F --port P [--record R]
    dmpsteer metrics R [--scenario F]
    dmpsteer fit --demo D --out M

Exit codes: 0 success, 2 configuration error, 3 runtime fault.
"""

from __future__ import annotations

import argparse
import os
import sys

import yaml

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FAULT = 3


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dmpsteer", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario headless")
    run_p.add_argument("--scenario", required=True, help="path to scenario.yaml")
    run_p.add_argument(
        "--user",
        default="none",
        help="'none', an embedded scripted-user name, a user-script yaml path, "
        "or replay:<trace path>",
    )
    run_p.add_argument("--record", default=None, help="trace output path")
    run_p.add_argument("--dt", type=float, default=None, help="override scenario dt (s)")
    run_p.add_argument("--max-time", type=float, default=None)

    serve_p = sub.add_parser("serve", help="serve a live session for the browser UI")
    serve_p.add_argument("--scenario", required=True)
    serve_p.add_argument("--port", type=int, default=8733)
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--record", default=None)
    serve_p.add_argument("--dt", type=float, default=None)
    serve_p.add_argument("--pace", type=float, default=1.0, help="sim seconds per wall second")

    met_p = sub.add_parser("metrics", help="print metrics for a recorded trace")
    met_p.add_argument("trace", help="trace file path")
    met_p.add_argument("--scenario", default=None, help="scenario for outcome evaluation")
    met_p.add_argument("--d", type=float, default=0.005, help="input displacement threshold (m)")
    met_p.add_argument("--v-alpha", type=float, default=0.01, help="idle velocity threshold (m/s)")

    fit_p = sub.add_parser("fit", help="fit a segment model from a demonstration file")
    fit_p.add_argument("--demo", required=True, help="demo yaml path")
    fit_p.add_argument("--out", required=True, help="model yaml output path")
    fit_p.add_argument("--n-bases", type=int, default=30)
    fit_p.add_argument("--alpha", type=float, default=25.0)
    return p


def _resolve_user(spec: str, scenario):
    from .scripted import ReplayUser, ScriptedUser, ScriptEntry, null_user
    from .scenario import ConfigError
    from .trace import extract_inputs, load_trace

    if spec == "none":
        return null_user
    if spec.startswith("replay:"):
        return ReplayUser(extract_inputs(load_trace(spec[len("replay:"):])))
    if spec in scenario.users:
        return scenario.scripted_user(spec)
    if os.path.exists(spec):
        with open(spec) as fh:
            doc = yaml.safe_load(fh)
        entries = doc["entries"] if isinstance(doc, dict) else doc
        return ScriptedUser([ScriptEntry.from_doc(e) for e in entries])
    raise ConfigError(
        f"user {spec!r} is neither 'none', an embedded script {list(scenario.users)}, "
        f"a file, nor replay:<path>"
    )


def _cmd_run(args) -> int:
    from .scenario import load_scenario
    from .session import run

    scenario = load_scenario(args.scenario)
    user = _resolve_user(args.user, scenario)
    result = run(
        scenario, user=user, dt=args.dt, record_path=args.record, max_time=args.max_time
    )
    for line in result.metrics.lines():
        print(line)
    if args.record:
        print(f"trace -> {args.record}")
    if result.outcome is not None and not result.outcome.success:
        print("note: task outcome FAILURE (exit stays 0; the run itself succeeded)")
    return EXIT_OK


def _cmd_serve(args) -> int:
    from .scenario import load_scenario
    from .server import serve

    scenario = load_scenario(args.scenario)
    serve(
        scenario,
        host=args.host,
        port=args.port,
        record_path=args.record,
        dt=args.dt,
        pace=args.pace,
    )
    return EXIT_OK


def _cmd_metrics(args) -> int:
    from .plant import evaluate_outcome
    from .scenario import load_scenario
    from .session import compute_input_time, session_metrics
    from .trace import load_trace

    trace = load_trace(args.trace)
    outcome = None
    if args.scenario:
        scenario = load_scenario(args.scenario)
        if scenario.hash() != trace.header.get("config_hash"):
            print("warning: scenario hash does not match the trace header", file=sys.stderr)
        if scenario.success:
            outcome = evaluate_outcome(trace, scenario, scenario.surfaces)
    m = session_metrics(trace, None, outcome)
    m.t_input_corrective = compute_input_time(trace, "corrective", d=args.d)
    m.t_input_motion = compute_input_time(trace, "motion_based", v_alpha=args.v_alpha)
    for line in m.lines():
        print(line)
    if not trace.complete:
        print("partial trace: run did not finish (truncated file or max-time abort)")
    return EXIT_OK


def _cmd_fit(args) -> int:
    from .demos import demo_from_doc
    from .dmp import fit_lwr, model_to_doc

    with open(args.demo) as fh:
        demo = demo_from_doc(yaml.safe_load(fh))
    model = fit_lwr(demo, n_bases=args.n_bases, alpha=args.alpha)
    with open(args.out, "w") as fh:
        yaml.safe_dump(model_to_doc(model), fh, sort_keys=False)
    print(f"fitted {len(demo.channels)} channels over {demo.duration:.3f} s -> {args.out}")
    return EXIT_OK


def main(argv=None) -> int:
    from .scenario import ConfigError
    from .session import RuntimeFault
    from .trace import TraceVersionError

    args = _build_parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "serve": _cmd_serve,
        "metrics": _cmd_metrics,
        "fit": _cmd_fit,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, TraceVersionError, FileNotFoundError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RuntimeFault as exc:
        print(f"runtime fault: {exc}", file=sys.stderr)
        return EXIT_FAULT


if __name__ == "__main__":
    sys.exit(main())
