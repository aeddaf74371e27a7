"""Command-line client.

Without ``--server`` every command runs in-process; with it, the same
request is sent to a running ``insarplan serve`` instance and the CSVs are
written locally from the response.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .cli_experiments import (
    DESK_PSI_STEP,
    FIGURES,
    ExperimentError,
    ExperimentSpec,
    SchemaError,
    check_feasible,
    collect,
    desk_config,
    format_summary,
    summarize,
    write_outputs,
)
from .scenario import ScenarioError, load_scenario
from .schemas import none_to_nan

EXIT_INFEASIBLE = 2
EXIT_BAD_INPUT = 3

log = logging.getLogger("insarplan")


def _psi(text: str):
    if text.lower() == "auto":
        return "auto"
    val = float(text)
    if not 0.0 <= val <= 1.0:
        raise argparse.ArgumentTypeError("psi must lie in [0, 1] or be 'auto'")
    return val


def _seed(text: str) -> int:
    val = int(text, 0)
    if not 0 <= val < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return val


def _fail(cause: str, message: str, code: int) -> int:
    print(json.dumps({"error": cause, "message": message}), file=sys.stderr)
    return code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="insarplan", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one figure campaign and write CSVs")
    run.add_argument("--figure", required=True, choices=FIGURES)
    run.add_argument("--scenario", type=Path, help="scenario file (defaults built in)")
    run.add_argument("--realizations", type=int, help="Monte-Carlo realizations (desk default 20)")
    run.add_argument("--seed", type=_seed, default=0)
    run.add_argument("--psi", type=_psi, default=None, help="AO velocity step, or 'auto' to search it")
    run.add_argument("--benchmark", default="none", choices=("1", "2", "3", "none", "all"))
    run.add_argument("--out", type=Path, default=Path("results"))
    run.add_argument("--paper-scale", action="store_true", help="use the scenario's full swarm and realization count")
    run.add_argument("--init", default="F1", choices=("F1", "F2"))
    run.add_argument("--psi-step", type=float, help="psi search grid step")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--server", help="base URL of a running service, e.g. http://127.0.0.1:8000")

    s = sub.add_parser("summarize", help="final coverage per scheme and gains")
    s.add_argument("csv_dir", type=Path)

    solve = sub.add_parser("solve", help="plan a single mission and print it as JSON")
    solve.add_argument("--scenario", type=Path)
    solve.add_argument("--psi", type=float)
    solve.add_argument("--benchmark", default="none", choices=("1", "2", "3", "none"))
    solve.add_argument("--init", default="F1", choices=("F1", "F2"))
    solve.add_argument("--seed", type=_seed, default=0)
    solve.add_argument("--paper-scale", action="store_true")
    solve.add_argument("--server")

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return p


def _config(args):
    cfg = load_scenario(args.scenario, env=os.environ)
    return cfg if args.paper_scale else desk_config(cfg)


def _run_remote(args) -> tuple[list[dict], list[dict], str | None]:
    import httpx

    payload = {
        "figure": args.figure, "realizations": args.realizations, "seed": args.seed,
        "psi": args.psi, "benchmark": args.benchmark, "init": args.init, "psi_step": args.psi_step,
        "paper_scale": args.paper_scale,
        "scenario_text": args.scenario.read_text(encoding="utf-8") if args.scenario else None,
    }
    resp = httpx.post(args.server.rstrip("/") + "/experiments", json=payload, timeout=None)
    resp.raise_for_status()
    body = resp.json()
    return [none_to_nan(r) for r in body["runs"]], [none_to_nan(r) for r in body["aggregate"]], body["error"]


def cmd_run(args) -> int:
    try:
        if args.server:
            rows, agg, error = _run_remote(args)
            write_outputs(args.out, args.figure, rows, agg)
            if error:
                return _fail(error, "no run produced a feasible plan", EXIT_INFEASIBLE)
        else:
            cfg = _config(args)
            spec = ExperimentSpec(
                figure=args.figure, cfg=cfg, realizations=args.realizations or cfg.realizations,
                seed=args.seed, psi=args.psi, benchmark=args.benchmark, out=args.out, init=args.init,
                psi_step=args.psi_step or (cfg.eps_5 if args.paper_scale else DESK_PSI_STEP),
                workers=args.workers,
            )
            rows, agg = collect(spec)
            write_outputs(spec.out, spec.figure, rows, agg)
            check_feasible(rows)
    except ExperimentError as exc:
        return _fail(exc.cause, str(exc), EXIT_INFEASIBLE)
    except (ScenarioError, ValueError, OSError) as exc:
        return _fail("bad_input", str(exc), EXIT_BAD_INPUT)
    print(f"wrote {args.out / (args.figure + '_runs.csv')} and {args.out / (args.figure + '_aggregate.csv')}")
    return 0


def cmd_summarize(args) -> int:
    try:
        items = summarize(args.csv_dir)
    except SchemaError as exc:
        return _fail("schema", str(exc), EXIT_BAD_INPUT)
    print(format_summary(items))
    return 0


def cmd_solve(args) -> int:
    payload = {"psi": args.psi, "scheme": args.benchmark, "init": args.init, "seed": args.seed,
               "paper_scale": args.paper_scale}
    try:
        if args.server:
            import httpx

            if args.scenario:
                return _fail("bad_input", "--scenario is not forwarded to a server; use overrides", EXIT_BAD_INPUT)
            resp = httpx.post(args.server.rstrip("/") + "/solve", json=payload, timeout=None)
            resp.raise_for_status()
            body = resp.json()
        else:
            from .api import solution_out
            from .ao_driver import AoSettings, Scheme, initial_state, run_ao

            cfg = _config(args)
            sol = run_ao(cfg, args.psi, initial_state(cfg, args.init), args.seed,
                         Scheme.from_benchmark(args.benchmark),
                         AoSettings(n_particles=cfg.pso_particles, pso_iters=cfg.pso_iters))
            body = solution_out(sol).model_dump()
    except (ScenarioError, OSError) as exc:
        return _fail("bad_input", str(exc), EXIT_BAD_INPUT)
    print(json.dumps(body, indent=2))
    return 0 if body["feasible"] else EXIT_INFEASIBLE


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("insarplan.api:app", host=args.host, port=args.port)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": cmd_run, "summarize": cmd_summarize, "solve": cmd_solve, "serve": cmd_serve}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
