"""Command line front end.

Exit status is 0 on success, 1 when the input fails validation and 2 on a
runtime failure. Every subcommand that writes files also writes
``manifest.json`` next to them.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import math
import platform
import sys
from importlib import metadata
from pathlib import Path

from . import __version__
from .channel import compute_pdp, pdp_csv
from .csvio import configuration_csv, links_csv, nodes_csv, read_table, schedule_csv, table
from .errors import PweError, ScenarioInvalid, ScenarioParseError
from .graph import Configuration, configuration_from_descriptors
from .optimizers import (ExplorerParams, TrainingParams, backprop_configure, evaluate, explorer_search,
                         k_shortest_configure, lexicographic_greedy)
from .scenario import (build_scenario_graph, builtin_scenario, channel_params, objectives, parse_scenario,
                       serialize_scenario, sim_setup)
from .scheduler import Limits, Topology, build_model, relax_and_round, solve_exact, to_lp
from .scheduler.exact import check_size
from .sim import run_scenario

OK, INVALID, FAILED = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(INVALID, f"{self.prog}: error: {message}\n")


def load(arg: str):
    p = Path(arg)
    if not p.exists() and "/" not in arg and not arg.endswith(".json"):
        return builtin_scenario(arg)
    return parse_scenario(p)


def _versions() -> dict:
    out = {"pwe": __version__, "python": platform.python_version()}
    for pkg in ("numpy", "pydantic", "fastapi"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            pass
    return out


def write_outputs(out: Path, files: dict, args, scenario, seed) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_text(text)
    manifest = {
        "command": args.command,
        "seed": seed,
        "versions": _versions(),
        "arguments": {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "command")},
        "outputs": sorted(files),
        "scenario": json.loads(serialize_scenario(scenario)),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _seed(args, scenario) -> int:
    return scenario.simulation.seed if args.seed is None else args.seed


def _config_from(path, graph):
    if path is None:
        return None
    rows = read_table(Path(path).read_text())
    return configuration_from_descriptors(graph, {r["tile_id"]: r["function"] for r in rows})


# ---------------------------------------------------------------- subcommands

def cmd_build_graph(args) -> int:
    sc = load(args.scenario)
    g = build_scenario_graph(sc)
    write_outputs(Path(args.out), {"nodes.csv": nodes_csv(g), "links.csv": links_csv(g)}, args, sc, _seed(args, sc))
    return OK


def cmd_configure(args) -> int:
    sc = load(args.scenario)
    opt = sc.optimizer.model_copy(update={k: v for k, v in (("name", args.optimizer), ("k", args.k)) if v is not None})
    seed = _seed(args, sc)
    objs = objectives(sc)
    if not objs:
        raise UsageError("scenario has no objectives to configure for")
    g = build_scenario_graph(sc)
    params = channel_params(sc)
    paths = []
    if opt.name == "kpaths":
        res = k_shortest_configure(g, objs, opt.k, params, fallback_min_cos=opt.fallback_min_cos,
                                   paths_per_pair=min(opt.paths_per_pair, opt.k))
        for (s, d), cands in sorted(res.candidates.items()):
            paths += [(s, d, rank, repr(float(cost)), " ".join(nodes)) for rank, (cost, nodes) in enumerate(cands)]
        config = res.configuration
    elif opt.name == "lexi":
        res = lexicographic_greedy(g, [o.pair for o in objs], params, prefer_reuse=opt.prefer_reuse)
        paths = [(s, d, 0, "", " ".join(r)) for (s, d), r in sorted(res.routes.items())]
        config = res.configuration
    elif opt.name == "explorer":
        tx = objs[0].tx
        rxs = sorted({o.rx for o in objs if o.tx == tx})
        res = explorer_search(g, tx, rxs, ExplorerParams(spawn_fanout=opt.explorer_fanout, rounds=opt.explorer_rounds,
                                                         seed=seed), params)
        for rx in rxs:
            paths += [(tx, rx, rank, repr(float(p.power_dbm)), " ".join(p.nodes))
                      for rank, p in enumerate(res.top.get(rx, []))]
        config = res.configuration
    else:
        if not opt.backprop_walls or not opt.backprop_target_w:
            raise UsageError("backprop needs optimizer.backprop_walls and optimizer.backprop_target_w")
        tx = objs[0].tx
        rxs = [o.rx for o in objs if o.tx == tx]
        res = backprop_configure(g, tx, rxs, opt.backprop_walls, opt.backprop_target_w,
                                 TrainingParams(opt.learning_rate, opt.backprop_epochs, seed=seed), params)
        config = res.configuration
    report = evaluate(g, Configuration(), config, objs, params)
    report_json = {
        "optimizer": opt.name,
        "k": opt.k,
        "touches": report.touches,
        "free_tiles": report.free_tiles,
        "score": report.score,
        "violations": list(report.violations),
        "metrics": [{"tx_id": s, "rx_id": d, **{m: (v if math.isfinite(v) else None) for m, v in vals.items()}}
                    for (s, d), vals in sorted(report.metrics.items())],
    }
    files = {
        "configuration.csv": configuration_csv(g, config),
        "paths.csv": table(("tx_id", "rx_id", "rank", "score", "nodes"), paths),
        "report.json": json.dumps(report_json, indent=2, sort_keys=True) + "\n",
    }
    write_outputs(Path(args.out), files, args, sc, seed)
    return OK


def _schedule_instance(sc, rounds_flag):
    spec = sc.schedule
    if spec is not None and spec.nodes:
        topo = Topology.from_edges(spec.nodes, spec.edges, spec.endpoints)
        pairs = [list(map(tuple, prs)) for prs in spec.pairs_per_round]
        initial = {(r.tx_id, r.rx_id): list(r.nodes) for r in spec.initial_routes}
    else:
        g = build_scenario_graph(sc)
        pairs = [[o.pair for o in objectives(sc)]]
        if not pairs[0]:
            raise UsageError("scenario has neither a schedule section nor objectives")
        topo = Topology.from_graph(g, {n for p in pairs[0] for n in p})
        initial = {}
    rounds = rounds_flag or len(pairs) or 1
    if len(pairs) == 1 and rounds > 1:
        pairs = pairs * rounds
    if len(pairs) != rounds:
        raise UsageError(f"--rounds {rounds} does not match the {len(pairs)} rounds of pairs in the scenario")
    return topo, pairs, rounds, initial


def cmd_schedule(args) -> int:
    sc = load(args.scenario)
    seed = _seed(args, sc)
    if args.rounds is not None and args.rounds < 1:
        raise UsageError("--rounds must be >= 1")
    topo, pairs, rounds, initial = _schedule_instance(sc, args.rounds)
    spec = sc.schedule
    limits = Limits(spec.max_tiles, spec.max_rounds, spec.max_pairs) if spec is not None else Limits()
    if not args.relax:
        # refuse before the cubic distance block gets built
        check_size(len(topo.tiles), rounds, max(len(p) for p in pairs), limits)
    model = build_model(topo, pairs, rounds, initial)
    if args.relax:
        attempts = spec.relax_attempts if spec is not None else 200
        sched = relax_and_round(model, seed=seed, attempts=attempts)
    else:
        sched = solve_exact(model, limits)
    summary = {
        "method": "relax_and_round" if args.relax else "exact",
        "touches": sched.touches,
        "consistent": sched.consistent,
        "lp_bound": sched.lp_bound,
        "routes": [[{"tx_id": s, "rx_id": d, "nodes": r} for (s, d), r in sorted(rs.items())]
                   for rs in sched.routes],
    }
    files = {"schedule.csv": schedule_csv(sched), "schedule.json": json.dumps(summary, indent=2) + "\n",
             "model.lp": to_lp(model)}
    write_outputs(Path(args.out), files, args, sc, seed)
    return OK


def cmd_simulate(args) -> int:
    sc = load(args.scenario)
    if args.optimizer is not None or args.k is not None:
        upd = {k: v for k, v in (("name", args.optimizer), ("k", args.k)) if v is not None}
        sc = sc.model_copy(update={"optimizer": sc.optimizer.model_copy(update=upd)})
    seed = _seed(args, sc)
    setup = sim_setup(sc, seed)
    modes = ("on", "off") if args.mode == "both" else (args.mode,)
    series = run_scenario(build_scenario_graph(sc), setup, modes)
    files = {f"timeseries_{m}.csv": series[m].to_csv() for m in modes}
    write_outputs(Path(args.out), files, args, sc, seed)
    return OK


def _parse_endpoint(ep: str):
    if ep in ("stdio", "-"):
        return "stdio", None, None
    scheme, _, rest = ep.partition("://")
    if scheme not in ("tcp", "http") or ":" not in rest:
        raise UsageError(f"endpoint must be stdio, tcp://HOST:PORT or http://HOST:PORT, got {ep!r}")
    host, _, port = rest.rpartition(":")
    return scheme, host, int(port)


def _service(args):
    from .service import PdpService
    sc = load(args.scenario)
    g = build_scenario_graph(sc)
    return PdpService(g, _config_from(args.config, g), channel_params(sc))


def cmd_serve(args) -> int:
    scheme, host, port = _parse_endpoint(args.endpoint)
    service = _service(args)
    if scheme == "stdio":
        from .service import serve_pipe
        serve_pipe(service)
    elif scheme == "tcp":
        from .service import serve_stream
        ready = lambda addr: print(f"listening on tcp://{addr[0]}:{addr[1]}", file=sys.stderr, flush=True)
        try:
            asyncio.run(serve_stream(service, host, port, ready))
        except KeyboardInterrupt:
            pass
    else:
        import uvicorn
        from .service import create_app
        uvicorn.run(create_app(service), host=host, port=port, log_level="warning")
    return OK


def cmd_pdp(args) -> int:
    from .service import PdpRequest, PdpResponse, response_csv
    pos = tuple(float(x) for x in args.position.split(",")) if args.position else None
    if pos is not None and len(pos) != 3:
        raise UsageError("--position takes x,y,z")
    overrides = {}
    if args.config is not None:
        overrides = {r["tile_id"]: r["function"] for r in read_table(Path(args.config).read_text())}
    req = PdpRequest(tx_id=args.tx, rx_id=args.rx, overrides=overrides, rx_position=pos)
    if args.endpoint is None:
        sc = load(args.scenario)
        g = build_scenario_graph(sc)
        from .service import PdpService
        resp = PdpService(g, None, channel_params(sc)).handle(req)
    else:
        scheme, host, port = _parse_endpoint(args.endpoint)
        if scheme == "http":
            import httpx
            r = httpx.post(f"http://{host}:{port}/pdp", json=json.loads(req.model_dump_json()), timeout=60)
            r.raise_for_status()
            resp = PdpResponse.model_validate(r.json())
        elif scheme == "tcp":
            from .service import request_stream
            line = asyncio.run(request_stream(host, port, [req.model_dump_json()]))[0]
            resp = PdpResponse.model_validate_json(line)
        else:
            raise UsageError("pdp talks to tcp:// or http:// endpoints")
    if resp.status != "ok":
        print(f"{resp.status}: {resp.error}", file=sys.stderr)
        return INVALID
    sys.stdout.write(response_csv(resp))
    return OK


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pwe", description="Programmable wireless environment toolkit")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_text, out=True):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--scenario", default="factory", help="scenario file, or the name of a bundled one")
        sp.add_argument("--seed", type=int, default=None)
        if out:
            sp.add_argument("--out", required=True, help="output directory")
        sp.set_defaults(func=func)
        return sp

    add("build-graph", cmd_build_graph, "emit node and link CSVs")
    sp = add("configure", cmd_configure, "run an optimizer and emit the configuration")
    sp.add_argument("--optimizer", choices=("kpaths", "lexi", "explorer", "backprop"))
    sp.add_argument("--k", type=int)
    sp = add("schedule", cmd_schedule, "plan a consistent multi-round update")
    sp.add_argument("--rounds", type=int)
    sp.add_argument("--relax", action="store_true", help="LP relaxation plus rounding instead of exact search")
    sp = add("simulate", cmd_simulate, "run the mobility scenario")
    sp.add_argument("--mode", choices=("on", "off", "both"), default="both")
    sp.add_argument("--optimizer", choices=("kpaths", "lexi"))
    sp.add_argument("--k", type=int)
    sp = add("serve", cmd_serve, "start the PDP service", out=False)
    sp.add_argument("--endpoint", default="stdio", help="stdio, tcp://HOST:PORT or http://HOST:PORT")
    sp.add_argument("--config", help="configuration CSV applied to every request")
    sp = add("pdp", cmd_pdp, "print one PDP as CSV", out=False)
    sp.add_argument("--tx", required=True)
    sp.add_argument("--rx", required=True)
    sp.add_argument("--position", help="receiver position override x,y,z")
    sp.add_argument("--config", help="configuration CSV sent as overrides")
    sp.add_argument("--endpoint", help="query a running service instead of computing locally")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "k", None) is not None and args.k < 1:
        print("error: --k must be >= 1", file=sys.stderr)
        return INVALID
    try:
        return args.func(args)
    except (ScenarioInvalid, ScenarioParseError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INVALID
    except (PweError, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return FAILED


if __name__ == "__main__":
    sys.exit(main())
