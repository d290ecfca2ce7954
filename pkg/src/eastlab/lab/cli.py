"""Command-line entry point ``eastlab``.

Exit status: 0 when every hard verdict passes, 1 on a hard failure,
2 on a usage error.
"""
from __future__ import annotations

import argparse
import contextlib
import json
import sys

from .. import bottleneck as bn
from .. import exact, graphical, network
from ..core import Configuration, ModelParams, format_state
from .report import Grid
from .scenarios import SCENARIOS, run_scenario
from .verify import SUITES, verify

__all__ = ["main", "build_parser"]

COMMANDS = sorted(SCENARIOS) + ["verify", "exact", "simulate", "astar", "flows"]


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="eastlab", description="East model laboratory: exact time scales, "
                                 "simulation, bottleneck sets, networks and verification suites.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("suite", nargs="?", help="suite name for 'verify' (%s)" % ", ".join(sorted(SUITES) + ["all"]))
    ap.add_argument("--L", type=int, nargs="+", help="interval length(s)")
    ap.add_argument("--q", type=float, nargs="+", help="vacancy density (densities)")
    ap.add_argument("--gamma", type=float, nargs="+")
    ap.add_argument("--d", type=float, nargs="+")
    ap.add_argument("--grid", help="JSON file with keys mirroring the flags")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--trials", type=int)
    ap.add_argument("--out", help="output path (default: standard output)")
    ap.add_argument("--format", choices=["csv", "json"], default=None)
    ap.add_argument("--config", help="configuration as a 0/1 string, site 1 first")
    ap.add_argument("--horizon", type=float, default=10.0, help="simulation horizon")
    ap.add_argument("--recursive-flow", type=int, nargs=2, metavar=("I", "R"),
                    help="export the recursive flow of step I with R blocks instead of an equilibrium flow")
    return ap


def _grid(args) -> Grid:
    g = Grid.from_json(args.grid) if args.grid else Grid()
    for key in ("L", "q", "gamma", "d"):
        v = getattr(args, key)
        if v:
            setattr(g, key, list(v))
    if args.seed is not None:
        g.seed = args.seed
    if args.trials is not None:
        g.trials = args.trials
    return g


@contextlib.contextmanager
def _output(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _single(values, name):
    if not values or len(values) != 1:
        raise UsageError(f"--{name} takes exactly one value for this command")
    return values[0]


def _cmd_exact(args, g: Grid) -> int:
    if not g.L or not g.q:
        raise UsageError("exact needs --L and --q")
    reports = [exact.timescales(ModelParams(L, q, allow_large_q=True)) for L in g.L for q in g.q]
    with _output(args.out) as fh:
        if (args.format or "csv") == "csv":
            fh.write(",".join(exact.CSV_COLUMNS) + "\n")
            for r in reports:
                fh.write(r.to_csv_row())
        else:
            fh.write(json.dumps([r.as_dict() for r in reports], indent=2) + "\n")
    return 0


def _cmd_simulate(args, g: Grid) -> int:
    L = _single(g.L, "L")
    q = _single(g.q, "q")
    P = ModelParams(L, q, allow_large_q=True)
    eta = Configuration.from_string(args.config) if args.config else Configuration.one_zero(L)
    if eta.L != L:
        raise UsageError("--config length differs from --L")
    noise = graphical.sample_noise(P, args.horizon, g.seed)
    tr = graphical.evolve(eta, noise, args.horizon)
    with _output(args.out) as fh:
        fh.write(f"# L={L} q={q!r} seed={g.seed} start={eta} horizon={args.horizon!r}\n")
        fh.write("time\tsite\tnewspin\tlegal\n")
        tr.to_tsv(fh)
    return 0


def _cmd_astar(args, g: Grid) -> int:
    if not args.config:
        raise UsageError("astar needs --config")
    eta = Configuration.from_string(args.config)
    res = bn.det_dynamics(eta)
    mask = bn.astar_mask(eta.L)
    rep = bn.boundary_astar(eta.L) if eta.L <= bn.BOUNDARY_MAX_L else None
    s = eta.id
    witnesses = [z + 1 for z in range(eta.L) if rep is not None and rep.witness[z, s]]
    out = {
        "config": str(eta),
        "L": eta.L,
        "in_astar": bool(mask[s]),
        "final": str(res.final),
        "trace": [[st.d, st.x] for st in res.trace],
        "boundary_witnesses": witnesses,
        "chains": [],
    }
    for z0 in witnesses:
        ch = bn.delta_chain(eta, z0)
        out["chains"].append({"z0": z0, "z": list(ch.z), "d": list(ch.d), "eps": list(ch.eps),
                              "intervals": [list(iv) for iv in ch.intervals]})
    with _output(args.out) as fh:
        fh.write(json.dumps(out, indent=2) + "\n")
    return 0


def _cmd_flows(args, g: Grid) -> int:
    if args.recursive_flow:
        i, r = args.recursive_flow
        q = _single(g.q, "q")
        flow, cert = network.recursive_flow(i, r, q)
        header = (f"# recursive flow i={i} r={r} q={q!r} N={cert.N} R_i={cert.R_i!r} R_next={cert.R_next!r} "
                  f"energy={cert.energy!r} bound={cert.bound!r} divergence={cert.interior_divergence!r}\n")
        ok = cert.unit_flow_ok and cert.thomson_ok and cert.recursion_ok
    else:
        L = _single(g.L, "L")
        q = _single(g.q, "q")
        P = ModelParams(L, q, allow_large_q=True)
        ones = (1 << L) - 1
        flow = network.equilibrium_flow(P, ones, (L, 0))
        cap = network.capacity(P, ones, (L, 0))
        header = (f"# equilibrium unit flow from {format_state(ones, L)} to eta_L=0, L={L} q={q!r} "
                  f"capacity={cap!r} energy={flow.energy()!r}\n")
        ok = True
    with _output(args.out) as fh:
        fh.write(header)
        fh.write("fromid toid value\n")
        flow.to_text(fh)
    return 0 if ok else 1


def _cmd_verify(args) -> int:
    if not args.suite:
        raise UsageError("verify needs a suite name")
    if args.suite not in SUITES and args.suite != "all":
        raise UsageError(f"unknown suite {args.suite!r}")
    code, rep = verify(args.suite)
    text = rep.to_json() if args.format == "json" else rep.traceability()
    with _output(args.out) as fh:
        fh.write(text)
    if args.out is not None:
        sys.stdout.write(rep.traceability())
    return code


def _cmd_scenario(args, g: Grid) -> int:
    rep = run_scenario(args.command, g)
    with _output(args.out) as fh:
        fh.write(rep.to_json() if args.format == "json" else rep.to_csv())
    sys.stderr.write(rep.traceability())
    return 0 if rep.passed else 1


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "verify":
            return _cmd_verify(args)
        g = _grid(args)
        if args.command in SCENARIOS:
            return _cmd_scenario(args, g)
        return {"exact": _cmd_exact, "simulate": _cmd_simulate, "astar": _cmd_astar,
                "flows": _cmd_flows}[args.command](args, g)
    except (UsageError, ValueError, KeyError) as exc:
        sys.stderr.write(f"eastlab: error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
