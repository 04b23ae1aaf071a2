"""Command-line entry point.

Exit codes: 0 success, 1 domain or parse error (including usage errors),
2 numerical failure.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import __version__
from .bayes import table_row_visibility, worst_case_bounds
from .config import RunConfig, build_run_config, load_config
from .emission import optimize_window, two_photon_acceptance, window_scan
from .errors import DiqkdError, DomainError, NumericError
from .io import (
    BOUNDS_HEADER,
    FINITE_KEY_HEADER,
    fmt,
    format_ledger,
    format_scan,
    load_correlation_table,
    load_ledger,
    resolve_data_path,
    sha256_file,
)
from .keyrate import (
    DEFAULT_PENALTY_C,
    FiniteKeyQuery,
    dw_chsh_rate,
    heuristic_min_block_length,
    robust_anchor_check,
)
from .link import expected_event_rate, mean_inter_herald_time, run_link
from .protocol import CHSH_CELLS, HeraldedSampler, estimate_bell, run_protocol, sift, tabulate

DEFAULT_EPS_GRID = [10.0 ** -k for k in range(2, 13)]


@dataclass
class ReportBundle:
    title: str
    lines: List[str] = field(default_factory=list)
    provenance: Dict[str, str] = field(default_factory=dict)

    def add(self, key, value):
        self.lines.append(f"{key} = {value}")

    def render(self) -> str:
        out = [f"# {self.title}"]
        out += [f"# {k}: {v}" for k, v in self.provenance.items()]
        out += self.lines
        return "\n".join(out) + "\n"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _provenance(inputs=(), seed=None) -> Dict[str, str]:
    prov = {"tool_version": __version__}
    for label, path in inputs:
        prov[f"{label}_sha256"] = sha256_file(path)
    if seed is not None:
        prov["seed"] = str(seed)
    return prov


def _run_config(args) -> RunConfig:
    raw = load_config(args.config) if getattr(args, "config", None) else {}
    overrides = {
        "seed": getattr(args, "seed", None),
        "rounds": getattr(args, "rounds", None),
        "t_e_ns": getattr(args, "t_e", None),
        "t_s_ns": getattr(args, "t_s", None),
        "ledger_out": getattr(args, "out", None),
    }
    return build_run_config({**raw, **{k: v for k, v in overrides.items() if v is not None}})


def _table_from_args(args):
    """(table, provenance inputs) from --table or --ledger."""
    if getattr(args, "ledger", None):
        path = resolve_data_path(args.ledger)
        return tabulate(load_ledger(path)), [("ledger", path)]
    if getattr(args, "table", None):
        path = resolve_data_path(args.table)
        return load_correlation_table(path), [("table", path)]
    raise DomainError("one of --table or --ledger is required")


def _write(text: str, out: Optional[str]):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# -- subcommands ------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = _run_config(args)
    if cfg.seed is None:
        raise DomainError("simulate requires a seed (--seed or 'seed' in the config)")
    heralds = run_link(cfg.link, cfg.model, cfg.window, cfg.rounds, cfg.seed)
    sampler = HeraldedSampler(heralds, cfg.model.v_max, cfg.convention)
    times = [int(round(h.herald_time_s * 1e9)) for h in heralds]
    ledger = run_protocol(cfg.rounds, sampler, cfg.settings, cfg.seed, herald_times_ns=times)
    _write(format_ledger(ledger), cfg.ledger_out)
    return 0


def cmd_analyze(args) -> int:
    table, inputs = _table_from_args(args)
    est = estimate_bell(table)
    rep = ReportBundle("diqkd analyze", provenance=_provenance(inputs))
    rep.add("rounds", fmt(table.total))
    for cell in CHSH_CELLS:
        rep.add(f"E[{cell[0]},{cell[1]}]", f"{fmt(est.e[cell])} +/- {fmt(est.sigma_e[cell])}")
    rep.add("S", f"{fmt(est.s_value)} +/- {fmt(est.sigma_s)}")
    rep.add("Q0", f"{fmt(est.q0)} +/- {fmt(est.sigma_q0)}")
    rep.add("Q1", f"{fmt(est.q1)} +/- {fmt(est.sigma_q1)}")
    rep.add("Q", f"{fmt(est.q_avg)} +/- {fmt(est.sigma_q)}")
    rep.add("Q_unpooled_mean", fmt(est.q_mean_unpooled))
    for y in (0, 1):
        rep.add(f"visibility[y={y}]", fmt(table_row_visibility(table, y)))
    if getattr(args, "ledger", None):
        key = sift(load_ledger(resolve_data_path(args.ledger)))
        rep.add("sifted_key_length", fmt(len(key)))
    _write(rep.render(), None)
    return 0


def cmd_bayes(args) -> int:
    table, inputs = _table_from_args(args)
    b = worst_case_bounds(table, tail=args.tail, method=args.method)
    if args.csv:
        _write(",".join(BOUNDS_HEADER) + "\n" + ",".join(fmt(v) for v in (b.s_min, b.q0_max, b.q1_max, b.tail)) + "\n", None)
        return 0
    rep = ReportBundle("diqkd bayes", provenance=_provenance(inputs))
    rep.add("win_method", args.method)
    rep.add("win_count", f"{b.win_count} / {b.n_chsh}")
    rep.add("posterior_win", f"Beta({b.win_count + 1}, {b.n_chsh - b.win_count + 1})")
    for k, (x, y) in enumerate(((0, 0), (1, 1))):
        s, n = int(table.n_same[x, y]), int(table.n[x, y])
        rep.add(f"posterior_Q{k}", f"Beta({s + 1}, {n - s + 1})")
    rep.add("tail", fmt(b.tail))
    rep.add("s_min", fmt(b.s_min))
    rep.add("q0_max", fmt(b.q0_max))
    rep.add("q1_max", fmt(b.q1_max))
    rep.add("q_max_joint", fmt(b.q_max))
    _write(rep.render(), None)
    return 0


def _s_q_from_args(args):
    if args.S is not None and args.Q is not None:
        return args.S, args.Q, []
    table, inputs = _table_from_args(args)
    est = estimate_bell(table)
    return est.s_value, est.q_avg, inputs


def cmd_keyrate(args) -> int:
    s, q, inputs = _s_q_from_args(args)
    r = dw_chsh_rate(s, q)
    anchor = robust_anchor_check(s, q)
    rep = ReportBundle("diqkd keyrate", provenance=_provenance(inputs))
    rep.add("S", fmt(s))
    rep.add("Q", fmt(q))
    rep.add("h_Q", fmt(r.h_q))
    rep.add("chi_S", fmt(r.chi_s))
    rep.add("dw_rate_raw", fmt(r.raw_rate))
    rep.add("dw_rate", fmt(r.rate))
    rep.add("dw_clamped", str(r.clamped).lower())
    rep.add("anchor_model", anchor.label)
    rep.add("anchor_rate", fmt(anchor.modeled_rate))
    rep.add("anchor_positive", str(anchor.positive).lower())
    rep.add("original_protocol_positive", str(anchor.original_protocol_positive).lower())
    _write(rep.render(), None)
    return 0


def cmd_finite_key(args) -> int:
    s, q, _ = _s_q_from_args(args)
    c = args.penalty_c
    if c is None:
        cfg_c = build_run_config(load_config(args.config)).penalty_c if args.config else None
        c = cfg_c if cfg_c is not None else DEFAULT_PENALTY_C
    eps_grid = args.eps or DEFAULT_EPS_GRID
    lines = [",".join(FINITE_KEY_HEADER)]
    for eps in eps_grid:
        n = heuristic_min_block_length(FiniteKeyQuery(s, q, eps, args.f_ec), c=c)
        lines.append(f"{fmt(eps)},{n}")
    _write("\n".join(lines) + "\n", args.out)
    return 0


def cmd_window_scan(args) -> int:
    cfg = _run_config(args)
    t_e = cfg.window.t_e_ns
    start = args.start if args.start is not None else cfg.model.support_start_ns
    stop = args.stop if args.stop is not None else t_e - args.step
    grid = np.arange(start, stop + 0.5 * args.step, args.step)
    grid = grid[grid < t_e]
    _write(format_scan(window_scan(cfg.model, grid, t_e)), args.out)
    return 0


def cmd_optimize_window(args) -> int:
    cfg = _run_config(args)
    t_e = cfg.window.t_e_ns
    bounds = None
    if args.lower is not None or args.upper is not None:
        lo = args.lower if args.lower is not None else cfg.model.pulse_center_ns - 2.0 * cfg.model.pulse_fwhm_ns
        hi = args.upper if args.upper is not None else t_e - 10.0
        bounds = (lo, hi)
    t_star = optimize_window(cfg.model, t_e, search_bounds=bounds)
    point = window_scan(cfg.model, [t_star], t_e)[0]
    rep = ReportBundle("diqkd optimize-window", provenance=_provenance())
    rep.add("t_s_opt_ns", fmt(t_star))
    rep.add("t_e_ns", fmt(t_e))
    rep.add("S", fmt(point.s_value))
    rep.add("Q", fmt(point.qber))
    rep.add("relative_rate", fmt(point.relative_rate))
    rep.add("key_per_time", fmt(point.key_per_time))
    _write(rep.render(), None)
    return 0


def cmd_rate_budget(args) -> int:
    cfg = _run_config(args)
    link = cfg.link
    over = {k: v for k, v in (("attempt_rate_hz", args.attempt_rate), ("duty_cycle", args.duty_cycle),
                              ("herald_efficiency", args.efficiency)) if v is not None}
    link = replace(link, **over)
    rate = expected_event_rate(link)
    rep = ReportBundle("diqkd rate-budget", provenance=_provenance())
    rep.add("expected_event_rate_hz", fmt(rate))
    rep.add("mean_event_interval_s", fmt(1.0 / rate) if rate > 0 else "inf")
    rep.add("mean_inter_herald_time_s", fmt(mean_inter_herald_time(link, cfg.model, cfg.window)))
    rep.add("window_two_photon_acceptance", fmt(two_photon_acceptance(cfg.model, cfg.window)))
    _write(rep.render(), None)
    return 0


# -- parser -----------------------------------------------------------------

def _add_data_args(p):
    p.add_argument("--table", help="correlation table CSV (x,y,n,n_same)")
    p.add_argument("--ledger", help="ledger CSV (round_id,herald_time_ns,x,y,a,b)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="diqkd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate the link and protocol, write a ledger CSV")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--rounds", type=int)
    p.add_argument("--t-s", type=float, dest="t_s")
    p.add_argument("--t-e", type=float, dest="t_e")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="CHSH value, correlators and QBERs")
    _add_data_args(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("bayes", help="worst-case bounds from Beta posteriors")
    _add_data_args(p)
    p.add_argument("--tail", type=float, default=0.03)
    p.add_argument("--method", choices=("paper_floor", "direct"), default="paper_floor")
    p.add_argument("--csv", action="store_true", help="print only the CSV row s_min,q0_max,q1_max,tail")
    p.set_defaults(func=cmd_bayes)

    for name, func, helptext in (("keyrate", cmd_keyrate, "asymptotic key rate components"),
                                 ("finite-key", cmd_finite_key, "heuristic minimal block length over eps")):
        p = sub.add_parser(name, help=helptext)
        _add_data_args(p)
        p.add_argument("--S", type=float)
        p.add_argument("--Q", type=float)
        if name == "finite-key":
            p.add_argument("--eps", type=float, nargs="+")
            p.add_argument("--f-ec", type=float, default=1.15, dest="f_ec")
            p.add_argument("--penalty-c", type=float, dest="penalty_c")
            p.add_argument("--config", help="read penalty_c from a config file")
            p.add_argument("--out")
        p.set_defaults(func=func)

    p = sub.add_parser("window-scan", help="S, Q and rate versus window start (CSV)")
    p.add_argument("--config")
    p.add_argument("--start", type=float)
    p.add_argument("--stop", type=float)
    p.add_argument("--step", type=float, default=1.0)
    p.add_argument("--t-e", type=float, dest="t_e")
    p.add_argument("--out")
    p.set_defaults(func=cmd_window_scan)

    p = sub.add_parser("optimize-window", help="window start maximizing key per time")
    p.add_argument("--config")
    p.add_argument("--lower", type=float)
    p.add_argument("--upper", type=float)
    p.add_argument("--t-e", type=float, dest="t_e")
    p.set_defaults(func=cmd_optimize_window)

    p = sub.add_parser("rate-budget", help="expected heralded event rate")
    p.add_argument("--config")
    p.add_argument("--attempt-rate", type=float, dest="attempt_rate")
    p.add_argument("--duty-cycle", type=float, dest="duty_cycle")
    p.add_argument("--efficiency", type=float)
    p.set_defaults(func=cmd_rate_budget)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"diqkd: numeric failure: {exc}", file=sys.stderr)
        return 2
    except (DiqkdError, OSError) as exc:
        print(f"diqkd: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
