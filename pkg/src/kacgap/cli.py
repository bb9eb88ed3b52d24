"""Command line entry point: ``kacgap <subcommand> ...``.

Exit codes: 0 success, 1 suite failure, 2 usage error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import intensity as I
from . import stats as S
from .harness import RunConfig, parse_u_spec, read_results, run_simulate
from .intervals import IntervalSet, parse_u_list
from .rootfinder import find_roots
from .sampling import parse_law, sample_trial

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _dump(obj, out: str | None) -> None:
    text = json.dumps(_clean(obj), indent=2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _clean(x):
    # JSON has no inf or nan; both become null
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (float, np.floating)):
        return float(x) if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    return x


def _base_config(args) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        cfg = RunConfig.parse(Path(args.config).read_text(), cfg)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.threads is not None:
        cfg = replace(cfg, threads=args.threads)
    return cfg


def _complex(text: str) -> complex:
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise UsageError(f"bad complex number {text!r}") from None


# --------------------------------------------------------------------------
# subcommands

def cmd_simulate(args) -> int:
    cfg = _base_config(args)
    upd = {}
    if args.law:
        upd["law"] = args.law
    if args.degrees:
        upd["degrees"] = tuple(int(d) for d in args.degrees.split(","))
    if args.trials is not None:
        upd["trials"] = args.trials
    if args.k is not None:
        upd["K"] = args.k
    if args.u:
        upd["u_sets"] = parse_u_spec(args.u)
    if args.beta is not None:
        upd["beta"] = args.beta
    if args.residual_tol is not None:
        upd["residual_tol"] = args.residual_tol
    if args.max_iters is not None:
        upd["max_iters"] = args.max_iters
    if args.polish is not None:
        upd["polish"] = args.polish == "on"
    if args.out:
        upd["out"] = args.out
    cfg = replace(cfg, **upd)
    path = run_simulate(cfg, resume=args.resume)
    res = read_results(path)
    print(json.dumps({"out": str(path), "records": len(res.records), "degraded": res.degraded,
                      "config_hash": cfg.config_hash(), "version": __version__}))
    return EXIT_OK


def gaps_report(paths, U_list: list[IntervalSet], K: float) -> dict:
    by_law: dict[str, list] = {}
    header = None
    for p in paths:
        res = read_results(p)
        header = header or res.header
        for r in res.records:
            by_law.setdefault(r.law, []).append(r)
    c = I.c_star().value
    cj = I.c_star(form="joint").value
    report = {"version": __version__, "K": K, "ks": {}, "moments": {}, "histogram": {}, "universality": None,
              "note": S.BIAS_NOTE}
    for law, recs in by_law.items():
        m = np.array([r.m_n_scaled for r in recs])
        ns = sorted({r.n for r in recs})
        report["ks"][law] = {"n": ns, "trials": int(m.size),
                             "ks_closed": S.ks_distance(m, lambda v: I.min_gap_survival(v, c)),
                             "ks_joint": S.ks_distance(m, lambda v: I.min_gap_survival(v, cj)),
                             "c_star": c, "c_star_joint": cj}
        mom = {}
        for U in U_list:
            counts = [_pairs_in(r, U) for r in recs]
            lam = I.lambda_K_U(K, U)
            mom[str(U)] = {**S.factorial_moments(counts, 3, lam).as_dict(),
                           "lambda_closed": lam, "lambda_joint": I.lambda_K_U(K, U, "joint")}
        report["moments"][law] = mom
        if len(ns) == 1:
            bins = [(lo, hi) for U in U_list for lo, hi in U.intervals]
            report["histogram"][law] = S.gap_intensity_histogram(recs, bins, K).as_dict()
    laws = sorted(by_law)
    if len(laws) >= 2:
        a, b = laws[0], laws[1]
        report["universality"] = {"laws": [a, b], "ks_two_sample": S.ks_two_sample(
            [r.m_n_scaled for r in by_law[a]], [r.m_n_scaled for r in by_law[b]])}
    return report


def _pairs_in(rec, U: IntervalSet) -> int:
    return int(np.count_nonzero(U.contains(np.asarray(rec.gaps)))) if rec.gaps else 0


def cmd_gaps(args) -> int:
    U_list = parse_u_list(args.u)
    _dump(gaps_report(args.inputs, U_list, args.k), args.report)
    return EXIT_OK


def cmd_intensity(args) -> int:
    tab = I.build_table(args.x_min, args.x_max, args.step, (args.k,))
    if args.out:
        tab.to_csv(args.out, with_joint=args.joint)
    else:
        sys.stdout.write(tab.csv_text(with_joint=args.joint))
    return EXIT_OK


def cmd_cstar(args) -> int:
    val, err = I.c_star_K(args.k, args.form, with_error=True)
    _dump({"K": args.k, "form": args.form, "c_star_K": val, "c_star_K_quad_error": err,
           "c_star": I.c_star(args.k_max, args.form).as_dict()}, None)
    return EXIT_OK


def cmd_net_audit(args) -> int:
    from .net_machinery import audit_net, build_net

    cfg = _base_config(args)
    law = parse_law(args.law or cfg.law)
    U = IntervalSet.parse(args.u)
    poly = sample_trial(law, args.degree, cfg.seed, args.trial)
    rs = find_roots(poly, cfg.solver)
    net = build_net(args.k, args.degree, args.beta)
    a = audit_net(poly, net, U, rs.roots, exhaustive=args.exhaustive)
    from .gap_process import count_X_n

    d = a.as_dict()
    d.update(X_n=count_X_n(rs, args.k, U, args.degree), law=law.tag, seed=cfg.seed, trial=args.trial, version=__version__)
    _dump(d, args.out)
    return EXIT_OK


def cmd_oracle(args) -> int:
    from .gaussian_oracle import prob_A_z_gaussian

    cfg = _base_config(args)
    r = prob_A_z_gaussian(_complex(args.z), IntervalSet.parse(args.u), args.k, args.n, args.trials, cfg.seed,
                          beta=args.beta, widen=args.widen, method=args.method, rect=args.rect)
    _dump(r.as_dict(), None)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .acceptance import Settings, run_suite

    cfg = _base_config(args)
    s = Settings(threads=cfg.threads, f_scale=args.f_scale)
    if args.seed is not None:
        s = replace(s, seed=args.seed)
    report = run_suite(args.suite, s, echo=lambda line: print(line, file=sys.stderr))
    _dump(report, args.report)
    return EXIT_OK if report["passed"] else EXIT_FAIL


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="kacgap", description="Root separation of random Kac polynomials.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--config", default=None, help="key=value file with RunConfig fields")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("simulate", help="simulate trials and write JSONL")
    s.add_argument("--law")
    s.add_argument("--degrees", help="comma separated degrees")
    s.add_argument("--trials", type=int)
    s.add_argument("--k", type=float)
    s.add_argument("--u", help="a:b,c:d (one set each) or id=a:b+c:d;id2=...")
    s.add_argument("--beta", type=float)
    s.add_argument("--residual-tol", type=float)
    s.add_argument("--max-iters", type=int)
    s.add_argument("--polish", choices=("on", "off"))
    s.add_argument("--out")
    s.add_argument("--resume", action="store_true")
    s.set_defaults(func=cmd_simulate)

    g = sub.add_parser("gaps", help="statistics report from JSONL results")
    g.add_argument("--in", dest="inputs", action="append", required=True)
    g.add_argument("--u", default="0:1,1:2")
    g.add_argument("--k", type=float, default=10.0)
    g.add_argument("--report")
    g.set_defaults(func=cmd_gaps)

    t = sub.add_parser("intensity", help="CSV table of a_j, determinants and F")
    t.add_argument("--x-min", type=float, default=-20.0)
    t.add_argument("--x-max", type=float, default=20.0)
    t.add_argument("--step", type=float, default=0.05)
    t.add_argument("--k", type=float, default=10.0)
    t.add_argument("--joint", action="store_true", help="append the F_joint column")
    t.add_argument("--out")
    t.set_defaults(func=cmd_intensity)

    c = sub.add_parser("cstar", help="c*(K) and c* as JSON")
    c.add_argument("--k", type=float, default=10.0)
    c.add_argument("--k-max", type=float, default=60.0)
    c.add_argument("--form", choices=sorted(I.PROFILES), default="closed")
    c.set_defaults(func=cmd_cstar)

    a = sub.add_parser("net-audit", help="evaluate the net events for one trial")
    a.add_argument("--degree", type=int, required=True)
    a.add_argument("--trial", type=int, default=0)
    a.add_argument("--law")
    a.add_argument("--k", type=float, default=10.0)
    a.add_argument("--beta", type=float, default=0.3)
    a.add_argument("--u", default="0:4")
    a.add_argument("--exhaustive", action="store_true")
    a.add_argument("--out")
    a.set_defaults(func=cmd_net_audit)

    o = sub.add_parser("oracle", help="Gaussian Monte Carlo of P[A_z(U)]")
    o.add_argument("--z", required=True, help="e.g. 0.999+0.04i")
    o.add_argument("--n", type=int, required=True)
    o.add_argument("--u", default="0:1")
    o.add_argument("--k", type=float, default=10.0)
    o.add_argument("--beta", type=float, default=0.3)
    o.add_argument("--trials", type=int, default=100000)
    o.add_argument("--widen", type=float, default=1.0)
    o.add_argument("--method", choices=("importance", "direct"), default="importance")
    o.add_argument("--rect", choices=("inner", "sharp", "full"), default="inner")
    o.set_defaults(func=cmd_oracle)

    v = sub.add_parser("verify", help="run acceptance suites")
    v.add_argument("--suite", choices=("formulas", "roots", "events", "oracle", "stats", "all"), default="all")
    v.add_argument("--report")
    v.add_argument("--f-scale", type=float, default=1.0, help=argparse.SUPPRESS)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"kacgap: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"kacgap: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"kacgap: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"kacgap: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
