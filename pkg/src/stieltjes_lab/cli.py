"""Command-line driver.

    stieltjes-lab run --n-max 31 --digits 5000 --eps 1/10^30
    stieltjes-lab verify --n-max 31 --digits 5000 --eps 1e-30
    stieltjes-lab analyze --value 3.14159265358979323846
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path

from .bigreal import BigReal
from .errors import ConfigError, StieltjesLabError
from .pipeline import Pipeline, RunConfig, default_cache_dir, parse_eps

STAGES = ("tabulate", "stieltjes", "cf", "stats", "normality", "report", "verify", "run")


def _eps_arg(text: str) -> Fraction:
    # allow 1/10^30 as shorthand for 1/1000...0
    if "^" in text:
        num, _, den = text.partition("/")
        base, _, exp = den.partition("^")
        return parse_eps(Fraction(int(num), int(base) ** int(exp)))
    return parse_eps(text)


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n-max", type=int, default=63)
    p.add_argument("--digits", type=int, default=1000, help="certified digits per gamma_n")
    p.add_argument("--eps", default="1/10", help="node spacing p/q, decimal, or 1/b^e")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--cache-dir", type=Path, default=None)
    p.add_argument("--base", type=int, default=10)
    p.add_argument("--kgram", type=int, default=2)
    p.add_argument("--m-start", type=int, default=100)
    p.add_argument("--stop-policy", choices=("accuracy", "nmax"), default="accuracy")
    p.add_argument("--nmax", type=int, default=None, help="quotient cap for --stop-policy nmax")
    p.add_argument("--verify-n", type=int, nargs="*", default=None, help="indices checked by verify")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stieltjes-lab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGES:
        _add_run_options(sub.add_parser(name))
    a = sub.add_parser("analyze", help="continued-fraction and digit diagnostics of a given constant")
    a.add_argument("--value", required=True, help="decimal digits, or @path to a file holding them")
    a.add_argument("--kgram", type=int, default=2)
    a.add_argument("--m-start", type=int, default=100)
    a.add_argument("--label", default="x")
    return parser


def config_from_args(args) -> RunConfig:
    try:
        eps = _eps_arg(args.eps)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"bad --eps {args.eps!r}") from exc
    return RunConfig(
        n_max=args.n_max,
        digits=args.digits,
        eps=eps,
        workers=args.workers,
        cache_dir=args.cache_dir or default_cache_dir(),
        base=args.base,
        kgram=args.kgram,
        m_start=args.m_start,
        stop_policy=args.stop_policy,
        nmax=args.nmax,
        verify_n=tuple(args.verify_n or ()),
    )


def _analyze(args) -> dict:
    from .cfexpand import contfrac
    from .cfstats import cf_stats
    from .normality import expansion_digits, kgram_freq

    text = args.value
    if text.startswith("@"):
        text = Path(text[1:]).read_text()
    text = "".join(text.split())
    try:
        x = BigReal.parse(text)
    except ArithmeticError as exc:
        raise ConfigError("--value is not a decimal number") from exc
    cf = contfrac(x, label=args.label)
    rep = cf_stats(cf, m_start=args.m_start) if cf.length else None
    st = kgram_freq(expansion_digits(x), args.kgram, 10)
    return {
        "label": args.label,
        "digits": x.acc_digits,
        "quotients": cf.length,
        "stats": rep.to_record() if rep else None,
        "max_digit_deviation": float(st.max_digit_deviation()),
        "max_kgram_deviation": float(st.max_kgram_deviation()),
    }


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "analyze":
            print(json.dumps(_analyze(args), indent=1))
            return 0
        pipe = Pipeline(config_from_args(args))
        cmd = args.command
        if cmd == "tabulate":
            t = pipe.tabulate()
            print(f"phi nodes: {t.count} at {t.node_acc} decimals, eps={t.eps}")
        elif cmd == "stieltjes":
            for v in pipe.stieltjes():
                print(f"gamma_{v.n}\tacc={v.claimed_acc}\t{v.digits[:40]}")
        elif cmd == "cf":
            for cf in pipe.cf():
                print(f"gamma_{cf.label}\tquotients={cf.length}\t{cf.terminated_by}")
        elif cmd == "stats":
            for r in pipe.stats():
                print(f"gamma_{r.label}\tK={r.K_final:.6f}\tL={r.L_final:.6f}\tS_K={r.S_K}\tS_L={r.S_L}")
        elif cmd == "normality":
            for s in pipe.normality():
                print(f"gamma_{s.label}\tdigits={s.n_digits}\tmax_dev1={float(s.max_digit_deviation()):.6f}")
        elif cmd == "report":
            for name, path in pipe.report().items():
                print(f"{name}\t{path}")
        elif cmd == "verify":
            rep = pipe.verify(pipe.config.verify_n or None)
            print(json.dumps({"sample": rep["sample"], "offending": rep["offending"]}))
        else:
            counters = pipe.run()
            print(json.dumps(counters.__dict__, sort_keys=True))
        return 0
    except StieltjesLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if getattr(exc, "offending", None):
            print(json.dumps({"offending": exc.offending}), file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
