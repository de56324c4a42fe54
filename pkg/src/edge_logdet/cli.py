"""Command-line front end.

Exit codes: 0 success, 1 invalid configuration (including unknown flags),
2 verification failure, 3 runtime error. Every run prints its effective
configuration to standard error. Options may also come from a key=value
file given by ``--config``; command-line flags take precedence.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from edge_logdet import checks
from edge_logdet.clt import CltVariant, Scaling
from edge_logdet.edge_process import compute_trace, in_real_regime, scatter_pairs
from edge_logdet.ensemble import EnsembleSpec, TridiagonalMatrix, write_matrix_csv
from edge_logdet.errors import DomainError, InvalidInputError, InvalidParameterError, RegimeError
from edge_logdet.logdet import (
    EdgeParams,
    eigenvalues_bisection,
    logabsdet_from_eigs,
    logabsdet_recurrence,
)
from edge_logdet.stats import (
    BatchConfig,
    SigmaRule,
    decimation_check,
    prop1_sweep,
    run_campaign,
    sample_campaign_batch,
    scaling_exponent_fit,
    summarize_campaign,
    write_samples_csv,
    write_summary_csv,
)

CONFIG_ERRORS = (InvalidParameterError, InvalidInputError, DomainError, RegimeError)
EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_RUNTIME = 0, 1, 2, 3
SEED_ENV = "EDGE_LOGDET_SEED"

log = logging.getLogger("edge_logdet")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _int_list(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(v) for v in text.replace(" ", "").split(",") if v)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from exc
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _sigma_rule(text: str) -> SigmaRule:
    try:
        return SigmaRule.parse(text)
    except InvalidParameterError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw, 0)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={raw!r} is not an integer") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="edge-logdet", description="Log-determinant statistics at the spectral edge.")
    parser.add_argument("--config", help="key=value file; flags override its entries")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, seed=True):
        p.add_argument("--config", help=argparse.SUPPRESS)
        if seed:
            p.add_argument("--seed", type=int, help=f"master seed (default ${SEED_ENV} or 0)")

    p = sub.add_parser("sample", help="write one sampled tridiagonal matrix as CSV")
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--spike", type=float, default=0.0)
    p.add_argument("--rep", type=int, default=0, help="replicate index (stream selector)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("logdet", help="print sign and log|det(M/sqrt N - 2 theta)|")
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--spike", type=float, default=0.0)
    p.add_argument("--rep", type=int, default=0)
    p.add_argument("--method", choices=("recurrence", "eigen"), default="recurrence")

    p = sub.add_parser("trace", help="write the E/R/L trace, scatter pairs and a gnuplot script")
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--two-theta", type=float, required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--rep", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("clt", help="run a Monte Carlo campaign of standardized log-determinants")
    common(p)
    p.add_argument("--n-list", type=_int_list, required=True)
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--sigma-rule", type=_sigma_rule, default=SigmaRule())
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--spike", type=float, default=0.0)
    p.add_argument("--scaling", choices=("thm1", "thm2"), default="thm1")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("prop1", help="Stieltjes sums across N and their fitted growth exponents")
    common(p)
    p.add_argument("--n-list", type=_int_list, required=True)
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("decimate", help="two-sample KS test of the GOE pair decimation against GUE")
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--shift", type=float, default=0.0, help="added to the GUE sample (power control)")

    p = sub.add_parser("verify", help="deterministic identity suite; exit 2 on failure")
    common(p, seed=False)
    p.add_argument("--full", action="store_true", help="use the full oracle grid")
    return parser


def _read_config(path: str) -> dict[str, str]:
    entries: dict[str, str] = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for num, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{num}: expected key=value")
        entries[key.strip().replace("-", "_")] = value.strip()
    return entries


def _find_config(argv: list[str]) -> str | None:
    for k, arg in enumerate(argv):
        if arg == "--config" and k + 1 < len(argv):
            return argv[k + 1]
        if arg.startswith("--config="):
            return arg.split("=", 1)[1]
    return None


def parse_args(argv: list[str]) -> argparse.Namespace:
    """Parse with config-file entries inserted ahead of the command-line flags.

    argparse keeps the last occurrence of a repeated option, so flags given
    on the command line override the file.
    """
    parser = build_parser()
    path = _find_config(argv)
    if path:
        pos = next((k for k, a in enumerate(argv) if a in COMMANDS), None)
        if pos is None:
            return parser.parse_args(argv)
        injected: list[str] = []
        for key, value in _read_config(path).items():
            flag = f"--{key.replace('_', '-')}"
            if value.lower() in ("true", "yes", "on"):
                injected.append(flag)
            elif value.lower() not in ("false", "no", "off"):
                injected += [flag, value]
        argv = argv[: pos + 1] + injected + argv[pos + 1 :]
    return parser.parse_args(argv)


def _announce(args: argparse.Namespace, **derived) -> None:
    items = {k: v for k, v in vars(args).items() if k not in ("verbose",)}
    items.update(derived)
    for key in sorted(items):
        print(f"# {key} = {items[key]}", file=sys.stderr)


def _seed(args) -> int:
    return args.seed if args.seed is not None else _default_seed()


def _one_matrix(args, n: int) -> TridiagonalMatrix:
    spec = EnsembleSpec(n, args.alpha, getattr(args, "spike", 0.0))
    diag, off = sample_campaign_batch(spec, _seed(args), range(args.rep, args.rep + 1))
    return TridiagonalMatrix(diag[0], off[0])


def cmd_sample(args) -> int:
    _announce(args, seed_effective=_seed(args))
    write_matrix_csv(_one_matrix(args, args.n), args.out)
    return EXIT_OK


def cmd_logdet(args) -> int:
    p = EdgeParams.from_sigma(args.n, args.sigma)
    _announce(args, seed_effective=_seed(args), theta=repr(p.theta))
    m = _one_matrix(args, args.n)
    if args.method == "recurrence":
        d = logabsdet_recurrence(m, p)
    else:
        d = logabsdet_from_eigs(eigenvalues_bisection(m), p)
    print(f"{d.sign} {d.log_abs:.17g}")
    return EXIT_OK


GNUPLOT_TEMPLATE = """\
# Edge trace viewer for {trace} (N={n}, 2theta={two_theta:g}).
# Usage: gnuplot -persist {script}
set datafile separator ","
set key off
set multiplot layout 1,3 title "N={n}, 2theta={two_theta:g}"
set title "(E_i, E_(i-1))"
set xlabel "E_i"
set ylabel "E_(i-1)"
plot "{scatter}" using 2:3 every ::1 with points pt 7 ps 0.3
set title "log|E_i|"
set xlabel "i"
set ylabel "log|E_i|"
plot "{trace}" using 1:3 every ::1 with lines
set title "R_i"
set xlabel "i"
set ylabel "R_i"
plot "{trace}" using 1:4 every ::1 with points pt 7 ps 0.3
unset multiplot
"""


def _fmt(x: float) -> str:
    return "" if math.isnan(x) else f"{x:.17g}"


def cmd_trace(args) -> int:
    p = EdgeParams.from_two_theta(args.n, args.two_theta)
    real = in_real_regime(args.n, p)
    _announce(args, seed_effective=_seed(args), theta=repr(p.theta), real_root_regime=real)
    if not real:
        log.warning("characteristic roots are complex for some i; R and L columns left empty")
    trace = compute_trace(_one_matrix(args, args.n), p, with_r=real, with_l=real)
    out = Path(args.out)
    nan = np.full(args.n + 1, np.nan)
    r = trace.r_series if trace.r_series is not None else nan
    l_ = trace.l_series if trace.l_series is not None else nan
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["i", "e_sign", "e_log", "R", "L", "flag"])
        for i in range(1, args.n + 1):
            writer.writerow(
                [i, int(trace.e_sign[i]), _fmt(trace.e_log[i]), _fmt(r[i]), _fmt(l_[i]), int(trace.flags[i])]
            )
    scatter = out.with_name(out.stem + "_scatter.csv")
    pairs = scatter_pairs(trace)
    with open(scatter, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["i", "e_i", "e_prev"])
        for i, (cur, prev) in enumerate(pairs, start=2):
            writer.writerow([i, f"{cur:.17g}", f"{prev:.17g}"])
    script = out.with_name(out.stem + ".gp")
    script.write_text(
        GNUPLOT_TEMPLATE.format(
            trace=out.name, scatter=scatter.name, script=script.name, n=args.n, two_theta=args.two_theta
        )
    )
    return EXIT_OK


def cmd_clt(args) -> int:
    scaling = Scaling(args.scaling)
    variant = CltVariant.for_spike(scaling, args.spike)
    cfg = BatchConfig(_seed(args), args.reps, args.n_list, args.sigma_rule, args.alpha, args.spike, variant)
    thetas = {n: cfg.params(n).theta for n in cfg.n_list}
    if scaling is Scaling.THM2_THETA:
        bad = [n for n, t in thetas.items() if not t > 1]
        if bad:
            raise InvalidParameterError(f"thm2 scaling needs theta > 1; fails at N={bad}")
    _announce(
        args,
        seed_effective=cfg.master_seed,
        theta=";".join(f"{n}:{t!r}" for n, t in thetas.items()),
        unproven_regime=variant.unproven_regime,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records = run_campaign(cfg, threads=args.threads)
    write_samples_csv(records, out / "samples.csv")
    write_summary_csv(summarize_campaign(records), out / "summary.csv")
    return EXIT_OK


def cmd_prop1(args) -> int:
    _announce(
        args,
        seed_effective=_seed(args),
        theta=";".join(f"{n}:{EdgeParams.from_sigma(n, args.sigma).theta!r}" for n in args.n_list),
    )
    rows, raw = prop1_sweep(args.n_list, args.reps, args.sigma, args.alpha, _seed(args), args.threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "stieltjes_sums.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["n", "rep", "s1", "s2"])
        for n in args.n_list:
            s1, s2 = raw[n]
            for rep, (a, b) in enumerate(zip(s1.tolist(), s2.tolist())):
                writer.writerow([n, rep, f"{a:.17g}", f"{b:.17g}"])
    with open(out / "stieltjes_medians.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["n", "median_abs_s1", "median_s2"])
        for row in rows:
            writer.writerow([row.n, f"{row.median_abs_s1:.17g}", f"{row.median_s2:.17g}"])
    if len(rows) >= 3:
        s1 = scaling_exponent_fit([(r.n, r.median_abs_s1) for r in rows])
        s2 = scaling_exponent_fit([(r.n, r.median_s2) for r in rows])
        print(f"slope_abs_s1 {s1:.17g}")
        print(f"slope_s2 {s2:.17g}")
    else:
        log.warning("fewer than 3 sizes; slopes not fitted")
    return EXIT_OK


def cmd_decimate(args) -> int:
    _announce(args, seed_effective=_seed(args))
    rep = decimation_check(args.n, args.reps, _seed(args), args.shift)
    print(f"ks_statistic {rep.statistic:.17g}")
    print(f"p_value {rep.p_value:.17g}")
    print(f"n_a {rep.n_a}")
    print(f"n_b {rep.n_b}")
    return EXIT_OK


def cmd_verify(args) -> int:
    _announce(args)
    results = checks.verify_suite(quick=not args.full)
    for res in results:
        print(res.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


COMMANDS = {
    "sample": cmd_sample,
    "logdet": cmd_logdet,
    "trace": cmd_trace,
    "clt": cmd_clt,
    "prop1": cmd_prop1,
    "decimate": cmd_decimate,
    "verify": cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except CONFIG_ERRORS as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
