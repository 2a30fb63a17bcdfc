"""Command-line interface: ``hdrband {select,hdr,risk-curve,simulate,oracle}``.

Exit codes: 0 success, 2 usage or data error, 3 numerical pipeline failure.
"""

import argparse
import csv
import json
import sys
from contextlib import contextmanager

import numpy as np

from .exceptions import HDRError
from .hdr import kde_hdr
from .models import PRESETS, get_model, hdr_oracle
from .risk import compare_selectors, minimize_AR, monte_carlo_risk, risk_coefficients
from .selector import SelectorConfig, hdr_bandwidth, lscv_bandwidth

EXIT_DATA = 2
EXIT_PIPELINE = 3


class DataError(ValueError):
    pass


def read_sample(path):
    """Read newline-separated numbers or a one-column CSV with optional header."""
    fh = sys.stdin if path == "-" else open(path, encoding="utf-8")
    values = []
    with fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            field = line.split(",")[0].strip()
            try:
                values.append(float(field))
            except ValueError:
                if lineno == 1 and not values:
                    continue  # header row
                raise DataError(f"line {lineno}: not a number: {line!r}") from None
    if not values:
        raise DataError(f"{path}: no numeric data")
    return np.array(values)


def _probability(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"tau must lie in (0, 1), got {v}")
    return v


def _tau_list(text):
    return [_probability(t) for t in text.split(",") if t.strip()]


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be positive, got {v}")
    return v


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {v}")
    return v


def _model(text):
    try:
        return get_model(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


@contextmanager
def _open_out(path):
    if path in (None, "-"):
        yield sys.stdout
        sys.stdout.flush()
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _config(args):
    return SelectorConfig(
        grid_size=args.grid_size, paper_literal_constants=args.paper_literal_constants
    )


def cmd_select(args):
    x = read_sample(args.input)
    report = hdr_bandwidth(x, args.tau, _config(args))
    with _open_out(args.output) as out:
        out.write(report.to_json(indent=2) + "\n")


def cmd_hdr(args):
    x = read_sample(args.input)
    if args.bandwidth is not None:
        h = args.bandwidth
    elif args.selector == "lscv":
        h = lscv_bandwidth(x).bandwidth
    else:
        h = hdr_bandwidth(x, args.tau, _config(args)).bandwidth
    level, region, _ = kde_hdr(x, h, args.tau, args.grid_size)
    with _open_out(args.output) as out:
        if args.format == "json":
            doc = {
                "tau": args.tau,
                "bandwidth": h,
                "level": level,
                "intervals": json.loads(region.to_json()),
            }
            out.write(json.dumps(doc, indent=2) + "\n")
        else:
            csv.writer(out).writerows(region.to_csv_rows())
    print(f"tau={args.tau!r} bandwidth={h!r} level={level!r}", file=sys.stderr)


def cmd_risk_curve(args):
    hs = np.geomspace(args.h_min, args.h_max, args.h_count)
    pts = monte_carlo_risk(
        args.model, args.n, args.tau, hs, args.M, args.seed, grid_size=args.grid_size
    )
    with _open_out(args.output) as out:
        w = csv.writer(out)
        w.writerow(["h", "asym", "mc_mean", "mc_se"])
        for p in pts:
            w.writerow([repr(p.h), repr(p.asymptotic), repr(p.mc_mean), repr(p.mc_se)])
    mc = np.array([p.mc_mean for p in pts])
    asym = np.array([p.asymptotic for p in pts])
    print(
        f"argmin_mc={hs[np.argmin(mc)]!r} argmin_asym={hs[np.argmin(asym)]!r}",
        file=sys.stderr,
    )


def cmd_simulate(args):
    res = compare_selectors(
        args.model, args.n, args.taus, args.reps, args.seed, grid_size=args.grid_size
    )
    with _open_out(args.output) as out:
        w = csv.writer(out)
        w.writerow(["rep", "tau", "err_hdr", "err_lscv"])
        for r in res.records:
            w.writerow([r.rep, repr(r.tau), repr(r.err_hdr), repr(r.err_lscv)])
    summary = {
        "summary": {str(k): v for k, v in res.summary.items()},
        "failures": [list(f) for f in res.failures],
    }
    text = json.dumps(summary, indent=2)
    if args.summary:
        with open(args.summary, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text, file=sys.stderr)


def cmd_oracle(args):
    o = hdr_oracle(args.model, args.tau)
    rc = risk_coefficients(o.level, o.slopes, o.curvatures)
    res = minimize_AR(args.n, rc)
    doc = {
        "tau": o.tau,
        "level": o.level,
        "region": json.loads(o.region.to_json()),
        "crossings": [
            {"x": x, "slope": s, "curvature": c} for x, s, c in o.crossings.tolist()
        ],
        "coefficients": rc.to_dict(),
        "n": args.n,
        "c_opt": res.c_opt,
        "h_opt": res.c_opt * args.n**-0.2,
        "multimodal": res.multimodal,
    }
    with _open_out(args.output) as out:
        out.write(json.dumps(doc, indent=2) + "\n")


def build_parser():
    p = argparse.ArgumentParser(
        prog="hdrband", description="Kernel HDR estimation with HDR-tailored bandwidths."
    )
    p.add_argument("--paper-literal-constants", action="store_true",
                   help="use integer constants for the functional bandwidths")
    p.add_argument("--grid-size", type=_positive_int, default=1024)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("select", help="HDR plug-in bandwidth with full report (JSON)")
    s.add_argument("input", help="file with one number per line, or '-' for stdin")
    s.add_argument("--tau", type=_probability, default=0.5)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_select)

    s = sub.add_parser("hdr", help="estimated HDR intervals and level")
    s.add_argument("input")
    s.add_argument("--tau", type=_probability, default=0.5)
    s.add_argument("--bandwidth", type=_positive_float)
    s.add_argument("--selector", choices=("hdr", "lscv"), default="hdr")
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_hdr)

    presets = ", ".join(sorted(PRESETS))
    s = sub.add_parser("risk-curve", help="Monte Carlo and asymptotic risk curves (CSV)")
    s.add_argument("--model", type=_model, default="normal",
                   help=f"preset ({presets}), JSON mixture, or JSON file")
    s.add_argument("--n", type=_positive_int, default=1000)
    s.add_argument("--tau", type=_probability, default=0.5)
    s.add_argument("--M", type=_positive_int, default=100)
    s.add_argument("--h-min", type=_positive_float, default=0.05)
    s.add_argument("--h-max", type=_positive_float, default=1.0)
    s.add_argument("--h-count", type=_positive_int, default=20)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_risk_curve)

    s = sub.add_parser("simulate", help="HDR selector vs LSCV simulation study (CSV)")
    s.add_argument("--model", type=_model, default="mw4",
                   help=f"preset ({presets}), JSON mixture, or JSON file")
    s.add_argument("--n", type=_positive_int, default=1000)
    s.add_argument("--taus", type=_tau_list, default=[0.2, 0.5, 0.8])
    s.add_argument("--reps", type=_positive_int, default=100)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("-o", "--output")
    s.add_argument("--summary", help="also write the JSON summary to this file")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("oracle", help="exact HDR, coefficients and c_opt of a mixture")
    s.add_argument("--model", type=_model, default="normal")
    s.add_argument("--tau", type=_probability, default=0.5)
    s.add_argument("--n", type=_positive_int, default=1000)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_oracle)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "reps", 2) < 2:
        parser.error("--reps must be at least 2")
    try:
        args.func(args)
    except HDRError as exc:
        print(f"hdrband: error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    except (ValueError, OSError) as exc:
        print(f"hdrband: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
