"""Command-line front end: ``stratboot {fit,pvalue,simulate,report}``.

Exit codes: 0 success, 1 usage or input error, 2 failure budget exceeded.
"""
import argparse
import csv
import io
import json
import os
import sys

from . import bootstrap as B
from .errors import StratbootError, TooManyFailures
from .estimation import Prepared, fit_mle, fit_pair
from .higher_order import RStarOptions, rstar
from .model_api import StratifiedDataset
from .models import MODELS, build
from .pivots import adjust, normal_pvalue, normal_score, pivot_set
from .rng import derive, seed_key
from .simlab import (ExperimentSpec, density_summary, read_archive, run_experiment, tail_report,
                     write_archive)

ARCHIVE_NAME = "archive.csv.gz"
SPEC_NAME = "spec.json"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def build_parser():
    p = _Parser(prog="stratboot", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, data=True):
        sp.add_argument("--model", required=True, choices=sorted(MODELS))
        if data:
            sp.add_argument("--data", required=True, help="CSV with columns stratum,y[,x]")
        sp.add_argument("--out", help="output directory")

    f = sub.add_parser("fit", help="maximum likelihood fit")
    common(f)
    f.add_argument("--seed", type=int, help="accepted for symmetry; fitting uses no randomness")

    pv = sub.add_parser("pvalue", help="pivots, R* and bootstrap p-values at psi0")
    common(pv)
    pv.add_argument("--psi0", type=float, required=True)
    pv.add_argument("--variant", choices=["constrained", "unconstrained", "both"], default="both")
    pv.add_argument("--k", type=_positive_int, default=1000, help="bootstrap replicates")
    pv.add_argument("--seed", type=int, default=0)
    pv.add_argument("--workers", type=_positive_int, default=1)

    s = sub.add_parser("simulate", help="run a simulation experiment from a JSON spec")
    s.add_argument("spec", help="experiment spec (JSON)")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--workers", type=_positive_int, default=1)
    s.add_argument("--out", default="stratboot_out")

    r = sub.add_parser("report", help="tail-probability table from a simulation archive")
    r.add_argument("path", help="simulation output directory or archive file")
    r.add_argument("--out", help="directory for report.csv (and density files)")
    r.add_argument("--density", action="append", default=[], metavar="STATISTIC",
                   help="also write density/QQ summaries for STATISTIC")
    return p


def _model(args):
    config = {}
    return build(args.model, config)


def _outdir(path):
    if path:
        os.makedirs(path, exist_ok=True)
    return path


def cmd_fit(args):
    model = _model(args)
    data = StratifiedDataset.from_csv(args.data)
    fit = fit_mle(model, data)
    lam = [None] * data.q
    for i, v in zip(fit.retained, fit.theta.lam):
        lam[i] = float(v)
    payload = {
        "model": model.name,
        "psi_hat": fit.psi,
        "lambda_hat": lam,
        "loglik": fit.loglik,
        "iterations": fit.iterations,
        "dropped_strata": [i + 1 for i in fit.dropped_strata],
    }
    print(f"model      {model.name}")
    print(f"psi_hat    {fit.psi!r}")
    print(f"loglik     {fit.loglik!r}")
    print(f"strata     {data.q} ({len(fit.dropped_strata)} dropped)")
    if _outdir(args.out):
        with open(os.path.join(args.out, "fit.json"), "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    return 0


def pvalue_rows(model, data, psi0, variants, k, seed, workers=1):
    """(statistic, value, pvalue) rows for ``cmd_pvalue``."""
    prep = Prepared(model, data)
    full, cons = fit_pair(model, prep, psi0)
    piv = pivot_set(model, prep, psi0, full, cons)
    rows = [(name, piv.get(name), normal_pvalue(piv.get(name))) for name in ("R", "S", "T")]
    rs = rstar(model, prep, psi0, full, cons, RStarOptions(key=derive(seed_key(seed), 3)))
    rows.append(("Rstar", rs.rstar, normal_pvalue(rs.rstar)))
    for variant in variants:
        tag = variant[0]
        plan = B.BootstrapPlan(variant, k, seed)
        reps = B.run(model, prep, psi0, variant, k, plan.root_key(), full_fit=full,
                     constrained_fit=cons, workers=workers)
        for name in ("R", "S", "T"):
            res = B.summarize(reps, piv.get(name), name, plan.fail_budget)
            rows.append((f"{name}{tag}", normal_score(res.pvalue), res.pvalue))
            if res.moments is not None:
                for mode, suffix in (("location", "l"), ("location_scale", "ls")):
                    v = adjust(piv.get(name), res.moments, mode)
                    rows.append((f"{name}{suffix}_{tag}", v, normal_pvalue(v)))
    return rows


def cmd_pvalue(args):
    model = _model(args)
    data = StratifiedDataset.from_csv(args.data)
    variants = ["unconstrained", "constrained"] if args.variant == "both" else [args.variant]
    rows = pvalue_rows(model, data, args.psi0, variants, args.k, args.seed, args.workers)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["statistic", "value", "pvalue"])
    for name, value, p in rows:
        w.writerow([name, repr(float(value)), repr(float(p))])
    sys.stdout.write(buf.getvalue())
    if _outdir(args.out):
        with open(os.path.join(args.out, "pvalue.csv"), "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
    return 0


def cmd_simulate(args):
    spec = ExperimentSpec.from_json(args.spec).with_(seed=args.seed)
    result = run_experiment(spec, workers=args.workers)
    out = _outdir(args.out)
    spec.to_json(os.path.join(out, SPEC_NAME))
    write_archive(os.path.join(out, ARCHIVE_NAME), result.archive)
    result.report.to_csv(os.path.join(out, "report.csv"))
    with open(os.path.join(out, "metadata.json"), "w", encoding="utf-8") as fh:
        json.dump(result.report.metadata, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(result.report.render())
    if result.budget_breached:
        print(f"failure budget exceeded: {result.failures}", file=sys.stderr)
        return 2
    return 0


def _locate(path):
    if os.path.isdir(path):
        return os.path.join(path, ARCHIVE_NAME), os.path.join(path, SPEC_NAME)
    return path, os.path.join(os.path.dirname(os.path.abspath(path)), SPEC_NAME)


def cmd_report(args):
    archive_path, spec_path = _locate(args.path)
    if not os.path.exists(archive_path):
        raise UsageError(f"no archive at {archive_path}")
    if not os.path.exists(spec_path):
        raise UsageError(f"no {SPEC_NAME} next to {archive_path}")
    spec = ExperimentSpec.from_json(spec_path)
    archive = read_archive(archive_path)
    report = tail_report(archive, spec.model, spec.q, spec.m, spec.levels, spec.statistics)
    print(report.render())
    out = _outdir(args.out)
    if out:
        report.to_csv(os.path.join(out, "report.csv"))
    for stat in args.density:
        summary = density_summary(archive, stat)
        target = out or os.path.dirname(os.path.abspath(archive_path))
        summary.to_csv(os.path.join(target, f"density_{stat}.csv"))
    return 0


COMMANDS = {"fit": cmd_fit, "pvalue": cmd_pvalue, "simulate": cmd_simulate, "report": cmd_report}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except TooManyFailures as exc:
        print(f"stratboot: {exc}", file=sys.stderr)
        return 2
    except (StratbootError, UsageError, ValueError, OSError) as exc:
        print(f"stratboot: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
