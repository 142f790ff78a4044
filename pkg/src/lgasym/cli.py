"""Command-line front end.

Subcommands:
  analyze   classify a problem, run the certified march, print a summary
            (or, with --json, a byte-deterministic JSON document)
  table     tabulate the certified branch against its approximant
  validate  run a named self-check suite, one PASS/FAIL line per check

Exit codes: 0 on success, 2 when a structural hypothesis fails (the
input is outside the method's scope), 1 for everything else (bad
arguments, parse errors, numerical failures).  Logging goes to stderr
and is controlled by the LG_LOG environment variable (error, info,
debug).
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import random
import sys

from . import certificate as certificate_mod
from . import expr, oracle, pipeline, quadrature, transform, volterra

log = logging.getLogger("lgasym")


# --------------------------------------------------------------------------
# deterministic JSON

def json_dumps(obj):
    """Serialize to JSON with a fixed, platform-independent byte layout:
    dict order preserved, floats as repr-faithful %.17g, non-finite
    numbers as null."""
    out = []
    _write_json(obj, out, 0)
    out.append("\n")
    return "".join(out)


def _write_json(obj, out, depth):
    pad = "  " * depth
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        items = list(obj.items())
        for i, (k, v) in enumerate(items):
            out.append(pad + "  " + _json_str(str(k)) + ": ")
            _write_json(v, out, depth + 1)
            out.append(",\n" if i + 1 < len(items) else "\n")
        out.append(pad + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        out.append("[\n")
        for i, v in enumerate(obj):
            out.append(pad + "  ")
            _write_json(v, out, depth + 1)
            out.append(",\n" if i + 1 < len(obj) else "\n")
        out.append(pad + "]")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif obj is None:
        out.append("null")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(format(obj, ".17g") if math.isfinite(obj) else "null")
    elif isinstance(obj, str):
        out.append(_json_str(obj))
    else:
        out.append(_json_str(str(obj)))


_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t"}


def _json_str(s):
    chunks = ['"']
    for ch in s:
        if ch in _ESCAPES:
            chunks.append(_ESCAPES[ch])
        elif ord(ch) < 0x20:
            chunks.append("\\u%04x" % ord(ch))
        else:
            chunks.append(ch)
    chunks.append('"')
    return "".join(chunks)


# --------------------------------------------------------------------------
# argument plumbing

def _parse_interval(text):
    lo_s, sep, hi_s = text.partition(":")
    if not sep:
        raise argparse.ArgumentTypeError("interval must look like LO:HI")
    try:
        lo = float(lo_s)
        hi = math.inf if hi_s.strip() in ("inf", "") else float(hi_s)
    except ValueError:
        raise argparse.ArgumentTypeError("bad interval %r" % text) from None
    if not lo < hi:
        raise argparse.ArgumentTypeError("interval must satisfy LO < HI")
    return lo, hi


def _add_problem_args(p):
    p.add_argument("--f", required=True, help="leading coefficient expression")
    p.add_argument("--g", default="0", help="perturbation expression")
    p.add_argument("--endpoint", choices=("infinity", "zero"),
                   default="infinity")
    p.add_argument("--interval", type=_parse_interval, default=None,
                   metavar="LO:HI")
    p.add_argument("--tol", type=float, default=1e-10,
                   help="quadrature tolerance")
    p.add_argument("--tail-tol", type=float, default=1e-6,
                   help="certified bound required of the un-marched tail")
    p.add_argument("--xmax", type=float, default=None,
                   help="resolve at least this far (this small, for zero)")
    p.add_argument("--step", type=float, default=None,
                   help="override the coarse marching step")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="lgasym",
        description="Certified leading-order asymptotics for u'' = (f+g) u")
    sub = ap.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="classify, march, certify")
    _add_problem_args(pa)
    pa.add_argument("--json", action="store_true",
                    help="emit a deterministic JSON document")
    pa.set_defaults(func=_cmd_analyze)

    pt = sub.add_parser("table", help="tabulate solution vs approximant")
    _add_problem_args(pt)
    pt.add_argument("--points", type=int, default=9)
    pt.add_argument("--csv", action="store_true")
    pt.set_defaults(func=_cmd_table)

    pv = sub.add_parser("validate", help="run a self-check suite")
    pv.add_argument("--suite", default="all",
                    choices=("bessel_half", "gronwall", "convergence", "all"))
    pv.add_argument("--seed", type=int, default=0)
    pv.set_defaults(func=_cmd_validate)
    return ap


def _run_analysis(args):
    return pipeline.analyze(
        args.f, args.g, endpoint=args.endpoint, interval=args.interval,
        tol=args.tol, tail_tol=args.tail_tol, x_max=args.xmax,
        step=args.step)


def _cmd_analyze(args):
    report = _run_analysis(args)
    if args.json:
        sys.stdout.write(json_dumps(report.to_json_dict()))
        return 0
    cert = report.certificate
    print("regime: %s" % report.regime.value)
    log.info("hypothesis checks: %d passed", len(report.checks))
    for c in report.checks:
        print("  check %-34s %s" % (c["name"],
                                    "ok" if c["passed"] else "FAILED"))
    if report.psi_text is not None:
        log.debug("perturbation: %s", report.psi_text)
    print("cutoff: %.6g  (weighted tail %.6g, radius %.6g)"
          % (cert.cutoff, cert.tail_norm, cert.radius))
    print("certificate: %s" % ("PASS" if cert.passed() else "FAIL"))
    for c in cert.checks:
        print("  %-28s value=%-12.6g threshold=%-12.6g %s"
              % (c["name"], c["value"], c["threshold"],
                 "ok" if c["passed"] else "FAILED"))
    for key, val in sorted(report.constants.items()):
        print("constant %s = %s" % (key, _fmt_const(val)))
    for s in report.solutions:
        print("solution %-18s ~ %s" % (s.label, s.asymptotic))
    for key, val in report.march.items():
        print("march %s = %s" % (key, val))
    print("work: %(quadrature_evaluations)d quadrature evaluations, "
          "%(march_steps)d march steps" % report.work)
    return 0 if cert.passed() else 1


def _fmt_const(val):
    if isinstance(val, complex):
        return "%.12g %+.12gi" % (val.real, val.imag)
    if isinstance(val, tuple):
        return "(" + ", ".join(_fmt_const(v) for v in val) + ")"
    if isinstance(val, float):
        return "%.12g" % val
    return str(val)


_TABLE_COLS = ("x", "value", "approximant", "ratio", "envelope_bound")


def _cmd_table(args):
    report = _run_analysis(args)
    rows = report.sample_rows(args.points)
    if args.csv:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(_TABLE_COLS)
        for row in rows:
            writer.writerow([format(row[c], ".12g") for c in _TABLE_COLS])
        return 0
    print("%-14s %-16s %-16s %-14s %-14s" % _TABLE_COLS)
    for row in rows:
        print("%-14.6g %-16.8g %-16.8g %-14.8g %-14.6g"
              % tuple(row[c] for c in _TABLE_COLS))
    return 0


# --------------------------------------------------------------------------
# validation suites

def _suite_bessel_half(rng):
    checks = []
    rep = pipeline.analyze("1", "0", x_max=16.0)
    rec = rep.solution("recessive")
    dom = rep.solution("dominant")

    def ratio_k(r):
        w = math.sqrt(r) * oracle.closed_form_half("K", r)
        return w / float(rec.value(r))

    c2, c6 = ratio_k(2.0), ratio_k(6.0)
    drift = abs(c2 / c6 - 1.0)
    checks.append(("half-order decaying branch is proportional to its "
                   "closed form", drift < 1e-9,
                   "ratio drift %.3g" % drift))
    const = abs(c6 - math.sqrt(math.pi / 2.0))
    checks.append(("half-order decaying constant sqrt(pi/2)",
                   const < 1e-9, "deviation %.3g" % const))
    r = 14.0
    ci = math.sqrt(r) * oracle.closed_form_half("I", r) / float(dom.value(r))
    dev = abs(ci - 1.0 / math.sqrt(2.0 * math.pi))
    checks.append(("half-order growing constant 1/sqrt(2 pi)",
                   dev < 1e-9, "deviation %.3g" % dev))

    rep2 = pipeline.analyze("2", "0", x_max=12.0)
    rec2 = rep2.solution("recessive")

    def ratio_res(r):
        return r * oracle.resolvent_value(3, 2.0, r) / float(rec2.value(r))

    q2, q4 = ratio_res(2.0), ratio_res(4.0)
    drift = abs(q2 / q4 - 1.0)
    checks.append(("resolvent kernel tracks the decaying branch",
                   drift < 1e-6, "ratio drift %.3g" % drift))
    dev = abs(q4 - math.sqrt(2.0) / (4.0 * math.pi))
    checks.append(("resolvent normalization sqrt(2)/(4 pi)",
                   dev < 1e-6, "deviation %.3g" % dev))
    return checks


def _suite_gronwall(rng):
    checks = []
    cases = [
        ("1", "3/(4*x^2)", "infinity", (1.0, math.inf)),
        ("-1", "-1/(4*x^2)", "infinity", (1.0, math.inf)),
        ("0", "exp(-2*x)", "infinity", (0.0, math.inf)),
    ]
    for f_text, g_text, endpoint, interval in cases:
        rep = pipeline.analyze(f_text, g_text, endpoint=endpoint,
                               interval=interval)
        name = "f=%s g=%s" % (f_text, g_text)
        cert = rep.certificate
        checks.append(("certificate holds for " + name, cert.passed(),
                       "radius %.4g" % cert.radius))
        ver = rep.verification
        checks.append(("tail re-quadrature agrees for " + name,
                       ver["tail_consistent"],
                       "relative difference %.3g"
                       % ver["relative_difference"]))
        if "conjugation_defect" in rep.constants:
            d = rep.constants["conjugation_defect"]
            checks.append(("oscillatory runs are conjugate for " + name,
                           d < 1e-8, "defect %.3g" % d))
        resid = rep.constants["tail_residual_bound"]
        checks.append(("tail residual certified for " + name,
                       resid <= rep.tail_tolerance,
                       "bound %.3g" % resid))
        # spot-check the envelope at random nodes of the raw fine run
        bundle = rep.internals["bundle"]
        raw = bundle.sol_raw
        raws = raw if isinstance(raw, tuple) else (raw,)
        worst = 0.0
        for sol in raws:
            for _ in range(16):
                k = rng.randrange(len(sol.z))
                worst = max(worst, abs(sol.z[k])
                            / math.exp(sol.envelope_log[k]))
        checks.append(("sampled envelope ratio <= 1 for " + name,
                       worst <= 1.0 + 1e-9, "worst %.6f" % worst))
    return checks


def _suite_convergence(rng):
    checks = []
    # marching order: halving h must cut the error close to fourfold
    a, X = 0.0, 6.0
    import numpy as np
    ref = None
    results = {}
    for h in (0.08, 0.04, 0.02, 0.0025):
        n = int(round((X - a) / h))
        w = np.exp(-(a + h * np.arange(n + 1)))
        sol = volterra.solve_kernel(w, h, 1.0)
        results[h] = complex(sol.z[-1]).real
    ref = results[0.0025]
    e1 = abs(results[0.08] - ref)
    e2 = abs(results[0.04] - ref)
    e3 = abs(results[0.02] - ref)
    r12, r23 = e1 / e2, e2 / e3
    checks.append(("march error drops fourfold per halving",
                   3.5 <= r12 <= 4.5 and 3.5 <= r23 <= 4.5,
                   "ratios %.2f, %.2f" % (r12, r23)))
    # integrator order: a tenfold tolerance drop must buy >= ~8x accuracy
    exact = math.cosh(5.0)
    errs = []
    for tol in (1e-6, 1e-7):
        traj = oracle.integrate_ivp(lambda x: 1.0, 0.0, 1.0, 0.0, 5.0,
                                    tol=tol)
        errs.append(abs(traj.us[-1] - exact))
    ratio = errs[0] / errs[1] if errs[1] > 0 else math.inf
    checks.append(("integrator error scales with tolerance",
                   ratio >= 4.0, "ratio %.2f" % ratio))
    # quadrature: an exact-integral fixture at tight tolerance
    res = quadrature.integrate_finite(lambda x: 1.0 / x, 1.0, 2.0, tol=1e-12)
    dev = abs(res.value - math.log(2.0))
    checks.append(("quadrature hits log 2", dev < 1e-12, "error %.3g" % dev))
    return checks


_SUITES = {
    "bessel_half": _suite_bessel_half,
    "gronwall": _suite_gronwall,
    "convergence": _suite_convergence,
}


def _cmd_validate(args):
    names = list(_SUITES) if args.suite == "all" else [args.suite]
    rng = random.Random(args.seed)
    failures = 0
    for name in names:
        for label, passed, detail in _SUITES[name](rng):
            status = "PASS" if passed else "FAIL"
            print("%s [%s] %s (%s)" % (status, name, label, detail))
            if not passed:
                failures += 1
    print("%d check(s) failed" % failures if failures else "all checks passed")
    return 1 if failures else 0


# --------------------------------------------------------------------------

def _setup_logging():
    level = os.environ.get("LG_LOG", "error").lower()
    chosen = {"error": logging.ERROR, "info": logging.INFO,
              "debug": logging.DEBUG}.get(level, logging.ERROR)
    logging.basicConfig(stream=sys.stderr, level=chosen,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None):
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except transform.HypothesisFailed as e:
        print("hypothesis failure: %s" % e, file=sys.stderr)
        for c in getattr(e, "checks", []):
            print("  check %-34s %s" % (c["name"],
                                        "ok" if c["passed"] else "FAILED"),
                  file=sys.stderr)
        return 2
    except (expr.ParseError, expr.EvalDomainError, ValueError,
            quadrature.QuadratureError, volterra.VolterraError,
            certificate_mod.CertificateError, pipeline.AnalysisError,
            oracle.OracleError) as e:
        print("error: %s" % e, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
