"""``folmi`` command line: analyze, synthesize, simulate, spectrum, verify.

Exit codes: 0 certified or success, 1 usage, IO or schema error, 2 not
certified (infeasible, inconclusive, failing check), 3 simulation diverged.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources

import numpy as np

from folmi.errors import FolmiError, MissingAssignmentError, SynthesisError
from folmi.interval import build_factors, sample_member
from folmi.lmi import Certificate, SolveOptions, verify
from folmi.schema import load
from folmi.sim import SimConfig, simulate
from folmi.stability import (
    DelayedPair,
    analyze_certain,
    analyze_interval,
    assemble_certain,
    assemble_interval,
    sector_csv,
    sector_scan,
)
from folmi.synthesis import SynthesisOptions, close_loop, closed_loop_matrices, synthesize

EXIT_OK, EXIT_USAGE, EXIT_UNCERTIFIED, EXIT_DIVERGED = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def bundled(name):
    """Path of a bundled example document, e.g. ``bundled("ex2_plant.json")``."""
    return str(resources.files("folmi") / "systems" / name)


class _Out:
    def __init__(self, quiet):
        self.quiet = quiet

    def say(self, msg):
        if not self.quiet:
            print(msg)

    @staticmethod
    def warn(msg):
        print(f"warning: {msg}", file=sys.stderr)


def _write(path, text):
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _report(msg, args, out):
    # CSV goes to stdout when there is no --out, so the summary moves to stderr
    if args.out:
        out.say(msg)
    elif not args.quiet:
        print(msg, file=sys.stderr)


def _delay_warnings(doc, out):
    for msg in doc.delay.validation_warnings():
        out.warn(msg)


def _factor_pair(doc):
    """Uncertainty factors of the state-delay pair a document induces."""
    if doc.structure == "plant" and doc.controller is not None:
        return close_loop(doc.plant(), doc.controller)
    return doc.pair().factors()


def _is_certain(uf):
    return not np.any(uf.m_factor) or not np.any(uf.r_factor)


def _problem(doc, certain):
    a_uf, b_uf = _factor_pair(doc)
    tau, mu = doc.delay.tau, doc.delay.mu
    if certain:
        if not (_is_certain(a_uf) and _is_certain(b_uf)):
            raise UsageError("--certain needs lower = upper for every interval entry")
        return assemble_certain(DelayedPair(a_uf.center, b_uf.center), tau, mu)
    return assemble_interval(a_uf, b_uf, tau, mu)


def cmd_analyze(args, out):
    doc = load(args.input)
    _delay_warnings(doc, out)
    a_uf, b_uf = _factor_pair(doc)
    opts = SolveOptions(margin=args.margin, backend=args.backend)
    tau, mu = doc.delay.tau, doc.delay.mu
    if args.certain:
        if not (_is_certain(a_uf) and _is_certain(b_uf)):
            raise UsageError("--certain needs lower = upper for every interval entry")
        rep = analyze_certain(DelayedPair(a_uf.center, b_uf.center), tau, mu, opts)
    else:
        rep = analyze_interval(a_uf, b_uf, tau, mu, opts)
    for w in rep.warnings:
        out.warn(w)
    if rep.certified:
        cert = rep.certificate
        print(f"verdict: certified_stable (normalized margin {cert.margin:.3e})")
        if args.out:
            _write(args.out, cert.dumps())
            out.say(f"certificate written to {args.out}")
        return EXIT_OK
    print(f"verdict: unknown ({rep.reason})")
    return EXIT_UNCERTIFIED


def cmd_synthesize(args, out):
    doc = load(args.input)
    _delay_warnings(doc, out)
    sysm = doc.plant()
    opts = SynthesisOptions(
        max_outer_iter=args.max_iter, solve=SolveOptions(margin=args.margin, backend=args.backend), robust=True
    )
    try:
        res = synthesize(sysm, args.order, opts)
    except SynthesisError as exc:
        print(f"synthesis failed: {exc.reason}: {exc}")
        return EXIT_UNCERTIFIED
    k = res.controller
    print(f"synthesis: certified controller of order {k.n_c} after {res.iterations} outer iteration(s)")
    out.say(k.dumps().rstrip())
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write(os.path.join(args.out, "controller.json"), k.dumps())
        _write(os.path.join(args.out, "synthesis_certificate.json"), res.certificate.dumps())
        _write(os.path.join(args.out, "certificate.json"), res.post_validation.certificate.dumps())
        _write(os.path.join(args.out, "system.json"), doc.with_controller(k).dumps())
        report = {
            "verdict": res.post_validation.verdict,
            "margin": res.post_validation.certificate.margin,
            "recovery_residuals": res.recovery_residuals,
            "iterations": res.iterations,
            "history": res.history,
            "checks": res.post_validation.verify_report.lines(),
        }
        _write(os.path.join(args.out, "validation.json"), json.dumps(report, indent=2) + "\n")
        out.say(f"controller, certificates and validation report written to {args.out}")
    return EXIT_OK


def _sample(im, which, rng):
    if which == "center":
        return 0.5 * (im.lower + im.upper)
    if which == "upper":
        return im.upper.copy()
    if which == "lower":
        return im.lower.copy()
    uf = build_factors(im)
    return sample_member(uf, rng.uniform(-1.0, 1.0, uf.n_slots))


def _parse_sample(text, default_seed):
    if text in ("center", "upper", "lower"):
        return text, default_seed
    if text.startswith("seed:"):
        try:
            return "random", int(text[5:])
        except ValueError:
            pass
    raise UsageError(f"--sample must be center, upper, lower or seed:N, got {text!r}")


def _vector(text, n, name):
    try:
        v = np.array([float(s) for s in text.split(",")])
    except ValueError:
        raise UsageError(f"{name} must be comma-separated numbers") from None
    if v.size != n:
        raise UsageError(f"{name} needs {n} entries, got {v.size}")
    return v


def cmd_simulate(args, out):
    doc = load(args.input)
    _delay_warnings(doc, out)
    which, seed = _parse_sample(args.sample, args.seed)
    rng = np.random.default_rng(seed)
    a = _sample(doc.a_int, which, rng)
    b = _sample(doc.b_int, which, rng)
    n = doc.n
    x0 = _vector(args.x0, n, "--x0") if args.x0 else np.ones(n)
    if doc.structure == "state_delay":
        a_sim, ad_sim = a, b
    elif doc.controller is not None and not args.plant_only:
        a_sim, ad_sim = closed_loop_matrices(a, b, doc.c_out, doc.controller)
        x0 = np.concatenate([x0, np.zeros(doc.controller.n_c)])
    else:
        if not args.quiet:
            print("no controller: simulating the open loop (u = 0)", file=sys.stderr)
        a_sim, ad_sim = a, np.zeros((n, n))
    try:
        memory = args.memory if args.memory == "full" else int(args.memory)
        cfg = SimConfig(args.h, args.horizon, memory, x0)
        tr = simulate(a_sim, ad_sim, doc.delay, doc.alpha, cfg)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    text = tr.to_csv()
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    if tr.diverged:
        print(f"simulation diverged at step {tr.last_step} (t = {tr.times[-1]:.6g})", file=sys.stderr)
        return EXIT_DIVERGED
    msg = f"simulated {tr.last_step} steps; |x(0)| = {tr.norm_series[0]:.6g}, |x(T)| = {tr.norm_series[-1]:.6g}"
    _report(msg, args, out)
    return EXIT_OK


def cmd_spectrum(args, out):
    doc = load(args.input)
    if doc.structure == "plant" and doc.controller is not None:
        target, _ = close_loop(doc.plant(), doc.controller)
    else:
        target = build_factors(doc.a_int)
    samples = sector_scan(target, doc.alpha, args.count, args.seed)
    text = sector_csv(samples, doc.alpha)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    worst = min(s.worst_margin for s in samples)
    msg = f"spectrum: {len(samples)} samples, worst sector margin {worst:.6g}"
    _report(msg, args, out)
    return EXIT_OK if worst > 0.0 else EXIT_UNCERTIFIED


def cmd_verify(args, out):
    doc = load(args.input)
    try:
        with open(args.certificate, encoding="utf-8") as fh:
            cert = Certificate.from_json(json.load(fh))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{args.certificate}: line {exc.lineno}: {exc.msg}") from None
    prob = _problem(doc, args.certain)
    extra = sorted(set(cert.values) - {v.name for v in prob.vars})
    if extra:
        raise UsageError(f"certificate has variables the problem does not: {', '.join(extra)}")
    try:
        rep = verify(prob, cert, margin=args.margin, tol=args.tol)
    except MissingAssignmentError as exc:
        raise UsageError(f"certificate lacks variable {exc.args[0]}") from None
    for line in rep.lines():
        print(line)
    if rep.passed:
        print("verify: pass")
        return EXIT_OK
    print("verify: FAIL (" + ", ".join(c.name for c in rep.failing()) + ")")
    return EXIT_UNCERTIFIED


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output file (directory for synthesize)")
    common.add_argument("--quiet", action="store_true", help="suppress informational output")
    common.add_argument("--seed", type=int, default=0, help="seed for sampled members")

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--margin", type=float, default=1e-6, help="strictness margin (default 1e-6)")
    solver.add_argument("--backend", default="clarabel", choices=["clarabel", "scs", "cvxopt"])

    p = _Parser(prog="folmi", description="Robust stability and stabilization of interval fractional-order delay systems.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", parents=[common, solver], help="robust stability certificate")
    a.add_argument("input")
    a.add_argument("--certain", action="store_true", help="certain-system test (lower = upper required)")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("synthesize", parents=[common, solver], help="output feedback controller")
    s.add_argument("input")
    s.add_argument("--order", type=int, default=0, help="controller order n_c")
    s.add_argument("--max-iter", type=int, default=10, help="outer iterations")
    s.set_defaults(func=cmd_synthesize)

    m = sub.add_parser("simulate", parents=[common], help="GL simulation trace (CSV)")
    m.add_argument("input")
    m.add_argument("--sample", default="center", help="center | upper | lower | seed:N")
    m.add_argument("--h", type=float, default=0.01, help="step size")
    m.add_argument("--horizon", type=float, default=50.0)
    m.add_argument("--x0", help="comma-separated plant initial state (default all ones)")
    m.add_argument("--memory", default="full", help="'full' or a number of GL terms")
    m.add_argument("--plant-only", action="store_true", help="ignore the controller")
    m.set_defaults(func=cmd_simulate)

    e = sub.add_parser("spectrum", parents=[common], help="eigenvalue sector scan (CSV)")
    e.add_argument("input")
    e.add_argument("--count", type=int, default=200)
    e.set_defaults(func=cmd_spectrum)

    v = sub.add_parser("verify", parents=[common], help="check a certificate against a document")
    v.add_argument("certificate")
    v.add_argument("input")
    v.add_argument("--tol", type=float, default=0.0, help="absolute eigenvalue tolerance")
    v.add_argument("--margin", type=float, default=1e-8, help="required strict margin (scaled)")
    v.add_argument("--certain", action="store_true")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    out = _Out(args.quiet)
    try:
        return args.func(args, out)
    except UsageError as exc:
        print(f"folmi {args.command}: error: {exc}", file=sys.stderr)
    except OSError as exc:
        print(f"folmi {args.command}: error: {exc}", file=sys.stderr)
    except FolmiError as exc:
        print(f"folmi {args.command}: error: {exc}", file=sys.stderr)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
