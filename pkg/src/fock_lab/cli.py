"""Command line entry point: ``fock-lab <command> [options]``.

Every command writes ``report.json`` plus one or more CSV files into
``--out``.  Exit status: 0 on success, 2 on validation errors, 3 when a
numeric resource cap is hit.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .errors import NumericResourceError
from .estimates import (PathKind, PathSpec, TransitionFamily, phase_transition_sweep, phi_ray_samples,
                        power_decay_fit, ratio_sweep, with_doubling)
from .fock import (QuadratureSpec, bargmann_shift_identity_residual, completeness_probe, log_abs_function,
                   minimality_probe, weighted_membership_integral)
from .products import (DEFAULT_REL_TOL, FormKind, ProductForm, eval_log_product_many, log_G_gamma_closed,
                       perturbation_to_dict, zero_set)
from .sequences import (Family, FamilySpec, PerturbationKind, PerturbationSpec, density_functionals,
                        make_sequence)

logger = logging.getLogger("fock_lab")

COMMANDS = ("gen", "eval", "density", "estimate", "membership", "transition", "optimality", "check-bargmann")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


# ---------------------------------------------------------------------------
# parsing helpers


def parse_complex(text: str) -> complex:
    t = text.strip().replace(" ", "").replace("i", "j")
    if not t:
        raise ConfigError("empty complex number")
    if t in ("j", "+j", "-j"):
        t = t.replace("j", "1j")
    t = t.replace("+j", "+1j").replace("-j", "-1j")
    if t.startswith("j"):
        t = "1" + t
    try:
        return complex(t)
    except ValueError as exc:
        raise ConfigError(f"cannot parse complex number {text!r}") from exc


def parse_list(text, conv=float) -> list:
    if isinstance(text, (list, tuple)):
        return [conv(x) if not isinstance(x, str) else conv(x) for x in text]
    parts = [p for p in str(text).split(",") if p.strip()]
    if not parts:
        raise ConfigError("empty list")
    return [conv(p) for p in parts]


def thread_cap() -> int:
    raw = os.environ.get("FOCK_LAB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"FOCK_LAB_THREADS must be a positive integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError("FOCK_LAB_THREADS must be >= 1")
    return n


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    return str(x)


def write_atomic(path: str, text: str) -> None:
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, header: list, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    write_atomic(path, buf.getvalue())


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_report(out: str, args: argparse.Namespace, summary: dict, tolerances: dict, files: list) -> None:
    config = {k: v for k, v in vars(args).items() if k not in ("func", "config")}
    report = {"command": args.command, "version": __version__, "config": config,
              "tolerances": tolerances, "summary": summary, "files": files}
    write_atomic(os.path.join(out, "report.json"), json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# descriptors from arguments


def family_from_args(args) -> FamilySpec:
    family = args.family
    if family is None:
        lattice_forms = (FormKind.STRIP.value, FormKind.PLANE.value)
        family = "lattice" if getattr(args, "form", None) in lattice_forms else "als"
    if family == "lattice":
        return FamilySpec.lattice(args.nu, args.strip_height)
    if family == "als":
        return FamilySpec.als()
    raise ConfigError(f"unknown family {family!r}")


def perturbation_from_args(args) -> PerturbationSpec:
    kind = args.perturbation
    if kind == "none":
        return PerturbationSpec.none()
    if kind == "strip_beta":
        if args.strip_height is None:
            raise ConfigError("strip_beta needs --strip-height")
        return PerturbationSpec.strip_beta(args.beta, args.strip_height)
    if kind == "full_beta":
        return PerturbationSpec.full_beta(args.beta)
    if kind == "als_beta":
        return PerturbationSpec.als_beta(args.beta)
    if kind == "angular_power":
        return PerturbationSpec.angular_power(args.s, args.start, args.symmetric)
    if kind == "tabulated":
        if not args.table:
            raise ConfigError("tabulated perturbation needs --table")
        with open(args.table) as fh:
            data = json.load(fh)
        return PerturbationSpec.tabulated([(tuple(i), d, t) for i, d, t in data])
    raise ConfigError(f"unknown perturbation {kind!r}")


def form_from_args(args) -> ProductForm:
    kind = FormKind(args.form)
    if kind is FormKind.PHI:
        return ProductForm.phi(args.s)
    fam = family_from_args(args)
    return ProductForm(kind, fam, perturbation_from_args(args))


def _add_family(p):
    p.add_argument("--family", choices=["lattice", "als"], default=None,
                   help="base family (default: lattice for genus-2 forms, else als)")
    p.add_argument("--nu", type=float, default=1.0, help="row-0 shift of the lattice family")
    p.add_argument("--strip-height", type=int, default=None, dest="strip_height")
    p.add_argument("--perturbation", default="none",
                   choices=[k.value for k in PerturbationKind])
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--s", type=float, default=0.7, help="exponent of the angular perturbation")
    p.add_argument("--start", type=int, default=2)
    p.add_argument("--symmetric", action="store_true")
    p.add_argument("--table", default=None, help="JSON file with [[index], delta, theta] triples")


def _add_form(p):
    _add_family(p)
    p.add_argument("--form", default="als", choices=[k.value for k in FormKind])


# ---------------------------------------------------------------------------
# commands


def cmd_gen(args) -> tuple:
    fam = family_from_args(args)
    seq = make_sequence(fam, perturbation_from_args(args), args.window)
    rows = seq.to_rows()
    if fam.family is Family.LATTICE:
        header = ["index_m", "index_n", "re", "im", "delta", "theta"]
        data = [[r["index_m"], r["index_n"], r["re"], r["im"], r["delta"], r["theta"]] for r in rows]
    else:
        header = ["axis", "sign", "n", "re", "im", "delta", "theta"]
        data = [[r["axis"], r["sign"], r["n"], r["re"], r["im"], r["delta"], r["theta"]] for r in rows]
    write_csv(os.path.join(args.out, "points.csv"), header, data)
    return {"points": len(seq), "coverage": seq.coverage}, {}, ["points.csv"]


def read_points(path: str) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "re" not in reader.fieldnames or "im" not in reader.fieldnames:
            raise ConfigError(f"{path} needs 're' and 'im' columns")
        return np.array([complex(float(r["re"]), float(r["im"])) for r in reader], dtype=complex)


def cmd_eval(args) -> tuple:
    form = form_from_args(args)
    if args.points:
        z = read_points(args.points)
    elif args.z:
        z = np.array(parse_list(args.z, parse_complex), dtype=complex)
    else:
        raise ConfigError("eval needs --z or --points")
    lm, ph, tb, zero = eval_log_product_many(form, z, args.rel_tol)
    if form.kind is FormKind.PHI:
        dp = dr = np.full(z.shape, np.nan)
    else:
        window = float(np.max(np.abs(z))) + 3.0 if z.size else 3.0
        dp = zero_set(form, window).distances(z)
        dr = zero_set(ProductForm(form.kind, form.family), window).distances(z)
    rows = list(zip(z.real, z.imag, lm, ph, tb, dp, dr))
    write_csv(os.path.join(args.out, "eval.csv"),
              ["re", "im", "log_mod", "phase", "tail_bound", "dist_perturbed", "dist_reference"], rows)
    summary = {"count": int(z.size), "zeros": int(np.sum(zero)), "max_tail_bound": float(np.max(tb)) if z.size else 0.0,
               "form": form.to_dict()}
    return summary, {"rel_tol": args.rel_tol}, ["eval.csv"]


def cmd_density(args) -> tuple:
    fam = family_from_args(args)
    p = perturbation_from_args(args)
    seq = make_sequence(fam, p, args.window)
    rep = density_functionals(seq, parse_list(args.cutoffs), args.avdonin_window)
    rows = [(c, s, s / math.log(c)) for c, s in rep.partial_sums]
    write_csv(os.path.join(args.out, "density.csv"), ["cutoff", "partial_sum", "normalized"], rows)
    files = ["density.csv"]
    if rep.ring_sums:
        write_csv(os.path.join(args.out, "ring_sums.csv"), ["n", "ring_sum"],
                  [(i + 1, v) for i, v in enumerate(rep.ring_sums)])
        files.append("ring_sums.csv")
    d = rep.to_dict()
    d.pop("ring_sums", None)
    d.pop("partial_sums", None)
    return d, {}, files


def _path_from_args(args) -> PathSpec:
    return PathSpec(PathKind(args.path), args.r_min, args.r_max, args.count, args.theta, args.floor)


def cmd_estimate(args) -> tuple:
    form = form_from_args(args)
    rep = ratio_sweep(form, args.weight, _path_from_args(args), args.variant, args.rel_tol)
    beta = form.perturbation.beta
    write_csv(os.path.join(args.out, "sweep.csv"), ["beta", "r", "log_ratio"],
              [(beta, r, v) for r, v in rep.samples])
    summary = rep.to_dict()
    summary.pop("samples")
    summary["form"] = form.to_dict()
    return summary, {"rel_tol": args.rel_tol, "floor": args.floor}, ["sweep.csv"]


def cmd_membership(args) -> tuple:
    radii = parse_list(args.radii)
    kw = {"cell": args.cell, "arc_density": args.arc_density}
    if args.closed_form:
        F = lambda z: log_G_gamma_closed(z).real  # noqa: E731
        curve = weighted_membership_integral(F, args.alpha, args.weight_beta, radii, envelope="axis", **kw)
        what = "closed form"
    else:
        form = form_from_args(args)
        if args.probe == "minimality":
            lam = parse_complex(args.removed) if args.removed else None
            if lam is None:
                raise ConfigError("the minimality probe needs --removed")
            curve = minimality_probe(form, lam, radii, **kw)
        elif args.probe == "completeness":
            curve = completeness_probe(form, radii, **kw)
        else:
            env = "axis" if form.family.family is Family.ALS and form.kind is not FormKind.PHI else None
            curve = weighted_membership_integral(log_abs_function(form), args.alpha, args.weight_beta, radii,
                                                 envelope=env, **kw)
        what = form.to_dict()
    write_csv(os.path.join(args.out, "membership.csv"), ["R", "I"], list(zip(curve.radii, curve.integral_values)))
    summary = curve.to_dict()
    summary["function"] = what
    summary["flattens"] = curve.flattens()
    return summary, {"cell": args.cell, "arc_density": args.arc_density, "flat_threshold": 0.05}, ["membership.csv"]


def cmd_transition(args) -> tuple:
    betas = parse_list(args.beta_grid)
    radii = parse_list(args.radii)
    threads = thread_cap()

    def one(b):
        return phase_transition_sweep(args.family, [b], radii, args.nu, args.strip_height or 1,
                                      cell=args.cell, arc_density=args.arc_density)[0]
    if threads > 1 and len(betas) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, sorted(betas)))
    else:
        results = [one(b) for b in sorted(betas)]
    rows = [(r.beta, r.verdict.value, r.minimality.final_increment(), r.completeness.final_increment())
            for r in results]
    write_csv(os.path.join(args.out, "transition.csv"),
              ["beta", "verdict", "minimality_increment", "completeness_increment"], rows)
    curves = []
    for r in results:
        for name, c in (("minimality", r.minimality), ("completeness", r.completeness)):
            curves.extend((r.beta, name, R, v) for R, v in zip(c.radii, c.integral_values))
    write_csv(os.path.join(args.out, "curves.csv"), ["beta", "probe", "R", "I"], curves)
    summary = {"verdicts": {fmt(r.beta): r.verdict.value for r in results},
               "radii_used": with_doubling(radii), "threads": threads}
    return summary, {"flat_threshold": 0.05, "grow_threshold": 0.1, "cell": args.cell,
                     "arc_density": args.arc_density}, ["transition.csv", "curves.csv"]


def cmd_optimality(args) -> tuple:
    samples = phi_ray_samples(args.s, args.theta, args.r_min, args.r_max, args.count, args.rel_tol)
    write_csv(os.path.join(args.out, "decay.csv"), ["r", "log_mod"], samples)
    summary = {"s": args.s, "theta": args.theta, "expected_exponent": 1.0 - args.s}
    try:
        c, p, se = power_decay_fit(samples)
        summary.update(c=c, p=p, stderr=se)
    except ValueError as exc:
        summary["fit_error"] = str(exc)
    return summary, {"rel_tol": args.rel_tol}, ["decay.csv"]


def cmd_check_bargmann(args) -> tuple:
    q = QuadratureSpec(time_halfwidth=args.T, time_step=args.step)
    zs = parse_list(args.z, parse_complex)
    rows = [(z.real, z.imag, bargmann_shift_identity_residual(z, q)) for z in zs]
    write_csv(os.path.join(args.out, "bargmann.csv"), ["re", "im", "residual"], rows)
    worst = max(r[2] for r in rows)
    summary = {"max_residual": worst, "passes_1e-6": worst <= 1e-6}
    return summary, {"T": args.T, "step": args.step, "tolerance": q.tolerance}, ["bargmann.csv"]


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fock-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", default=None, help="JSON file with option values")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="command")

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--out", default=".", help="output directory")
        p.set_defaults(func=func)
        return p

    p = add("gen", cmd_gen, "build a sequence and dump its points")
    _add_family(p)
    p.add_argument("--window", type=float, default=10.0)

    p = add("eval", cmd_eval, "evaluate a product at points")
    _add_form(p)
    p.add_argument("--z", default=None, help="comma-separated complex numbers, e.g. 1+1i,2")
    p.add_argument("--points", default=None, help="CSV with re, im columns (e.g. from gen)")
    p.add_argument("--rel-tol", type=float, default=DEFAULT_REL_TOL, dest="rel_tol")

    p = add("density", cmd_density, "density functionals of a perturbation")
    _add_family(p)
    p.add_argument("--window", type=float, default=10.0)
    p.add_argument("--cutoffs", default="10,100,1000,10000")
    p.add_argument("--avdonin-window", type=int, default=None, dest="avdonin_window")

    p = add("estimate", cmd_estimate, "ratio sweep along a path and exponent fit")
    _add_form(p)
    p.add_argument("--weight", type=float, default=0.0)
    p.add_argument("--path", default="real_midpoints", choices=[k.value for k in PathKind])
    p.add_argument("--r-min", type=float, default=5.0, dest="r_min")
    p.add_argument("--r-max", type=float, default=60.0, dest="r_max")
    p.add_argument("--count", type=int, default=64)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--floor", type=float, default=0.1)
    p.add_argument("--variant", default=None, choices=["gaussian", "axis", "phi"])
    p.add_argument("--rel-tol", type=float, default=DEFAULT_REL_TOL, dest="rel_tol")

    p = add("membership", cmd_membership, "weighted Fock membership curve")
    _add_form(p)
    p.add_argument("--closed-form", action="store_true", help="use the closed-form axis product")
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--weight-beta", type=float, default=0.0, dest="weight_beta")
    p.add_argument("--radii", default="10,20,40,80")
    p.add_argument("--probe", default="none", choices=["none", "minimality", "completeness"])
    p.add_argument("--removed", default=None)
    p.add_argument("--cell", type=float, default=0.5)
    p.add_argument("--arc-density", type=float, default=8.0, dest="arc_density")

    p = add("transition", cmd_transition, "completeness/minimality verdicts over beta")
    p.add_argument("--family", default="als", choices=[k.value for k in TransitionFamily])
    p.add_argument("--beta", default="-0.3,0,0.5", dest="beta_grid")
    p.add_argument("--radii", default="10,20,40")
    p.add_argument("--nu", type=float, default=0.5)
    p.add_argument("--strip-height", type=int, default=1, dest="strip_height")
    p.add_argument("--cell", type=float, default=0.5)
    p.add_argument("--arc-density", type=float, default=8.0, dest="arc_density")

    p = add("optimality", cmd_optimality, "decay of the rotated-zero ratio product on a ray")
    p.add_argument("--s", type=float, default=0.7)
    p.add_argument("--theta", type=float, default=math.pi / 2)
    p.add_argument("--r-min", type=float, default=10.0, dest="r_min")
    p.add_argument("--r-max", type=float, default=200.0, dest="r_max")
    p.add_argument("--count", type=int, default=40)
    p.add_argument("--rel-tol", type=float, default=DEFAULT_REL_TOL, dest="rel_tol")

    p = add("check-bargmann", cmd_check_bargmann, "check the shifted-Gaussian kernel identity")
    p.add_argument("--z", default="0,1,1i,1+1i,2-1i")
    p.add_argument("--T", type=float, default=8.0)
    p.add_argument("--step", type=float, default=1e-3)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list) -> list:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return argv
    with open(known.config) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a JSON object")
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    command = cfg.pop("command", None)
    if not any(a in COMMANDS for a in argv):
        if command is None:
            raise ConfigError("config needs a 'command' entry")
        globals_, rest, i = [], [], 0
        while i < len(argv):
            a = argv[i]
            if a == "--config":
                globals_ += argv[i:i + 2]
                i += 2
                continue
            if a.startswith("--config=") or a in ("-v", "--verbose"):
                globals_.append(a)
            else:
                rest.append(a)
            i += 1
        argv = globals_ + [command] + rest
    sub_action = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    cmd = next(a for a in argv if a in COMMANDS)
    subparser = sub_action.choices[cmd]
    known_dests = {a.dest for a in subparser._actions}
    unknown = set(cfg) - known_dests
    if unknown:
        raise ConfigError(f"unknown config keys for {cmd}: {sorted(unknown)}")
    for key, value in cfg.items():
        if isinstance(value, list) and key in ("z", "radii", "cutoffs", "beta_grid"):
            value = ",".join(str(v) for v in value)
        subparser.set_defaults(**{key: value})
    return argv


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config(parser, argv)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"fock-lab: error: {exc}", file=sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        os.makedirs(args.out, exist_ok=True)
        summary, tolerances, files = args.func(args)
        write_report(args.out, args, summary, tolerances, files)
    except NumericResourceError as exc:
        print(f"fock-lab: numeric resource limit: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError, KeyError) as exc:
        print(f"fock-lab: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
