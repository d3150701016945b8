"""Command line front end.

Subcommands load a measure/function pair, run the requested construction and
emit JSON (or CSV for curves).  Exit codes: 0 success, 1 input error,
2 verification failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from .concentration import Params, build_net, verify_concentration
from .decompose import build_extension, estimate_sobolev_seminorm, mu_norm_f2
from .functional import (
    FamilyAssignment,
    FamilyValidationError,
    Variant,
    build_pipeline,
    build_reference_family,
    default_t_grid,
    eval_family_functional,
    k_curve,
    validate_family,
)
from .lacunae import contact_graph, partition_lacunae, project_lacuna, projection_multiplicity
from .measure import MeasureFormatError, load_function, load_measure
from .oracle1d import OracleProblem, sigma_norm_exact
from .selftest import run_selftest

log = logging.getLogger("sumspace")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_VERIFY = 2


def _setup_logging():
    level = os.environ.get("SUMSPACE_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.ERROR), format="%(message)s")


def _fmt(x):
    if isinstance(x, float):
        return float(f"{x:.9g}")
    return x


def _roundtrip(obj):
    if isinstance(obj, dict):
        return {k: _roundtrip(v) for k, v in sorted(obj.items())}
    if isinstance(obj, (list, tuple)):
        return [_roundtrip(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if not np.isfinite(x):
            return None  # vacuous check extrema; strict JSON has no Infinity
        return _fmt(x)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _emit(args, payload, csv_text=None):
    if getattr(args, "format", "json") == "csv" and csv_text is not None:
        text = csv_text
    else:
        text = json.dumps(_roundtrip(payload), sort_keys=True, indent=2) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _add_common(sp, measure=True, function=True):
    if measure:
        sp.add_argument("--measure", required=True, help="measure JSON file")
    if function:
        sp.add_argument("--function", help="function JSON file aligned with the measure")
    sp.add_argument("--p", type=float, required=True, help="integrability exponent, p > n")
    sp.add_argument("--tau", type=float, default=9.0, help="anchor dilation (default 9)")
    sp.add_argument("--gamma", type=float, default=None, help="containment dilation override")
    sp.add_argument("--seed", type=int, default=0, help="seed for all randomness")
    sp.add_argument("--t-grid", dest="t_grid", default=None, help="a:b:k log-spaced grid")
    sp.add_argument("--out", default=None, help="output path (default stdout)")
    sp.add_argument("--format", choices=["json", "csv"], default="json")


def _load(args, need_function):
    mu = load_measure(args.measure)
    if not args.p > mu.n:
        raise MeasureFormatError(f"p={args.p} must exceed the dimension n={mu.n}")
    f = None
    if need_function:
        if not args.function:
            raise MeasureFormatError("this command needs --function")
        f = load_function(args.function, mu)
    prm = Params(p=args.p, tau=args.tau, gamma=args.gamma)
    return mu, f, prm


def _parse_t_grid(grid_arg: str, mu, f, p):
    if grid_arg is None:
        return default_t_grid(mu, np.asarray(f.values), p) if f is not None else None
    try:
        a, b, k = grid_arg.split(":")
        a, b, k = float(a), float(b), int(k)
        if not (a > 0 and b > a and k >= 2):
            raise ValueError
    except ValueError as exc:
        raise MeasureFormatError(f"bad --t-grid {grid_arg!r}, expected a:b:k") from exc
    return np.geomspace(a, b, k)


def cmd_net(args):
    mu, _, prm = _load(args, need_function=False)
    net = build_net(mu, prm)
    report = verify_concentration(net, mu, prm, rng=np.random.default_rng(args.seed))
    payload = net.to_json_dict()
    payload["verification"] = {
        c.name: {"ok": c.ok, "checked": c.checked, "worst": c.worst} for c in report.checks
    }
    _emit(args, payload)
    return EXIT_OK if report.ok else EXIT_VERIFY


def cmd_whitney(args):
    mu, _, prm = _load(args, need_function=False)
    net, cover, pou, lacs = build_pipeline(mu, prm)
    for lac in lacs:
        project_lacuna(lac, net, cover)
    edges, contact_report = contact_graph(lacs, cover)
    payload = cover.to_json_dict()
    payload["lacunae"] = [
        {
            "cubes": list(map(int, lac.ids)),
            "kind": lac.kind,
            "net_points": list(map(int, lac.V)),
            "min_cube": int(lac.q_min),
            "max_cube": None if lac.q_max is None else int(lac.q_max),
            "outer": lac.outer,
            "projection": int(lac.projection),
        }
        for lac in lacs
    ]
    payload["lacuna_contacts"] = {
        "edges": [[int(a), int(b)] for a, b in sorted(edges)],
        "max_contacts": contact_report["max_contacts"],
        "true_true_contacts": [
            [int(a), int(b)] for a, b in contact_report["true_true_contacts"]
        ],
    }
    payload["projection_multiplicity"] = projection_multiplicity(lacs)
    _emit(args, payload)
    return EXIT_OK


def cmd_decompose(args):
    mu, f, prm = _load(args, need_function=True)
    net, cover, pou, _ = build_pipeline(mu, prm)
    dec = build_extension(f, mu, net, cover, pou, prm)
    payload = dec.to_json_dict()
    payload["seminorm"] = {
        "quadrature": estimate_sobolev_seminorm(dec),
        "discrete_surrogate": estimate_sobolev_seminorm(dec, method="discrete"),
    }
    payload["residual_norm"] = mu_norm_f2(dec)
    _emit(args, payload)
    return EXIT_OK


def cmd_estimate(args):
    mu, f, prm = _load(args, need_function=True)
    net, cover, pou, lacs = build_pipeline(mu, prm)
    ref = build_reference_family(mu, net, cover, lacs, prm)
    gamma = ref.gamma_needed * (1 + 1e-9)
    values = {}
    admissible = {}
    for variant in Variant:
        fam = ref.assignment
        try:
            validate_family(fam, variant, mu, args.p, gamma)
            kept = fam
            total = eval_family_functional(kept, variant, mu, f, args.p, gamma=gamma)
            count = len(fam.family)
        except FamilyValidationError:
            # keep the subfamily admissible for this variant
            keep_idx = []
            for k in range(len(fam.family)):
                sub = FamilyAssignment(
                    type(fam.family)([fam.family[k]]),
                    [fam.prime[k]],
                    [fam.dprime[k]],
                    fam.pool,
                )
                try:
                    validate_family(sub, variant, mu, args.p, gamma)
                except FamilyValidationError:
                    continue
                keep_idx.append(k)
            total = sum(
                eval_family_functional(
                    FamilyAssignment(
                        type(fam.family)([fam.family[k]]),
                        [fam.prime[k]],
                        [fam.dprime[k]],
                        fam.pool,
                    ),
                    variant,
                    mu,
                    f,
                    args.p,
                    gamma=gamma,
                )
                for k in keep_idx
            )
            count = len(keep_idx)
        values[variant.value] = total
        admissible[variant.value] = count
    payload = {
        "values": values,
        "admissible_terms": admissible,
        "family_size": len(ref.assignment.family),
        "gamma": ref.gamma_needed,
        "pool_multiplicity": ref.pool_multiplicity,
    }
    _emit(args, payload)
    return EXIT_OK


def cmd_kcurve(args):
    mu, f, prm = _load(args, need_function=True)
    grid = _parse_t_grid(args.t_grid, mu, f, args.p)
    pts = k_curve(mu, f, args.p, t_grid=grid, params=prm, seed=args.seed)
    rows = ["t,lower,upper,oracle"]
    for pt in pts:
        oracle = "" if pt.oracle is None else f"{pt.oracle:.9g}"
        rows.append(f"{pt.t:.9g},{pt.lower:.9g},{pt.upper:.9g},{oracle}")
    csv_text = "\n".join(rows) + "\n"
    from .functional import k_curve_slack

    payload = {
        "points": [
            {
                "t": pt.t,
                "lower": pt.lower,
                "upper": pt.upper,
                "oracle": pt.oracle,
            }
            for pt in pts
        ],
        "lower_over_upper_max": k_curve_slack(pts),
    }
    _emit(args, payload, csv_text=csv_text)
    return EXIT_OK


def cmd_oracle(args):
    mu, f, prm = _load(args, need_function=True)
    if mu.n != 1:
        raise MeasureFormatError("the exact oracle is one-dimensional")
    prob = OracleProblem.from_measure(mu, f, args.p)
    val, v = sigma_norm_exact(prob)
    payload = {"sigma_norm": val, "minimizer": [float(x) for x in v]}
    if args.out:
        _emit(args, payload)
    else:
        sys.stdout.write(f"{val:.9g}\n")
    return EXIT_OK


def cmd_validate_family(args):
    mu, f, prm = _load(args, need_function=False)
    with open(args.family) as fh:
        fa = FamilyAssignment.from_json_dict(json.load(fh))
    gamma = args.gamma if args.gamma is not None else prm.gamma_value
    variant = Variant(args.variant)
    try:
        validate_family(fa, variant, mu, args.p, gamma)
    except FamilyValidationError as exc:
        _emit(args, {"admissible": False, "reason": str(exc)})
        return EXIT_VERIFY
    payload = {"admissible": True}
    if args.function:
        f = load_function(args.function, mu)
        payload["value"] = eval_family_functional(
            fa, variant, mu, f, args.p, gamma=gamma
        )
    _emit(args, payload)
    return EXIT_OK


def cmd_selftest(args):
    code, text = run_selftest(args.seed)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="sumspace",
        description="norms, decompositions and K-functionals for atomic sum spaces",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("net", help="build and verify the concentration net")
    _add_common(sp, function=False)
    sp.set_defaults(fn=cmd_net)

    sp = sub.add_parser("whitney", help="build the cover and inspect lacunae")
    _add_common(sp, function=False)
    sp.set_defaults(fn=cmd_whitney)

    sp = sub.add_parser("decompose", help="linear decomposition with both norms")
    _add_common(sp)
    sp.set_defaults(fn=cmd_decompose)

    sp = sub.add_parser("estimate", help="constructed-family functional, all variants")
    _add_common(sp)
    sp.set_defaults(fn=cmd_estimate)

    sp = sub.add_parser("kcurve", help="two-sided K-functional curve")
    _add_common(sp)
    sp.set_defaults(fn=cmd_kcurve)

    sp = sub.add_parser("oracle", help="exact 1d sum-space norm")
    _add_common(sp)
    sp.set_defaults(fn=cmd_oracle)

    sp = sub.add_parser("validate-family", help="check and value a user family")
    _add_common(sp)
    sp.add_argument("--family", required=True, help="family JSON file")
    sp.add_argument(
        "--variant", default="CR", choices=[v.value for v in Variant], help="functional variant"
    )
    sp.set_defaults(fn=cmd_validate_family)

    sp = sub.add_parser("selftest", help="run the invariant suites")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default=None)
    sp.set_defaults(fn=cmd_selftest)

    return ap


def main(argv=None) -> int:
    _setup_logging()
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else 0
    try:
        return args.fn(args)
    except (MeasureFormatError, FileNotFoundError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    except RuntimeError as exc:
        sys.stderr.write(f"verification failure: {exc}\n")
        return EXIT_VERIFY


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
