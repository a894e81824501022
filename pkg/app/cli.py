"""
Command-line front end.

    besov-calc norm --fn "res([1], 1, 1)" --n 1
    besov-calc decompose --fn "1 + res([1, 0], 1, 1)" --n 2
    besov-calc verify --suite homomorphism --matrices pair.json --fn default

Reports go to standard output, logs to standard error. Exit codes: 0 success,
1 a check failed, 2 usage, parse, file or numerical errors.
"""
import argparse
import json
import logging
import sys
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .config import default_quad_spec, get_engine_config
from .errors import EngineError
from .models.expr import VarSet
from .services.besov import bnorm
from .services.decomp import elementary_decompose
from .services.estimates import function_estimate_suite, operator_estimate_suite, to_csv
from .services.fnalg import parse_expr, to_text
from .services.opcalc import calc, gsf_constant, gsf_report, load_tuple
from .services.repro import reproduce_elementary, reproduce_shifted
from .services.spectral import joint_spectrum
from .services.suites import SUITES, parse_family, run_suite

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n", type=int, default=None, help="Number of variables (defaults to the tuple size, else 1)")
    parser.add_argument("--tol", type=float, default=None, help="Relative quadrature tolerance")
    parser.add_argument("--alpha-max", type=float, default=None, help="Real-axis truncation")
    parser.add_argument("--beta-max", type=float, default=None, help="Imaginary-axis truncation")
    parser.add_argument("--mapping", choices=["compact", "truncate"], default=None, help="Quadrature axis mapping")
    parser.add_argument("--seed", type=int, default=None, help="Sampling seed (BESOV_SEED by default)")
    parser.add_argument("--format", choices=["json", "csv"], default="json", help="Report format")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="besov-calc", description="B^n functional calculus engine")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("norm", help="All 2^n seminorms and the B^n norm of a function")
    p.add_argument("--fn", required=True, help="Function in DSL form")
    p.add_argument("--omega", default=None, help="Only this variable set, e.g. 1,2")
    _add_common(p)

    p = sub.add_parser("decompose", help="Elementary decomposition")
    p.add_argument("--fn", required=True)
    _add_common(p)

    p = sub.add_parser("reproduce", help="Reproducing formula at a point")
    p.add_argument("--fn", required=True)
    p.add_argument("--z", required=True, help="Point as comma-separated complex numbers, e.g. 1+0.5i,2")
    p.add_argument("--t", default=None, help="Nonnegative shift (scalar or comma list) for the shifted form")
    _add_common(p)

    p = sub.add_parser("calc", help="f(A) for a commuting tuple")
    p.add_argument("--fn", required=True)
    p.add_argument("--matrices", required=True, help="Tuple file (JSON)")
    _add_common(p)

    p = sub.add_parser("gsf", help="gamma brackets of a tuple")
    p.add_argument("--matrices", required=True)
    p.add_argument("--omega", default=None)
    _add_common(p)

    p = sub.add_parser("spectrum", help="Joint spectrum of a tuple")
    p.add_argument("--matrices", required=True)
    _add_common(p)

    p = sub.add_parser("verify", help="Run a verification suite")
    p.add_argument("--suite", required=True, choices=sorted(SUITES))
    p.add_argument("--fn", action="append", default=None, dest="fns",
                   help="Function (repeatable); 'default' expands to the default family")
    p.add_argument("--fns", action="append", dest="fns", help=argparse.SUPPRESS)
    p.add_argument("--matrices", default=None)
    _add_common(p)

    p = sub.add_parser("estimate", help="Closed-form bounds against computed norms")
    p.add_argument("--matrices", default=None, help="Also compare operator norms for this tuple")
    _add_common(p)
    return parser


def _quad_spec(args: argparse.Namespace):
    spec = default_quad_spec()
    update = {}
    if args.tol is not None:
        update["rel_tol"] = args.tol
    if args.alpha_max is not None:
        update["alpha_max"] = args.alpha_max
    if args.beta_max is not None:
        update["beta_max"] = args.beta_max
    if args.mapping is not None:
        update["mapping"] = args.mapping
    return spec.model_validate({**spec.model_dump(), **update}) if update else spec


def _parse_complex_list(text: str) -> list[complex]:
    try:
        return [complex(part.strip().replace("i", "j")) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"invalid complex list '{text}'") from e


def _dump(payload) -> str:
    if hasattr(payload, "model_dump_json"):
        return payload.model_dump_json(indent=2)
    return json.dumps(payload, indent=2, sort_keys=True)


def _csv_footer(spec) -> str:
    """Trailing comment rows with the quadrature settings and the package version."""
    quad = ";".join(spec.to_text().splitlines())
    return f"# quad={quad}\n# version={__version__}\n"


def _rows_csv(report, spec) -> str:
    lines = ["name,gap,budget,passed"]
    for row in report.rows:
        name = row.name.replace('"', "'")
        lines.append(f'"{name}",{row.gap!r},{row.budget!r},{str(row.passed).lower()}')
    return "\n".join(lines) + "\n" + _csv_footer(spec)


def _dimension(args: argparse.Namespace, tup=None) -> int:
    if args.n is not None:
        return args.n
    return tup.n if tup is not None else 1


def _cmd_norm(args, spec) -> int:
    f = parse_expr(args.fn, _dimension(args))
    report = bnorm(f, spec)
    if args.omega is not None:
        entry = report.entry(VarSet.parse(args.omega, f.n).labels)
        print(_dump({"expr": report.expr, "entry": entry.model_dump(), "quad": report.quad, "version": __version__}))
    else:
        print(_dump(report))
    return EXIT_OK


def _cmd_decompose(args, spec) -> int:
    f = parse_expr(args.fn, _dimension(args))
    decomposition = elementary_decompose(f)
    print(_dump({"expr": to_text(f), "n": f.n, "parts": decomposition.to_json(),
                 "quad": spec.model_dump(), "version": __version__}))
    return EXIT_OK


def _cmd_reproduce(args, spec) -> int:
    f = parse_expr(args.fn, _dimension(args))
    z = np.asarray(_parse_complex_list(args.z))
    if args.t is None:
        result = reproduce_elementary(f, z, spec)
    else:
        t = [c.real for c in _parse_complex_list(args.t)]
        result = reproduce_shifted(f, z, t[0] if len(t) == 1 else t, spec)
    print(_dump({"result": result.model_dump(), "quad": spec.model_dump(), "version": __version__}))
    return EXIT_OK if result.passed else EXIT_CHECK_FAILED


def _cmd_calc(args, spec) -> int:
    tup = load_tuple(args.matrices)
    f = parse_expr(args.fn, _dimension(args, tup))
    print(_dump(calc(f, tup, spec)))
    return EXIT_OK


def _cmd_gsf(args, spec) -> int:
    tup = load_tuple(args.matrices)
    if args.omega is not None:
        entry = gsf_constant(tup, VarSet.parse(args.omega, tup.n), spec, args.seed)
        print(_dump({"entry": entry.model_dump(), "quad": spec.model_dump(), "version": __version__}))
    else:
        print(_dump(gsf_report(tup, spec, args.seed)))
    return EXIT_OK


def _cmd_spectrum(args, spec) -> int:
    tup = load_tuple(args.matrices)
    seed = args.seed if args.seed is not None else get_engine_config()["seed"]
    spectrum = joint_spectrum(tup, seed)
    print(_dump({"spectrum": spectrum.model_dump(), "seed": seed, "quad": spec.model_dump(), "version": __version__}))
    return EXIT_OK


def _cmd_verify(args, spec) -> int:
    tup = load_tuple(args.matrices) if args.matrices else None
    n = _dimension(args, tup) if (args.n is not None or tup is not None) else 2
    fns = parse_family(args.fns, n) if args.fns else None
    report = run_suite(args.suite, fns, tup, spec, args.seed, n=n)
    if args.format == "csv":
        print(_rows_csv(report, spec), end="")
    else:
        print(_dump(report))
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def _cmd_estimate(args, spec) -> int:
    rows = function_estimate_suite(spec)
    if args.matrices:
        rows += operator_estimate_suite(load_tuple(args.matrices), spec)
    if args.format == "csv":
        print(to_csv(rows) + _csv_footer(spec), end="")
    else:
        print(_dump({"bounds": [r.model_dump() for r in rows], "quad": spec.model_dump(), "version": __version__}))
    return EXIT_OK if all(r.passed for r in rows) else EXIT_CHECK_FAILED


HANDLERS = {
    "norm": _cmd_norm,
    "decompose": _cmd_decompose,
    "reproduce": _cmd_reproduce,
    "calc": _cmd_calc,
    "gsf": _cmd_gsf,
    "spectrum": _cmd_spectrum,
    "verify": _cmd_verify,
    "estimate": _cmd_estimate,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Execute one command; returns the exit code instead of exiting."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else EXIT_USAGE
    try:
        spec = _quad_spec(args)
        return HANDLERS[args.command](args, spec)
    except argparse.ArgumentTypeError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except EngineError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    logging.basicConfig(
        level=get_engine_config()["log_level"],
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    sys.exit(run())


if __name__ == "__main__":
    main()
