"""Command-line front end.

Usage:
    hartogs-szego pseudoconvexity --A 0 --B 1 --alpha 1
    hartogs-szego dz-certify --order 8 --out cert.json
    hartogs-szego moments --j 1 --n 32 --format csv
    hartogs-szego kernel-eval --z 0.3,0.1 --t 0.2j,0.05
    hartogs-szego identity-checks --cache-dir .cache
    hartogs-szego irregularity --p 4,4/3,2 --n 16,64,256,1024,4096
    hartogs-szego report --format markdown --out report.md

Exit codes: 0 success, 1 a mathematical check failed, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import mpmath

from . import __version__
from .config import RunConfig, load_config_file
from .errors import ConfigError, HartogsSzegoError, TruncationFailure, UnsupportedParams
from .moments import MomentStore, bergman_kernel_eval, szego_kernel_eval
from .report import (
    contrast_weight,
    irregularity_passed,
    run_full_report,
    run_identity_checks,
    run_irregularity,
)
from .symbolic import dz_certify
from .weights import pseudoconvexity_scan

logger = logging.getLogger("hartogs_szego")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

# flag -> config key; every flag defaults to None so that only explicit
# flags override values from --config
_FLAGS = {
    "--A": "A", "--B": "B", "--alpha": "alpha", "--j": "j", "--p": "p", "--n": "n",
    "--precision-bits": "precision_bits", "--tol": "tol", "--cache-dir": "cache_dir",
    "--format": "format", "--out": "out", "--weight": "weight", "--order": "order",
    "--grid-size": "grid_size",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    for flag, key in _FLAGS.items():
        common.add_argument(flag, dest=key, default=None, metavar=key.upper())
    common.add_argument("--config", default=None, help="flat key = value file; flags override it")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = _Parser(prog="hartogs-szego", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("pseudoconvexity", parents=[common], help="Laplacian(-log phi) >= 0 scan")
    sub.add_parser("dz-certify", parents=[common], help="exact derivative-criterion certificate")
    sub.add_parser("moments", parents=[common], help="moment table m[j, 0..max(n)]")
    k = sub.add_parser("kernel-eval", parents=[common],
                       help="Bergman kernel B_j (one coordinate) or Szego kernel (two)")
    k.add_argument("--z", required=True, help="point, e.g. 0.3 or 0.3,0.1j")
    k.add_argument("--t", required=True)
    k.add_argument("--kernel-tol", type=float, default=1e-15)
    i = sub.add_parser("identity-checks", parents=[common], help="inflation and lift identities")
    i.add_argument("--check-tol", type=float, default=None,
                   help="replace every acceptance tolerance (e.g. widen to 1e-2)")
    sub.add_parser("irregularity", parents=[common], help="R_n(p) scans and verdicts")
    sub.add_parser("report", parents=[common], help="full pipeline report")
    return parser


def resolve_config(args) -> RunConfig:
    base = RunConfig()
    if args.config:
        base = RunConfig.from_mapping(load_config_file(args.config), base)
    flags = {key: getattr(args, key) for key in _FLAGS.values() if getattr(args, key) is not None}
    return RunConfig.from_mapping(flags, base)


def _emit(text: str, config: RunConfig):
    if config.out:
        path = Path(config.out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        logger.info("wrote %s", path)
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _complex_tuple(text):
    try:
        return tuple(complex(x.strip().replace(" ", "")) for x in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"cannot parse point {text!r}") from exc


# ------------------------------------------------------------ commands


def cmd_pseudoconvexity(config, args):
    res = pseudoconvexity_scan(config.params, config.grid_size, config.ctx)
    _emit(_dump(res.as_dict()), config)
    return EXIT_OK if res.passed else EXIT_FAIL


def cmd_dz_certify(config, args):
    cert = dz_certify(config.params, config.order)
    _emit(_dump(cert.to_json()), config)
    return EXIT_OK if cert.valid else EXIT_FAIL


def cmd_moments(config, args):
    store = MomentStore(config.params, config.ctx, config.cache_dir)
    table = store.table(config.j, max(config.n))
    fmt = config.output_format.value
    if fmt == "csv":
        text = table.to_csv()
    elif fmt == "markdown":
        rows = [f"| {n} | {mpmath.nstr(m, 30)} | {mpmath.nstr(e, 3)} |"
                for n, (m, e) in enumerate(zip(table.entries, table.errors))]
        text = "| n | m | err bound |\n|---|---|---|\n" + "\n".join(rows) + "\n"
    else:
        text = _dump({"params": config.params.as_dict(), "j": config.j,
                      "m": [mpmath.nstr(m, 40) for m in table.entries],
                      "err_bound": [mpmath.nstr(e, 3) for e in table.errors],
                      "log_convex": not table.log_convexity_defects()})
    _emit(text, config)
    return EXIT_OK


def cmd_kernel_eval(config, args):
    z, t = _complex_tuple(args.z), _complex_tuple(args.t)
    if len(z) != len(t) or len(z) not in (1, 2):
        raise ConfigError("--z and --t must both have one (Bergman) or two (Szego) coordinates")
    store = MomentStore(config.params, config.ctx, config.cache_dir)
    if len(z) == 1:
        table = store.table(config.j, 16)
        n_max = 16
        while True:
            try:
                val = bergman_kernel_eval(table, z[0], t[0], args.kernel_tol)
                break
            except TruncationFailure:
                if n_max > 4096:
                    raise
                n_max *= 2
                table = store.table(config.j, n_max)
        out = {"kernel": f"B_{config.j}", "value": mpmath.nstr(val.value, 30),
               "tail_bound": mpmath.nstr(val.tail_bound, 3), "terms": val.terms}
    else:
        val = szego_kernel_eval(config.params, z, t, args.kernel_tol, config.ctx, store)
        out = {"kernel": "Szego", "value": mpmath.nstr(val.value, 30),
               "tail_bound": mpmath.nstr(val.tail_bound, 3), "n_terms": list(val.n_terms),
               "j_terms": val.j_terms}
    _emit(_dump(out), config)
    return EXIT_OK


def cmd_identity_checks(config, args):
    res = run_identity_checks(config, args.check_tol)
    _emit(_dump(res.as_dict()), config)
    return EXIT_OK if res.passed else EXIT_FAIL


def cmd_irregularity(config, args):
    reports = run_irregularity(config)
    contrast = contrast_weight(config) is not None
    ok = irregularity_passed(reports, contrast)
    if config.output_format.value == "csv":
        text = "".join(f"# p={r.p}\n" + r.to_csv() for r in reports)
    else:
        text = _dump({"params": config.params.as_dict(), "weight": config.weight,
                      "contrast_mode": contrast, "reports": [r.to_json() for r in reports],
                      "verdict": "PASS" if ok else "FAIL"})
    _emit(text, config)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_report(config, args):
    rep = run_full_report(config)
    fmt = config.output_format.value
    if fmt == "markdown":
        text = rep.to_markdown()
    elif fmt == "csv":
        text = rep.to_csv()
    else:
        text = _dump(rep.to_json())
    _emit(text, config)
    return EXIT_OK if rep.passed else EXIT_FAIL


COMMANDS = {
    "pseudoconvexity": cmd_pseudoconvexity,
    "dz-certify": cmd_dz_certify,
    "moments": cmd_moments,
    "kernel-eval": cmd_kernel_eval,
    "identity-checks": cmd_identity_checks,
    "irregularity": cmd_irregularity,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                            format="%(levelname)s %(name)s: %(message)s")
        config = resolve_config(args)
        if config.cache_dir:
            Path(config.cache_dir).mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](config, args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UnsupportedParams as exc:
        print(f"unsupported parameters: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HartogsSzegoError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
