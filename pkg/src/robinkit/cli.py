"""Command-line front end.

Every subcommand builds one JSON-serialisable result; ``--format human``
and ``--format csv`` only re-render it.  Artifacts written with ``--out``
carry the run configuration, the tool version and a digest of the inputs.

Exit codes: 0 success, 1 an unexpected finding (a counterexample where none
should exist, a failed constant check), 2 usage or domain error, 3 precision
exhausted, 4 a resource cap refused the request.

Environment: ROBINKIT_DIGITS (working precision), ROBINKIT_THREADS (worker
processes), ROBINKIT_CHECKPOINT_DIR (where beta-max keeps its checkpoint).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass
from fractions import Fraction
from pathlib import Path

from . import __version__
from .arith import Factorization, factorize, n_over_phi, robin_check, sigma_over_n
from .bulk import DEFAULT_CAP, ROBIN, UNCONDITIONAL, bound_scan
from .errors import CapacityError, InvalidArgumentError, RobinKitError
from .families import ODD_PART, ThresholdMode, classify, nu2_threshold, verify_proof_constants
from .highprec import DEFAULT_DIGITS, sci
from .primes import SieveConfig, default_threads, find_beta_max

log = logging.getLogger("robinkit")

EXIT_OK, EXIT_FINDING = 0, 1


@dataclass
class RunConfig:
    precision_digits: int = DEFAULT_DIGITS
    threads: int = 1
    max_n: int = 10**8  # exception enumeration cap
    scan_cap: int = DEFAULT_CAP
    max_loglog: float = 40.0  # CA sequence budget
    format: str = "json"
    checkpoint_dir: str = "."

    def __post_init__(self):
        for name in ("precision_digits", "threads", "max_n", "scan_cap", "max_loglog"):
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(f"{name} must be positive")
        if self.format not in ("json", "csv", "human"):
            raise InvalidArgumentError(f"unknown format {self.format!r}")

    def provenance(self) -> dict:
        # Threads, output format and paths do not change results; leaving them
        # out keeps artifacts byte-identical across machines.
        cfg = asdict(self)
        for key in ("threads", "format", "checkpoint_dir"):
            cfg.pop(key)
        return cfg


def input_digest(command: str, inputs: dict) -> str:
    blob = json.dumps({"command": command, **inputs}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def envelope(command: str, inputs: dict, cfg: RunConfig, result: dict) -> dict:
    return {
        "tool": "robinkit",
        "version": __version__,
        "command": command,
        "inputs": inputs,
        "input_digest": input_digest(command, inputs),
        "config": cfg.provenance(),
        "result": result,
    }


# -- rendering --------------------------------------------------------------


def _flatten(prefix: str, value, out: list[tuple[str, str]]) -> None:
    if isinstance(value, dict):
        for k, v in value.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, out)
    elif isinstance(value, list) and value and isinstance(value[0], dict):
        for i, v in enumerate(value):
            _flatten(f"{prefix}[{i}]", v, out)
    else:
        out.append((prefix, json.dumps(value) if isinstance(value, list) else str(value)))


def render(doc: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    pairs: list[tuple[str, str]] = []
    _flatten("", doc["result"], pairs)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key", "value"])
        w.writerows(pairs)
        return buf.getvalue()
    width = max((len(k) for k, _ in pairs), default=0)
    return "".join(f"{k.ljust(width)}  {v}\n" for k, v in pairs)


def _parse_n(text: str) -> Factorization:
    text = text.strip()
    if any(c in text for c in "^*"):
        return Factorization.parse(text)
    try:
        n = int(text)
    except ValueError:
        raise InvalidArgumentError(f"not an integer: {text!r}") from None
    if n < 1:
        raise InvalidArgumentError(f"n must be positive, got {n}")
    return factorize(n)


def _parse_eps(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise InvalidArgumentError(f"epsilon must look like P/Q, got {text!r}") from None


def _small_value(f: Factorization) -> str | None:
    return str(f.value) if f.log_value(30).hi < 2000 else None


# -- subcommands ------------------------------------------------------------


def cmd_factor(args, cfg):
    f = _parse_n(args.n)
    s, r = sigma_over_n(f), n_over_phi(f)
    result = {
        "n": _small_value(f),
        "factorization": str(f),
        "omega": f.omega,
        "sigma_over_n": str(s),
        "sigma_over_n_approx": float(s),
        "n_over_phi": str(r),
        "n_over_phi_approx": float(r),
        "nu": {str(p): a for p, a in f.factors},
    }
    return {"n": args.n}, result, EXIT_OK


def cmd_robin(args, cfg):
    if args.range:
        lo, hi = args.range
        spec = {"robin": ROBIN, "unconditional": UNCONDITIONAL, "odd-part": ODD_PART}[args.bound]
        report = bound_scan(lo, hi, spec, cap=cfg.scan_cap, threads=cfg.threads, digits=cfg.precision_digits)
        unexpected = [v for v in report.violators if v > 5040] if spec is not UNCONDITIONAL else report.violators
        code = EXIT_FINDING if unexpected or report.undecided else EXIT_OK
        return {"range": [lo, hi], "bound": args.bound}, report.to_json(), code
    if args.n is None:
        raise InvalidArgumentError("give N or --range LO HI")
    f = _parse_n(args.n)
    res = robin_check(f, cfg.precision_digits)
    result = {
        "n": _small_value(f),
        "factorization": str(f),
        "verdict": res.verdict.value,
        "out_of_domain": res.out_of_domain,
    }
    if res.lhs is not None:
        result.update(lhs=res.lhs.format(20), rhs=res.rhs.format(20), margin=res.margin.format(20))
    return {"n": args.n}, result, EXIT_OK


def _checkpoint_path(cfg: RunConfig, eps: Fraction, explicit: str | None) -> Path:
    if explicit:
        return Path(explicit)
    return Path(cfg.checkpoint_dir) / f"beta-max-{eps.numerator}-{eps.denominator}.rbl"


def cmd_beta_max(args, cfg):
    eps = _parse_eps(args.epsilon)
    path = _checkpoint_path(cfg, eps, args.checkpoint)
    if not args.resume and path.exists():
        log.info("starting fresh; ignoring checkpoint %s (use --resume to continue it)", path)
        path.unlink()
    sieve = SieveConfig(args.segment_size, cfg.threads, str(path), args.checkpoint_every)
    res = find_beta_max(eps, sieve, cfg.precision_digits, overshoot=args.overshoot)
    result = {
        "epsilon": str(eps),
        "beta_max": res.beta_max,
        "p_beta_max": res.p_beta_max,
        "loglog_n_beta_max": {"lo": sci(res.loglog_n_beta_max.lo, 25), "hi": sci(res.loglog_n_beta_max.hi, 25)},
        "margin_at_beta_max": res.margin_at.format(20),
        "margin_before": None if res.margin_before is None else res.margin_before.format(20),
        "overshoot_checked": res.overshoot_checked,
        "reversals": res.reversals,
    }
    return {"epsilon": str(eps)}, result, EXIT_FINDING if res.reversals else EXIT_OK


def cmd_exceptions(args, cfg):
    from .exception_finder import EnumerationStats, build_beta_table, enumerate_exceptions, write_exceptions

    eps = _parse_eps(args.epsilon)
    inputs = {"epsilon": str(eps)}
    stats = EnumerationStats()
    provenance = {"tool": "robinkit", "version": __version__, "config": cfg.provenance(),
                  "input_digest": input_digest("exceptions", inputs)}
    try:
        table = build_beta_table(eps, cfg.precision_digits, max_log_n=math.log(cfg.max_n) + 1)
        records = enumerate_exceptions(table, SieveConfig(thread_count=cfg.threads), max_n=cfg.max_n, stats=stats)
        sidecar = write_exceptions(records, args.out, table, provenance)
    except CapacityError as exc:
        raise CapacityError(f"{exc} (enumeration cap --max-n {cfg.max_n})", exc.token) from exc
    sidecar["cutoffs"] = {str(k): v for k, v in sorted(stats.cutoffs.items())}
    Path(str(args.out) + ".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    result = {k: sidecar[k] for k in ("epsilon", "beta_max", "total", "counts", "cutoffs", "csv_sha256")}
    result["csv"] = str(args.out)
    return inputs, result, EXIT_OK


def cmd_ca(args, cfg):
    from .ca import ca_sequence, gap_check, verify_robin_on_ca

    if args.max_loglog > cfg.max_loglog:
        raise CapacityError(f"--max-loglog {args.max_loglog} exceeds the budget {cfg.max_loglog}")
    report = verify_robin_on_ca(args.max_loglog, cfg.precision_digits)
    result = report.summary()
    code = EXIT_OK if report.all_hold_above_5040 else EXIT_FINDING
    if args.csv:
        Path(args.csv).write_text(report.csv_text())
    if args.gap_check:
        limit = args.gap_limit
        values = [ca.value for ca in ca_sequence(math.log(math.log(limit)) + 0.01, 50)]
        values = [v for v in values if v <= limit]
        gaps, bad = 0, []
        for a, b in zip(values, values[1:]):
            g = gap_check(a, b, exhaustive_limit=limit, threads=cfg.threads)
            gaps += 1
            bad.extend(g.violators_above_5040)
        result["gap_check"] = {"limit": limit, "pairs": gaps, "violators_above_5040": bad}
        if bad:
            code = EXIT_FINDING
    return {"max_loglog": args.max_loglog, "gap_check": args.gap_check}, result, code


def cmd_classify(args, cfg):
    if (args.n is None) == (args.factored is None):
        raise InvalidArgumentError("give exactly one of N or --factored")
    f = Factorization.parse(args.factored) if args.factored else _parse_n(args.n)
    verdict = classify(f, ThresholdMode(args.mode), cfg.precision_digits)
    return {"n": args.n or args.factored, "mode": args.mode}, verdict.to_json(), EXIT_OK


def cmd_threshold(args, cfg):
    t = nu2_threshold(args.c, cfg.precision_digits)
    result = {"c": args.c, "rhs": t.rhs.format(25), "k_min": t.k_min, "k_ceiled": t.k_ceiled}
    return {"c": args.c}, result, EXIT_OK


def cmd_constants(args, cfg):
    checks = verify_proof_constants(cfg.precision_digits)
    result = {
        "all_passed": all(c.passed for c in checks),
        "checks": [asdict(c) for c in checks],
    }
    return {}, result, EXIT_OK if result["all_passed"] else EXIT_FINDING


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--digits", type=int, default=None, help="working precision in decimal digits")
    common.add_argument("--threads", type=int, default=None, help="worker processes")
    common.add_argument("--format", choices=("json", "csv", "human"), default="json")
    common.add_argument("--out-json", dest="artifact", default=None, help="also write the result artifact here")
    common.add_argument("--max-n", type=int, default=10**8, help="enumeration cap for exceptions")
    common.add_argument("--scan-cap", type=int, default=DEFAULT_CAP, help="largest n a range scan accepts")
    common.add_argument("--loglog-budget", type=float, default=40.0, help="largest --max-loglog accepted")
    common.add_argument("--checkpoint-dir", default=os.environ.get("ROBINKIT_CHECKPOINT_DIR", "."))
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="robinkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"robinkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("factor", parents=[common], help="factorization, sigma/n, n/phi")
    p.add_argument("n", help='integer or factored form such as "2^4*3^2*5"')
    p.set_defaults(func=cmd_factor)

    p = sub.add_parser("robin", parents=[common], help="Robin's inequality for one n or a range")
    p.add_argument("n", nargs="?")
    p.add_argument("--range", nargs=2, type=int, metavar=("LO", "HI"))
    p.add_argument("--bound", choices=("robin", "unconditional", "odd-part"), default="robin",
                   help="bound tested by --range (odd-part scans odd c only)")
    p.set_defaults(func=cmd_robin)

    p = sub.add_parser("beta-max", parents=[common], help="first beta where the primorial passes n_beta")
    p.add_argument("--epsilon", required=True, help="P/Q")
    p.add_argument("--resume", action="store_true", help="continue from the checkpoint if present")
    p.add_argument("--checkpoint", default=None, help="checkpoint file (default: in --checkpoint-dir)")
    p.add_argument("--checkpoint-every", type=int, default=8, help="segments between checkpoints")
    p.add_argument("--segment-size", type=int, default=1 << 24)
    p.add_argument("--overshoot", type=int, default=100_000)
    p.set_defaults(func=cmd_beta_max)

    p = sub.add_parser("exceptions", parents=[common], help="every n with f(n) >= (1+eps) e^gamma log log n")
    p.add_argument("--epsilon", required=True, help="P/Q")
    p.add_argument("--out", required=True, help="CSV path; a .json sidecar is written next to it")
    p.set_defaults(func=cmd_exceptions)

    p = sub.add_parser("ca", parents=[common], help="Robin's inequality along the CA numbers")
    p.add_argument("--max-loglog", type=float, required=True)
    p.add_argument("--gap-check", action="store_true", help="also scan every gap between CA numbers")
    p.add_argument("--gap-limit", type=int, default=10**8, help="largest CA number whose gap is scanned")
    p.add_argument("--csv", default=None, help="write the row table here")
    p.set_defaults(func=cmd_ca)

    p = sub.add_parser("classify", parents=[common], help="which known families cover n")
    p.add_argument("n", nargs="?")
    p.add_argument("--factored", default=None, help='e.g. "2^25*3^2"')
    p.add_argument("--mode", choices=[m.value for m in ThresholdMode], default="ceiled",
                   help="threshold reading: ceiled or the real inequality (derived)")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("threshold", parents=[common], help="minimal nu_2 for an odd part c")
    p.add_argument("c", type=int)
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("constants", parents=[common], help="exact checks of the proof constants")
    p.set_defaults(func=cmd_constants)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = RunConfig(
            precision_digits=args.digits or DEFAULT_DIGITS,
            threads=args.threads or default_threads(),
            max_n=args.max_n,
            scan_cap=args.scan_cap,
            max_loglog=args.loglog_budget,
            format=args.format,
            checkpoint_dir=args.checkpoint_dir,
        )
        inputs, result, code = args.func(args, cfg)
    except CapacityError as exc:
        print(f"robinkit: refused: {exc}", file=sys.stderr)
        if exc.token:
            print(f"robinkit: resume token {exc.token}", file=sys.stderr)
        return exc.exit_code
    except RobinKitError as exc:
        print(f"robinkit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    doc = envelope(args.command, inputs, cfg, result)
    sys.stdout.write(render(doc, cfg.format))
    if args.artifact:
        Path(args.artifact).write_text(render(doc, "json"))
    return code


if __name__ == "__main__":
    sys.exit(main())
