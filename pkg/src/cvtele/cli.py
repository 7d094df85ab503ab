"""Command-line front end.

Subcommands: ``sweep``, ``bounds``, ``game``, ``skc`` and ``verify``.  Exit
codes are 0 on success, 1 when verification fails, 2 for invalid input and
3 when a row falls below the Fock truncation floor.  Logs go to stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
from dataclasses import asdict

import numpy as np

from . import __version__
from .channels import UnsupportedChannelError, channel_from_dict
from .experiments import (
    SweepSpec,
    SweepValidationError,
    format_csv,
    oracle_channel_distance,
    rows_to_csv,
    run_sweep,
)
from .fidelity import fidelity_thermal_thermal
from .fock import TruncationError
from .skc import c_epsilon, pure_loss_bound, thermal_bound_terms
from .telegame import GameConfig, GameConfigError, play_games, transcripts_to_json
from .teleport import uniform_bound
from .verify import report_json, run_checks

log = logging.getLogger("cvtele")

EXIT_OK, EXIT_FAILED, EXIT_INVALID, EXIT_TRUNCATION = 0, 1, 2, 3
SCENARIO_VERSION = 1
ORACLE_PROBES = ({"kind": "vacuum"}, {"kind": "tmsv", "n_s": 1.0}, {"kind": "tmsv", "n_s": 2.0})


class InputError(ValueError):
    """Bad command-line input or scenario file; maps to exit code 2."""


def load_scenario(path, section: str) -> dict:
    """Read a scenario file and return its ``section`` payload.

    A scenario is ``{"version": 1, "<section>": {...}}``.

    Raises:
        InputError: on malformed JSON (with line and column), a missing
            section, an unknown version or unexpected top-level keys.
    """
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise InputError(f"{path}: top level must be an object")
    if doc.get("version") != SCENARIO_VERSION:
        raise InputError(f"{path}: expected version {SCENARIO_VERSION}, got {doc.get('version')!r}")
    unknown = set(doc) - {"version", section}
    if unknown:
        raise InputError(f"{path}: unknown fields {sorted(unknown)}")
    if not isinstance(doc.get(section), dict):
        raise InputError(f"{path}: missing '{section}' object")
    return doc[section]


def _emit(text: str, out) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
        log.info("wrote %s", out)
    else:
        sys.stdout.write(text)


def parse_params(text: str) -> dict:
    """``"eta=0.5,n_b=0"`` -> ``{"eta": 0.5, "n_b": 0.0}``.  JSON objects are also accepted."""
    text = text.strip()
    if not text:
        return {}
    if text.startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"--params: malformed JSON at column {exc.colno}: {exc.msg}") from None
    out = {}
    for item in text.split(","):
        key, sep, val = item.partition("=")
        if not sep:
            raise InputError(f"--params: expected key=value, got {item!r}")
        try:
            out[key.strip()] = float(val)
        except ValueError:
            raise InputError(f"--params: {key.strip()} is not a number") from None
    return out


def parse_grid(text: str) -> list:
    try:
        grid = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"--sigma-grid: cannot parse {text!r}") from None
    if not grid or any(not s > 0 for s in grid):
        raise InputError("--sigma-grid needs positive values")
    return grid


def closed_form_column(kind: str, params: dict, sigma_bar: float) -> float:
    """The bound written out directly for each family, independent of the dispatcher."""
    if kind == "pure_loss" or (kind == "thermal" and params.get("n_b", 0) == 0):
        eta = params["eta"]
        return math.sqrt(1 - 1 / (eta * sigma_bar / (1 - eta) + 1))
    if kind == "pure_amplifier" or (kind == "amplifier" and params.get("n_b", 0) == 0):
        g = params["gain"]
        return math.sqrt(1 - 1 / (g * sigma_bar / (g - 1) + 1))
    if kind == "additive_noise":
        xi = params["xi"]
        return math.sqrt(1 - 4 * xi * (xi + sigma_bar) / (2 * xi + sigma_bar) ** 2)
    if kind == "thermal":
        eta, n_b = params["eta"], params["n_b"]
        return fidelity_thermal_thermal(n_b, n_b + eta * sigma_bar / (1 - eta)).p_distance
    if kind == "amplifier":
        g, n_b = params["gain"], params["n_b"]
        return fidelity_thermal_thermal(n_b, n_b + g * sigma_bar / (g - 1)).p_distance
    raise UnsupportedChannelError(f"no closed form for {kind}")


# ---------------------------------------------------------------- commands

def cmd_sweep(args) -> int:
    doc = load_scenario(args.path, "sweep")
    if args.cutoff is not None:
        doc["cutoff"] = args.cutoff
    if args.seed is not None:
        doc["seed"] = args.seed
    spec = SweepSpec.from_dict(doc)
    rows = run_sweep(spec, threads=args.threads)
    _emit(rows_to_csv(spec, rows), args.out or spec.output_path)
    return EXIT_OK


def cmd_bounds(args) -> int:
    params = parse_params(args.params)
    try:
        channel = channel_from_dict({"kind": args.channel, "params": params})
    except KeyError as exc:
        raise InputError(f"--params is missing {exc.args[0]!r} for {args.channel}") from None
    grid = parse_grid(args.sigma_grid)
    columns = ["channel", "params", "sigma_bar", "bound_value", "closed_form", "bound_kind"]
    if args.oracle:
        columns += ["oracle_value", "truncation_weight"]
    records = []
    for s in grid:
        rep = uniform_bound(channel, s)
        rec = {
            "channel": args.channel,
            "params": ";".join(f"{k}={v!r}" for k, v in sorted(params.items())),
            "sigma_bar": s,
            "bound_value": rep.bound_value,
            "closed_form": closed_form_column(args.channel, params, s),
            "bound_kind": rep.bound_kind.value,
        }
        if args.oracle:
            vals = [oracle_channel_distance(channel, s, p, args.cutoff or 60) for p in ORACLE_PROBES]
            rec["oracle_value"] = max(v for v, _ in vals)
            rec["truncation_weight"] = min(w for _, w in vals)
        records.append(rec)
    request = {"channel": args.channel, "params": params, "sigma_grid": grid, "oracle": args.oracle,
               "cutoff": args.cutoff}
    digest = _hash(request)
    _emit(format_csv(records, columns, digest), args.out)
    return EXIT_OK


def cmd_game(args) -> int:
    doc = load_scenario(args.path, "game")
    if args.seed is not None:
        doc["rng_seed"] = args.seed
    if args.cutoff is not None:
        doc["cutoff"] = args.cutoff
    config = GameConfig.from_dict(doc)
    summary, transcripts = play_games(config)
    log.info("teleporter won %d of %d games", summary.teleporter_wins, summary.games)
    _emit(transcripts_to_json(summary, transcripts, include_rounds=not args.summary_only) + "\n", args.out)
    return EXIT_OK


def cmd_skc(args) -> int:
    n = math.inf if args.uses in ("inf", "infinity") else _positive_int(args.uses)
    rec = {"eta": args.eta, "uses": "inf" if math.isinf(n) else n, "eps": args.eps, "c_epsilon": c_epsilon(args.eps)}
    if args.n_b is None:
        rec["bound"] = pure_loss_bound(args.eta, n, args.eps)
    else:
        if args.variance is None:
            raise InputError("the thermal bound needs --variance")
        terms = thermal_bound_terms(args.eta, args.n_b, n, args.eps, args.variance)
        rec.update(n_b=args.n_b, variance=args.variance, **asdict(terms), bound=terms.total)
    _emit(json.dumps(rec, sort_keys=True, default=_json_float) + "\n", args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    results = run_checks(args.level)
    for r in results:
        log.info("%s", r.line())
    _emit(report_json(results) + "\n", args.out)
    return EXIT_OK if all(r.passed and r.within_time for r in results) else EXIT_FAILED


# ----------------------------------------------------------------- helpers

def _positive_int(text) -> int:
    try:
        n = int(text)
    except ValueError:
        raise InputError(f"--uses must be a positive integer or 'inf', got {text!r}") from None
    if n < 1:
        raise InputError("--uses must be positive")
    return n


def _json_float(o):
    if isinstance(o, np.floating):
        return float(o)
    raise TypeError(type(o))


def _hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cvtele", description="Teleportation simulation of bosonic Gaussian channels.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--threads", type=int, default=None, help="worker threads for sweeps")
    common.add_argument("--cutoff", type=int, default=None, help="Fock cutoff override")

    p = sub.add_parser("sweep", parents=[common], help="run a convergence sweep scenario and write CSV")
    p.add_argument("path")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bounds", parents=[common], help="tabulate uniform bounds over a sigma grid")
    p.add_argument("--channel", required=True, help="thermal, pure_loss, amplifier, pure_amplifier, additive_noise")
    p.add_argument("--params", default="", help="e.g. eta=0.5,n_b=0")
    p.add_argument("--sigma-grid", required=True, help="comma-separated sigma values")
    p.add_argument("--oracle", action="store_true", help="add the Fock-oracle distance column")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("game", parents=[common], help="play seeded teleportation games")
    p.add_argument("path")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--summary-only", action="store_true", help="omit per-round records")
    p.set_defaults(func=cmd_game)

    p = sub.add_parser("skc", parents=[common], help="evaluate the secret-key capacity bounds")
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--uses", default="inf", help="number of channel uses or 'inf'")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--n-b", type=float, default=None, help="thermal noise; selects the thermal bound")
    p.add_argument("--variance", type=float, default=None, help="relative-entropy variance V for the thermal bound")
    p.set_defaults(func=cmd_skc)

    p = sub.add_parser("verify", parents=[common], help="run the acceptance checks")
    p.add_argument("--level", choices=("fast", "full"), default="fast")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None and args.threads < 1:
        log.error("--threads must be positive")
        return EXIT_INVALID
    try:
        return args.func(args)
    except TruncationError as exc:
        log.error("truncation floor violated: %s", exc)
        return EXIT_TRUNCATION
    except (InputError, SweepValidationError, GameConfigError, UnsupportedChannelError, ValueError, TypeError) as exc:
        log.error("%s", exc)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
