"""Batch command-line front end.

Every command writes one JSON document (``region`` writes CSV) to stdout or
to ``--out``.  Failures print an error document and exit with a code that
names the failure class.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import channels, coding, info, protocols, qstate, rates, statezoo

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_VALIDATION = 2
EXIT_PARSE = 3
EXIT_BUDGET = 4
EXIT_INVARIANT = 5

COMMANDS = ("rates", "region", "merge", "flower", "separable", "swcode", "miocheck", "uncertainty", "statezoo")
STATE_NAMES = ("flower", "max_entangled", "max_coherent", "source", "random_pure", "random_density")


class ParseError(ValueError):
    """An input file could not be read or decoded."""


class UsageError(ValueError):
    """Bad command-line arguments."""


@dataclass(frozen=True)
class RunConfig:
    command: str
    state: Optional[str] = None
    joint: Optional[str] = None
    channel: Optional[str] = None
    family: Optional[str] = None
    code: Optional[str] = None
    n: int = 1
    d: int = 2
    delta: float = 0.25
    trials: int = 1
    seed: int = 0
    restarts: int = 100
    copies: int = 1
    grid: tuple = ()
    engine: str = "auto"
    name: Optional[str] = None
    dims: tuple = ()
    rank: Optional[int] = None
    crossover: Optional[float] = None
    random_family: tuple = ()
    tol: float = qstate.TOL
    budget: Optional[int] = None
    out: Optional[str] = None

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if self.n < 1:
            raise UsageError("n must be >= 1")
        if self.d < 2:
            raise UsageError("d must be >= 2")
        if not self.delta >= 0:
            raise UsageError("delta must be >= 0")
        if self.trials < 1 or self.restarts < 1:
            raise UsageError("trials and restarts must be >= 1")
        if self.copies not in (1, 2):
            raise UsageError("copies must be 1 or 2")
        if self.tol <= 0:
            raise UsageError("tolerance must be positive")
        if self.budget is not None and self.budget < 1:
            raise UsageError("budget must be positive")
        if self.command == "region":
            if len(self.grid) != 2:
                raise UsageError("region needs --grid E:LO:HI:STEP C:LO:HI:STEP")
            axes = [rates.parse_axis(g) for g in self.grid]
            if sorted(a[0] for a in axes) != ["C", "E"]:
                raise UsageError("grid needs one E axis and one C axis")
        needs = {"rates": "state", "region": "state", "miocheck": "channel", "swcode": "joint"}
        key = needs.get(self.command)
        if key and getattr(self, key) is None:
            raise UsageError(f"{self.command} needs --{key}")
        if self.command == "merge" and (self.state is None) == (self.joint is None):
            raise UsageError("merge needs exactly one of --state or --joint")
        if self.command == "separable" and (self.family is None) == (not self.random_family):
            raise UsageError("separable needs exactly one of --family or --random NI NJ DA")
        if self.command == "statezoo" and self.name is None:
            raise UsageError("statezoo needs --name")
        return self


# -- input files ----------------------------------------------------------------


def _read(loader, path):
    try:
        return loader(path)
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc


def load_family(path) -> statezoo.SeparableFamily:
    """``{"p": [[...]], "states": [[[[re, im], ...], ...], ...]}``."""
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    states = np.array(obj["states"], dtype=float)
    return statezoo.SeparableFamily(np.array(obj["p"], dtype=float), states[..., 0] + 1j * states[..., 1])


def family_to_dict(fam: statezoo.SeparableFamily) -> dict:
    return {
        "p": fam.p.tolist(),
        "states": [[[[float(z.real), float(z.imag)] for z in v] for v in row] for row in fam.states],
    }


# -- commands -------------------------------------------------------------------


def cmd_rates(cfg: RunConfig):
    rho = _read(qstate.load_state, cfg.state)
    b = rates.compute_bounds(rho)
    out = b.to_dict()
    out["e_min_binding"] = b.e_min_binding
    return out


def cmd_region(cfg: RunConfig):
    rho = _read(qstate.load_state, cfg.state)
    axes = {a[0]: a[1:] for a in (rates.parse_axis(g) for g in cfg.grid)}
    return rates.region_csv(rates.compute_bounds(rho), axes["E"], axes["C"], tol=cfg.tol)


def cmd_merge(cfg: RunConfig):
    if cfg.state is not None:
        psi = _read(qstate.load_state, cfg.state)
        if not isinstance(psi, qstate.PureState):
            raise UsageError("merge needs a pure state file")
    else:
        psi = statezoo.source_state(_read(info.read_joint_csv, cfg.joint))
    p = protocols.source_distribution(psi)
    if cfg.code is not None:
        code = _read(lambda path: _load_code(path, p), cfg.code)
    else:
        code = coding.build_code(p, cfg.n, cfg.delta, trials=cfg.trials, seed=cfg.seed, budget=cfg.budget)
    out = protocols.merge_pure(psi, cfg.n, code, engine=cfg.engine, budget=cfg.budget)
    report = out.report()
    report["sqrt_error_bound"] = out.sqrt_error_bound
    report["fidelity_bound"] = out.fidelity_bound
    report["sum_lower"] = rates.ec_sum_lower_bound(psi)
    return report


def _load_code(path, p):
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    return coding.code_from_binning(p, int(obj["n"]), obj["f"], int(obj["N"]))


def cmd_flower(cfg: RunConfig):
    report = protocols.merge_flower(cfg.d).report()
    report["rates"] = rates.flower_rates(cfg.d).to_dict()
    return report


def cmd_separable(cfg: RunConfig):
    if cfg.family is not None:
        fam = _read(load_family, cfg.family)
    else:
        ni, nj, da = cfg.random_family
        fam = statezoo.random_separable_family(ni, nj, da, seed=cfg.seed)
    c_max, frontier = rates.separable_family_rates(fam)
    bounds = rates.separable_bounds(fam)
    report = protocols.merge_separable(fam).report()
    report["c_max"] = c_max
    report["sum_lower"] = bounds.sum_lower
    report["frontier"] = [[pair.E, pair.C] for pair in frontier()]
    return report


def cmd_swcode(cfg: RunConfig):
    p = _read(info.read_joint_csv, cfg.joint)
    code = coding.build_code(p, cfg.n, cfg.delta, trials=cfg.trials, seed=cfg.seed, budget=cfg.budget)
    out = code.to_dict()
    out["ebits"] = code.ebits
    out["conditional_entropy"] = info.conditional_shannon(p)
    out["delta"] = cfg.delta
    return out


def cmd_miocheck(cfg: RunConfig):
    ch = _read(channels.load_channel, cfg.channel)
    return {
        "in_dim": ch.in_dim,
        "out_dim": ch.out_dim,
        "num_kraus": len(ch.kraus),
        "io": channels.is_incoherent(ch),
        "sio": channels.is_strictly_incoherent(ch),
        "mio": channels.is_mio(ch),
    }


def cmd_uncertainty(cfg: RunConfig):
    ch = channels.flower_decode_channel(cfg.d)
    if cfg.copies == 2:
        ch = channels.tensor_channel(ch, ch)
    value = channels.min_output_entropy(ch, restarts=cfg.restarts, seed=cfg.seed)
    floor = cfg.copies * channels.maassen_uffink_floor(cfg.d)
    return {
        "d": cfg.d,
        "copies": cfg.copies,
        "restarts": cfg.restarts,
        "seed": cfg.seed,
        "min_output_entropy": value,
        "floor": floor,
        "satisfied": bool(value >= floor - 1e-6),
    }


def cmd_statezoo(cfg: RunConfig):
    name = cfg.name
    if name == "flower":
        state = statezoo.flower(cfg.d)
    elif name == "max_entangled":
        state = statezoo.max_entangled(cfg.d)
    elif name == "max_coherent":
        state = statezoo.max_coherent(cfg.d)
    elif name == "source":
        if cfg.joint is not None:
            p = _read(info.read_joint_csv, cfg.joint)
        elif cfg.crossover is not None:
            p = info.doubly_symmetric_binary(cfg.crossover)
        else:
            raise UsageError("statezoo source needs --joint or --crossover")
        state = statezoo.source_state(p)
    elif name == "random_pure":
        state = statezoo.random_pure(cfg.dims or (2, 2, 2), seed=cfg.seed)
    elif name == "random_density":
        state = statezoo.random_density(cfg.dims or (2, 2, 2), rank=cfg.rank, seed=cfg.seed)
    else:
        raise UsageError(f"unknown state {name!r}; choose from {', '.join(STATE_NAMES)}")
    return qstate.state_to_dict(state)


HANDLERS = {
    "rates": cmd_rates,
    "region": cmd_region,
    "merge": cmd_merge,
    "flower": cmd_flower,
    "separable": cmd_separable,
    "swcode": cmd_swcode,
    "miocheck": cmd_miocheck,
    "uncertainty": cmd_uncertainty,
    "statezoo": cmd_statezoo,
}


# -- plumbing -------------------------------------------------------------------


def render(result) -> str:
    if isinstance(result, str):
        return result
    return json.dumps(result, sort_keys=True, indent=2, allow_nan=False) + "\n"


def error_document(kind: str, code: int, message: str) -> dict:
    return {"error": {"kind": kind, "code": code, "message": message}}


def classify_error(exc: BaseException):
    if isinstance(exc, coding.BudgetExceeded):
        return "budget", EXIT_BUDGET
    if isinstance(exc, ParseError):
        return "parse", EXIT_PARSE
    if isinstance(exc, protocols.InvariantViolation):
        return "invariant", EXIT_INVARIANT
    if isinstance(exc, (ValueError, TypeError, IndexError)):
        return "validation", EXIT_VALIDATION
    return "internal", EXIT_INTERNAL


def run(cfg: RunConfig, stdout=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    try:
        cfg = cfg.validate()
        text = render(HANDLERS[cfg.command](cfg))
    except Exception as exc:  # every failure becomes an error document
        kind, code = classify_error(exc)
        stdout.write(render(error_document(kind, code, str(exc))))
        return code
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mergelab", description="Entanglement-coherence rates and incoherent merging simulations.")
    parser.add_argument("--budget", type=int, default=None, help="dimension budget (default: $MERGELAB_BUDGET or 2^21)")
    parser.add_argument("--tol", type=float, default=qstate.TOL, help="tolerance override")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--out", help="write the result here instead of stdout")
        return p

    p = add("rates", "rate bounds of a state file")
    p.add_argument("--state", required=True)

    p = add("region", "classify a grid of (E, C) pairs as CSV")
    p.add_argument("--state", required=True)
    p.add_argument("--grid", nargs=2, required=True, metavar="AXIS", help="E:LO:HI:STEP C:LO:HI:STEP")

    p = add("merge", "simulate pure-state merging")
    p.add_argument("--state")
    p.add_argument("--joint", help="x,y,p CSV; merges the source state with orthonormal references")
    p.add_argument("--code", help="SW code JSON; built from the state when omitted")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--delta", type=float, default=0.25)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--engine", choices=("auto", "dense", "branch"), default="auto")

    p = add("flower", "flower-state merging and its rate values")
    p.add_argument("--d", type=int, default=2)

    p = add("separable", "separable-family merging")
    p.add_argument("--family")
    p.add_argument("--random", type=int, nargs=3, metavar=("NI", "NJ", "DA"))
    p.add_argument("--seed", type=int, default=0)

    p = add("swcode", "build a Slepian-Wolf code")
    p.add_argument("--joint", required=True)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--delta", type=float, default=0.25)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)

    p = add("miocheck", "test a channel for IO, SIO and MIO")
    p.add_argument("--channel", required=True)

    p = add("uncertainty", "minimum output entropy of the flower decoding channel")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--restarts", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--copies", type=int, default=1)

    p = add("statezoo", "emit a named state as JSON")
    p.add_argument("--name", required=True, choices=STATE_NAMES)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--dims", type=int, nargs="+")
    p.add_argument("--rank", type=int)
    p.add_argument("--joint")
    p.add_argument("--crossover", type=float)
    p.add_argument("--seed", type=int, default=0)
    return parser


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    fields = {k: v for k, v in vars(ns).items() if v is not None}
    if "random" in fields:
        fields["random_family"] = tuple(fields.pop("random"))
    for key in ("grid", "dims"):
        if key in fields:
            fields[key] = tuple(fields[key])
    return RunConfig(**fields)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        cfg = config_from_args(build_parser().parse_args(argv))
    except UsageError as exc:
        sys.stdout.write(render(error_document("validation", EXIT_VALIDATION, str(exc))))
        return EXIT_VALIDATION
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
