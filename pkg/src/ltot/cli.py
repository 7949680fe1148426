"""Command-line front end: ``ltot {run,compose,sweep,list,selftest}``.

Exit codes: 0 when every check passes, 1 for usage or configuration errors,
2 when an estimate misses its prediction or a certificate fails.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import asdict, dataclass, replace
from datetime import datetime, timezone
from typing import Any, Sequence

from . import __version__
from . import adversaries as adv
from .acceptance import DEFAULT_SEED, run_all
from .analysis import compose_theorem1
from .engine import (
    ALICE, BOB, ChannelConfig, Completed, Strategy, UnknownProtocol, honest_correctness,
    run_trials,
)
from .protocols import CKS10, REGISTRY, UNFAIR, WcfSpec, build_protocol

EXIT_OK, EXIT_CONFIG, EXIT_MISMATCH = 0, 1, 2

# strategy name -> (role that plays it, protocols it targets); None means any
STRATEGIES: dict[str, tuple[str | None, tuple[str, ...] | None]] = {
    "honest": (None, None),
    "best": (None, None),
    "alice-helstrom": (ALICE, (CKS10,)),
    "alice-lost-message": (ALICE, (CKS10,)),
    "alice-unfair-guess": (ALICE, (UNFAIR,)),
    "bob-parity": (BOB, (CKS10,)),
    "bob-epr": (BOB, (UNFAIR,)),
}
SWEEP_DIMENSIONS = ("loss_rate", "max_restarts", "wcf", "wcf_a", "wcf_b")

REPORT_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["config", "estimates", "certificates", "verdicts", "status"],
    "properties": {
        "config": {"type": "object"},
        "estimates": {"type": "array", "items": {
            "type": "object",
            "required": ["label", "n", "successes", "trials", "estimate", "ci95", "seed",
                         "predicted"],
            "properties": {
                "label": {"type": "string"},
                "n": {"type": "integer", "minimum": 0},
                "successes": {"type": "integer", "minimum": 0},
                "trials": {"type": "integer", "minimum": 0},
                "estimate": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
                "ci95": {"type": "array", "items": {"type": "number"},
                         "minItems": 2, "maxItems": 2},
                "seed": {"type": "integer"},
                "predicted": {"type": ["number", "null"]},
                "counts": {"type": "object"},
            }}},
        "certificates": {"type": "array", "items": {
            "type": "object",
            "required": ["name", "value", "expected", "tolerance", "passed"],
            "properties": {"name": {"type": "string"}, "value": {"type": "number"},
                           "expected": {"type": "number"}, "passed": {"type": "boolean"}}}},
        "verdicts": {"type": "array", "items": {
            "type": "object",
            "required": ["check", "passed", "detail"],
            "properties": {"check": {"type": "string"}, "passed": {"type": "boolean"},
                           "detail": {"type": "string"}}}},
        "status": {"enum": ["PASS", "FAIL"]},
        "generated_at": {"type": "string"},
    },
}

CSV_FIELDS = ("label", "n", "successes", "trials", "estimate", "ci_low", "ci_high",
              "predicted", "within_3sigma")


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    protocol: str = "cks10-rot"
    alice: str = "honest"
    bob: str = "honest"
    trials: int = 1000
    seed: int = DEFAULT_SEED
    loss_rate: float = 0.0
    max_restarts: int | None = None
    wcf_a: float = 0.5
    wcf_b: float = 0.5
    declared_losses: int | None = None
    format: str = "json"
    out: str | None = None
    parallel: int = 1
    no_timestamp: bool = False

    def validate(self) -> "RunConfig":
        if self.protocol not in REGISTRY:
            raise ConfigError(f"unknown protocol {self.protocol!r}; known: {', '.join(REGISTRY)}")
        for role, name in ((ALICE, self.alice), (BOB, self.bob)):
            if name not in STRATEGIES:
                raise ConfigError(f"unknown strategy {name!r}; known: {', '.join(STRATEGIES)}")
            owner, targets = STRATEGIES[name]
            if owner is not None and owner != role:
                raise ConfigError(f"strategy {name!r} is played by {owner}, not {role}")
            if targets is not None and self.protocol not in targets:
                raise ConfigError(f"strategy {name!r} does not apply to {self.protocol}")
        if self.alice != "honest" and self.bob != "honest":
            raise ConfigError("at most one party may cheat")
        if self.trials < 1:
            raise ConfigError("--trials must be positive")
        if self.parallel < 1:
            raise ConfigError("--parallel must be positive")
        if self.declared_losses is not None and self.declared_losses < 0:
            raise ConfigError("--declared-losses must be nonnegative")
        if self.format not in ("json", "csv"):
            raise ConfigError("--format must be json or csv")
        try:
            self.channel()
            self.wcf()
        except ValueError as err:
            raise ConfigError(str(err)) from None
        return self

    def channel(self) -> ChannelConfig:
        return ChannelConfig(loss_rate=self.loss_rate, max_restarts=self.max_restarts)

    def wcf(self) -> WcfSpec:
        return WcfSpec(self.wcf_a, self.wcf_b)

    def echo(self) -> dict[str, Any]:
        d = asdict(self)
        d.pop("out")
        d.pop("no_timestamp")
        d.pop("parallel")
        d["max_restarts"] = "unbounded" if self.max_restarts is None else self.max_restarts
        return d


def parse_max_restarts(text) -> int | None:
    if text is None or text == "unbounded":
        return None
    try:
        value = int(text)
    except (TypeError, ValueError):
        raise ConfigError(f"max_restarts must be an integer or 'unbounded', got {text!r}") from None
    if value < 0:
        raise ConfigError("max_restarts must be nonnegative")
    return value


# -- experiments -------------------------------------------------------------

def _attack_strategy(cfg: RunConfig, protocol) -> Strategy | None:
    for role, name in ((ALICE, cfg.alice), (BOB, cfg.bob)):
        if name == "honest":
            continue
        if name == "best":
            try:
                return adv.best_attack(protocol, role)
            except ValueError as err:
                raise ConfigError(str(err)) from None
        if name == "alice-lost-message":
            r = cfg.declared_losses
            if r is None:
                r = cfg.max_restarts if cfg.max_restarts is not None else 0
            return adv.alice_lost_message_attack(r)
        if name == "alice-unfair-guess":
            return adv.alice_protocol6_attack(cfg.declared_losses or 0)
        return adv.ATTACKS[name]()
    return None


def _honest_score(outcome):
    """Correct Random-OT/OT delivery, or coin agreement for a coin flip."""
    if not isinstance(outcome, Completed):
        return None
    if isinstance(outcome.alice_output, int):
        return outcome.alice_output == outcome.bob_output
    return honest_correctness(outcome)


def _estimate_row(label: str, stats, predicted: float | None) -> dict[str, Any]:
    row = {"label": label, **stats.as_dict(), "predicted": predicted}
    row["within_3sigma"] = (None if predicted is None or not stats.n
                            else stats.agrees_with(predicted))
    return row


def experiment(cfg: RunConfig, label: str | None = None) -> dict[str, list]:
    """Run one configuration; returns estimates, certificates and verdicts."""
    protocol = build_protocol(cfg.protocol, cfg.wcf())
    channel = cfg.channel()
    attack = _attack_strategy(cfg, protocol)
    label = label or f"{cfg.protocol} alice={cfg.alice} bob={cfg.bob}"
    certs: list[adv.Certificate] = []
    if attack is None:
        stats = run_trials(protocol, protocol.alice, protocol.bob, channel, cfg.trials,
                           cfg.seed, score=_honest_score, workers=cfg.parallel)
        predicted = 1.0
        name = "honest correctness"
    else:
        alice, bob = ((attack, protocol.bob) if attack.role == ALICE
                      else (protocol.alice, attack))
        stats = run_trials(protocol, alice, bob, channel, cfg.trials, cfg.seed,
                           score=adv.scorer_for(protocol, attack.role), workers=cfg.parallel)
        predicted = adv.predicted_success(attack, protocol, channel)
        certs = list(adv.certificates_for(attack))
        name = f"{attack.name} success"
    row = _estimate_row(label, stats, predicted)
    verdicts = [{"check": f"{label}: certificate {c.name}", "passed": c.passed,
                 "detail": f"value={c.value!r} expected={c.expected!r}"} for c in certs]
    if predicted is not None:
        ok = bool(stats.n) and stats.agrees_with(predicted)
        est = "none" if not stats.n else f"{stats.estimate:.6f}"
        verdicts.append({"check": f"{label}: {name} within 3 sigma of {predicted:.6f}",
                         "passed": ok, "detail": f"estimate={est} n={stats.n}"})
    return {"estimates": [row], "certificates": [c.as_dict() for c in certs],
            "verdicts": verdicts}


def build_report(config: dict[str, Any], parts: Sequence[dict[str, list]],
                 timestamp: bool) -> dict[str, Any]:
    report: dict[str, Any] = {"config": config, "estimates": [], "certificates": [],
                              "verdicts": []}
    for part in parts:
        for key in ("estimates", "certificates", "verdicts"):
            report[key].extend(part.get(key, []))
    report["status"] = "PASS" if all(v["passed"] for v in report["verdicts"]) else "FAIL"
    if timestamp:
        report["generated_at"] = datetime.now(timezone.utc).isoformat()
    return report


def render(report: dict[str, Any], fmt: str, extra: Sequence[str] = ()) -> str:
    if fmt == "json":
        return json.dumps(report, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow((*extra, *CSV_FIELDS))
    for row in report["estimates"]:
        lo, hi = row["ci95"]
        values = {**row, "ci_low": lo, "ci_high": hi}
        writer.writerow([row.get(k) for k in extra] + [values.get(k) for k in CSV_FIELDS])
    return buf.getvalue()


def emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- subcommands -------------------------------------------------------------

def cmd_run(cfg: RunConfig) -> int:
    part = experiment(cfg)
    report = build_report(cfg.echo(), [part], not cfg.no_timestamp)
    emit(render(report, cfg.format), cfg.out)
    return EXIT_OK if report["status"] == "PASS" else EXIT_MISMATCH


def parse_values(dimension: str, spec: str) -> list:
    """``a..b`` (integers, inclusive), ``start:stop:step`` or a comma list."""
    spec = spec.strip()
    try:
        if ".." in spec:
            lo, hi = (int(v) for v in spec.split(".."))
            values: list = list(range(lo, hi + 1))
        elif spec.count(":") == 2:
            start, stop, step = (float(v) for v in spec.split(":"))
            if step <= 0:
                raise ConfigError("sweep step must be positive")
            k = int(round((stop - start) / step))
            values = [round(start + i * step, 12) for i in range(k + 1)] if stop >= start else []
        else:
            values = [v for v in spec.split(",") if v.strip()]
            values = ([parse_max_restarts(v.strip()) for v in values] if dimension == "max_restarts"
                      else [float(v) for v in values])
    except ValueError:
        raise ConfigError(f"cannot parse sweep values {spec!r}") from None
    if dimension == "max_restarts":
        values = [parse_max_restarts(v) if isinstance(v, str) else
                  (None if v is None else int(v)) for v in values]
    if not values:
        raise ConfigError("empty sweep range")
    return values


def _at(cfg: RunConfig, dimension: str, value) -> RunConfig:
    if dimension == "wcf":
        return replace(cfg, wcf_a=value, wcf_b=value)
    return replace(cfg, **{dimension: value})


def cmd_sweep(cfg: RunConfig, dimension: str, spec: str) -> int:
    if dimension not in SWEEP_DIMENSIONS:
        raise ConfigError(f"unknown sweep dimension {dimension!r}")
    values = parse_values(dimension, spec)
    parts = []
    for v in values:
        point = _at(cfg, dimension, v).validate()
        label = f"{dimension}={'unbounded' if v is None else v}"
        part = experiment(point, label)
        for row in part["estimates"]:
            row[dimension] = "unbounded" if v is None else v
        parts.append(part)
    config = {**cfg.echo(), "sweep": {"dimension": dimension, "values": spec}}
    report = build_report(config, parts, not cfg.no_timestamp)
    emit(render(report, cfg.format, extra=(dimension,)), cfg.out)
    return EXIT_OK if report["status"] == "PASS" else EXIT_MISMATCH


def cmd_compose(values: Sequence[float], fmt: str, out: str | None) -> int:
    try:
        res = compose_theorem1(*values)
    except ValueError as err:
        raise ConfigError(str(err)) from None
    d = res.as_dict()
    d["within_bound"] = res.within_bound
    if fmt == "json":
        text = json.dumps(d, indent=2, sort_keys=True) + "\n"
    else:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(d), lineterminator="\n")
        writer.writeheader()
        writer.writerow(d)
        text = buf.getvalue()
    emit(text, out)
    return EXIT_OK


def cmd_list(fmt: str, out: str | None) -> int:
    listing = {
        "protocols": {name: build_protocol(name).kind for name in REGISTRY},
        "strategies": {name: {"role": role or "either",
                              "protocols": list(targets) if targets else "any"}
                       for name, (role, targets) in STRATEGIES.items()},
        "sweep_dimensions": list(SWEEP_DIMENSIONS),
    }
    if fmt == "json":
        emit(json.dumps(listing, indent=2) + "\n", out)
    else:
        lines = ["kind,name,detail"]
        lines += [f"protocol,{n},{k}" for n, k in listing["protocols"].items()]
        lines += [f"strategy,{n},{d['role']}" for n, d in listing["strategies"].items()]
        lines += [f"sweep,{d}," for d in SWEEP_DIMENSIONS]
        emit("\n".join(lines) + "\n", out)
    return EXIT_OK


def selftest_report(seed: int, timestamp: bool, only=None) -> tuple[dict[str, Any], list]:
    results = run_all(seed, only)
    parts = []
    for r in results:
        parts.append({
            "estimates": r.estimates,
            "certificates": [c.as_dict() for c in r.certificates],
            "verdicts": [{**c.as_dict(), "criterion": r.number} for c in r.checks],
        })
    report = build_report({"command": "selftest", "seed": seed}, parts, timestamp)
    report["criteria"] = [{"number": r.number, "title": r.title, "passed": r.passed}
                          for r in results]
    return report, results


def cmd_selftest(seed: int, fmt: str, out: str | None, timestamp: bool, only=None) -> int:
    report, results = selftest_report(seed, timestamp, only)
    for r in results:
        print(r.line(), file=sys.stderr)
    emit(render(report, fmt, extra=("criterion",)), out)
    return EXIT_OK if report["status"] == "PASS" else EXIT_MISMATCH


# -- argument parsing --------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file of option values; flags override it")
    p.add_argument("--protocol")
    p.add_argument("--alice", help="strategy for Alice (see `ltot list`)")
    p.add_argument("--bob", help="strategy for Bob")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--loss-rate", type=float, dest="loss_rate")
    p.add_argument("--max-restarts", dest="max_restarts",
                   help="restart cap per restartable scope, or 'unbounded'")
    p.add_argument("--declared-losses", type=int, dest="declared_losses",
                   help="false loss claims by a loss-abusing attack (default: the cap)")
    p.add_argument("--wcf-a", type=float, dest="wcf_a")
    p.add_argument("--wcf-b", type=float, dest="wcf_b")
    p.add_argument("--parallel", type=int, help="worker processes")


def _add_output_flags(p: argparse.ArgumentParser, default_format: str = "json") -> None:
    p.add_argument("--format", choices=("json", "csv"), default=None,
                   help=f"report format (default {default_format})")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--no-timestamp", action="store_true", dest="no_timestamp", default=None,
                   help="omit the generation time so reports are byte-reproducible")


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ltot", description="Loss-tolerant OT simulator and analyzer.")
    parser.add_argument("--version", action="version", version=f"ltot {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    run = sub.add_parser("run", help="estimate correctness or an attack's success")
    _add_run_flags(run)
    _add_output_flags(run)
    sweep = sub.add_parser("sweep", help="repeat `run` over a grid of one parameter")
    sweep.add_argument("--dimension", required=True, choices=SWEEP_DIMENSIONS)
    sweep.add_argument("--values", required=True,
                       help="'a..b' (integers), 'start:stop:step' or a comma list")
    _add_run_flags(sweep)
    _add_output_flags(sweep, "csv")
    comp = sub.add_parser("compose", help="cheating probabilities of the balanced protocol")
    for name in ("A_wcf", "B_wcf", "A_rot", "B_rot"):
        comp.add_argument(name, type=float)
    _add_output_flags(comp)
    lst = sub.add_parser("list", help="list protocols, strategies and sweep dimensions")
    _add_output_flags(lst)
    st = sub.add_parser("selftest", help="run the acceptance suite")
    st.add_argument("--seed", type=int, default=DEFAULT_SEED)
    st.add_argument("--criteria", help="comma list of criterion numbers (default all)")
    _add_output_flags(st)
    return parser


def load_config(path: str | None) -> dict[str, Any]:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    data = {k.replace("-", "_"): v for k, v in data.items()}
    unknown = set(data) - set(RunConfig.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return data


def resolve_config(args: argparse.Namespace, default_format: str = "json") -> RunConfig:
    """Defaults, then the config file, then explicit flags."""
    values: dict[str, Any] = {"format": default_format}
    values.update(load_config(getattr(args, "config", None)))
    for key in RunConfig.__dataclass_fields__:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    values["max_restarts"] = parse_max_restarts(values.get("max_restarts"))
    try:
        cfg = RunConfig(**values)
    except TypeError as err:
        raise ConfigError(str(err)) from None
    return cfg.validate()


def main(argv: Sequence[str] | None = None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    try:
        if args.command == "run":
            return cmd_run(resolve_config(args))
        if args.command == "sweep":
            return cmd_sweep(resolve_config(args, "csv"), args.dimension, args.values)
        fmt = args.format or "json"
        if args.command == "compose":
            return cmd_compose((args.A_wcf, args.B_wcf, args.A_rot, args.B_rot), fmt, args.out)
        if args.command == "list":
            return cmd_list(fmt, args.out)
        only = None
        if args.criteria:
            try:
                only = {int(v) for v in args.criteria.split(",")}
            except ValueError:
                raise ConfigError("--criteria takes a comma list of numbers") from None
            if not only <= set(range(1, 10)):
                raise ConfigError("criteria are numbered 1 to 9")
        return cmd_selftest(args.seed, fmt, args.out, not args.no_timestamp, only)
    except (ConfigError, UnknownProtocol) as err:
        print(f"ltot: error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
