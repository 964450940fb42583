"""Scenario runner: build spaces, sweep constants, fit controls, verify.

Subcommands
-----------
verify   run the full inequality suite on a space and write report artifacts
sweep    tabulate t, c_star(t), C_star(t), theta(t) over a time grid
fit      fit a power envelope to a two-column (t, c) sample file
report   render a report file into a summary

Scenario configs are flat ``key=value`` strings (or files); unknown keys are
rejected by name.  The environment variable SEMLAB_THREADS caps suite
parallelism.  All artifacts are byte-identical across runs for a fixed
config and seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from .controls import (
    PowerControl,
    PowerLogControl,
    ReferenceRCDControl,
    control_from_dict,
    control_to_dict,
    fit_power_control,
)
from .heat import build_heat_operator, c_star, c_star_primitive, theta_ultracontractivity
from .inequalities import (
    SuiteOptions,
    reports_to_csv,
    reports_to_json,
    run_suite,
)
from .spaces import generate_space, load_space

__all__ = ["ScenarioConfig", "parse_config", "serialize_config", "parse_t_grid",
           "parse_control_spec", "run_scenario", "main"]

_DEFAULTS = {
    "space": "",
    "t-grid": "log:0.001,1,40",
    "seed": "0",
    "suite": "all",
    "samples": "100",
    "control": "fit",
    "out": "semlab_out",
}


@dataclass(frozen=True)
class ScenarioConfig:
    """One verification scenario, fully determined by seven string fields."""

    space: str
    t_grid: str = _DEFAULTS["t-grid"]
    seed: int = 0
    suite: str = "all"
    samples: int = 100
    control: str = "fit"
    out: str = _DEFAULTS["out"]


class ConfigError(ValueError):
    pass


def parse_config(text: str) -> ScenarioConfig:
    """Parse a whitespace-separated key=value scenario description.

    Unknown keys and malformed tokens are rejected with the token position
    and offending key in the message; omitted keys get explicit defaults.
    """
    values = dict(_DEFAULTS)
    seen = set()
    for pos, token in enumerate(text.split(), start=1):
        if "=" not in token:
            raise ConfigError(f"token {pos} ({token!r}): expected key=value")
        key, _, value = token.partition("=")
        if key not in _DEFAULTS:
            raise ConfigError(f"token {pos}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"token {pos}: duplicate key {key!r}")
        seen.add(key)
        values[key] = value
    if not values["space"]:
        raise ConfigError("missing required key 'space'")
    try:
        seed = int(values["seed"])
        samples = int(values["samples"])
    except ValueError as exc:
        raise ConfigError(f"non-integer seed/samples: {exc}") from exc
    return ScenarioConfig(
        space=values["space"], t_grid=values["t-grid"], seed=seed,
        suite=values["suite"], samples=samples, control=values["control"],
        out=values["out"],
    )


def serialize_config(config: ScenarioConfig) -> str:
    """Canonical form: sorted keys, defaults written out explicitly."""
    mapping = {
        "control": config.control,
        "out": config.out,
        "samples": str(config.samples),
        "seed": str(config.seed),
        "space": config.space,
        "suite": config.suite,
        "t-grid": config.t_grid,
    }
    return " ".join(f"{k}={mapping[k]}" for k in sorted(mapping))


def parse_t_grid(spec: str) -> np.ndarray:
    if not spec.startswith("log:"):
        raise ConfigError(f"time grid spec {spec!r} must look like log:<min>,<max>,<count>")
    parts = spec[4:].split(",")
    if len(parts) != 3:
        raise ConfigError(f"time grid spec {spec!r} needs exactly min,max,count")
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise ConfigError(f"bad time grid spec {spec!r}: {exc}") from exc
    if not (0.0 < lo < hi) or count < 2:
        raise ConfigError(f"time grid spec {spec!r} needs 0 < min < max and count >= 2")
    return np.geomspace(lo, hi, count)


def _parse_kv(body: str) -> dict:
    out = {}
    for piece in body.split(","):
        if not piece:
            continue
        key, _, value = piece.partition("=")
        if not value:
            raise ConfigError(f"malformed control parameter {piece!r}")
        out[key] = value
    return out


def parse_control_spec(spec: str):
    """Control spec -> control object, or None for 'fit' (fit from sweep)."""
    if spec == "fit":
        return None
    kind, _, body = spec.partition(":")
    if kind == "power":
        kv = _parse_kv(body)
        return PowerControl(float(kv["M"]), float(kv["b"]),
                            strong=kv.get("strong", "0") not in ("0", "false", ""))
    if kind == "powerlog":
        kv = _parse_kv(body)
        return PowerLogControl(float(kv["M"]), float(kv["a"]), float(kv["b"]))
    if kind == "rcd":
        kv = _parse_kv(body)
        return ReferenceRCDControl(float(kv["K"]), float(kv.get("M", "1")))
    if kind == "file":
        try:
            with open(body) as fh:
                return control_from_dict(json.load(fh))
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"unusable control file {body!r}: {exc}") from exc
    raise ConfigError(f"unknown control spec {spec!r}")


def _build_space(descriptor: str):
    if descriptor.endswith(".json") or os.path.sep in descriptor:
        try:
            return load_space(descriptor)
        except OSError as exc:
            raise ConfigError(f"cannot read space file {descriptor!r}: {exc}") from exc
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"malformed space file {descriptor!r}: {exc}") from exc
    return generate_space(descriptor)


def _sweep_rows(heat, t_grid):
    rows = []
    for t in t_grid:
        rows.append((
            float(t),
            c_star(heat, float(t)),
            c_star_primitive(heat, float(t), anchors=t_grid),
            theta_ultracontractivity(heat, float(t)),
        ))
    return rows


def _sweep_csv(rows) -> str:
    lines = ["t,c_star,C_star,theta"]
    for t, c, big_c, theta in rows:
        lines.append(f"{t:.17g},{c:.17g},{big_c:.17g},{theta:.17g}")
    return "\n".join(lines) + "\n"


def _write(path: str, content: str):
    try:
        with open(path, "w") as fh:
            fh.write(content)
    except OSError as exc:
        raise ConfigError(f"cannot write {path!r}: {exc}") from exc


def _summary_text(result, config) -> str:
    lines = [f"scenario: {serialize_config(config)}", ""]
    summary = result.summary()
    width = max((len(k) for k in summary), default=4)
    for name, entry in summary.items():
        verdict = "PASS" if entry["failures"] == 0 else "FAIL"
        eq = f" equalities={entry['equalities']}" if entry["equalities"] else ""
        lines.append(
            f"{verdict} {name:<{width}} count={entry['count']} "
            f"worst_rel_slack={entry['worst_slack']:.3e}{eq}"
        )
    if result.skipped:
        lines.append("")
        lines.append(f"skipped {len(result.skipped)} instance(s):")
        for item in result.skipped[:10]:
            lines.append(f"  {item['check']} [{item['input']}]: {item['reason']}")
    nontrivial = [r for r in result.reports if not r.trivial]
    ok = all(r.passed for r in nontrivial)
    lines.append("")
    lines.append(
        f"{'ALL CHECKS PASS' if ok else 'FAILURES PRESENT'}: "
        f"{sum(r.passed for r in nontrivial)}/{len(nontrivial)} non-trivial reports pass"
    )
    return "\n".join(lines) + "\n"


def run_scenario(config: ScenarioConfig, stream=None) -> int:
    """Execute a scenario and write its artifacts; 0 iff every check passed."""
    stream = stream or sys.stdout
    t_grid = parse_t_grid(config.t_grid)
    control = parse_control_spec(config.control)
    space, dirichlet = _build_space(config.space)
    heat = build_heat_operator(space, dirichlet)

    options = SuiteOptions.from_spec(config.suite, samples=config.samples,
                                     control=control)
    result = run_suite(space, dirichlet, heat, seed=config.seed, t_grid=t_grid,
                       options=options)

    rows = _sweep_rows(heat, t_grid)
    fitted = fit_power_control(t_grid, [r[1] for r in rows])

    os.makedirs(config.out, exist_ok=True)
    join = lambda name: os.path.join(config.out, name)
    _write(join("report.json"), reports_to_json(result.reports))
    _write(join("summary.csv"), reports_to_csv(result.reports))
    _write(join("sweep.csv"), _sweep_csv(rows))
    _write(join("control.json"),
           json.dumps(control_to_dict(control if control is not None else fitted),
                      indent=1, sort_keys=True) + "\n")
    text = _summary_text(result, config)
    _write(join("summary.txt"), text)
    stream.write(text)

    nontrivial_pass = all(r.passed for r in result.reports if not r.trivial)
    return 0 if nontrivial_pass else 1


def _cmd_verify(args) -> int:
    base = dict(_DEFAULTS)
    if args.config:
        text = args.config
        if os.path.exists(text):
            with open(text) as fh:
                text = fh.read()
        parsed = parse_config(text)
        base.update({
            "space": parsed.space, "t-grid": parsed.t_grid, "seed": str(parsed.seed),
            "suite": parsed.suite, "samples": str(parsed.samples),
            "control": parsed.control, "out": parsed.out,
        })
    for key, value in (
        ("space", args.space), ("t-grid", args.t_grid), ("seed", args.seed),
        ("suite", args.suite), ("samples", args.samples), ("control", args.control),
        ("out", args.out),
    ):
        if value is not None:
            base[key] = str(value)
    if not base["space"]:
        raise ConfigError("no space given (use --space or --config)")
    config = ScenarioConfig(
        space=base["space"], t_grid=base["t-grid"], seed=int(base["seed"]),
        suite=base["suite"], samples=int(base["samples"]),
        control=base["control"], out=base["out"],
    )
    return run_scenario(config)


def _cmd_sweep(args) -> int:
    space, dirichlet = _build_space(args.space)
    heat = build_heat_operator(space, dirichlet)
    t_grid = parse_t_grid(args.t_grid)
    content = _sweep_csv(_sweep_rows(heat, t_grid))
    if args.out:
        _write(args.out, content)
    else:
        sys.stdout.write(content)
    return 0


def _cmd_fit(args) -> int:
    try:
        data = np.loadtxt(args.samples, delimiter=",", ndmin=2)
    except (OSError, ValueError):
        try:
            data = np.loadtxt(args.samples, ndmin=2)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read sample file {args.samples!r}: {exc}") from exc
    if data.shape[1] < 2:
        raise ConfigError(f"sample file {args.samples!r} needs two columns (t, c)")
    control = fit_power_control(data[:, 0], data[:, 1], b=args.b)
    payload = json.dumps(control_to_dict(control), indent=1, sort_keys=True) + "\n"
    if args.out:
        _write(args.out, payload)
    else:
        sys.stdout.write(payload)
    return 0


def _cmd_report(args) -> int:
    try:
        with open(args.input) as fh:
            records = json.load(fh)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read report file {args.input!r}: {exc}") from exc
    lines = []
    failures = 0
    for rec in records:
        ok = rec.get("pass", False)
        failures += 0 if ok else 1
        t_used = rec.get("t_used")
        t_txt = "-" if t_used is None else f"{t_used:.6g}"
        lines.append(
            f"{'PASS' if ok else 'FAIL'} {rec['name']}: lhs={rec['lhs']:.10g} "
            f"rhs={rec['rhs']:.10g} slack={rec['slack']:.3e} t={t_txt}"
        )
    text = "\n".join(lines) + "\n"
    if args.csv:
        writer_rows = ["name,lhs,rhs,slack,t_used,pass"]
        for rec in records:
            t_used = rec.get("t_used")
            writer_rows.append(
                f"{rec['name']},{rec['lhs']:.17g},{rec['rhs']:.17g},"
                f"{rec['slack']:.17g},{'' if t_used is None else format(t_used, '.17g')},"
                f"{str(rec['pass']).lower()}"
            )
        _write(args.csv, "\n".join(writer_rows) + "\n")
    sys.stdout.write(text)
    return 0 if failures == 0 else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="semlab",
        description="verify heat-semigroup smoothing inequalities on finite spaces",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_verify = sub.add_parser("verify", help="run the inequality suite on a space")
    p_verify.add_argument("--space", help="family descriptor or space file")
    p_verify.add_argument("--config", help="key=value scenario text or file")
    p_verify.add_argument("--seed", type=int, default=None)
    p_verify.add_argument("--t-grid", dest="t_grid", default=None,
                          help="log:<min>,<max>,<count>")
    p_verify.add_argument("--suite", default=None, help="'all' or comma list of checks")
    p_verify.add_argument("--samples", type=int, default=None,
                          help="random samples per check")
    p_verify.add_argument("--control", default=None,
                          help="fit | power:M=..,b=.. | powerlog:M=..,a=..,b=.. | "
                               "rcd:K=..[,M=..] | file:PATH")
    p_verify.add_argument("--out", default=None, help="artifact directory")
    p_verify.set_defaults(func=_cmd_verify)

    p_sweep = sub.add_parser("sweep", help="tabulate c_star, C_star, theta")
    p_sweep.add_argument("--space", required=True)
    p_sweep.add_argument("--t-grid", dest="t_grid", default=_DEFAULTS["t-grid"])
    p_sweep.add_argument("--out", default=None, help="CSV output path")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_fit = sub.add_parser("fit", help="fit a power envelope to (t, c) samples")
    p_fit.add_argument("--samples", required=True, help="two-column CSV or text file")
    p_fit.add_argument("--b", type=float, default=None, help="fix the exponent")
    p_fit.add_argument("--out", default=None, help="write the fitted control as JSON")
    p_fit.set_defaults(func=_cmd_fit)

    p_report = sub.add_parser("report", help="render a report file")
    p_report.add_argument("--in", dest="input", required=True)
    p_report.add_argument("--csv", default=None, help="also write a CSV summary")
    p_report.set_defaults(func=_cmd_report)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
