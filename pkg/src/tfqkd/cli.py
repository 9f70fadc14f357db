"""Command-line front end: single points, loss sweeps, and capacity comparison.

Commands: `rate` (one loss, human-readable report), `sweep` (CSV of rate vs
loss per phase count, optional SVG plot), `compare` (per-loss ratios of each
finite-phase rate to the unlimited-phase benchmark).  A flat JSON config file
can supply any flag value; explicit flags override it.  Exit status is 0 only
when every requested point was computed with certified bounds.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass

from .bounds import DEFAULT_F, INTENSITY_FLOOR
from .channel import NoiseParams
from .keyrate import KeyRatePoint, optimize_point, plob_bound, sweep
from .sdp import problem_to_json
from .states import _check_m
from .svg import render_rate_svg

CSV_COLUMNS = (
    "loss_db",
    "eta",
    "m",
    "mu_opt",
    "beta1_opt",
    "eph_same",
    "eph_diff",
    "ebit",
    "psucc",
    "rate",
    "plob",
)

_CONFIG_KEYS = (
    "loss_db",
    "loss_min",
    "loss_max",
    "loss_step",
    "m",
    "mu",
    "beta1",
    "optimize",
    "emis",
    "pdark",
    "f",
    "out",
    "svg",
    "workers",
    "dump_sdp",
)

_DEFAULTS = {
    "loss_db": None,
    "loss_min": 0.0,
    "loss_max": 80.0,
    "loss_step": 2.0,
    "m": None,  # per-command default applied later
    "mu": None,
    "beta1": None,
    "optimize": False,
    "emis": 0.02,
    "pdark": 1e-8,
    "f": DEFAULT_F,
    "out": None,
    "svg": None,
    "workers": 1,
    "dump_sdp": None,
}

_DEFAULT_M = {"rate": "4", "sweep": "4,8,12,inf", "compare": "4,8,12,inf"}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending flag."""

    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class RunConfig:
    """Validated run parameters for one CLI invocation."""

    command: str
    loss_db: float | None
    loss_min: float
    loss_max: float
    loss_step: float
    m_list: tuple[float, ...]
    mu: float | None
    beta1: float | None
    optimize: bool
    emis: float
    pdark: float
    f: float
    out: str | None
    svg: str | None
    workers: int
    dump_sdp: str | None

    @property
    def noise(self) -> NoiseParams:
        return NoiseParams(e_mis=self.emis, p_dark=self.pdark)

    @property
    def fixed(self) -> tuple[float, float] | None:
        if self.optimize or self.mu is None:
            return None
        return (self.mu, self.beta1)


def _fmt(value: float) -> str:
    return format(value, ".17g")


def _m_label(m_phases: float) -> str:
    return "inf" if math.isinf(m_phases) else str(int(m_phases))


def _parse_m_list(raw, field: str = "--m") -> tuple[float, ...]:
    if isinstance(raw, str):
        entries = [part.strip() for part in raw.split(",") if part.strip()]
    elif isinstance(raw, (list, tuple)):
        entries = list(raw)
    else:
        entries = [raw]
    if not entries:
        raise ConfigError(field, "at least one phase count is required")
    parsed = []
    for entry in entries:
        if isinstance(entry, str) and entry.strip().lower() in ("inf", "infinite", "infinity"):
            parsed.append(math.inf)
            continue
        if isinstance(entry, float) and math.isinf(entry) and entry > 0:
            parsed.append(math.inf)
            continue
        try:
            value = int(str(entry))
        except ValueError:
            raise ConfigError(field, f"cannot parse phase count {entry!r}") from None
        try:
            _check_m(value)
        except ValueError as err:
            raise ConfigError(field, str(err)) from None
        parsed.append(value)
    return tuple(parsed)


def _coerce_float(value, field: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise ConfigError(field, f"expected a number, got {value!r}")
    try:
        return float(value)
    except ValueError:
        raise ConfigError(field, f"expected a number, got {value!r}") from None


def _load_config_file(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as handle:
            doc = json.load(handle)
    except OSError as err:
        raise ConfigError("--config", f"cannot read {path}: {err}") from None
    except json.JSONDecodeError as err:
        raise ConfigError("--config", f"{path} is not valid JSON: {err}") from None
    if not isinstance(doc, dict):
        raise ConfigError("--config", "config file must hold a flat JSON object")
    for key in doc:
        if key not in _CONFIG_KEYS:
            raise ConfigError("--config", f"unknown key {key!r}")
    return doc


def build_config(args: argparse.Namespace) -> RunConfig:
    """Merge defaults, config file, and explicit flags (flags win), then validate."""
    values = dict(_DEFAULTS)
    if args.config:
        values.update(_load_config_file(args.config))
    for key in _CONFIG_KEYS:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            values[key] = flag_value
    if values["m"] is None:
        values["m"] = _DEFAULT_M[args.command]

    command = args.command
    m_list = _parse_m_list(values["m"])
    loss_db = None if values["loss_db"] is None else _coerce_float(values["loss_db"], "--loss-db")
    loss_min = _coerce_float(values["loss_min"], "--loss-min")
    loss_max = _coerce_float(values["loss_max"], "--loss-max")
    loss_step = _coerce_float(values["loss_step"], "--loss-step")
    mu = None if values["mu"] is None else _coerce_float(values["mu"], "--mu")
    beta1 = None if values["beta1"] is None else _coerce_float(values["beta1"], "--beta1")
    optimize = bool(values["optimize"])
    emis = _coerce_float(values["emis"], "--emis")
    pdark = _coerce_float(values["pdark"], "--pdark")
    f = _coerce_float(values["f"], "--f")
    workers = values["workers"]

    if command == "rate":
        if loss_db is None:
            raise ConfigError("--loss-db", "required for the rate command")
        if loss_db < 0:
            raise ConfigError("--loss-db", f"loss must be >= 0 dB, got {loss_db}")
        if len(m_list) != 1:
            raise ConfigError("--m", "the rate command takes exactly one phase count")
    else:
        if loss_min < 0:
            raise ConfigError("--loss-min", f"loss must be >= 0 dB, got {loss_min}")
        if loss_max < loss_min:
            raise ConfigError("--loss-max", f"must be >= --loss-min, got {loss_max}")
        if loss_step <= 0:
            raise ConfigError("--loss-step", f"must be > 0, got {loss_step}")
    if command == "compare":
        if not any(math.isinf(m) for m in m_list):
            raise ConfigError("--m", "compare requires the infinite marker 'inf' in the list")
        if all(math.isinf(m) for m in m_list):
            raise ConfigError("--m", "compare requires at least one finite phase count")

    if (mu is None) != (beta1 is None):
        raise ConfigError("--mu", "fix both --mu and --beta1, or neither")
    if mu is not None:
        if mu < INTENSITY_FLOOR:
            raise ConfigError("--mu", f"must be >= {INTENSITY_FLOOR}, got {mu}")
        if beta1 < INTENSITY_FLOOR:
            raise ConfigError("--beta1", f"must be >= {INTENSITY_FLOOR}, got {beta1}")
        if beta1 == mu and any(not math.isinf(m) for m in m_list):
            raise ConfigError("--beta1", "must differ from --mu")
    if command == "rate" and not optimize and mu is None:
        raise ConfigError("--optimize", "enable the optimizer or fix both --mu and --beta1")
    if not 0.0 <= emis <= 0.5:
        raise ConfigError("--emis", f"misalignment rate must lie in [0, 0.5], got {emis}")
    if not 0.0 <= pdark < 1.0:
        raise ConfigError("--pdark", f"dark-count probability must lie in [0, 1), got {pdark}")
    if f < 1.0:
        raise ConfigError("--f", f"error-correction inefficiency must be >= 1, got {f}")
    try:
        workers = int(workers)
    except (TypeError, ValueError):
        raise ConfigError("--workers", f"expected an integer, got {workers!r}") from None
    if workers < 1:
        raise ConfigError("--workers", f"must be >= 1, got {workers}")

    return RunConfig(
        command=command,
        loss_db=loss_db,
        loss_min=loss_min,
        loss_max=loss_max,
        loss_step=loss_step,
        m_list=m_list,
        mu=mu,
        beta1=beta1,
        optimize=optimize,
        emis=emis,
        pdark=pdark,
        f=f,
        out=values["out"],
        svg=values["svg"],
        workers=workers,
        dump_sdp=values["dump_sdp"],
    )


def _loss_grid(config: RunConfig) -> list[float]:
    count = int(math.floor((config.loss_max - config.loss_min) / config.loss_step + 1e-9)) + 1
    return [config.loss_min + k * config.loss_step for k in range(count)]


def _point_plob(point: KeyRatePoint) -> float:
    return math.inf if point.eta >= 1.0 else plob_bound(point.eta)


def rates_csv(points: list[KeyRatePoint]) -> str:
    """Sweep results as CSV text (dot decimals, LF endings, 17 significant digits)."""
    lines = [",".join(CSV_COLUMNS)]
    for p in points:
        lines.append(
            ",".join(
                (
                    _fmt(p.loss_db),
                    _fmt(p.eta),
                    _m_label(p.m_phases),
                    _fmt(p.mu_opt),
                    _fmt(p.beta1_opt),
                    _fmt(p.e_ph_same),
                    _fmt(p.e_ph_diff),
                    _fmt(p.e_bit),
                    _fmt(p.p_succ),
                    _fmt(p.rate),
                    _fmt(_point_plob(p)),
                )
            )
        )
    return "\n".join(lines) + "\n"


def compare_csv(points: list[KeyRatePoint]) -> str:
    """Per-loss ratios rate(M)/rate(unlimited); 'n/a' where the benchmark is zero."""
    finite = sorted({p.m_phases for p in points if not math.isinf(p.m_phases)})
    by_loss: dict[float, dict[float, KeyRatePoint]] = {}
    for p in points:
        by_loss.setdefault(p.loss_db, {})[p.m_phases] = p
    header = ["loss_db", "eta", "rate_inf"]
    for m in finite:
        header += [f"rate_m{_m_label(m)}", f"ratio_m{_m_label(m)}"]
    lines = [",".join(header)]
    for loss in sorted(by_loss):
        row_points = by_loss[loss]
        bench = row_points.get(math.inf)
        eta = next(iter(row_points.values())).eta
        cells = [_fmt(loss), _fmt(eta), _fmt(bench.rate) if bench else "n/a"]
        for m in finite:
            point = row_points.get(m)
            if point is None:
                cells += ["n/a", "n/a"]
                continue
            cells.append(_fmt(point.rate))
            if bench is None or bench.rate <= 0.0:
                cells.append("n/a")
            else:
                cells.append(_fmt(point.rate / bench.rate))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(text)


def _dump_sdps(directory: str, points: list[KeyRatePoint]) -> int:
    """Write the built programs of every point that has them; returns file count."""
    os.makedirs(directory, exist_ok=True)
    written = 0
    for point in points:
        if point.artifacts is None:
            continue
        base = f"loss{point.loss_db:g}db_m{_m_label(point.m_phases)}"
        for branch, problem in (
            ("same", point.artifacts.problem_same),
            ("diff", point.artifacts.problem_diff),
        ):
            path = os.path.join(directory, f"{base}_{branch}.json")
            _write_text(path, problem_to_json(problem) + "\n")
            written += 1
    return written


def _failures(points: list[KeyRatePoint]) -> list[KeyRatePoint]:
    return [p for p in points if not p.certified]


def run_rate(config: RunConfig) -> int:
    """Evaluate a single loss point and print a human-readable report."""
    try:
        point = optimize_point(
            config.loss_db,
            config.m_list[0],
            fixed=config.fixed,
            noise=config.noise,
            f=config.f,
        )
    except ValueError as err:  # e.g. transmittance underflow at extreme loss
        print(f"error: {err}", file=sys.stderr)
        return 1
    certification = "certified" if point.certified else "NOT CERTIFIED"
    print(f"loss_db    {_fmt(point.loss_db)}")
    print(f"eta        {_fmt(point.eta)}")
    print(f"m          {_m_label(point.m_phases)}")
    print(f"mu         {_fmt(point.mu_opt)}")
    print(f"beta1      {_fmt(point.beta1_opt)}")
    print(f"eph_same   {_fmt(point.e_ph_same)} ({certification})")
    print(f"eph_diff   {_fmt(point.e_ph_diff)} ({certification})")
    print(f"ebit       {_fmt(point.e_bit)}")
    print(f"psucc      {_fmt(point.p_succ)}")
    print(f"rate       {_fmt(point.rate)}")
    print(f"plob       {_fmt(_point_plob(point))}")
    if point.diagnostics:
        print(f"diagnostics: {point.diagnostics}", file=sys.stderr)
    if config.out:
        _write_text(config.out, rates_csv([point]))
    if config.dump_sdp:
        _dump_sdps(config.dump_sdp, [point])
    return 0 if point.certified else 1


def _run_grid_command(config: RunConfig, make_csv) -> int:
    points = sweep(
        _loss_grid(config),
        config.m_list,
        noise=config.noise,
        f=config.f,
        workers=config.workers,
        fixed=config.fixed,
    )
    text = make_csv(points)
    if config.out:
        _write_text(config.out, text)
        print(f"wrote {len(points)} points to {config.out}")
    else:
        sys.stdout.write(text)
    if config.svg:
        _write_text(config.svg, render_rate_svg(points))
        print(f"wrote plot to {config.svg}", file=sys.stderr if not config.out else sys.stdout)
    if config.dump_sdp:
        count = _dump_sdps(config.dump_sdp, points)
        print(f"dumped {count} program files to {config.dump_sdp}", file=sys.stderr)
    failures = _failures(points)
    for point in failures:
        print(
            f"uncertified point: loss {point.loss_db:g} dB, m {_m_label(point.m_phases)}"
            + (f" ({point.diagnostics})" if point.diagnostics else ""),
            file=sys.stderr,
        )
    return 0 if not failures else 1


def run_sweep(config: RunConfig) -> int:
    """Rate-vs-loss sweep: CSV (stdout or --out) plus optional SVG plot."""
    return _run_grid_command(config, rates_csv)


def run_compare(config: RunConfig) -> int:
    """Sweep plus per-loss ratio of each finite-M rate to the unlimited benchmark."""
    return _run_grid_command(config, compare_csv)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tfqkd",
        description="Certified secret-key rates for twin-field QKD with "
        "discrete phase randomization.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "rate": "evaluate one loss point and print a report",
        "sweep": "rate-vs-loss CSV over a loss grid (optional SVG plot)",
        "compare": "per-loss ratios against the unlimited-phase benchmark",
    }
    for name, help_text in specs.items():
        cmd = sub.add_parser(name, help=help_text)
        if name == "rate":
            cmd.add_argument("--loss-db", type=float, default=None, help="total loss in dB")
        else:
            cmd.add_argument("--loss-min", type=float, default=None, help="grid start in dB")
            cmd.add_argument("--loss-max", type=float, default=None, help="grid end in dB")
            cmd.add_argument("--loss-step", type=float, default=None, help="grid step in dB")
        cmd.add_argument(
            "--m",
            default=None,
            help="comma-separated phase counts; even integers or 'inf' "
            f"(default {_DEFAULT_M[name]})",
        )
        cmd.add_argument("--mu", type=float, default=None, help="fixed signal intensity")
        cmd.add_argument("--beta1", type=float, default=None, help="fixed decoy intensity")
        cmd.add_argument(
            "--optimize",
            action="store_true",
            default=None,
            help="grid-optimize mu and beta1 (default for sweep/compare "
            "unless both intensities are fixed)",
        )
        cmd.add_argument("--emis", type=float, default=None, help="misalignment rate (default 0.02)")
        cmd.add_argument(
            "--pdark", type=float, default=None, help="dark-count probability (default 1e-8)"
        )
        cmd.add_argument(
            "--f", type=float, default=None, help=f"error-correction inefficiency (default {DEFAULT_F})"
        )
        cmd.add_argument("--out", default=None, help="write CSV here instead of stdout")
        if name == "sweep":
            cmd.add_argument("--svg", default=None, help="write an SVG plot here")
        cmd.add_argument("--config", default=None, help="flat JSON config file; flags override it")
        cmd.add_argument("--workers", type=int, default=None, help="worker processes (default 1)")
        cmd.add_argument(
            "--dump-sdp",
            default=None,
            help="directory for per-point program JSON dumps",
        )
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = build_config(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    runners = {"rate": run_rate, "sweep": run_sweep, "compare": run_compare}
    return runners[config.command](config)


if __name__ == "__main__":
    sys.exit(main())
