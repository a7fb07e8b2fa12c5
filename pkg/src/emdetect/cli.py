"""Command-line entry point: ``emdetect <command> [--flag value ...]``.

Every command writes one table (CSV or JSON) and prints a one-line summary.
Parameters come from built-in defaults, then an optional flat config file
(``--config``; ``key = value`` lines, ``#`` comments), then flags; later
sources win. Exit codes: 0 success, 1 usage error, 2 numerical
precondition violation (or failed ``verify``), 3 I/O error.
"""

from __future__ import annotations

import argparse
import math
import os
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from . import farfield as ff
from . import onephoton as op
from . import resonant as rs
from . import sampler as sm
from .core import PreconditionError
from .table import ScanTable, format_value

OUTPUT_DIR_ENV = "EMDETECT_OUTPUT_DIR"
FORMATS = ("csv", "json")


class UsageError(Exception):
    pass


# -- literal parsers ---------------------------------------------------------

_REAL = r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_COMPLEX_RE = re.compile(
    rf"^(?P<re>[+-]?{_REAL})?(?:(?P<sign>[+-])?(?P<im>{_REAL})?(?P<unit>[ij]))?$"
)


def parse_complex(text: str) -> complex:
    """Parse ``a``, ``bi``, ``a+bi`` or ``a-bi`` (``j`` also accepted, no spaces)."""
    s = text.strip()
    m = _COMPLEX_RE.match(s)
    if not s or m is None:
        raise UsageError(f"malformed complex literal {text!r} (expected a+bi, a-bi, a or bi)")
    re_part, sign, im_part, unit = m.group("re", "sign", "im", "unit")
    if unit is None:
        if re_part is None:
            raise UsageError(f"malformed complex literal {text!r}")
        return complex(float(re_part), 0.0)
    if re_part is not None and sign is None and im_part is None:
        # "2i" matched as re="2", unit="i": the real group swallowed the imaginary digits
        return complex(0.0, float(re_part))
    if re_part is not None and sign is None:
        raise UsageError(f"malformed complex literal {text!r}")
    magnitude = float(im_part) if im_part is not None else 1.0
    imag = -magnitude if sign == "-" else magnitude
    return complex(float(re_part) if re_part is not None else 0.0, imag)


def parse_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise UsageError(f"expected a real number, got {text!r}") from None
    if not math.isfinite(value):
        raise UsageError(f"expected a finite number, got {text!r}")
    return value


def parse_int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise UsageError(f"expected an integer, got {text!r}") from None


def parse_range(text: str) -> tuple[float, float, int]:
    """``min:max:count`` with ``min < max`` and ``count >= 2``."""
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"range must be min:max:count, got {text!r}")
    lo, hi, n = parse_float(parts[0]), parse_float(parts[1]), parse_int(parts[2])
    if not lo < hi:
        raise UsageError(f"range needs min < max, got {text!r}")
    if n < 2:
        raise UsageError(f"range needs count >= 2, got {text!r}")
    return lo, hi, n


def parse_optional_complex(text: str) -> complex | None:
    return None if text.strip().lower() == "none" else parse_complex(text)


def parse_rate_or_critical(text: str) -> float | str:
    return "critical" if text.strip().lower() == "critical" else parse_float(text)


def choice(*options: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in options:
            raise UsageError(f"expected one of {', '.join(options)}; got {text!r}")
        return text

    return parse


# -- parameter tables --------------------------------------------------------


@dataclass(frozen=True)
class Param:
    name: str
    convert: Callable[[str], Any]
    default: str
    help: str = ""


COMMON = (
    Param("output", str, "", "output file (default: $EMDETECT_OUTPUT_DIR/<command>.<format>)"),
    Param("format", choice(*FORMATS), "", "csv or json (default: from the output suffix, else csv)"),
)

PARAMS: dict[str, tuple[Param, ...]] = {
    "farfield": (
        Param("d-over-lambda", parse_float, "3", "dipole separation in wavelengths"),
        Param("wavelength", parse_float, "1", "wavelength (length unit)"),
        Param("zeta", parse_complex, "0", "detector response ratio, a+bi"),
        Param("cut", choice("polar", "azimuthal"), "polar", "polar (theta sweep) or azimuthal (phi sweep)"),
        Param("phi", parse_float, "0", "fixed phi for the polar cut (rad)"),
        Param("theta", parse_float, repr(0.5 * math.pi), "fixed theta for the azimuthal cut (rad)"),
        Param("points", parse_int, str(ff.DEFAULT_POINTS), "grid points"),
    ),
    "fringe": (
        Param("zeta", parse_complex, "0"),
        Param("phi", parse_float, "0", "relative phase of the balanced state"),
        Param("alpha", parse_optional_complex, "none", "general state amplitude on |R> (with --beta)"),
        Param("beta", parse_optional_complex, "none", "general state amplitude on |L> (with --alpha)"),
        Param("e-field", parse_float, "1", "single-photon field amplitude"),
        Param("wavelength", parse_float, "1"),
        Param("x-start", parse_float, "0"),
        Param("periods", parse_float, "1", "scan length in fringe periods (lambda/2)"),
        Param("points", parse_int, "1001"),
    ),
    "povm": (
        Param("zeta", parse_complex, "0"),
        Param("x-range", parse_range, "0:0.5:51", "detector positions min:max:count"),
        Param("e-field", parse_float, "1"),
        Param("wavelength", parse_float, "1"),
    ),
    "bloch": (
        Param("zeta-range", parse_range, "-1:1:201", "real zeta values min:max:count"),
        Param("x", parse_float, "0", "detector position"),
        Param("wavelength", parse_float, "1"),
    ),
    "resonance": (
        Param("gamma-e", parse_float, "0.5"),
        Param("gamma-m", parse_float, "0.5"),
        Param("gamma-i", parse_rate_or_critical, "1", "internal loss rate, or 'critical' for gamma_e+gamma_m"),
        Param("sweep", choice("detuning", "ratio"), "detuning", "detuning spectrum or gamma_m/gamma_e sweep"),
        Param("delta-range", parse_range, "-10:10:801", "detunings for sweep=detuning"),
        Param("ratio-range", parse_range, "0:4:401", "gamma_m/gamma_e values for sweep=ratio"),
        Param("delta", parse_float, "0", "detuning for sweep=ratio"),
        Param("s-in", parse_complex, "1", "incident amplitude"),
    ),
    "evolve": (
        Param("gamma-e", parse_float, "0.5"),
        Param("gamma-m", parse_float, "0.5"),
        Param("gamma-i", parse_rate_or_critical, "1"),
        Param("delta", parse_float, "0"),
        Param("s-in", parse_complex, "1"),
        Param("a0", parse_complex, "0", "initial mode amplitude"),
        Param("t-end", parse_float, "20"),
        Param("dt", parse_float, "0.005"),
        Param("sample-every", parse_int, "10"),
    ),
    "critical": (
        Param("gamma-r", parse_float, "1"),
        Param("ratio-max", parse_float, "4"),
        Param("points", parse_int, "401"),
    ),
    "sample": (
        Param("zeta", parse_complex, "0"),
        Param("phi", parse_float, "0"),
        Param("events", parse_int, "100000"),
        Param("seed", parse_int, "0"),
        Param("bins", parse_int, "64"),
        Param("e-field", parse_float, "1"),
        Param("wavelength", parse_float, "1"),
        Param("workers", parse_int, "1", "threads; output does not depend on it"),
    ),
    "verify": (),
}

COMMANDS = tuple(PARAMS)


@dataclass
class RunConfig:
    command: str
    parameters: dict[str, Any]
    output_path: Path
    format: str = "csv"
    raw: dict[str, str] = field(default_factory=dict)


# -- config resolution -------------------------------------------------------


def read_config_file(path: str | Path) -> dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from None
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("_", "-")] = value
    return values


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with status 2
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="emdetect", description="Generalized electric-magnetic photodetection simulator.")
    parser.add_argument("--version", action="version", version=f"emdetect {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    for command, params in PARAMS.items():
        p = sub.add_parser(command)
        p.add_argument("--config", default=None, help="flat key = value config file")
        for param in (*params, *COMMON):
            flag = f"--{param.name}"
            extra = [] if param.name != "output" else ["-o"]
            p.add_argument(*extra, flag, dest=param.name, default=argparse.SUPPRESS, help=param.help)
    return parser


def _value_flags() -> set[str]:
    flags = {"--config", "-o"}
    for params in PARAMS.values():
        flags.update(f"--{p.name}" for p in (*params, *COMMON))
    return flags


def _join_values(argv: list[str]) -> list[str]:
    """Glue ``--flag value`` into ``--flag=value`` so values like ``-10:10:801`` are not read as options."""
    flags = _value_flags()
    out: list[str] = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok in flags and i + 1 < len(argv):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def build_config(argv: list[str]) -> RunConfig:
    ns = _build_parser().parse_args(_join_values(argv))
    if ns.command is None:
        raise UsageError(f"missing command; choose one of {', '.join(COMMANDS)}")
    command = ns.command
    params = {p.name: p for p in (*PARAMS[command], *COMMON)}
    raw = {name: p.default for name, p in params.items()}

    if ns.config:
        from_file = read_config_file(ns.config)
        file_command = from_file.pop("command", command)
        if file_command != command:
            raise UsageError(f"config file is for command {file_command!r}, not {command!r}")
        unknown = sorted(set(from_file) - set(params))
        if unknown:
            raise UsageError(f"unknown key(s) for {command}: {', '.join(unknown)}")
        raw.update(from_file)
    for name in params:
        if hasattr(ns, name):
            raw[name] = getattr(ns, name)

    values = {p.name: p.convert(raw[p.name]) for p in PARAMS[command]}
    fmt = raw["format"] or None
    output = raw["output"]
    if not output:
        fmt = fmt or "csv"
        output = str(Path(os.environ.get(OUTPUT_DIR_ENV, ".")) / f"{command}.{fmt}")
    if fmt is None:
        suffix = Path(output).suffix.lower().lstrip(".")
        fmt = suffix if suffix in FORMATS else "csv"
    return RunConfig(command, values, Path(output), choice(*FORMATS)(fmt), raw)


# -- command handlers --------------------------------------------------------


def _state(values: dict[str, Any]) -> op.OnePhotonState:
    alpha, beta = values.get("alpha"), values.get("beta")
    if alpha is None and beta is None:
        return op.OnePhotonState.from_phase(values["phi"])
    if alpha is None or beta is None:
        raise UsageError("--alpha and --beta must be given together")
    return op.OnePhotonState.normalized(alpha, beta)


def _detector(values: dict[str, Any]) -> rs.ResonantDetector:
    ge, gm, gi = values["gamma-e"], values["gamma-m"], values["gamma-i"]
    return rs.ResonantDetector(ge, gm, ge + gm if gi == "critical" else gi)


def _fmt(x: float) -> str:
    return format(float(x), ".6g")


def cmd_farfield(v: dict[str, Any]) -> tuple[ScanTable, str]:
    geom = ff.DipolePairGeometry.from_wavelengths(v["d-over-lambda"], v["wavelength"])
    fixed = v["phi"] if v["cut"] == "polar" else v["theta"]
    table = ff.pattern_scan(geom, v["zeta"], v["cut"], v["points"], fixed)
    note = " (generalized pattern identically zero)" if not np.any(table["generalized"]) else ""
    summary = (
        f"farfield {v['cut']} cut: detector factor {_fmt(table.meta['detector_factor'])}, "
        f"max glauber {_fmt(table.meta['glauber_max'])}, max generalized {_fmt(table.meta['generalized_max'])}{note}"
    )
    return table, summary


def cmd_fringe(v: dict[str, Any]) -> tuple[ScanTable, str]:
    k = 2.0 * math.pi / v["wavelength"]
    period = math.pi / k
    x0 = v["x-start"]
    table = op.fringe_scan(
        _state(v), v["zeta"], op.FieldScale(v["e-field"]), k, (x0, x0 + v["periods"] * period), v["points"]
    )
    summary = (
        f"fringe: extracted visibility {table.meta['visibility_extracted']:.4f} "
        f"(closed form {table.meta['visibility_closed_form']:.4f}), mean level {_fmt(table.meta['mean_level'])}"
    )
    return table, summary


def cmd_povm(v: dict[str, Any]) -> tuple[ScanTable, str]:
    k = 2.0 * math.pi / v["wavelength"]
    lo, hi, n = v["x-range"]
    x = np.linspace(lo, hi, n)
    cols = {name: np.empty(n) for name in ("pi_rr", "pi_rl_re", "pi_rl_im", "pi_ll", "trace", "eig_min", "eig_max")}
    scale = op.FieldScale(v["e-field"])
    for j, xj in enumerate(x):
        m = op.povm_element(v["zeta"], xj, scale, k).matrix
        lo_eig, hi_eig = np.linalg.eigvalsh(m)
        cols["pi_rr"][j] = m[0, 0].real
        cols["pi_rl_re"][j] = m[0, 1].real
        cols["pi_rl_im"][j] = m[0, 1].imag
        cols["pi_ll"][j] = m[1, 1].real
        cols["trace"][j] = np.trace(m).real
        cols["eig_min"][j] = lo_eig
        cols["eig_max"][j] = hi_eig
    zeta = v["zeta"]
    expected_trace = 2.0 * v["e-field"] ** 2 * (1.0 + abs(zeta) ** 2)
    table = ScanTable({"x": x, **cols}, {"zeta": zeta, "k": k, "expected_trace": expected_trace})
    summary = (
        f"povm: trace {_fmt(cols['trace'].max())} (expected {_fmt(expected_trace)}), "
        f"max |smaller eigenvalue| {abs(cols['eig_min']).max():.3g}"
    )
    return table, summary


def cmd_bloch(v: dict[str, Any]) -> tuple[ScanTable, str]:
    k = 2.0 * math.pi / v["wavelength"]
    lo, hi, n = v["zeta-range"]
    zeta = np.linspace(lo, hi, n)
    modes = np.array([op.selected_mode(z, v["x"], k) for z in zeta])
    bloch = np.array([op.bloch_vector(m) for m in modes])
    table = ScanTable(
        {
            "zeta": zeta,
            "c_r_re": modes[:, 0].real,
            "c_r_im": modes[:, 0].imag,
            "c_l_re": modes[:, 1].real,
            "c_l_im": modes[:, 1].imag,
            "bloch_x": bloch[:, 0],
            "bloch_y": bloch[:, 1],
            "bloch_z": bloch[:, 2],
            "path_bias": op.path_bias(zeta),
            "visibility": op.visibility(zeta),
        },
        {"x": v["x"], "k": k},
    )
    summary = f"bloch: z from {_fmt(bloch[0, 2])} at zeta={_fmt(zeta[0])} to {_fmt(bloch[-1, 2])} at zeta={_fmt(zeta[-1])}"
    return table, summary


def cmd_resonance(v: dict[str, Any]) -> tuple[ScanTable, str]:
    if v["sweep"] == "ratio":
        lo, hi, n = v["ratio-range"]
        gi = None if v["gamma-i"] == "critical" else v["gamma-i"]
        table = rs.coupling_ratio_scan(v["gamma-e"], (lo, hi), n, gi, v["delta"])
        j = int(np.argmin(table["dark_output"]))
        summary = (
            f"resonance ratio sweep: min dark output {_fmt(table['dark_output'][j])} at gamma_m/gamma_e="
            f"{_fmt(table['ratio'][j])}, absorption there {_fmt(table['absorption'][j])}"
        )
        return table, summary
    det = _detector(v)
    lo, hi, n = v["delta-range"]
    table = rs.absorption_spectrum(det, (lo, hi), n)
    table.columns["absorbed_power"] = table["absorption"] * abs(v["s-in"]) ** 2
    fwhm = table.meta["fwhm"]
    summary = (
        f"resonance: peak A = {_fmt(table.meta['peak_absorption'])} at detuning {_fmt(table.meta['peak_detuning'])}, "
        f"FWHM {'n/a' if fwhm is None else _fmt(fwhm)} (linewidth {_fmt(det.linewidth)})"
    )
    return table, summary


def cmd_evolve(v: dict[str, Any]) -> tuple[ScanTable, str]:
    det = _detector(v)
    drive = rs.DriveSpec(v["delta"], v["s-in"])
    table = rs.time_evolve(det, drive, v["t-end"], v["dt"], v["a0"], v["sample-every"])
    a = table["re_a"] + 1j * table["im_a"]
    exact = rs.relaxation_closed_form(det, drive, table["t"], v["a0"])
    table.columns["closed_form_error"] = np.abs(a - exact)
    a_ss = table.meta["a_steady"]
    summary = (
        f"evolve: a(t_end) = {format_value(complex(a[-1]))}, steady state {format_value(a_ss)}, "
        f"max deviation from closed form {table['closed_form_error'].max():.3g}"
    )
    return table, summary


def cmd_critical(v: dict[str, Any]) -> tuple[ScanTable, str]:
    table = rs.critical_coupling_locus(v["gamma-r"], v["points"], v["ratio-max"])
    summary = f"critical: max A(omega0) = {_fmt(table.meta['max_absorption'])} at gamma_i/gamma_r = {_fmt(table.meta['argmax_ratio'])}"
    return table, summary


def cmd_sample(v: dict[str, Any]) -> tuple[ScanTable, str]:
    k = 2.0 * math.pi / v["wavelength"]
    state = op.OnePhotonState.from_phase(v["phi"])
    scale = op.FieldScale(v["e-field"])
    cfg = sm.SamplerConfig(v["events"], v["seed"], v["bins"])
    x = sm.sample_positions(state, v["zeta"], scale, k, cfg, workers=max(1, v["workers"]))
    table = sm.events_table(x, state, v["zeta"], k, cfg, phi=v["phi"])
    summary = f"sample: {v['events']} events"
    if v["events"] >= sm.MIN_EVENTS_FOR_ESTIMATE:
        est = sm.estimate_visibility(x, k, cfg)
        _, p = sm.histogram_chi2(x, state, v["zeta"], scale, k, cfg)
        table.meta.update(v_hat=est.v_hat, v_err=est.v_err, phase_hat=est.phase_hat, chi2_pvalue=p)
        summary += (
            f", visibility {est.v_hat:.4f} +- {est.v_err:.4f} (closed form {op.visibility(v['zeta']):.4f}), "
            f"chi2 p = {p:.3g}"
        )
    return table, summary


def cmd_verify(v: dict[str, Any]) -> tuple[ScanTable, str]:
    from .verify import CHECKS

    results = []
    for check in CHECKS:
        r = check()
        results.append(r)
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<28} max error {r.max_error:.3e}  tol {r.tolerance:.1e}  {r.detail}")
    table = ScanTable(
        {
            "check": np.array([r.name for r in results], dtype=object),
            "max_error": np.array([r.max_error for r in results]),
            "tolerance": np.array([r.tolerance for r in results]),
            "passed": np.array([r.passed for r in results], dtype=object),
        },
        {"all_passed": all(r.passed for r in results)},
    )
    n_pass = sum(r.passed for r in results)
    return table, f"verify: {n_pass}/{len(results)} checks passed"


HANDLERS: dict[str, Callable[[dict[str, Any]], tuple[ScanTable, str]]] = {
    "farfield": cmd_farfield,
    "fringe": cmd_fringe,
    "povm": cmd_povm,
    "bloch": cmd_bloch,
    "resonance": cmd_resonance,
    "evolve": cmd_evolve,
    "critical": cmd_critical,
    "sample": cmd_sample,
    "verify": cmd_verify,
}


def run(config: RunConfig) -> int:
    """Execute one resolved run; returns the process exit status."""
    table, summary = HANDLERS[config.command](config.parameters)
    meta = {"command": config.command, "emdetect_version": __version__}
    for p in PARAMS[config.command]:
        meta[f"param.{p.name}"] = config.parameters[p.name]
    meta.update(table.meta)
    table.meta = meta
    table.write(config.output_path, config.format)
    print(f"{summary} -> {config.output_path}")
    if config.command == "verify" and not table.meta["all_passed"]:
        return 2
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        config = build_config(argv)
        return run(config)
    except UsageError as exc:
        print(f"emdetect: usage error: {exc}", file=sys.stderr)
        return 1
    except PreconditionError as exc:
        print(f"emdetect: precondition violated: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"emdetect: I/O error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
