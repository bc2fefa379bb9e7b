"""Batch command-line interface: ``rabi-cf <command> [options]``.

Runs are described by an INI-style config file (sections of ``key = value``)
plus ``--set key=value`` overrides; overrides win. Results go to CSV (frozen
column orders) or JSON (schemas shipped in ``rabi_cf/schemas``).
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from importlib import resources
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .bargmann import (
    DIVERGENCE_N_MAX,
    DIVERGENCE_STALL_TOL,
    WavefunctionSeries,
    divergence_report,
    eval_wavefunction,
)
from .errors import (
    NoCharacteristicEquation,
    NumericalFailure,
    ParameterError,
    RabiCFError,
    RegimeMismatch,
    RegimeUnsupported,
)
from .model import (
    Family,
    ModelParams,
    Parity,
    SectorLabel,
    asymptotic_exponents,
    characteristic_roots,
    check_block,
    classify_regime,
    enumerate_blocks,
    fock_offset,
    parse_block,
)
from .oracle import DEFAULT_TRUNCATION, convergence_study, oracle_levels
from .recurrence import backward_minimal
from .spectrum import (
    CONFIRM_TOL,
    CROSSCHECK_TOL,
    GRID_STEP,
    REFINE_TOL,
    compute_spectrum,
    crosscheck_oracle,
    default_window,
    ordered_map,
)

COMMANDS = ("regime", "blocks", "spectrum", "oracle", "compare", "wavefunction", "diverge", "convergence")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_REGIME = 3
EXIT_NUMERICAL = 4

SPECTRUM_COLUMNS = ("block", "parity", "index", "energy", "f_residual", "pincherle_residual")
COMPARE_COLUMNS = SPECTRUM_COLUMNS + ("oracle_energy", "gap")
TRACE_COLUMNS = ("block", "parity", "energy", "f_value", "suspected_pole")
ORACLE_COLUMNS = ("block", "parity", "index", "energy", "truncation")
REGIME_COLUMNS = ("verdict", "ratio", "t1", "t2")
BLOCKS_COLUMNS = ("block", "parity", "fock_offset")
WAVEFUNCTION_COLUMNS = ("block", "parity", "energy", "angle_deg", "radius", "re", "im", "abs", "tail_bound")
DIVERGE_COLUMNS = (
    "block", "parity", "energy", "n_max", "log10_growth", "late_relative_growth", "tail_exponent", "flagged",
)
CONVERGENCE_COLUMNS = ("block", "parity", "truncation", "level", "energy", "increment")


@dataclass(frozen=True)
class Key:
    section: str
    default: str
    help: str


# Every config key, its section and its default (as written in a config file).
KEYS: dict[str, Key] = {
    "family": Key("model", "two-mode", "two-mode | k-photon"),
    "k": Key("model", "2", "photon number of the k-photon family"),
    "omega": Key("model", "1.0", "boson frequency, > 0"),
    "delta": Key("model", "0.0", "level splitting"),
    "g": Key("model", "0.5", "coupling strength"),
    "blocks": Key("sectors", "all:2", "block labels, comma list (1/2,1) or all:N"),
    "parity": Key("sectors", "both", "plus | minus | both"),
    "e_min": Key("window", "auto", "window lower edge; auto = -2 omega"),
    "e_max": Key("window", "auto", "window upper edge; auto = 2 omega (levels + 2 block)"),
    "levels": Key("window", "6", "levels L used by the automatic window"),
    "grid_step": Key("numerics", str(GRID_STEP), "scan grid step in units of omega"),
    "grid_points": Key("numerics", "auto", "scan grid size (>= 16); auto derives it from grid_step"),
    "refine_tol": Key("numerics", repr(REFINE_TOL), "bracket width tolerance, relative to omega"),
    "confirm_tol": Key("numerics", repr(CONFIRM_TOL), "|F| and |Pincherle residual| acceptance level"),
    "crosscheck_tol": Key("numerics", repr(CROSSCHECK_TOL), "oracle match tolerance, relative to omega"),
    "truncation": Key("numerics", str(DEFAULT_TRUNCATION), "oracle truncation N"),
    "energy": Key("wavefunction", "auto", "eigenvalue to expand; auto = lowest confirmed root"),
    "terms": Key("wavefunction", "200", "series terms kept"),
    "radius_max": Key("wavefunction", "3.0", "largest |z| sampled"),
    "samples": Key("wavefunction", "31", "samples per ray, including z = 0"),
    "angles": Key("wavefunction", "0,90", "ray angles in degrees (0 = real axis)"),
    "energies": Key("diverge", "-1,0,1,2,5", "energy samples"),
    "n_max": Key("diverge", str(DIVERGENCE_N_MAX), "terms of the forward recursion"),
    "stall_tol": Key("diverge", repr(DIVERGENCE_STALL_TOL), "flag when late partial-sum growth exceeds this"),
    "truncations": Key("convergence", "100,200,400,800", "ascending truncation list"),
    "study_levels": Key("convergence", "1", "lowest levels tracked"),
    "format": Key("output", "csv", "csv | json"),
    "out": Key("output", "-", "output path; - = standard output"),
    "trace": Key("output", "false", "spectrum: also emit (E, F(E), suspected_pole) grid samples"),
}


class ConfigError(ParameterError):
    """Malformed or unknown configuration entry."""


def _keys_help() -> str:
    lines = ["config keys (section: key = default):"]
    for name, key in KEYS.items():
        lines.append(f"  [{key.section}] {name} = {key.default}    {key.help}")
    lines.append("")
    lines.append("exit status: 0 ok, 2 validation error, 3 unsupported regime, 4 numerical failure")
    lines.append("environment: RABI_CF_THREADS caps the worker pool (default: CPU count)")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rabi-cf",
        description="Continued-fraction spectra of the two-mode and k-photon Rabi models.",
        epilog=_keys_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=Path, help="INI-style run configuration")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    parser.add_argument("--out", help="output path (overrides [output] out)")
    parser.add_argument("--format", choices=("csv", "json"), help="output format (overrides [output] format)")
    parser.add_argument("--trace", action="store_true", help="spectrum: emit spectral-function grid samples")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return parser


def load_settings(config: Path | None, overrides: list[str]) -> dict[str, str]:
    """Merge defaults, the config file and ``KEY=VALUE`` overrides."""
    values = {name: key.default for name, key in KEYS.items()}
    if config is not None:
        parser = configparser.ConfigParser(interpolation=None)
        try:
            with open(config, encoding="utf-8") as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {config}: {exc}") from exc
        known = {key.section for key in KEYS.values()}
        for section in parser.sections():
            if section not in known:
                raise ConfigError(f"unknown config section [{section}]")
            for name, value in parser.items(section):
                if name not in KEYS:
                    raise ConfigError(f"unknown config key {name!r} in [{section}]")
                if KEYS[name].section != section:
                    raise ConfigError(f"key {name!r} belongs in [{KEYS[name].section}], not [{section}]")
                values[name] = value.strip()
    for item in overrides:
        name, sep, value = item.partition("=")
        name = name.strip()
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        if name not in KEYS:
            raise ConfigError(f"unknown config key {name!r}")
        values[name] = value.strip()
    return values


def _float(values, name, allow_auto=False):
    text = values[name]
    if allow_auto and text.lower() == "auto":
        return None
    try:
        out = float(text)
    except ValueError:
        raise ConfigError(f"{name} must be a number, got {text!r}") from None
    if not math.isfinite(out):
        raise ConfigError(f"{name} must be finite")
    return out


def _int(values, name, allow_auto=False, minimum=None):
    text = values[name]
    if allow_auto and text.lower() == "auto":
        return None
    try:
        out = int(text)
    except ValueError:
        raise ConfigError(f"{name} must be an integer, got {text!r}") from None
    if minimum is not None and out < minimum:
        raise ConfigError(f"{name} must be at least {minimum}")
    return out


def _float_list(values, name):
    try:
        return [float(x) for x in values[name].split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"{name} must be a comma-separated list of numbers") from None


def _bool(values, name):
    text = values[name].strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{name} must be a boolean, got {values[name]!r}")


def params_from(values) -> ModelParams:
    family = values["family"].strip().lower()
    if family not in (f.value for f in Family):
        raise ConfigError(f"family must be two-mode or k-photon, got {values['family']!r}")
    k = _int(values, "k", minimum=1) if family == Family.K_PHOTON.value else 1
    return ModelParams(Family(family), _float(values, "omega"), _float(values, "delta"), _float(values, "g"), k)


def sectors_from(values, params: ModelParams) -> list[SectorLabel]:
    text = values["blocks"].strip()
    if text.lower().startswith("all:"):
        try:
            count = int(text[4:])
        except ValueError:
            raise ConfigError(f"blocks 'all:N' needs an integer N, got {text!r}") from None
        blocks = enumerate_blocks(params, count)
    else:
        blocks = [check_block(params, parse_block(b)) for b in text.split(",") if b.strip()]
        if not blocks:
            raise ConfigError("blocks is empty")
    parity = values["parity"].strip().lower()
    if parity == "both":
        parities = list(Parity)
    elif parity in (p.value for p in Parity):
        parities = [Parity(parity)]
    else:
        raise ConfigError(f"parity must be plus, minus or both, got {values['parity']!r}")
    return [SectorLabel(b, p) for b in blocks for p in parities]


def window_from(values, params, sector) -> tuple[float, float]:
    lo, hi = default_window(params, sector, _int(values, "levels", minimum=1))
    e_min = _float(values, "e_min", allow_auto=True)
    e_max = _float(values, "e_max", allow_auto=True)
    lo = lo if e_min is None else e_min
    hi = hi if e_max is None else e_max
    if not lo < hi:
        raise ConfigError(f"empty energy window [{lo}, {hi}]")
    return lo, hi


def grid_from(values, params, lo, hi) -> int:
    points = _int(values, "grid_points", allow_auto=True, minimum=16)
    if points is not None:
        return points
    step = _float(values, "grid_step")
    if step <= 0:
        raise ConfigError("grid_step must be positive")
    return max(16, int(math.ceil((hi - lo) / (step * params.omega))) + 1)


# ---------------------------------------------------------------- commands


@dataclass
class Table:
    columns: tuple
    rows: list


@dataclass
class Output:
    kind: str
    payload: dict
    tables: dict  # name -> Table


def _num(x):
    """JSON form of a real or complex number."""
    if isinstance(x, complex):
        if x.imag == 0.0:
            return float(x.real)
        return {"re": float(x.real), "im": float(x.imag)}
    if x is None:
        return None
    return float(x)


def _sector_dict(sector: SectorLabel) -> dict:
    return {"block": str(sector.block), "parity": sector.parity.value}


def cmd_regime(values) -> Output:
    params = params_from(values)
    regime = classify_regime(params)
    payload = {"params": params.as_dict(), "verdict": regime.verdict.value, "ratio": regime.ratio}
    t1 = t2 = None
    if params.g != 0.0:
        try:
            roots = characteristic_roots(params)
            t1, t2 = roots.t1, roots.t2
            payload.update(t1=_num(t1), t2=_num(t2), distinct_real=roots.distinct_real)
        except NoCharacteristicEquation:
            payload.update(t1=None, t2=None, distinct_real=None)
        ex = asymptotic_exponents(params)
        payload["exponents"] = {
            "a": ex.a, "alpha": ex.alpha, "b": ex.b, "beta": ex.beta, "p1_below_segment": ex.p1_below_segment,
        }
    row = (regime.verdict.value, regime.ratio, t1, t2)
    return Output("regime", payload, {"regime": Table(REGIME_COLUMNS, [row])})


def cmd_blocks(values) -> Output:
    params = params_from(values)
    sectors = sectors_from(values, params)
    rows = []
    for s in sectors:
        offset = fock_offset(params, s.block) if params.family is Family.K_PHOTON else None
        rows.append((str(s.block), s.parity.value, offset))
    payload = {
        "params": params.as_dict(),
        "sectors": [dict(_sector_dict(s), fock_offset=r[2]) for s, r in zip(sectors, rows)],
    }
    return Output("blocks", payload, {"blocks": Table(BLOCKS_COLUMNS, rows)})


def _spectra(values, params, sectors):
    tol = _float(values, "refine_tol")
    confirm = _float(values, "confirm_tol")

    def run(sector):
        lo, hi = window_from(values, params, sector)
        return compute_spectrum(params, sector, lo, hi, grid_from(values, params, lo, hi), tol, confirm)

    return ordered_map(run, sectors)


def _spectrum_rows(result):
    block, parity = str(result.sector.block), result.sector.parity.value
    return [(block, parity, i, ev.energy, ev.f_residual, ev.pincherle_residual)
            for i, ev in enumerate(result.eigenvalues)]


def _spectrum_json(result, trace: bool) -> dict:
    out = dict(_sector_dict(result.sector))
    out["window"] = list(result.window)
    out["eigenvalues"] = [
        {"energy": ev.energy, "f_residual": ev.f_residual, "pincherle_residual": ev.pincherle_residual,
         "oracle_gap": ev.oracle_gap}
        for ev in result.eigenvalues
    ]
    out["diagnostics"] = result.diagnostics.as_dict()
    if trace:
        out["trace"] = [[s.energy, s.f_value, s.suspected_pole] for s in result.diagnostics.samples]
    return out


def _trace_rows(result):
    block, parity = str(result.sector.block), result.sector.parity.value
    return [(block, parity, s.energy, s.f_value, s.suspected_pole) for s in result.diagnostics.samples]


def cmd_spectrum(values) -> Output:
    params = params_from(values)
    sectors = sectors_from(values, params)
    trace = _bool(values, "trace")
    results = _spectra(values, params, sectors)
    rows = [row for r in results for row in _spectrum_rows(r)]
    tables = {"spectrum": Table(SPECTRUM_COLUMNS, rows)}
    if trace:
        tables["trace"] = Table(TRACE_COLUMNS, [row for r in results for row in _trace_rows(r)])
    payload = {"params": params.as_dict(), "sectors": [_spectrum_json(r, trace) for r in results]}
    return Output("spectrum", payload, tables)


def cmd_oracle(values) -> Output:
    params = params_from(values)
    truncation = _int(values, "truncation", minimum=2)
    rows, sectors_json = [], []
    for s in sectors_from(values, params):
        lo, hi = window_from(values, params, s)
        levels = oracle_levels(params, s, lo, hi, truncation)
        rows += [(str(s.block), s.parity.value, i, float(e), truncation) for i, e in enumerate(levels)]
        sectors_json.append(dict(_sector_dict(s), window=[lo, hi], energies=[float(e) for e in levels]))
    payload = {"params": params.as_dict(), "truncation": truncation, "sectors": sectors_json}
    return Output("oracle", payload, {"oracle": Table(ORACLE_COLUMNS, rows)})


def cmd_compare(values) -> Output:
    params = params_from(values)
    sectors = sectors_from(values, params)
    truncation = _int(values, "truncation", minimum=2)
    match_tol = _float(values, "crosscheck_tol")
    results = _spectra(values, params, sectors)
    rows, sectors_json = [], []
    for res in results:
        lo, hi = res.window
        oracle = oracle_levels(params, res.sector, lo, hi, truncation)
        report = crosscheck_oracle(res, oracle, match_tol)
        block, parity = str(res.sector.block), res.sector.parity.value
        nearest = {ev.energy: ev.energy - ev.oracle_gap for ev in res.eigenvalues if ev.oracle_gap is not None}
        for i, ev in enumerate(res.eigenvalues):
            rows.append((block, parity, i, ev.energy, ev.f_residual, ev.pincherle_residual,
                         nearest.get(ev.energy), ev.oracle_gap))
        for o in report.unmatched_oracle:
            if o not in nearest.values():
                rows.append((block, parity, None, None, None, None, o, None))
        entry = _spectrum_json(res, False)
        entry["oracle"] = [float(e) for e in oracle]
        entry["unmatched_cf"] = report.unmatched_cf
        entry["unmatched_oracle"] = report.unmatched_oracle
        entry["max_gap"] = report.max_gap
        sectors_json.append(entry)
    payload = {"params": params.as_dict(), "truncation": truncation, "match_tol": match_tol, "sectors": sectors_json}
    return Output("compare", payload, {"compare": Table(COMPARE_COLUMNS, rows)})


def cmd_wavefunction(values) -> Output:
    params = params_from(values)
    sectors = sectors_from(values, params)
    terms = _int(values, "terms", minimum=2)
    radius_max = _float(values, "radius_max")
    samples = _int(values, "samples", minimum=2)
    angles = _float_list(values, "angles")
    energy_cfg = _float(values, "energy", allow_auto=True)
    rows, sectors_json = [], []
    for s in sectors:
        if energy_cfg is None:
            (res,) = _spectra(values, params, [s])
            if not res.eigenvalues:
                raise NumericalFailure(f"no confirmed eigenvalue in the window of sector {s}")
            energy = res.eigenvalues[0].energy
        else:
            energy = energy_cfg
        seq = backward_minimal(params, s, energy, terms)
        values_json = []
        for angle in angles:
            for radius in np.linspace(0.0, radius_max, samples):
                z = complex(radius * math.cos(math.radians(angle)), radius * math.sin(math.radians(angle)))
                val, bound = eval_wavefunction(WavefunctionSeries.from_sequence(seq, z))
                row = (str(s.block), s.parity.value, energy, angle, float(radius), val.real, val.imag, abs(val), bound)
                rows.append(row)
                values_json.append(list(row[3:]))
        sectors_json.append(dict(_sector_dict(s), energy=energy, samples=values_json))
    payload = {"params": params.as_dict(), "terms": terms, "sectors": sectors_json}
    return Output("wavefunction", payload, {"wavefunction": Table(WAVEFUNCTION_COLUMNS, rows)})


def cmd_diverge(values) -> Output:
    params = params_from(values)
    energies = _float_list(values, "energies")
    n_max = _int(values, "n_max", minimum=8)
    stall = _float(values, "stall_tol")
    rows, sectors_json = [], []
    for s in sectors_from(values, params):
        report = divergence_report(params, s, energies, n_max, stall)
        block, parity = str(s.block), s.parity.value
        samples = []
        for smp in report.samples:
            row = (block, parity, smp.energy, n_max, smp.log10_growth_over_first, smp.late_relative_growth,
                   smp.tail_exponent, smp.flagged)
            rows.append(row)
            samples.append(dict(zip(DIVERGE_COLUMNS[2:], row[2:])))
        sectors_json.append(dict(_sector_dict(s), samples=samples, all_flagged=report.all_flagged))
    payload = {"params": params.as_dict(), "stall_tol": stall, "sectors": sectors_json}
    return Output("diverge", payload, {"diverge": Table(DIVERGE_COLUMNS, rows)})


def cmd_convergence(values) -> Output:
    params = params_from(values)
    truncations = [int(t) for t in _float_list(values, "truncations")]
    levels = _int(values, "study_levels", minimum=1)
    rows, sectors_json = [], []
    for s in sectors_from(values, params):
        table = convergence_study(params, s, truncations, levels)
        block, parity = str(s.block), s.parity.value
        entry_rows = []
        for n, level, energy, inc in table.rows():
            inc = None if math.isnan(inc) else inc
            rows.append((block, parity, n, level, energy, inc))
            entry_rows.append({"truncation": n, "level": level, "energy": energy, "increment": inc})
        sectors_json.append(dict(_sector_dict(s), rows=entry_rows))
    payload = {"params": params.as_dict(), "truncations": truncations, "sectors": sectors_json}
    return Output("convergence", payload, {"convergence": Table(CONVERGENCE_COLUMNS, rows)})


DISPATCH = {
    "regime": cmd_regime,
    "blocks": cmd_blocks,
    "spectrum": cmd_spectrum,
    "oracle": cmd_oracle,
    "compare": cmd_compare,
    "wavefunction": cmd_wavefunction,
    "diverge": cmd_diverge,
    "convergence": cmd_convergence,
}


# ------------------------------------------------------------------ output


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, complex):
        return repr(x.real) if x.imag == 0.0 else f"{x.real!r}{x.imag:+}j"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, Fraction):
        return str(x)
    return str(x)


def render_csv(table: Table) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([_cell(x) for x in row])
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, complex):
        return _num(x)
    return x


def load_schema(command: str) -> dict:
    """JSON schema of a command's JSON output, as shipped with the package."""
    if command not in COMMANDS:
        raise KeyError(command)
    text = resources.files("rabi_cf").joinpath("schemas", f"{command}.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def render_json(output: Output) -> str:
    doc = {"command": output.kind, "version": __version__}
    doc.update(output.payload)
    return json.dumps(_jsonable(doc), indent=2, allow_nan=False) + "\n"


def write_output(output: Output, fmt: str, out: str) -> None:
    if fmt == "json":
        documents = {None: render_json(output)}
    else:
        names = list(output.tables)
        documents = {None: render_csv(output.tables[names[0]])}
        for name in names[1:]:
            documents[name] = render_csv(output.tables[name])
    if out == "-":
        parts = list(documents.values())
        sys.stdout.write("\n".join(parts))
        return
    path = Path(out)
    for name, text in documents.items():
        target = path if name is None else path.with_name(f"{path.stem}.{name}{path.suffix or '.csv'}")
        with open(target, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        values = load_settings(args.config, args.overrides)
        if args.out is not None:
            values["out"] = args.out
        if args.format is not None:
            values["format"] = args.format
        if args.trace:
            values["trace"] = "true"
        fmt = values["format"].lower()
        if fmt not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {values['format']!r}")
        output = DISPATCH[args.command](values)
        write_output(output, fmt, values["out"])
    except RegimeUnsupported as exc:
        print(f"rabi-cf: unsupported regime: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except NumericalFailure as exc:
        print(f"rabi-cf: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (RegimeMismatch, ParameterError, ValueError) as exc:
        print(f"rabi-cf: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except RabiCFError as exc:
        print(f"rabi-cf: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"rabi-cf: cannot write output: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
