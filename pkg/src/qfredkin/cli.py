"""Command-line experiment runner.

Each subcommand writes a JSON summary and one or more CSV tables into the
output directory.  Every file carries the resolved configuration and seed,
so a run can be repeated from its own outputs.

Exit codes: 0 success, 2 configuration error, 3 calibration failure,
4 fit or reconstruction failure.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import io
import json
import math
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import analysis, circuit, measurement, tomography
from .circuit import CalibrationError, GateConfig

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CALIBRATION = 3
EXIT_FIT = 4


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    intrinsic_phase: float = 0.0
    zeta1: float = 1.0
    zeta2: float = 1.0
    collection: str = "single-port"
    trigger: str = "D-only"
    extinction: float = 0.0
    truth_table_shots: int = 620
    qst_events: int = 5029
    mermin_events: int = 747
    svetlichny_events: int = 2348
    mc_samples: int = 500
    fringe_shots: int = 2000
    theta_points: int = 24
    mixed_m: tuple = (0.0, 0.25, 0.5, 0.75, 1.0)
    mixed_convention: str = "equal-phase"
    hom_zeta: float = 0.95
    hom_sigma: float = 1.0
    hom_span: float = 4.0
    hom_points: int = 41
    seed: Optional[int] = None
    exact: bool = False
    out: str = "results"

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, int) and not isinstance(v, bool) and f.type == "int" and v < 0:
                raise ConfigError(f"{f.name} must be non-negative")
        for name in ("zeta1", "zeta2", "extinction", "hom_zeta"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if self.collection not in ("single-port", "both-ports"):
            raise ConfigError(f"collection must be single-port or both-ports, got {self.collection!r}")
        if self.trigger not in ("D-only", "both-with-feedforward"):
            raise ConfigError(f"trigger must be D-only or both-with-feedforward, got {self.trigger!r}")
        if self.mixed_convention not in ("equal-phase", "anti-phase-11"):
            raise ConfigError(f"mixed_convention must be equal-phase or anti-phase-11")
        if any(not 0.0 <= m <= 1.0 for m in self.mixed_m):
            raise ConfigError("mixed_m values must lie in [0, 1]")
        if self.theta_points < 3:
            raise ConfigError("theta_points must be at least 3")
        if self.hom_sigma <= 0 or self.hom_points < 1:
            raise ConfigError("hom_sigma must be positive and hom_points at least 1")
        if not math.isfinite(self.intrinsic_phase):
            raise ConfigError("intrinsic_phase must be finite")

    def gate(self) -> GateConfig:
        return GateConfig(
            intrinsic_phase=self.intrinsic_phase,
            zeta1=self.zeta1,
            zeta2=self.zeta2,
            collection=self.collection,
            trigger=self.trigger,
        )

    def as_dict(self) -> dict:
        # where files land does not affect their content
        d = dataclasses.asdict(self)
        del d["out"]
        d["mixed_m"] = list(self.mixed_m)
        return d

    def require_seed(self) -> int:
        if self.seed is None:
            raise ConfigError("sampled runs need a seed (--seed or seed = N in the config)")
        return self.seed


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _coerce(name: str, kind: str, text: str):
    try:
        if kind == "float":
            return float(text)
        if kind == "int":
            return int(text)
        if kind == "bool":
            return _parse_bool(text)
        if kind == "tuple":
            return tuple(float(x) for x in text.replace(",", " ").split())
        if kind == "Optional[int]":
            return None if text.strip().lower() in ("", "none") else int(text)
        return text.strip()
    except ValueError as exc:
        raise ConfigError(f"{name}: {exc}") from None


def load_config(path: Optional[str]) -> dict:
    """Read a flat ``key = value`` file (an optional ``[experiment]`` header is allowed)."""
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    if not text.lstrip().startswith("["):
        text = "[experiment]\n" + text
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    if parser.sections() != ["experiment"]:
        raise ConfigError("config must contain only an [experiment] section")
    kinds = {f.name: f.type for f in fields(ExperimentConfig)}
    out = {}
    for key, value in parser["experiment"].items():
        if key not in kinds:
            raise ConfigError(f"unknown config key {key!r}")
        out[key] = _coerce(key, kinds[key], value)
    return out


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    values = load_config(args.config)
    overrides = {"seed": args.seed, "out": args.out, "zeta1": args.zeta1, "zeta2": args.zeta2}
    values.update({k: v for k, v in overrides.items() if v is not None})
    if args.exact:
        values["exact"] = True
    if args.shots is not None:
        key = _SHOT_KEYS.get(args.command)
        if key is None:
            raise ConfigError(f"--shots does not apply to {args.command}")
        values[key] = args.shots
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


# -- output helpers ------------------------------------------------------------------


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(x, np.integer):
        return int(x)
    return x


def _header(cfg: ExperimentConfig, command: str) -> dict:
    return {"schema": f"qfredkin.{command}.v{SCHEMA_VERSION}", "config": cfg.as_dict(), "seed": cfg.seed}


def _write_json(out: Path, name: str, cfg: ExperimentConfig, command: str, payload: dict) -> Path:
    doc = _header(cfg, command)
    doc["result"] = payload
    path = out / f"{name}.json"
    path.write_text(json.dumps(_jsonable(doc), sort_keys=True, indent=2) + "\n")
    return path


def _write_csv(out: Path, name: str, cfg: ExperimentConfig, command: str, header: list, rows) -> Path:
    buf = io.StringIO()
    buf.write(f"# {json.dumps(_jsonable(_header(cfg, command)), sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([f"{x:.12g}" if isinstance(x, float) else x for x in row])
    path = out / f"{name}.csv"
    path.write_text(buf.getvalue())
    return path


def _complex_rows(rho: np.ndarray):
    for i, row in enumerate(rho):
        for j, z in enumerate(row):
            yield [i, j, float(z.real), float(z.imag)]


def _calibrated_gate(cfg: ExperimentConfig, sign: int) -> GateConfig:
    """Calibrate on a coherent gate, then switch the configured dephasing back on."""
    gate = cfg.gate()
    cal = circuit.calibrated(replace(gate, zeta1=1.0, zeta2=1.0), sign)
    return replace(cal, zeta1=gate.zeta1, zeta2=gate.zeta2)


# -- subcommands ---------------------------------------------------------------------


def cmd_truth_table(cfg: ExperimentConfig, out: Path) -> dict:
    gate = _calibrated_gate(cfg, +1)
    if cfg.exact:
        tt = analysis.truth_table(gate, extinction=cfg.extinction)
    else:
        tt = analysis.truth_table(gate, cfg.truth_table_shots, cfg.require_seed(), cfg.extinction)
    payload = analysis.truth_table_to_json(tt)
    labels = payload["inputs"]
    _write_json(out, "truth_table", cfg, "truth-table", payload)
    for name, m in (("truth_table_measured", tt.measured), ("truth_table_ideal", tt.ideal)):
        _write_csv(out, name, cfg, "truth-table", ["input"] + labels, ([lab] + [float(x) for x in row] for lab, row in zip(labels, m)))
    return {"overlap": tt.overlap}


def cmd_ghz(cfg: ExperimentConfig, out: Path, kind: str) -> dict:
    sign = +1 if kind.endswith("+") else -1
    gate = _calibrated_gate(cfg, sign)
    target = circuit.ghz_target(kind)
    rho_gate = circuit.run_gate(circuit.ghz_preparation(kind), gate).density_matrix()
    settings = measurement.tomography_settings(3)
    payload = {"state": kind, "theta": gate.theta, "target": [[z.real, z.imag] for z in target]}
    if cfg.exact:
        rho = rho_gate
        payload.update(
            fidelity=tomography.fidelity(rho, target), sigma_fidelity=0.0,
            purity=tomography.purity(rho), sigma_purity=0.0, exact_mode=True,
        )
        records = []
    else:
        seed = cfg.require_seed()
        ss = np.random.SeedSequence(seed)
        sample_seed, mc_seed = ss.spawn(2)
        records = measurement.sample_records(rho_gate, settings, cfg.qst_events, np.random.default_rng(sample_seed))
        res = tomography.tomography(records, target, cfg.mc_samples, mc_seed)
        rho = res.rho
        payload.update(
            fidelity=res.fidelity, sigma_fidelity=res.sigma_fidelity, purity=res.purity,
            sigma_purity=res.sigma_purity, loglik=res.loglik, iterations=res.iterations,
            converged=res.converged, exact_mode=False,
        )
    payload["rho"] = tomography.density_to_json(rho)
    name = f"ghz_{kind.replace('+', 'plus').replace('-', 'minus')}"
    _write_json(out, name, cfg, "ghz", payload)
    _write_csv(out, f"{name}_rho", cfg, "ghz", ["row", "col", "re", "im"], _complex_rows(rho))
    if records:
        labels = records[0].setting.outcome_labels()
        _write_csv(out, f"{name}_counts", cfg, "ghz", ["setting"] + labels, ([r.setting.name] + [int(c) for c in r.counts] for r in records))
    return {"fidelity": payload["fidelity"], "purity": payload["purity"]}


def cmd_inequality(cfg: ExperimentConfig, out: Path, kind: str) -> dict:
    gate = _calibrated_gate(cfg, +1)
    rho = circuit.run_gate(circuit.ghz_preparation("2+"), gate).density_matrix()
    labels = [",".join(b.name for b in s.bases) for s in analysis.inequality_settings(kind)]
    bound = analysis.BOUNDS[kind]
    if cfg.exact:
        value = analysis.inequality_value(rho, kind)
        corr = [analysis.correlator(rho, *s.bases) for s in analysis.inequality_settings(kind)]
        payload = {
            "value": value, "sigma": 0.0, "bound": bound, "significance": math.copysign(math.inf, value - bound) if value != bound else 0.0,
            "exact_mode": True, "correlators": corr, "settings": labels,
        }
        rows = [[lab, c] for lab, c in zip(labels, corr)]
        header = ["setting", "correlator"]
    else:
        total = cfg.mermin_events if kind == "mermin" else cfg.svetlichny_events
        s = analysis.sample_inequality(rho, kind, total, cfg.require_seed())
        payload = {
            "value": s.value, "sigma": s.sigma, "bound": bound, "significance": s.significance,
            "exact_mode": False, "correlators": list(s.correlators), "settings": labels,
            "counts": [list(c) for c in s.counts], "events": total,
        }
        rows = [[lab, e] + list(c) for lab, e, c in zip(labels, s.correlators, s.counts)]
        header = ["setting", "correlator"] + measurement.BasisSetting.from_name("ZZZ").outcome_labels()
    _write_json(out, kind, cfg, kind, payload)
    _write_csv(out, kind, cfg, kind, header, rows)
    return {"value": payload["value"], "significance": payload["significance"]}


def _thetas(cfg: ExperimentConfig) -> np.ndarray:
    return np.linspace(0, 2 * np.pi, cfg.theta_points, endpoint=False)


def _sampled_scan(cfg: ExperimentConfig, scan: analysis.FringeScan, rng: np.random.Generator) -> analysis.FringeScan:
    if cfg.exact:
        return scan
    values = rng.binomial(cfg.fringe_shots, np.clip(scan.values, 0, 1)) / max(cfg.fringe_shots, 1)
    return analysis.make_scan(scan.thetas, values)


SWAP_PREPARATIONS = (
    ("identical |0>|0>", np.array([1, 0], dtype=complex), np.array([1, 0], dtype=complex)),
    ("|0> and |+>", np.array([1, 0], dtype=complex), np.array([1, 1], dtype=complex) / math.sqrt(2)),
    ("orthogonal |0>|1>", np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)),
)


def _scan_outputs(cfg, out, command, scans: dict) -> dict:
    payload = {key: s.as_dict() for key, s in scans.items()}
    _write_json(out, command.replace("-", "_"), cfg, command, payload)
    keys = list(scans)
    thetas = next(iter(scans.values())).thetas
    rows = ([float(t)] + [float(scans[k].values[i]) for k in keys] for i, t in enumerate(thetas))
    _write_csv(out, command.replace("-", "_"), cfg, command, ["theta"] + keys, rows)
    return {k: s.visibility for k, s in scans.items()}


def cmd_swap_test(cfg: ExperimentConfig, out: Path) -> dict:
    gate = cfg.gate()
    rng = np.random.default_rng(None if cfg.exact else cfg.require_seed())
    scans = {name: _sampled_scan(cfg, analysis.swap_test_fringe(a, b, _thetas(cfg), gate), rng) for name, a, b in SWAP_PREPARATIONS}
    return _scan_outputs(cfg, out, "swap-test", scans)


def cmd_mixed(cfg: ExperimentConfig, out: Path) -> dict:
    gate = cfg.gate()
    rng = np.random.default_rng(None if cfg.exact else cfg.require_seed())
    scans = {
        f"m={m:g}": _sampled_scan(cfg, analysis.mixed_state_run(m, _thetas(cfg), gate, cfg.mixed_convention), rng)
        for m in cfg.mixed_m
    }
    result = _scan_outputs(cfg, out, "mixed", scans)
    weights = {f"m={m:g}": analysis.mixture_weights(m) for m in cfg.mixed_m}
    _write_json(out, "mixed_weights", cfg, "mixed", {"convention": cfg.mixed_convention, "weights": weights})
    return result


def cmd_hom(cfg: ExperimentConfig, out: Path) -> dict:
    delays = np.linspace(-cfg.hom_span, cfg.hom_span, cfg.hom_points) * cfg.hom_sigma
    ideal = circuit.hom_scan(delays, cfg.hom_sigma, cfg.hom_zeta)
    if cfg.exact:
        values = ideal
    else:
        rng = np.random.default_rng(cfg.require_seed())
        values = rng.binomial(cfg.fringe_shots, ideal) / max(cfg.fringe_shots, 1)
    payload = {
        "delay": delays, "coincidence": values, "visibility": circuit.hom_visibility(cfg.hom_zeta),
        "fock_coincidence_at_zero_delay": circuit.hom_simulate(cfg.hom_zeta),
        "analytic_coincidence_at_zero_delay": circuit.hom_coincidence(cfg.hom_zeta),
    }
    _write_json(out, "hom", cfg, "hom", payload)
    _write_csv(out, "hom", cfg, "hom", ["delay", "coincidence"], ([float(d), float(v)] for d, v in zip(delays, values)))
    return {"visibility": payload["visibility"]}


def cmd_resources(cfg: ExperimentConfig, out: Path) -> dict:
    reports = [
        circuit.heralded_resources("direct", "single-port"),
        circuit.heralded_resources("direct", "both-ports"),
        circuit.heralded_resources("c-path-heralded"),
    ]
    gate = cfg.gate()
    per_input = [
        circuit.run_gate(circuit.QubitPreparation.basis(i >> 2, (i >> 1) & 1, i & 1), gate).success_probability
        for i in range(8)
    ]
    payload = {
        "reports": [r.as_dict() for r in reports],
        "simulated": {"per_input": per_input, "mean": float(np.mean(per_input)), "collection": cfg.collection, "trigger": cfg.trigger},
    }
    _write_json(out, "resources", cfg, "resources", payload)
    _write_csv(
        out, "resources", cfg, "resources", ["variant", "collection", "ancillae", "success_probability"],
        ([r.variant, r.collection, r.entangled_pair_ancillae, r.success_probability] for r in reports),
    )
    return {f"{r.variant}/{r.collection}": r.success_probability for r in reports}


_SHOT_KEYS = {
    "truth-table": "truth_table_shots",
    "ghz": "qst_events",
    "mermin": "mermin_events",
    "svetlichny": "svetlichny_events",
    "swap-test": "fringe_shots",
    "mixed": "fringe_shots",
    "hom": "fringe_shots",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key = value config file")
    common.add_argument("--seed", type=int, help="RNG seed (required for sampled runs)")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--exact", action="store_true", help="exact probabilities, no sampling")
    common.add_argument("--zeta1", type=float)
    common.add_argument("--zeta2", type=float)
    common.add_argument("--shots", type=int, help="event budget for this subcommand")
    parser = argparse.ArgumentParser(prog="qfredkin", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("truth-table", parents=[common], help="logical-basis truth table")
    g = sub.add_parser("ghz", parents=[common], help="GHZ generation and tomography")
    g.add_argument("state", choices=circuit.GHZ_KINDS)
    sub.add_parser("mermin", parents=[common], help="Mermin inequality on GHZ 2+")
    sub.add_parser("svetlichny", parents=[common], help="Svetlichny inequality on GHZ 2+")
    sub.add_parser("swap-test", parents=[common], help="SWAP-test fringes for three target pairs")
    sub.add_parser("mixed", parents=[common], help="purity fringes for mixed targets")
    sub.add_parser("hom", parents=[common], help="Hong-Ou-Mandel dip")
    sub.add_parser("resources", parents=[common], help="success probabilities and heralding cost")
    return parser


def run(argv=None) -> dict:
    """Parse ``argv``, run the subcommand and return its short summary."""
    args = build_parser().parse_args(argv)
    cfg = resolve_config(args)
    if not cfg.exact and args.command in _SHOT_KEYS:
        cfg.require_seed()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    cmd = args.command
    if cmd == "truth-table":
        return cmd_truth_table(cfg, out)
    if cmd == "ghz":
        return cmd_ghz(cfg, out, args.state)
    if cmd in ("mermin", "svetlichny"):
        return cmd_inequality(cfg, out, cmd)
    return {"swap-test": cmd_swap_test, "mixed": cmd_mixed, "hom": cmd_hom, "resources": cmd_resources}[cmd](cfg, out)


def main(argv=None) -> int:
    try:
        summary = run(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CalibrationError as exc:
        print(f"calibration failed: {exc}", file=sys.stderr)
        return EXIT_CALIBRATION
    except (analysis.FitError, tomography.TomographyError) as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return EXIT_FIT
    print(json.dumps(_jsonable(summary), sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
