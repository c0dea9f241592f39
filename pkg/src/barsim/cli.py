"""Command-line experiment runner.

Subcommands:
  simulate  -- Monte-Carlo sweeps (rate-vs-snr, rate-vs-m, mu-convergence,
               delay-convergence), one output row per sweep point
  analyze   -- analytical-only rate table (closed forms / quadrature)
  verify    -- run the acceptance suite and print a pass/fail table

SNR is expressed in dB externally and converted to linear internally.
Output is UTF-8 CSV (or line-delimited JSON records), plus a run manifest
and a rendered figure next to the data file.
"""

import argparse
import concurrent.futures
import csv
import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import analysis, simulator
from .channel import FadingModel

OUTPUT_DIR_ENV = "BARSIM_OUT_DIR"

EXPERIMENTS = ("rate-vs-snr", "rate-vs-m", "mu-convergence", "delay-convergence",
               "analytical-only")
PROTOCOLS = ("conventional", "genie", "adaptive", "max-link", "delay-limited")


class SpecError(ValueError):
    """Invalid experiment specification; message names the field."""


@dataclass
class ExperimentSpec:
    experiment: str = "rate-vs-snr"
    snr_db: list = field(default_factory=lambda: [10.0])
    relays: list = field(default_factory=lambda: [1])
    protocols: list = field(default_factory=lambda: ["genie"])
    delay_targets: list = field(default_factory=lambda: [5.0])
    omega_sr: list = None  # None: i.i.d. with unit mean gains
    omega_rd: list = None
    num_slots: int = 1_000_000
    seed: int = 1
    out: str = None
    fmt: str = "csv"
    figures: bool = True
    jobs: int = 1

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise SpecError(f"experiment: unknown value {self.experiment!r}")
        for name in ("snr_db", "relays", "protocols", "delay_targets"):
            if not getattr(self, name):
                raise SpecError(f"{name}: sweep list must be non-empty")
        for p in self.protocols:
            if p not in PROTOCOLS:
                raise SpecError(f"protocols: unknown protocol {p!r}")
        if self.num_slots < 1:
            raise SpecError("num_slots: must be >= 1")
        if self.fmt not in ("csv", "records"):
            raise SpecError(f"fmt: must be csv or records, got {self.fmt!r}")
        if (self.omega_sr is None) != (self.omega_rd is None):
            raise SpecError("omega_sr/omega_rd: must be given together")
        if self.omega_sr is not None:
            m = len(self.omega_sr)
            if len(self.omega_rd) != m:
                raise SpecError("omega_rd: length differs from omega_sr")
            for mm in self.relays:
                if mm != m:
                    raise SpecError(
                        f"relays: M={mm} inconsistent with omega vectors of length {m}")
        if any(t <= 0 for t in self.delay_targets):
            raise SpecError("delay_targets: entries must be positive")
        if any(m < 1 for m in self.relays):
            raise SpecError("relays: entries must be >= 1")
        return self

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise SpecError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data).validate()

    def model_for(self, num_relays: int, snr_db: float) -> FadingModel:
        snr = db_to_linear(snr_db)
        if self.omega_sr is None:
            return FadingModel.iid(num_relays, snr)
        return FadingModel(num_relays=num_relays, snr_ref=snr,
                           mean_gain_sr=self.omega_sr, mean_gain_rd=self.omega_rd)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def parse_config(path=None, overrides=None) -> ExperimentSpec:
    """Build a spec from an optional JSON file; flag values override."""
    data = {}
    if path is not None:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise SpecError(f"config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise SpecError(f"config {path}: top level must be an object")
    if overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentSpec.from_dict(data)


# ---------------------------------------------------------------------------
# sweep execution

def _build_protocol(name, spec, model, delay_target=None, mu_cache=None):
    if name == "conventional":
        return simulator.Conventional()
    if name == "max-link":
        return simulator.MaxLink()
    if name == "adaptive":
        return simulator.BufferAidedAdaptive()
    if name == "delay-limited":
        return simulator.DelayLimited(delay_target=delay_target)
    if name == "genie":
        return simulator.BufferAidedGenie(mu=_mu_star(model, mu_cache))
    raise SpecError(f"protocols: unknown protocol {name!r}")


def _mu_star(model, cache=None):
    key = (model.num_relays, model.snr_ref)
    if cache is not None and key in cache:
        return cache[key]
    if model.is_iid:
        mu = np.full(model.num_relays, 0.5)
    else:
        mu = analysis.solve_mu_star(model).mu_star
    if cache is not None:
        cache[key] = mu
    return mu


def _analytical_rate(name, model, mu_cache=None):
    """Reference rate for the protocol, or None where no expression applies."""
    if name == "conventional":
        if model.is_iid:
            return analysis.closed_form_rate_conv_iid_rayleigh(
                model.num_relays, float(model.avg_snr_sr[0]))
        return analysis.conv_rate_quadrature(model)
    if name in ("genie", "adaptive", "max-link"):
        if model.is_iid:
            return analysis.closed_form_rate_ba_iid_rayleigh(
                model.num_relays, float(model.avg_snr_sr[0]))
        if name == "max-link":
            return None  # fixed mu=1/2 is suboptimal under i.n.d. fading
        return analysis.max_rate_analytical(model, _mu_star(model, mu_cache))
    return None  # delay-limited: no closed rate expression


def _rate_point(args):
    """One (snr or M, protocol) sweep point -> output row dict."""
    spec_dict, snr_db, m, proto_name, delay_target = args
    spec = ExperimentSpec(**spec_dict)
    row = {"snr_db": snr_db, "m": m, "protocol": proto_name,
           "delay_target": delay_target, "rate_sim": None, "rate_analytical": None,
           "delay": None, "flow_residual_max": None, "error": None}
    try:
        model = spec.model_for(m, snr_db)
        cache = {}
        protocol = _build_protocol(proto_name, spec, model, delay_target, cache)
        report = simulator.run_simulation(simulator.SimulationConfig(
            model=model, protocol=protocol, num_slots=spec.num_slots, seed=spec.seed))
        row["rate_sim"] = report.avg_rate_sd
        row["delay"] = None if np.isnan(report.avg_delay) else report.avg_delay
        row["flow_residual_max"] = float(np.max(np.abs(report.flow_residuals)))
        row["rate_analytical"] = _analytical_rate(proto_name, model, cache)
    except (analysis.MuSolverError, analysis.QuadratureError, ValueError) as exc:
        row["error"] = str(exc)
    return row


def _analytical_point(args):
    spec_dict, snr_db, m = args
    spec = ExperimentSpec(**spec_dict)
    row = {"snr_db": snr_db, "m": m, "rate_ba": None, "rate_conv": None, "error": None}
    try:
        model = spec.model_for(m, snr_db)
        if model.is_iid:
            snr = float(model.avg_snr_sr[0])
            row["rate_ba"] = analysis.closed_form_rate_ba_iid_rayleigh(m, snr)
            row["rate_conv"] = analysis.closed_form_rate_conv_iid_rayleigh(m, snr)
        else:
            row["rate_ba"] = analysis.max_rate_analytical(model, _mu_star(model))
            row["rate_conv"] = analysis.conv_rate_quadrature(model)
    except (analysis.MuSolverError, analysis.QuadratureError, ValueError) as exc:
        row["error"] = str(exc)
    return row


def _map_ordered(fn, tasks, jobs):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def _expand_protocols(spec):
    for name in spec.protocols:
        if name == "delay-limited":
            for t0 in spec.delay_targets:
                yield name, t0
        else:
            yield name, None


def run_experiment(spec: ExperimentSpec):
    """Execute the sweep and return (rows, error_count)."""
    spec_dict = spec.to_dict()
    if spec.experiment == "rate-vs-snr":
        m = spec.relays[0]
        tasks = [(spec_dict, snr, m, name, t0)
                 for snr in spec.snr_db for name, t0 in _expand_protocols(spec)]
        rows = _map_ordered(_rate_point, tasks, spec.jobs)
    elif spec.experiment == "rate-vs-m":
        snr = spec.snr_db[0]
        tasks = [(spec_dict, snr, m, name, t0)
                 for m in spec.relays for name, t0 in _expand_protocols(spec)]
        rows = _map_ordered(_rate_point, tasks, spec.jobs)
    elif spec.experiment == "analytical-only":
        tasks = [(spec_dict, snr, m) for snr in spec.snr_db for m in spec.relays]
        rows = _map_ordered(_analytical_point, tasks, spec.jobs)
    elif spec.experiment == "mu-convergence":
        rows = _run_mu_convergence(spec)
    elif spec.experiment == "delay-convergence":
        rows = _run_delay_convergence(spec)
    else:
        raise SpecError(f"experiment: unknown value {spec.experiment!r}")
    errors = sum(1 for r in rows if r.get("error"))
    return rows, errors


def _run_mu_convergence(spec):
    m = spec.relays[0]
    snr_db = spec.snr_db[0]
    model = spec.model_for(m, snr_db)
    mu_star = _mu_star(model)
    report = simulator.run_simulation(simulator.SimulationConfig(
        model=model, protocol=simulator.BufferAidedAdaptive(),
        num_slots=spec.num_slots, seed=spec.seed))
    rows = []
    for snap in report.trajectory:
        row = {"snr_db": snr_db, "m": m, "slot": snap.slot, "error": None}
        for k in range(m):
            row[f"mu_e_{k + 1}"] = float(snap.mu_est[k])
            row[f"mu_star_{k + 1}"] = float(mu_star[k])
        rows.append(row)
    return rows


def _run_delay_convergence(spec):
    m = spec.relays[0]
    rows = []
    for snr_db in spec.snr_db:
        model = spec.model_for(m, snr_db)
        for t0 in spec.delay_targets:
            report = simulator.run_simulation(simulator.SimulationConfig(
                model=model, protocol=simulator.DelayLimited(delay_target=t0),
                num_slots=spec.num_slots, seed=spec.seed))
            for snap in report.trajectory:
                rows.append({
                    "snr_db": snr_db, "m": m, "delay_target": t0, "slot": snap.slot,
                    "running_delay": None if np.isnan(snap.running_delay)
                    else float(snap.running_delay),
                    "running_rate": float(snap.running_rate), "error": None,
                })
    return rows


# ---------------------------------------------------------------------------
# output

def _default_out(spec):
    base = os.environ.get(OUTPUT_DIR_ENV, ".")
    ext = "csv" if spec.fmt == "csv" else "jsonl"
    return os.path.join(base, f"{spec.experiment}.{ext}")


def write_rows(rows, path, fmt):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    if fmt == "records":
        with open(path, "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row) + "\n")
        return
    columns = list(rows[0].keys()) if rows else []
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if v is None else v) for k, v in row.items()})


def write_manifest(spec, path, num_rows, num_errors):
    from . import __version__

    payload = json.dumps(spec.to_dict(), sort_keys=True).encode()
    manifest = {
        "version": __version__,
        "seed": spec.seed,
        "config": spec.to_dict(),
        "config_sha256": hashlib.sha256(payload).hexdigest(),
        "rows": num_rows,
        "errors": num_errors,
    }
    mpath = os.path.splitext(path)[0] + ".manifest.json"
    with open(mpath, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
    return mpath


def _execute(spec):
    rows, errors = run_experiment(spec)
    out = spec.out or _default_out(spec)
    write_rows(rows, out, spec.fmt)
    write_manifest(spec, out, len(rows), errors)
    if spec.figures and rows:
        from .figures import render_figure

        render_figure(spec.experiment, rows, os.path.splitext(out)[0] + ".png")
    print(f"wrote {len(rows)} rows to {out}" + (f" ({errors} errors)" if errors else ""))
    return 1 if errors else 0


# ---------------------------------------------------------------------------
# argument parsing

def _float_list(text):
    return [float(v) for v in text.split(",") if v != ""]


def _int_list(text):
    return [int(v) for v in text.split(",") if v != ""]


def _add_common_flags(p):
    p.add_argument("--config", help="JSON config file; flags override file values")
    p.add_argument("--snr-db", type=_float_list, help="comma list of P/sigma^2 in dB")
    p.add_argument("--relays", type=_int_list, help="comma list of relay counts M")
    p.add_argument("--slots", type=int, dest="num_slots", help="slots per run (default 1e6)")
    p.add_argument("--seed", type=int, help="master RNG seed (default 1)")
    p.add_argument("--omega-sr", type=_float_list, help="mean gains of source-to-relay links")
    p.add_argument("--omega-rd", type=_float_list, help="mean gains of relay-to-destination links")
    p.add_argument("--out", help="output file path")
    p.add_argument("--format", dest="fmt", choices=["csv", "records"])
    p.add_argument("--jobs", type=int, help="worker pool size (default 1)")
    p.add_argument("--no-figures", dest="figures", action="store_false", default=None,
                   help="skip figure rendering")


def build_parser():
    parser = argparse.ArgumentParser(prog="barsim",
                                     description="buffer-aided relay selection experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a Monte-Carlo sweep")
    sim.add_argument("--experiment", choices=[e for e in EXPERIMENTS if e != "analytical-only"])
    sim.add_argument("--protocol", type=lambda s: s.split(","), dest="protocols",
                     help="comma list: conventional,genie,adaptive,max-link,delay-limited")
    sim.add_argument("--delay-target", type=_float_list, dest="delay_targets",
                     help="comma list of average delay targets T0 (slots)")
    _add_common_flags(sim)

    ana = sub.add_parser("analyze", help="analytical rates only")
    _add_common_flags(ana)

    ver = sub.add_parser("verify", help="run the acceptance suite")
    ver.add_argument("--fast", action="store_true",
                     help="reduced Monte-Carlo horizons (smoke test, looser tolerances)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "verify":
        from .acceptance import run_all

        results = run_all(fast=args.fast)
        width = max(len(r.name) for r in results)
        for r in results:
            print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  {r.detail}")
        return 0 if all(r.passed for r in results) else 1

    overrides = {k: v for k, v in vars(args).items() if k != "command" and k != "config"}
    if args.command == "analyze":
        overrides["experiment"] = "analytical-only"
    try:
        spec = parse_config(args.config, overrides)
        return _execute(spec)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
