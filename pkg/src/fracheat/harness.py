"""Command line front end: configs, dispatch, manifests and reports.

A run is described by one JSON file::

    {"experiment": "solve",
     "params": {"N": 1, "theta": 1.0, "p": 2.0},
     "grid": {"L": 16.0, "M": 1024},
     "mesh": {"T": 2.0, "K": 2048, "q": 1.0},
     "datum": {"family": "constant", "c": 1.0},
     "tolerances": {"rtol": 1e-4},
     "spec": {...experiment specific...}}

Outputs go to a directory that receives CSVs, plot data and ``manifest.json``
listing every file with its sha256.  The only environment variable consulted
is ``FRACHEAT_OUTPUT_ROOT``, which relative output directories are resolved
against.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import hashlib
import json
import math
import os
import random
import shutil
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .criteria import ball_sup_scan, check_necessary, check_sufficient, save_scan_csv
from .grid import Grid
from .kernel import (
    KernelBuildError,
    ModelParams,
    build_profile,
    check_semigroup_identity,
    closed_form_kernel,
    fourier_inversion,
    save_profile,
    subordination_kernel,
)
from .lifespan import (
    SweepConfig,
    SweepRecord,
    dichotomy_probe,
    fit_scaling,
    lifespan_sweep,
    log_law_smoke,
    predicted_exponent,
    save_plot_data,
    save_sweep_csv,
)
from .semigroup import Constant, CriticalLog, InitialDatum, PowerLaw, Singular, save_slice_csv
from .solver import TimeMesh, march, picard_certify, save_norm_history_csv

EXPERIMENTS = ("kernel-check", "solve", "criteria", "sweep", "dichotomy", "fit")
OUTPUT_ROOT_ENV = "FRACHEAT_OUTPUT_ROOT"

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC = 0, 2, 3


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


# -- configuration ------------------------------------------------------------------


def _need(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"{where}.{key}: missing")
    return d[key]


def _number(d: dict, key: str, where: str, default=None, positive=False, integer=False):
    if key not in d:
        if default is None:
            raise ConfigError(f"{where}.{key}: missing")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{where}.{key}: expected a finite number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(f"{where}.{key}: expected an integer, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(f"{where}.{key}: must be positive, got {v!r}")
    return int(v) if integer else float(v)


def datum_from_spec(spec: dict) -> InitialDatum:
    """Build an InitialDatum from {"family": ..., parameters..., "amplitude": ...}."""
    where = "datum"
    fam = _need(spec, "family", where)
    amp = _number(spec, "amplitude", where, default=1.0)
    if amp < 0:
        raise ConfigError("datum.amplitude: must be nonnegative")
    try:
        if fam == "constant":
            cf = Constant(_number(spec, "c", where, default=1.0))
        elif fam == "power_law":
            cf = PowerLaw(_number(spec, "A", where, positive=True))
        elif fam == "singular":
            cf = Singular(_number(spec, "a", where, positive=True), _number(spec, "gamma", where, default=1.0),
                          _number(spec, "C", where, default=0.0))
        elif fam == "critical_log":
            cf = CriticalLog(_number(spec, "gamma", where), _number(spec, "theta", where, positive=True),
                             _number(spec, "C", where, default=0.0))
        elif fam == "atom":
            pos = spec.get("position", 0.0)
            pos = tuple(pos) if isinstance(pos, list) else pos
            return InitialDatum(atoms=((pos, _number(spec, "mass", where, default=1.0)),), amplitude=amp)
        else:
            raise ConfigError(f"datum.family: unknown family {fam!r}")
        return InitialDatum(closed_form=cf, amplitude=amp)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"datum: {exc}") from exc


@dataclass
class RunConfig:
    experiment: str
    params: ModelParams
    grid: dict = field(default_factory=dict)
    mesh: dict = field(default_factory=dict)
    datum: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    spec: dict = field(default_factory=dict)
    output_dir: str = "runs/default"

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("config: expected a JSON object")
        exp = _need(d, "experiment", "config")
        if exp not in EXPERIMENTS:
            raise ConfigError(f"config.experiment: unknown experiment {exp!r}; choose from {', '.join(EXPERIMENTS)}")
        pd = _need(d, "params", "config")
        N = _number(pd, "N", "params", default=1, integer=True)
        theta = _number(pd, "theta", "params")
        p = _number(pd, "p", "params")
        if not 0 < theta <= 2:
            raise ConfigError(f"params.theta: must lie in (0, 2], got {theta}")
        if not p > 1:
            raise ConfigError(f"params.p: must exceed 1, got {p}")
        if N < 1:
            raise ConfigError(f"params.N: must be a positive integer, got {N}")
        cfg = cls(
            exp,
            ModelParams(N, theta, p),
            dict(d.get("grid", {})),
            dict(d.get("mesh", {})),
            dict(d.get("datum", {})),
            dict(d.get("tolerances", {})),
            dict(d.get("spec", {})),
            str(d.get("output_dir", "runs/default")),
        )
        cfg.validate()
        return cfg

    def validate(self) -> None:
        exp, params = self.experiment, self.params
        if exp in ("solve", "criteria"):
            self.build_grid()
        if exp == "solve":
            self.build_mesh()
        if exp in ("solve", "criteria", "sweep"):
            datum_from_spec(self.datum)
        if exp == "sweep":
            fam = self.datum.get("family")
            if fam not in ("constant", "power_law"):
                raise ConfigError("datum.family: sweeps need 'constant' or 'power_law'")
            lams = _need(self.spec, "lambdas", "spec")
            if not isinstance(lams, list) or not lams or any(not isinstance(x, (int, float)) or x < 0 for x in lams):
                raise ConfigError("spec.lambdas: expected a non-empty list of nonnegative numbers")
            if fam == "power_law":
                law = predicted_exponent(params, float(self.datum["A"]))
                if law.regime in ("boundary", "global"):
                    raise ConfigError(f"datum.A: decay rate lies in the {law.regime!r} range, no blow-up law to sweep")
            try:
                self.sweep_config()
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"spec.sweep: {exc}") from exc
        if exp == "criteria":
            T = _number(self.spec, "T", "spec", positive=True)
            variant = self.spec.get("variant")
            if variant is not None:
                regime = params.regime
                if variant == "1_9" and regime != "subcritical":
                    raise ConfigError("spec.variant: 1_9 requires p below the Fujita exponent")
                if variant == "1_12":
                    if regime != "critical":
                        raise ConfigError("spec.variant: 1_12 requires p at the Fujita exponent")
                    _number(self.spec, "beta", "spec", positive=True)
                if variant == "1_10":
                    a = _number(self.spec, "alpha", "spec")
                    if not 1 < a < params.p:
                        raise ConfigError(f"spec.alpha: must lie in (1, p), got {a}")
                if variant not in ("1_9", "1_10", "1_12"):
                    raise ConfigError(f"spec.variant: unknown variant {variant!r}")
            if T ** (1 / params.theta) > self.build_grid().L:
                raise ConfigError("spec.T: T^(1/theta) exceeds the box half-width")
        if exp == "dichotomy":
            prof = self.spec.get("profile", "singular")
            if prof not in ("singular", "critical_log"):
                raise ConfigError(f"spec.profile: unknown profile {prof!r}")
            if prof == "singular" and params.regime != "supercritical":
                raise ConfigError("params.p: the singular probe needs p above the Fujita exponent")
            if prof == "critical_log" and params.regime != "critical":
                raise ConfigError("params.p: the critical-log probe needs p at the Fujita exponent")
            br = _need(self.spec, "bracket", "spec")
            if not (isinstance(br, list) and len(br) == 2 and 0 <= br[0] < br[1]):
                raise ConfigError("spec.bracket: expected [lo, hi] with 0 <= lo < hi")
            _number(self.spec, "horizon", "spec", positive=True)
            ladder = _need(self.spec, "ladder", "spec")
            if not isinstance(ladder, list) or len(ladder) < 1:
                raise ConfigError("spec.ladder: expected a list of grid sizes")
            for M in ladder:
                try:
                    Grid(params.N, 1.0, int(M))
                except ValueError as exc:
                    raise ConfigError(f"spec.ladder: {exc}") from exc
        if exp == "fit":
            _need(self.spec, "sweep_csv", "spec")
            _number(self.spec, "A", "spec", positive=True)
        if exp == "kernel-check":
            thetas = self.spec.get("thetas", [params.theta])
            if not isinstance(thetas, list) or any(not (isinstance(t, (int, float)) and 0 < t <= 2) for t in thetas):
                raise ConfigError("spec.thetas: expected a list of values in (0, 2]")

    def build_grid(self) -> Grid:
        try:
            return Grid(self.params.N, _number(self.grid, "L", "grid", positive=True),
                        _number(self.grid, "M", "grid", integer=True))
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"grid: {exc}") from exc

    def build_mesh(self) -> TimeMesh:
        try:
            return TimeMesh(_number(self.mesh, "T", "mesh", positive=True),
                            _number(self.mesh, "K", "mesh", integer=True),
                            _number(self.mesh, "q", "mesh", default=1.0))
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"mesh: {exc}") from exc

    def sweep_config(self) -> SweepConfig:
        kw = dict(self.spec.get("sweep", {}))
        if "recentre" in kw:
            kw["recentre"] = tuple(kw["recentre"])
        kw.setdefault("rtol", self.tolerances.get("rtol", 1e-4))
        kw.setdefault("bracket_rtol", self.tolerances.get("bracket_rtol", 5e-3))
        return SweepConfig(**kw)

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "params": self.params.to_dict(),
            "grid": self.grid,
            "mesh": self.mesh,
            "datum": self.datum,
            "tolerances": self.tolerances,
            "spec": self.spec,
            "output_dir": self.output_dir,
        }


def load_config(path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config: file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON ({exc})") from exc
    return RunConfig.from_dict(raw)


def resolve_output(path: str) -> Path:
    out = Path(path)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not out.is_absolute():
        out = Path(root) / out
    return out


# -- RNG guard ------------------------------------------------------------------------


@contextlib.contextmanager
def no_rng():
    """Make any use of numpy's or the stdlib's random generators raise."""

    def forbidden(*_a, **_k):
        raise RuntimeError("random number generation is not allowed in a seedless run")

    targets = [(np.random, n) for n in ("default_rng", "seed", "rand", "randn", "random", "uniform", "normal",
                                        "randint", "RandomState", "Generator")]
    targets += [(random, n) for n in ("random", "seed", "uniform", "gauss", "randint", "Random")]
    saved = [(mod, name, getattr(mod, name)) for mod, name in targets]
    try:
        for mod, name, _ in saved:
            setattr(mod, name, forbidden)
        yield
    finally:
        for mod, name, orig in saved:
            setattr(mod, name, orig)


# -- experiments ----------------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, str)):
        return str(v)
    return f"{float(v):.17g}"


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _kernel_check(cfg: RunConfig, out: Path, jobs: int) -> dict:
    N = cfg.params.N
    thetas = [float(t) for t in cfg.spec.get("thetas", [cfg.params.theta])]
    rows, meas = [], {}
    for th in thetas:
        t0 = time.perf_counter()
        prof = build_profile(th, N)
        save_profile(prof, out / f"kernel_profile_theta{th:g}.json")
        rows.append((th, prof.mass, prof.mass - 1.0, prof.quad_error, time.perf_counter() - t0))
        meas[f"mass_theta{th:g}"] = prof.mass
        if th == 1.0:
            r = np.linspace(0.0, 10.0, 41)
            closed = closed_form_kernel(r, 1.0, 1.0, N)
            fourier, _ = fourier_inversion(r, 1.0, 1.0, N, series=False)
            sub = np.array([subordination_kernel(x, 1.0, N) for x in r])
            _write_csv(out / "poisson_triple.csv", ["r", "closed_form", "fourier", "subordination"],
                       zip(r, closed, fourier, sub))
            meas["triple_max_rel_error"] = float(max(np.max(np.abs(fourier / closed - 1)),
                                                     np.max(np.abs(sub / closed - 1))))
        chk = check_semigroup_identity(prof, 0.5, 1.0, Grid(N, 64.0, 16384 if N == 1 else 512))
        meas[f"chapman_kolmogorov_error_over_peak_theta{th:g}"] = chk["max_abs_error"] / chk["peak"]
    _write_csv(out / "kernel_mass.csv", ["theta", "mass", "mass_defect", "quad_error", "seconds"], rows)
    return meas


def _solve(cfg: RunConfig, out: Path, jobs: int) -> dict:
    grid, mesh, datum = cfg.build_grid(), cfg.build_mesh(), datum_from_spec(cfg.datum)
    tol = cfg.tolerances
    kw = {k: tol[k] for k in ("rtol", "bracket_rtol") if k in tol}
    res = march(datum, cfg.params, mesh, grid, cfg.spec.get("blowup_threshold"),
                box_factor=float(cfg.spec.get("box_factor", 8.0)), **kw)
    save_norm_history_csv(res, out / "norm_history.csv")
    save_slice_csv(res.final, out / "final_slice.csv")
    meas = {
        "status": res.status,
        "T_est": res.T_est,
        "bracket": list(map(float, res.bracket)) if res.bracket else None,
        "final_time": res.final.time,
        **{k: v for k, v in res.diagnostics.items() if k != "reason"},
        "reason": res.diagnostics.get("reason", ""),
    }
    sweeps = int(cfg.spec.get("picard_sweeps", 0))
    if sweeps:
        rep = picard_certify(datum, cfg.params, mesh, grid, sweeps)
        meas["picard"] = {k: v for k, v in rep.items() if isinstance(v, (int, float, str, bool)) or v is None}
    return meas


def _criteria(cfg: RunConfig, out: Path, jobs: int) -> dict:
    grid, datum = cfg.build_grid(), datum_from_spec(cfg.datum)
    T = float(cfg.spec["T"])
    theta = cfg.params.theta
    top = T ** (1.0 / theta)
    decades = float(cfg.spec.get("decades", 2.0))
    n = int(cfg.spec.get("n_sigma", 41))
    sigma = np.geomspace(top * 10.0**-decades, top, n)
    scan = ball_sup_scan(datum, sigma, grid)
    save_scan_csv(scan, out / "ball_scan.csv")
    verdicts = [check_necessary(scan, cfg.params, T, cfg.spec.get("necessary_threshold"))]
    variant = cfg.spec.get("variant")
    if variant:
        alpha = cfg.spec.get("alpha")
        src = scan if variant == "1_9" else datum
        verdicts.append(check_sufficient(src, cfg.params, T, variant, alpha=alpha, beta=cfg.spec.get("beta"),
                                         grid=grid, sigma_grid=sigma, threshold=cfg.spec.get("sufficient_threshold")))
    return {"verdicts": [v.to_dict() for v in verdicts], "below_resolution": int(np.sum(scan.below_resolution))}


def _sweep(cfg: RunConfig, out: Path, jobs: int) -> dict:
    datum = datum_from_spec(cfg.datum)
    phi = datum.closed_form
    records = lifespan_sweep(phi, cfg.spec["lambdas"], cfg.params, cfg.sweep_config(), jobs=jobs)
    save_sweep_csv(records, out / "sweep.csv")
    A = getattr(phi, "A", None)
    meas = {"records": [r.to_dict() for r in records], "A": A}
    meas.update(_fit_block(records, cfg.params, A, out))
    return meas


def _fit_block(records, params: ModelParams, A, out: Path) -> dict:
    if A is None:
        from .lifespan import ScalingLaw

        law = ScalingLaw("power", params.p - 1.0, -(params.p - 1.0), "logT_vs_loglambda")
    else:
        law = predicted_exponent(params, A)
    block = {"law": law.to_dict()}
    if law.regime in ("log", "log_A_eq_N"):
        block["smoke"] = log_law_smoke(records)
    try:
        fit = fit_scaling(records, law)
    except ValueError as exc:
        block["fit"] = None
        block["fit_error"] = str(exc)
        return block
    save_plot_data(fit, out / "fit_plot.dat")
    block["fit"] = fit.to_dict()
    return block


def _read_sweep_csv(path) -> list[SweepRecord]:
    recs = []
    with open(path) as fh:
        for row in csv.DictReader(fh):
            f = lambda k: float(row[k]) if row[k] else None  # noqa: E731
            br = (f("bracket_lo"), f("bracket_hi")) if row["bracket_lo"] else None
            recs.append(SweepRecord(f("lambda"), row["status"], f("T_est"), br, math.nan, {}, {}, {}, row["flag"]))
    return recs


def _fit(cfg: RunConfig, out: Path, jobs: int) -> dict:
    records = _read_sweep_csv(cfg.spec["sweep_csv"])
    return {"A": float(cfg.spec["A"]), **_fit_block(records, cfg.params, float(cfg.spec["A"]), out)}


def _dichotomy(cfg: RunConfig, out: Path, jobs: int) -> dict:
    s = cfg.spec
    res = dichotomy_probe(cfg.params, s.get("profile", "singular"), tuple(s["bracket"]), float(s["horizon"]),
                          [int(m) for m in s["ladder"]], L=float(s.get("L", 16.0)), K=int(s.get("K", 256)),
                          q=float(s.get("q", 2.0)), rel_width=float(s.get("rel_width", 0.1)))
    _write_csv(out / "dichotomy.csv", ["M", "h", "gamma_lo", "gamma_hi", "evaluations"],
               [(b["M"], b["h"], b["lo"], b["hi"], len(b["evaluations"])) for b in res.brackets])
    d = res.to_dict()
    for b in d["brackets"]:
        b["evaluations"] = [[float(g), bool(ok)] for g, ok in b["evaluations"]]
    return d


DISPATCH = {
    "kernel-check": _kernel_check,
    "solve": _solve,
    "criteria": _criteria,
    "sweep": _sweep,
    "dichotomy": _dichotomy,
    "fit": _fit,
}


# -- running ------------------------------------------------------------------------


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def run(cfg: RunConfig, out_dir=None, jobs: int = 1, seedless: bool = False) -> dict:
    """Execute one experiment and return its manifest.

    Files are produced in a staging directory next to the output directory
    and moved in only after the experiment succeeds, so a failed run leaves
    nothing behind.  The manifest is written last via an atomic rename.
    """
    out = resolve_output(out_dir or cfg.output_dir)
    out.parent.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=".stage-", dir=out.parent))
    t0 = time.perf_counter()
    try:
        guard = no_rng() if seedless else contextlib.nullcontext()
        with guard, np.errstate(over="ignore"):
            measurements = DISPATCH[cfg.experiment](cfg, stage, jobs)
        out.mkdir(parents=True, exist_ok=True)
        files = {}
        for f in sorted(stage.iterdir()):
            target = out / f.name
            os.replace(f, target)
            files[f.name] = _sha256(target)
    finally:
        shutil.rmtree(stage, ignore_errors=True)
    manifest = {
        "experiment": cfg.experiment,
        "artifact_version": __version__,
        "config": cfg.to_dict(),
        "wall_time_s": time.perf_counter() - t0,
        "jobs": jobs,
        "seedless": seedless,
        "measurements": _jsonable(measurements),
        "files": files,
    }
    tmp = out / ".manifest.json.tmp"
    tmp.write_text(json.dumps(manifest, indent=1, sort_keys=True))
    os.replace(tmp, out / "manifest.json")
    return manifest


# -- reporting ----------------------------------------------------------------------


def _flatten(d: dict, prefix: str = "") -> dict:
    flat = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            flat.update(_flatten(v, key + "."))
        elif isinstance(v, (int, float, str, bool)) or v is None:
            flat[key] = v
    return flat


def _summary_row(m: dict) -> dict:
    exp = m["experiment"]
    meas = m.get("measurements", {})
    params = m.get("config", {}).get("params", {})
    row = {"experiment": exp, **{k: params.get(k) for k in ("N", "theta", "p")}}
    if exp in ("sweep", "fit"):
        fit = meas.get("fit") or {}
        row.update(A=meas.get("A"), fitted_slope=fit.get("slope"), theory_slope=(meas.get("law") or {}).get("theory_slope"),
                   residual=fit.get("residual"), regime=(meas.get("law") or {}).get("regime"))
    elif exp == "criteria":
        for v in meas.get("verdicts", []):
            row[v["criterion"]] = v["measured"]
    elif exp == "dichotomy":
        for b in meas.get("brackets", []):
            row[f"M{b['M']}"] = f"[{b['lo']:.6g}, {b['hi']:.6g}]"
        row["overlap"] = all(meas.get("overlap", []))
    else:
        row.update({k: v for k, v in _flatten(meas).items() if not k.startswith("records")})
    return row


def report(manifests: Sequence[dict], csv_path=None) -> str:
    """Merge manifests of one experiment type into a CSV and a text table."""
    if not manifests:
        if csv_path:
            Path(csv_path).write_text("")
        return ""
    kinds = {m["experiment"] for m in manifests}
    if len(kinds) > 1:
        raise ConfigError(f"report: manifests mix experiment types {sorted(kinds)}")
    rows = [_summary_row(m) for m in manifests]
    cols = list(dict.fromkeys(k for r in rows for k in r))
    if csv_path:
        _write_csv(Path(csv_path), cols, ([r.get(c) for c in cols] for r in rows))

    def cell(v):
        if isinstance(v, float):
            return f"{v:.6g}"
        return "" if v is None else str(v)

    table = [cols] + [[cell(r.get(c)) for c in cols] for r in rows]
    widths = [max(len(row[i]) for row in table) for i in range(len(cols))]
    lines = ["  ".join(s.ljust(w) for s, w in zip(row, widths)).rstrip() for row in table]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


# -- CLI ----------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracheat", description="Fractional semilinear heat equation experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name, help=f"run a {name} experiment")
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--out", help="output directory (overrides the config)")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
        sp.add_argument("--seedless", action="store_true", help="fail if any random generator is used")
    rp = sub.add_parser("report", help="merge run manifests into a table")
    rp.add_argument("manifests", nargs="*", help="manifest.json files or run directories")
    rp.add_argument("--out", help="write the merged CSV here")
    return ap


def _load_manifest(path: str) -> dict:
    p = Path(path)
    if p.is_dir():
        p = p / "manifest.json"
    return json.loads(p.read_text())


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "report":
            try:
                manifests = [_load_manifest(m) for m in args.manifests]
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"report: cannot read manifest ({exc})") from exc
            text = report(manifests, args.out)
            if text:
                print(text)
            return EXIT_OK
        cfg = load_config(args.config)
        if cfg.experiment != args.command:
            raise ConfigError(f"config.experiment: {cfg.experiment!r} does not match subcommand {args.command!r}")
        if args.jobs < 1:
            raise ConfigError("--jobs: must be at least 1")
    except ConfigError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        manifest = run(cfg, args.out, jobs=args.jobs, seedless=args.seedless)
    except ConfigError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (KernelBuildError, ValueError, RuntimeError, ArithmeticError, NotImplementedError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    out = resolve_output(args.out or cfg.output_dir)
    print(f"{cfg.experiment}: wrote {len(manifest['files'])} files and manifest.json to {out}")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
