"""Batch job execution: flat key-value configs in, deterministic CSV/JSON out.

Config files are flat `key = value` lines with dotted section names and
comma-separated scalar lists; no nesting.  Every artifact carries a schema
string and the manifest lists SHA-256 hashes of all written files.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

from .model import (
    ModelError,
    ModelKind,
    ModelSpec,
    SectorSpec,
    SectorType,
    RWA3_KINDS,
    enumerate_basis,
)
from .operators import assemble_hamiltonian
from .spectra import lowest_eigenpairs, spectrum_scan
from .observables import (
    OBSERVABLE_IDS,
    closed_form_observable,
    numeric_observable,
)
from .variational import (
    Family,
    VariationalPoint,
    embed_variational_state,
    rwa3_reduced_minimum,
)
from .phase import (
    ParameterPath,
    dicke_quantum_critical_coupling,
    dicke_sas_critical_coupling,
    fit_critical_exponent,
    locate_transitions,
    rwa3_global_ground,
    separatrix_ordinate,
    spec_with,
    triple_point_ground_state,
    triple_point_spec,
    v_sas_critical_coupling,
)

SCHEMA_VERSION = "cavity-phase/v1"
JOB_KINDS = ("spectrum_scan", "phase_scan", "phase_diagram_grid",
             "exponent_study", "triple_point", "observable_table")


class ConfigError(ValueError):
    """Invalid job configuration; message lists field-level problems."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class ComputeError(RuntimeError):
    """A job failed while computing; carries the job kind for context."""


def _parse_scalar(text: str):
    s = text.strip()
    if s.lower() in ("true", "false"):
        return s.lower() == "true"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        pass
    return s


def parse_config_text(text: str) -> dict:
    """Parse flat `key = value` lines; '#' starts a comment."""
    out = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError([f"line {ln}: expected 'key = value'"])
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError([f"line {ln}: empty key"])
        if "," in value:
            out[key] = tuple(_parse_scalar(v) for v in value.split(","))
        else:
            out[key] = _parse_scalar(value)
    return out


def dump_config_text(entries: dict) -> str:
    lines = []
    for key in sorted(entries):
        v = entries[key]
        if isinstance(v, tuple):
            lines.append(f"{key} = {', '.join(_fmt(x) for x in v)}")
        else:
            lines.append(f"{key} = {_fmt(v)}")
    return "\n".join(lines) + "\n"


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".12g")
    return str(v)


@dataclass(frozen=True)
class JobConfig:
    """Validated job description; `entries` preserves the raw key-values."""

    kind: str
    entries: dict = dc_field(default_factory=dict)

    @classmethod
    def from_text(cls, text: str) -> "JobConfig":
        entries = parse_config_text(text)
        problems = _validate_entries(entries)
        if problems:
            raise ConfigError(problems)
        return cls(entries["job.kind"], entries)

    @classmethod
    def from_file(cls, path) -> "JobConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    def to_text(self) -> str:
        return dump_config_text(self.entries)

    def get(self, key, default=None):
        return self.entries.get(key, default)

    def model_spec(self) -> ModelSpec:
        return _model_from_entries(self.entries)


def _model_from_entries(entries: dict) -> ModelSpec:
    kind = ModelKind(entries["model.kind"])
    n = entries["model.n_atoms"]
    freq = float(entries.get("model.field_freq", 1.0))
    if kind in (ModelKind.TCM, ModelKind.DICKE):
        level = float(entries.get("model.omega_a", 1.0))
        coupl = float(entries.get("model.gamma", 0.0))
    else:
        level = tuple(float(entries.get(f"model.omega_{i}", 0.0)) for i in (1, 2, 3))
        coupl = (float(entries.get("model.mu_12", 0.0)),
                 float(entries.get("model.mu_13", 0.0)),
                 float(entries.get("model.mu_23", 0.0)))
    return ModelSpec(kind, n, level, coupl, freq)


def _validate_entries(entries: dict):
    problems = []
    kind = entries.get("job.kind")
    if kind not in JOB_KINDS:
        problems.append(f"job.kind: must be one of {', '.join(JOB_KINDS)}")
        return problems
    fmt = entries.get("output.format", "csv")
    if fmt not in ("csv", "json"):
        problems.append("output.format: must be csv or json")
    if kind not in ("exponent_study",):
        try:
            _model_from_entries(entries)
        except (KeyError, ModelError, ValueError) as exc:
            problems.append(f"model: {exc}")
    tol = entries.get("tolerances.tol", 1e-8)
    if not (isinstance(tol, (int, float)) and tol > 0):
        problems.append("tolerances.tol: must be positive")
    if kind in ("spectrum_scan", "phase_scan"):
        for key in ("path.parameter", "path.start", "path.stop"):
            if key not in entries:
                problems.append(f"{key}: required for {kind}")
        samples = entries.get("path.samples", 0)
        if not (isinstance(samples, int) and samples >= 2):
            problems.append("path.samples: integer >= 2 required")
    if kind == "phase_scan":
        if entries.get("scan.method", "QUANTUM") not in ("QUANTUM", "SAS", "PROJECTED"):
            problems.append("scan.method: must be QUANTUM, SAS or PROJECTED")
    if kind == "spectrum_scan":
        k = entries.get("scan.k", 1)
        if not (isinstance(k, int) and k >= 1):
            problems.append("scan.k: integer >= 1 required")
        if "sector.values" not in entries and "sector.type" not in entries:
            problems.append("sector.type or sector.values: required for spectrum_scan")
    if kind == "phase_diagram_grid":
        for axis in ("x", "y"):
            for key in (f"grid.{axis}.parameter", f"grid.{axis}.start",
                        f"grid.{axis}.stop", f"grid.{axis}.samples"):
                if key not in entries:
                    problems.append(f"{key}: required for phase_diagram_grid")
        for axis in ("x", "y"):
            samples = entries.get(f"grid.{axis}.samples")
            if samples is not None and (not isinstance(samples, int) or samples < 1):
                problems.append(f"grid.{axis}.samples: integer >= 1 required")
    if kind == "exponent_study":
        ns = entries.get("exponent.n_atoms")
        if ns is None:
            problems.append("exponent.n_atoms: required (comma list)")
        else:
            ns = ns if isinstance(ns, tuple) else (ns,)
            if len(ns) < 4:
                problems.append("exponent.n_atoms: need at least 4 sizes to fit")
        if entries.get("exponent.method", "quantum") not in ("quantum", "sas"):
            problems.append("exponent.method: must be quantum or sas")
        mk = entries.get("model.kind", "DICKE")
        if mk not in ("DICKE", "V_FULL"):
            problems.append("model.kind: exponent studies support DICKE or V_FULL")
    if kind == "triple_point":
        n = entries.get("model.n_atoms", 0)
        if not (isinstance(n, int) and n >= 2):
            problems.append("model.n_atoms: integer >= 2 required")
    if kind == "observable_table":
        xs = entries.get("observable.x", ())
        xs = xs if isinstance(xs, tuple) else (xs,)
        if not xs or any(not isinstance(x, (int, float)) or x <= 0 for x in xs):
            problems.append("observable.x: positive values required")
    return problems


# --- deterministic writers ---------------------------------------------------


def _schema(job_kind: str) -> str:
    return f"{SCHEMA_VERSION}/{job_kind}"


def _write_csv(path, schema, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# schema: {schema}\n")
        writer = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) if isinstance(v, float) else v for v in row])


def _write_json(path, schema, header, rows):
    payload = {
        "schema": schema,
        "columns": list(header),
        "rows": [[_fmt(v) if isinstance(v, float) else v for v in row] for row in rows],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _emit(outdir, name, fmt, schema, header, rows, manifest):
    path = os.path.join(outdir, f"{name}.{fmt}")
    if fmt == "csv":
        _write_csv(path, schema, header, rows)
    else:
        _write_json(path, schema, header, rows)
    with open(path, "rb") as fh:
        digest = hashlib.sha256(fh.read()).hexdigest()
    manifest["files"].append({
        "name": os.path.basename(path),
        "sha256": digest,
        "bytes": os.path.getsize(path),
    })
    return path


# --- job implementations -------------------------------------------------------


def _path_from_config(cfg: JobConfig) -> ParameterPath:
    base = cfg.model_spec()
    linked = {}
    prefix = "path.link."
    for key, value in cfg.entries.items():
        if key.startswith(prefix) and key.endswith(".slope"):
            nm = key[len(prefix):-len(".slope")]
            intercept = float(cfg.entries.get(f"{prefix}{nm}.intercept", 0.0))
            linked[nm] = (float(value), intercept)
    return ParameterPath(base, cfg.get("path.parameter"),
                         float(cfg.get("path.start")), float(cfg.get("path.stop")),
                         linked)


def _sectors_from_config(cfg: JobConfig, spec: ModelSpec):
    stype = cfg.get("sector.type")
    cutoff = cfg.get("sector.fock_cutoff")
    values = cfg.get("sector.values")
    if values is not None:
        values = values if isinstance(values, tuple) else (values,)
        st = SectorType(stype) if stype else (
            SectorType.M_BLOCK if spec.kind in RWA3_KINDS else SectorType.LAMBDA_BLOCK)
        return [SectorSpec(st, int(v), cutoff) for v in values]
    st = SectorType(stype)
    value = cfg.get("sector.value")
    return [SectorSpec(st, value, cutoff)]


def _run_spectrum_scan(cfg: JobConfig, outdir, fmt, manifest, workers):
    path = _path_from_config(cfg)
    taus = path.grid(int(cfg.get("path.samples")))
    spec0 = path.spec_at(taus[0])
    sectors = _sectors_from_config(cfg, spec0)
    k = int(cfg.get("scan.k", 1))
    specs = [(float(t), path.spec_at(float(t))) for t in taus]
    if workers > 1:
        chunks = np.array_split(np.arange(len(specs)), workers)
        args = [([specs[i] for i in idx], sectors, k) for idx in chunks if len(idx)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_scan_chunk, args))
        rows = [row for part in parts for row in part]
    else:
        rows = _scan_chunk((specs, sectors, k))
    _emit(outdir, "spectrum", fmt, _schema("spectrum_scan"),
          ("tau", "sector", "sector_value", "level", "energy", "energy_per_atom"),
          rows, manifest)


def _scan_chunk(args):
    specs, sectors, k = args
    res = spectrum_scan(specs, sectors, k)
    rows = []
    for key in res.sector_keys:
        for i, tau in enumerate(res.taus):
            for lvl, e in enumerate(res.energies[key][i]):
                if math.isnan(e):
                    continue
                spec = specs[i][1]
                rows.append((float(tau), key[0], key[1] if key[1] is not None else "",
                             lvl, float(e), float(spec.per_particle(e))))
    rows.sort(key=lambda r: (r[1], str(r[2]), r[0], r[3]))
    return rows


def _run_phase_scan(cfg: JobConfig, outdir, fmt, manifest, workers):
    path = _path_from_config(cfg)
    method = cfg.get("scan.method", "QUANTUM")
    report = locate_transitions(path, method,
                                samples=int(cfg.get("path.samples")),
                                n_max=cfg.get("sector.fock_cutoff"))
    coord_names = sorted({k for tr in report.transitions for k in tr.coordinates})
    rows = []
    for tr in report.transitions:
        row = [tr.tau_c, tr.order,
               tr.chi_peak if math.isfinite(tr.chi_peak) else "",
               tr.delta_excitation if tr.delta_excitation is not None else ""]
        row += [tr.coordinates.get(nm, "") for nm in coord_names]
        rows.append(tuple(row))
    _emit(outdir, "transitions", fmt, _schema("phase_scan"),
          tuple(["tau_c", "order", "chi_peak", "delta_excitation"] + coord_names),
          rows, manifest)
    mid = 0.5 * (report.taus[:-1] + report.taus[1:])
    _emit(outdir, "susceptibility", fmt, _schema("phase_scan"),
          ("tau", "chi"), [(float(t), float(c)) for t, c in zip(mid, report.chi)],
          manifest)


def _grid_row(args):
    """One grid row: exact block-resolved grounds for RWA kinds, reduced
    coherent-surface minima for full kinds.  chi is the step fidelity
    susceptibility along the row."""
    spec0_args, xs_name, xs, ys_name, y = args
    spec0 = ModelSpec(*spec0_args)
    quantum = spec0.kind in RWA3_KINDS
    cells = []
    states = []
    for x in xs:
        spec = spec_with(spec0, **{xs_name: float(x), ys_name: float(y)})
        if quantum:
            m_star, res = rwa3_global_ground(spec)
            cells.append((float(x), float(y),
                          spec.per_particle(res.ground_energy), float(m_star)))
            states.append((m_star, res.ground_state))
        else:
            e, (r2, r3), rho = rwa3_reduced_minimum(spec)
            lam2, lam3 = spec.excitation_weights
            den = 1.0 + r2 * r2 + r3 * r3
            n = spec.n_atoms
            m_cont = rho * rho + (lam2 * n * r2 * r2 + lam3 * n * r3 * r3) / den
            cells.append((float(x), float(y), e, m_cont))
            states.append((round(m_cont), None))
    ncols = len(xs)
    chi = np.zeros(ncols)
    if ncols > 1:
        dx = xs[1] - xs[0]
        for i in range(ncols - 1):
            key_l, st_l = states[i]
            key_r, st_r = states[i + 1]
            if key_l != key_r:
                f = 0.0
            elif st_l is not None:
                f = st_l.fidelity(st_r)
            else:
                f = 1.0
            chi[i + 1] = 2.0 * (1.0 - f) / (dx * dx)
    return [cells[i] + (float(chi[i]),) for i in range(ncols)]


def _run_phase_diagram_grid(cfg: JobConfig, outdir, fmt, manifest, workers):
    spec0 = cfg.model_spec()
    if spec0.is_two_level:
        raise ComputeError("phase_diagram_grid supports three-level kinds")
    ax = {a: (cfg.get(f"grid.{a}.parameter"),
              np.linspace(float(cfg.get(f"grid.{a}.start")),
                          float(cfg.get(f"grid.{a}.stop")),
                          int(cfg.get(f"grid.{a}.samples"))))
          for a in ("x", "y")}
    xs_name, xs = ax["x"]
    ys_name, ys = ax["y"]
    spec0_args = (spec0.kind, spec0.n_atoms, spec0.level_freqs,
                  spec0.couplings, spec0.field_freq)
    row_args = [(spec0_args, xs_name, xs, ys_name, float(y)) for y in ys]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            row_results = list(pool.map(_grid_row, row_args))
    else:
        row_results = [_grid_row(a) for a in row_args]
    rows = [cell for row in row_results for cell in row]
    _emit(outdir, "grid", fmt, _schema("phase_diagram_grid"),
          (xs_name, ys_name, "energy_per_atom", "excitation", "chi"),
          rows, manifest)
    _emit_separatrix_overlay(cfg, spec0, outdir, fmt, manifest, xs_name, xs,
                             ys_name, ys)


def _emit_separatrix_overlay(cfg, spec0, outdir, fmt, manifest, xs_name, xs,
                             ys_name, ys):
    w1, w2, w3 = spec0.level_freqs
    w21, w31 = w2 - w1, w3 - w1
    rows = []
    # always express the overlay as ordinate(abscissa) along the y axis grid
    config = spec0.configuration
    abscissa_name = {"XI": "mu_23", "LAMBDA": "mu_23", "V": "mu_12"}[config]
    ordinate_name = {"XI": "mu_12", "LAMBDA": "mu_13", "V": "mu_13"}[config]
    values = ys if abscissa_name == ys_name else xs
    for a in values:
        o = separatrix_ordinate(spec0.kind, w21, w31, float(a))
        if o is not None:
            rows.append((float(a), float(o)))
    _emit(outdir, "separatrix", fmt, _schema("phase_diagram_grid"),
          (abscissa_name, ordinate_name), rows, manifest)


def _run_exponent_study(cfg: JobConfig, outdir, fmt, manifest, workers):
    ns = cfg.get("exponent.n_atoms")
    ns = [int(n) for n in (ns if isinstance(ns, tuple) else (ns,))]
    method = cfg.get("exponent.method", "quantum")
    kind = cfg.get("model.kind", "DICKE")
    offset = float(cfg.get("exponent.offset", 0.5))
    omega_a = float(cfg.get("model.omega_a", 1.0))

    def critical(n):
        if method == "quantum":
            return dicke_quantum_critical_coupling(n, omega_a)
        if kind == "DICKE":
            return dicke_sas_critical_coupling(n, omega_a)
        return v_sas_critical_coupling(n)

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cs = list(pool.map(_exponent_sample,
                               [(n, method, kind, omega_a) for n in ns]))
    else:
        cs = [critical(n) for n in ns]
    samples = list(zip(ns, cs))
    fit = fit_critical_exponent(samples, offset)
    _emit(outdir, "samples", fmt, _schema("exponent_study"),
          ("n_atoms", "critical_coupling"),
          [(n, float(c)) for n, c in samples], manifest)
    _emit(outdir, "fit", fmt, _schema("exponent_study"),
          ("exponent", "log_prefactor", "r_squared", "ci_lo", "ci_hi", "offset"),
          [(fit.exponent, fit.log_prefactor, fit.r_squared,
            fit.confidence_interval[0], fit.confidence_interval[1], offset)],
          manifest)


def _exponent_sample(args):
    n, method, kind, omega_a = args
    if method == "quantum":
        return dicke_quantum_critical_coupling(n, omega_a)
    if kind == "DICKE":
        return dicke_sas_critical_coupling(n, omega_a)
    return v_sas_critical_coupling(n)


def _run_triple_point(cfg: JobConfig, outdir, fmt, manifest, workers):
    n = int(cfg.get("model.n_atoms"))
    spec = triple_point_spec(n)
    state_rows, check_rows = [], []
    for m in (0, 1, 2):
        analytic = triple_point_ground_state(n, m)
        basis = analytic.basis
        H = assemble_hamiltonian(spec, basis)
        e = float(np.vdot(analytic.amplitudes, H.entries @ analytic.amplitudes).real)
        residual = float(np.linalg.norm(H.entries @ analytic.amplitudes
                                        - e * analytic.amplitudes))
        numeric = lowest_eigenpairs(H, 1).ground_state
        dev = float(np.max(np.abs(numeric.amplitudes - analytic.amplitudes)))
        for lab, amp in zip(basis.labels, analytic.amplitudes):
            state_rows.append((m, lab[0], lab[1], lab[2], float(amp.real)))
        check_rows.append((m, e, residual, dev))
    _emit(outdir, "states", fmt, _schema("triple_point"),
          ("m_total", "nu", "q", "r", "amplitude"), state_rows, manifest)
    _emit(outdir, "checks", fmt, _schema("triple_point"),
          ("m_total", "energy", "eigen_residual", "numeric_deviation"),
          check_rows, manifest)


def _run_observable_table(cfg: JobConfig, outdir, fmt, manifest, workers):
    spec = cfg.model_spec()
    xs = cfg.get("observable.x", (0.5, 1.0, 2.0))
    xs = [float(x) for x in (xs if isinstance(xs, tuple) else (xs,))]
    model = "TCM" if spec.kind is ModelKind.TCM else "DICKE"
    omega_a = spec.omega_a
    gamma_c = math.sqrt(omega_a) if model == "TCM" else math.sqrt(omega_a) / 2.0
    n = spec.n_atoms
    cutoff = int(cfg.get("sector.fock_cutoff", 0)) or _table_cutoff(n, gamma_c, max(xs))
    dicke = ModelSpec(ModelKind.DICKE, n, omega_a, 1.0)
    basis = enumerate_basis(dicke, SectorSpec(SectorType.FULL, fock_cutoff=cutoff))
    rows = []
    for x in xs:
        gc_eff = gamma_c / 2.0 if model == "TCM" else gamma_c
        if x > 1.0:
            theta = math.acos(x**-2)
            q = -math.sqrt(2.0 * n) * gc_eff * x * math.sin(theta)
        else:
            theta, q = 0.0, 0.0
        pars = dict(q=q, theta=theta)
        fams = [("COHERENT", Family.DICKE_COH), ("SAS_PLUS", Family.DICKE_SAS_PLUS)]
        if x > 1.0:
            fams.append(("SAS_MINUS", Family.DICKE_SAS_MINUS))
        for fam_name, fam in fams:
            st = embed_variational_state(VariationalPoint(fam, pars, 0.0), basis)
            for obs in OBSERVABLE_IDS:
                cf = closed_form_observable(fam_name, obs, x, gamma_c, n, model)
                nv = numeric_observable(st, obs)
                rows.append((fam_name, obs, x, cf, nv, abs(cf - nv)))
    _emit(outdir, "observables", fmt, _schema("observable_table"),
          ("family", "observable", "x", "closed_form", "numeric", "abs_error"),
          rows, manifest)


def _table_cutoff(n, gamma_c, x_max):
    mean = n * gamma_c**2 * x_max**2
    return int(mean + 10.0 * math.sqrt(mean + 1.0) + 25.0)


_RUNNERS = {
    "spectrum_scan": _run_spectrum_scan,
    "phase_scan": _run_phase_scan,
    "phase_diagram_grid": _run_phase_diagram_grid,
    "exponent_study": _run_exponent_study,
    "triple_point": _run_triple_point,
    "observable_table": _run_observable_table,
}


def run_job(config: JobConfig, outdir: str, workers: int = 1) -> dict:
    """Execute a validated job and return the artifact manifest."""
    os.makedirs(outdir, exist_ok=True)
    fmt = config.get("output.format", "csv")
    manifest = {"schema": _schema(config.kind), "job_kind": config.kind, "files": []}
    try:
        _RUNNERS[config.kind](config, outdir, fmt, manifest, workers)
    except (ModelError, ValueError) as exc:
        raise ComputeError(f"{config.kind}: {exc}") from exc
    manifest["files"].sort(key=lambda f: f["name"])
    path = os.path.join(outdir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
        fh.write("\n")
    return manifest
