"""Configuration, serialized outputs and the command-line entry point.

Config grammar
--------------
INI text (``configparser`` dialect, ``#`` or ``;`` comments, ``key = value``)
with these flat sections; every key except ``[material] nu`` is optional and
falls back to the defaults in :class:`RunConfig`::

    [mesh]         nx, ny, Lx, Ly
    [material]     mu, lam, mu_c, l_c, c, d, sigma_y, nu
    [time]         T, steps
    [load]         preset (zero | linear_ramp | cyclic_shear) plus preset keys:
                     linear_ramp:  M (six numbers, row-major 3x2), rate, offset
                     cyclic_shear: amplitude, period, hetero, force
    [initial]      eps_p0, b0 (nine numbers each, uniform over elements)
    [solver]       stagger_tol, max_stagger, linear_solver (direct | cg),
                   linear_tol, anderson
    [sweep]        nu_list (strictly descending numbers)
    [diagnostics]  centers, boundary_centers, probes (points "x y; x y"),
                   radii, boundary_radii (numbers), seed, sample_pairs
    [output]       dir, field_stride

Lists are whitespace or comma separated. ``[sweep] nu_list`` is only valid
for the ``sweep`` command and required by it.
"""

from __future__ import annotations

import argparse
import configparser
import io
import json
import logging
import math
import re
import sys
import time
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import constitutive as cm
from . import grid_fem as gf
from . import quasistatic as qs
from . import regularity_lab as rl
from . import tensor3 as t3

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
EXIT_OK, EXIT_SOLVER, EXIT_INVARIANT, EXIT_CONFIG = 0, 1, 2, 3
BACKSTRESS_TOL = 1e-9
CONSISTENCY_TOL = 1e-10

NODE_COLUMNS = ["x1", "x2", "u1", "u2", "u3", "axlA1", "axlA2", "axlA3"]
_IJ = [f"{i}{j}" for i in range(1, 4) for j in range(1, 4)]
ELEMENT_COLUMNS = (["x1", "x2"] + [f"eps_p{ij}" for ij in _IJ]
                   + [f"b{ij}" for ij in _IJ] + ["excess"])


class ParseError(ValueError):
    def __init__(self, message, line=None, column=None):
        where = "" if line is None else f" (line {line}, column {column or 1})"
        super().__init__(message + where)
        self.line = line
        self.column = column


class ValidationError(ValueError):
    """All validation problems of a config; ``key`` names the first offender."""

    def __init__(self, errors):
        self.errors = list(errors)
        self.key = self.errors[0][0]
        super().__init__("; ".join(f"{k}: {m}" for k, m in self.errors))


class IoError(OSError):
    pass


# ----------------------------------------------------------------------------
# config
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    nx: int = 16
    ny: int = 16
    Lx: float = 1.0
    Ly: float = 1.0
    mu: float = 100.0
    lam: float = 150.0
    mu_c: float = 50.0
    l_c: float = 1e-3
    c: float = 50.0
    d: float = 50.0
    sigma_y: float = 1.0
    nu: float = 1e-3
    T: float = 1.0
    steps: int = 100
    preset: str = "zero"
    load: tuple = ()  # sorted (key, value) pairs of preset parameters
    eps_p0: tuple | None = None
    b0: tuple | None = None
    stagger_tol: float = 1e-8
    max_stagger: int = 200
    linear_solver: str = "direct"
    linear_tol: float = 1e-10
    anderson: int = 5
    nu_list: tuple | None = None
    centers: tuple = ()
    boundary_centers: tuple = ()
    probes: tuple = ()
    radii: tuple = ()
    boundary_radii: tuple = ()
    seed: int = 0
    sample_pairs: int = 1000
    out_dir: str = "out"
    field_stride: int = 1

    @property
    def material(self):
        return cm.MaterialParams(self.mu, self.lam, self.mu_c, self.l_c, self.c, self.d,
                                 self.sigma_y, self.nu)

    def load_preset(self):
        kw = {k: (np.array(v) if isinstance(v, tuple) else v) for k, v in self.load}
        return qs.make_preset(self.preset, self.Lx, self.Ly, **kw)

    def scenario(self, nu=None):
        mat = self.material if nu is None else self.material.with_nu(nu)
        return qs.Scenario(
            mat, self.nx, self.ny, self.T, self.steps, self.load_preset(), self.Lx, self.Ly,
            eps_p0=None if self.eps_p0 is None else np.array(self.eps_p0).reshape(3, 3),
            b0=None if self.b0 is None else np.array(self.b0).reshape(3, 3),
        )

    def stepper_kwargs(self):
        return dict(stagger_tol=self.stagger_tol, max_stagger=self.max_stagger,
                    linear_solver=self.linear_solver, linear_tol=self.linear_tol,
                    anderson=self.anderson)


# section -> {key: kind}
_SCHEMA = {
    "mesh": {"nx": "int", "ny": "int", "Lx": "float", "Ly": "float"},
    "material": {k: "float" for k in ("mu", "lam", "mu_c", "l_c", "c", "d", "sigma_y", "nu")},
    "time": {"T": "float", "steps": "int"},
    "initial": {"eps_p0": "floats9", "b0": "floats9"},
    "solver": {"stagger_tol": "float", "max_stagger": "int", "linear_solver": "str",
               "linear_tol": "float", "anderson": "int"},
    "sweep": {"nu_list": "floats"},
    "diagnostics": {"centers": "points", "boundary_centers": "points", "probes": "points",
                    "radii": "floats", "boundary_radii": "floats", "seed": "int",
                    "sample_pairs": "int"},
    "output": {"dir": "str", "field_stride": "int"},
}
_LOAD_SCHEMA = {
    "zero": {},
    "linear_ramp": {"M": "floats6", "rate": "float", "offset": "float"},
    "cyclic_shear": {"amplitude": "float", "period": "float", "hetero": "float",
                     "force": "float"},
}
_FIELD_NAME = {("output", "dir"): "out_dir"}
_SPLIT = re.compile(r"[\s,]+")


def _convert(kind, raw):
    raw = raw.strip()
    if kind == "int":
        return int(raw)
    if kind == "float":
        v = float(raw)
        if not math.isfinite(v):
            raise ValueError("must be finite")
        return v
    if kind == "str":
        return raw
    if kind.startswith("floats"):
        vals = tuple(float(s) for s in _SPLIT.split(raw) if s)
        n = kind[len("floats"):]
        if n and len(vals) != int(n):
            raise ValueError(f"expected {n} numbers, got {len(vals)}")
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("must be finite")
        return vals
    if kind == "points":
        pts = []
        for chunk in raw.split(";"):
            if chunk.strip():
                xy = tuple(float(s) for s in _SPLIT.split(chunk.strip()) if s)
                if len(xy) != 2:
                    raise ValueError(f"point {chunk.strip()!r} needs two coordinates")
                pts.append(xy)
        return tuple(pts)
    raise AssertionError(kind)


def _key_lines(text):
    """Map (section, key) -> line number, for error messages."""
    out, section = {}, None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
        elif section and "=" in s and not s.startswith(("#", ";")):
            out[(section, s.split("=", 1)[0].strip())] = n
    return out


def parse_config(text, command=None):
    """Parse and validate config text.

    ``command`` (``run``, ``sweep``, ...) enables the mode-consistency rule:
    a ``nu_list`` is an error for every command except ``sweep``, which
    requires one.
    """
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ParseError("key before any [section] header", exc.lineno, 1) from None
    except (configparser.DuplicateSectionError, configparser.DuplicateOptionError) as exc:
        raise ParseError(str(exc).split(":")[0].split("]")[-1].strip() or "duplicate entry",
                         exc.lineno, 1) from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0]
        line = text.splitlines()[lineno - 1]
        col = len(line) - len(line.lstrip()) + 1
        raise ParseError(f"cannot parse {line.strip()!r}; expected 'key = value'",
                         lineno, col) from None

    where = _key_lines(text)
    errors = []
    values = {}

    def err(section, key, msg):
        line = where.get((section, key))
        errors.append((key, msg + ("" if line is None else f" (line {line})")))

    for section in cp.sections():
        if section != "load" and section not in _SCHEMA:
            err(section, section, f"unknown section [{section}]")
            continue
        schema = _SCHEMA.get(section, {})
        if section == "load":
            preset = cp[section].get("preset", "zero").strip()
            if preset not in _LOAD_SCHEMA:
                err(section, "preset", f"unknown preset {preset!r}; known: {sorted(_LOAD_SCHEMA)}")
                continue
            values["preset"] = preset
            schema = _LOAD_SCHEMA[preset]
            load = {}
            for key, raw in cp[section].items():
                if key == "preset":
                    continue
                if key not in schema:
                    err(section, key, f"unknown key for preset {preset!r}")
                    continue
                try:
                    load[key] = _convert(schema[key], raw)
                except ValueError as exc:
                    err(section, key, f"bad value {raw!r}: {exc}")
            values["load"] = tuple(sorted(load.items()))
            continue
        for key, raw in cp[section].items():
            if key not in schema:
                err(section, key, f"unknown key in [{section}]")
                continue
            try:
                values[_FIELD_NAME.get((section, key), key)] = _convert(schema[key], raw)
            except ValueError as exc:
                err(section, key, f"bad value {raw!r}: {exc}")

    if errors:
        raise ValidationError(errors)
    cfg = RunConfig(**values)
    _validate(cfg, command, err)
    if errors:
        raise ValidationError(errors)
    return cfg


def _validate(cfg, command, err):
    for k in ("nx", "ny", "steps", "max_stagger", "sample_pairs", "field_stride"):
        if getattr(cfg, k) < 1:
            err("", k, "must be at least 1")
    if cfg.sample_pairs < 100:
        err("diagnostics", "sample_pairs", "must be at least 100")
    if cfg.anderson < 0:
        err("solver", "anderson", "must be non-negative")
    for k in ("Lx", "Ly", "T"):
        if not getattr(cfg, k) > 0:
            err("", k, "must be positive")
    for f in fields(cm.MaterialParams):
        if f.name == "rho":
            continue
        v = getattr(cfg, f.name)
        if (f.name == "d" and v < 0) or (f.name != "d" and not v > 0):
            err("material", f.name, f"must be {'non-negative' if f.name == 'd' else 'positive'}")
    if not 0 < cfg.stagger_tol < 1:
        err("solver", "stagger_tol", "must lie in (0, 1)")
    if not 0 < cfg.linear_tol <= 1e-4:
        err("solver", "linear_tol", "must lie in (0, 1e-4]")
    if cfg.linear_solver not in ("direct", "cg"):
        err("solver", "linear_solver", "must be 'direct' or 'cg'")
    if cfg.nu_list is not None:
        nl = cfg.nu_list
        if not nl or any(v <= 0 for v in nl):
            err("sweep", "nu_list", "entries must be positive")
        elif any(b >= a for a, b in zip(nl, nl[1:])):
            err("sweep", "nu_list", "must be strictly descending")
    if command is not None:
        if command == "sweep" and cfg.nu_list is None:
            err("sweep", "nu_list", "the sweep command needs [sweep] nu_list")
        elif command != "sweep" and cfg.nu_list is not None:
            err("sweep", "nu_list",
                f"nu_list given but command {command!r} runs a single nu; use 'sweep'")
    for k in ("radii", "boundary_radii"):
        if any(r <= 0 for r in getattr(cfg, k)):
            err("diagnostics", k, "radii must be positive")
    try:
        cfg.load_preset()
    except (TypeError, ValueError) as exc:
        err("load", "preset", str(exc))


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple) and v and isinstance(v[0], tuple):
        return "; ".join(" ".join(repr(float(c)) for c in p) for p in v)
    if isinstance(v, tuple):
        return " ".join(repr(float(c)) for c in v)
    return str(v)


def echo(cfg):
    """Canonical config text with every default filled in."""
    out = io.StringIO()
    names = {(s, k): _FIELD_NAME.get((s, k), k) for s, keys in _SCHEMA.items() for k in keys}
    for section, keys in _SCHEMA.items():
        lines = []
        for key in keys:
            v = getattr(cfg, names[(section, key)])
            if v is None or v == ():
                continue
            lines.append(f"{key} = {_fmt(v)}")
        if lines:
            out.write(f"[{section}]\n" + "\n".join(lines) + "\n\n")
        if section == "time":
            out.write("[load]\npreset = " + cfg.preset + "\n")
            for k, v in cfg.load:
                out.write(f"{k} = {_fmt(v)}\n")
            out.write("\n")
    return out.getvalue()


# ----------------------------------------------------------------------------
# outputs
# ----------------------------------------------------------------------------


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            raise ValueError("non-finite number in output")
        return x
    return x


def dump_json(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _write_table(path, header, rows):
    rows = np.asarray(rows, float).reshape(-1, len(header))
    if not np.all(np.isfinite(rows)):
        raise ValueError(f"non-finite values in {path.name}")
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    np.savetxt(buf, rows, delimiter=",", fmt="%.17g")
    path.write_text(buf.getvalue())


def node_rows(mesh, state):
    return np.column_stack([mesh.nodes, state.u, state.a])


def element_rows(mesh, state, params):
    return np.column_stack([
        mesh.centroids,
        state.eps_p.reshape(-1, 9),
        state.b.reshape(-1, 9),
        state.excess(params),
    ])


def write_outputs(summary, trajectory, directory, tables=None, field_stride=1, timings=None):
    """Write field dumps, ``summary.json`` and diagnostic tables to ``directory``.

    ``tables`` maps file stems to ``(header, rows)``. Wall-times go to a
    separate ``timings.json`` so that everything else is reproducible byte
    for byte.
    """
    d = Path(directory)
    try:
        d.mkdir(parents=True, exist_ok=True)
        if trajectory is not None:
            (d / "fields").mkdir(exist_ok=True)
            mesh, p = trajectory.mesh, trajectory.params
            last = len(trajectory) - 1
            for k, s in enumerate(trajectory.states):
                if k % field_stride and k != last:
                    continue
                _write_table(d / "fields" / f"step_{k:05d}_nodes.csv", NODE_COLUMNS,
                             node_rows(mesh, s))
                _write_table(d / "fields" / f"step_{k:05d}_elements.csv", ELEMENT_COLUMNS,
                             element_rows(mesh, s, p))
            _write_table(d / "fields" / "times.csv", ["step", "time"],
                         [[k, s.time] for k, s in enumerate(trajectory.states)
                          if not (k % field_stride and k != last)])
        for stem, (header, rows) in (tables or {}).items():
            _write_table(d / f"{stem}.csv", header, rows)
        (d / "summary.json").write_text(dump_json(summary))
        if timings is not None:
            (d / "timings.json").write_text(dump_json(timings))
    except OSError as exc:
        raise IoError(f"cannot write outputs to {d}: {exc}") from exc
    return d


def _read_table(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


def read_trajectory(directory, cfg=None):
    """Rebuild a :class:`Trajectory` from field dumps (stresses recomputed)."""
    d = Path(directory)
    if cfg is None:
        cfg = parse_config((d / "config.ini").read_text())
    mesh = gf.build_mesh(cfg.nx, cfg.ny, cfg.Lx, cfg.Ly)
    params = cfg.material
    _, times = _read_table(d / "fields" / "times.csv")
    traj = qs.Trajectory(mesh, params, load=cfg.load_preset())
    for k, t in times:
        k = int(k)
        hn, nodes = _read_table(d / "fields" / f"step_{k:05d}_nodes.csv")
        he, elems = _read_table(d / "fields" / f"step_{k:05d}_elements.csv")
        if hn != NODE_COLUMNS or he != ELEMENT_COLUMNS:
            raise IoError(f"unexpected column header in step {k}")
        u, a = nodes[:, 2:5], nodes[:, 5:8]
        ep = elems[:, 2:11].reshape(-1, 3, 3)
        b = elems[:, 11:20].reshape(-1, 3, 3)
        traj.append(qs.make_state(mesh, params, float(t), u, a, ep, b))
    return traj


# ----------------------------------------------------------------------------
# invariants and diagnostics
# ----------------------------------------------------------------------------


def _verdict(name, ok, value=None, threshold=None, margin=None, note=None):
    out = {"name": name, "verdict": "pass" if ok else "fail"}
    for k, v in (("value", value), ("threshold", threshold), ("margin", margin), ("note", note)):
        if v is not None:
            out[k] = v
    return out


def trajectory_invariants(traj, report):
    p = traj.params
    mesh = traj.mesh
    out = []
    bound = p.backstress_bound
    bmax = float(np.max(report["max_backstress"]))
    if np.isfinite(bound):
        out.append(_verdict("backstress_bound", bmax <= bound + BACKSTRESS_TOL, bmax,
                            bound + BACKSTRESS_TOL, bound + BACKSTRESS_TOL - bmax))
    else:
        out.append(_verdict("backstress_bound", True, bmax, note="d = 0, no bound"))
    sym, trace, cons = 0.0, 0.0, 0.0
    for s in traj.states:
        for z in (s.eps_p, s.b):
            sym = max(sym, float(np.max(np.abs(z - np.swapaxes(z, -1, -2)), initial=0.0)))
            trace = max(trace, float(np.max(np.abs(t3.tr(z)), initial=0.0)))
        ref = qs.make_state(mesh, p, s.time, s.u, s.a, s.eps_p, s.b)
        scale = max(1.0, float(np.max(np.abs(ref.T), initial=0.0)))
        cons = max(cons, float(np.max(np.abs(ref.T - s.T), initial=0.0)) / scale,
                   float(np.max(np.abs(ref.T_E - s.T_E), initial=0.0)) / scale)
    out.append(_verdict("internal_symmetric", sym <= CONSISTENCY_TOL, sym, CONSISTENCY_TOL))
    out.append(_verdict("internal_trace_free", trace <= CONSISTENCY_TOL, trace, CONSISTENCY_TOL))
    out.append(_verdict("stress_consistency", cons <= CONSISTENCY_TOL, cons, CONSISTENCY_TOL))
    times = traj.times
    out.append(_verdict("times_increasing", bool(np.all(np.diff(times) > 0))))
    out.append(_verdict("initial_excess_zero", traj[0].max_excess <= 1e-10 * p.sigma_y,
                        traj[0].max_excess))
    rs = report["rate_sum"]
    drop = float(np.max(-np.diff(rs), initial=0.0))
    out.append(_verdict("estimate_sum_nondecreasing", drop <= 1e-12 * max(1.0, rs[-1]), drop))
    dmin = float(np.min(np.diff(report["dissipation"]), initial=0.0))
    out.append(_verdict("dissipation_nonnegative", dmin >= -1e-12 * max(1.0, report["dissipation"][-1]),
                        dmin))
    finite = all(np.all(np.isfinite(v)) for v in report.values())
    out.append(_verdict("finite_outputs", bool(finite)))
    return out


def _growth_dict(rep):
    out = {
        "center": list(rep.center),
        "radii": rep.radii,
        "energies": rep.energies,
        "ratios": [r.value for r in rep.ratios],
        "exponent": rep.exponent,
        "fit_residual": None if rep.fit is None else rep.fit.residual,
        "flag": rep.flag,
    }
    if rep.widman is not None:
        out["widman"] = {"q": rep.widman.q, "alpha": rep.widman.alpha,
                         "fitted_alpha": rep.widman.fitted_alpha,
                         "residuals": rep.widman.residuals,
                         "violations": int(np.sum(rep.widman.violations))}
    if rep.lift_energies is not None:
        out["lift_energies"] = rep.lift_energies
        out["lift_exponent"] = rep.lift_exponent
        out["lift_K"] = rep.lift_K
    return {k: v for k, v in out.items() if v is not None}


def _holder_dict(rep):
    out = {"alpha": rep.alpha, "slope": rep.slope, "span": list(rep.span),
           "n_pairs": rep.n_pairs, "residual": rep.residual, "flag": rep.flag,
           "predicted": rep.predicted}
    return {k: v for k, v in out.items() if v is not None and not (isinstance(v, float) and np.isnan(v))
            and v != [] and not (isinstance(v, list) and any(np.isnan(x) for x in v))}


def diagnostics(traj, cfg):
    """Growth and Hoelder reports requested by the diagnostics plan.

    Returns ``(reports, tables, verdicts)``; unresolved balls are recorded as
    skipped rather than raised.
    """
    mesh = traj.mesh
    reports, tables, verdicts = {}, {}, []
    u_final = traj[-1].u
    dens = rl.energy_density(mesh, u_final)
    growth = []
    for c in cfg.centers:
        try:
            rep = rl.growth_report(mesh, dens, c, cfg.radii)
        except (rl.BallUnresolved, ValueError) as exc:
            growth.append({"center": list(c), "skipped": str(exc)})
            continue
        growth.append(_growth_dict(rep))
        e = rep.energies[::-1]
        verdicts.append(_verdict(f"local_energy_monotone@{c[0]:g},{c[1]:g}",
                                 bool(np.all(np.diff(e) >= -1e-12 * max(e[-1], 1e-300)))))
        tables[f"growth_{len(growth) - 1}"] = (
            ["radius", "energy", "ratio"],
            [[r, e_, np.nan_to_num(q.value if q.value is not None else -1.0, nan=-1.0)]
             for r, e_, q in zip(rep.radii, rep.energies, rep.ratios)],
        )
    if growth:
        reports["growth"] = growth
    if cfg.boundary_centers and cfg.boundary_radii:
        try:
            reps = rl.boundary_growth(mesh, traj, None, cfg.boundary_centers, cfg.boundary_radii)
            reports["boundary_growth"] = [_growth_dict(r) for r in reps]
            for i, r in enumerate(reps):
                tables[f"boundary_growth_{i}"] = (
                    ["radius", "energy", "lift_energy"],
                    np.column_stack([r.radii, r.energies, r.lift_energies]),
                )
        except (rl.BallUnresolved, ValueError) as exc:
            reports["boundary_growth"] = {"skipped": str(exc)}
    holder = {}
    for anchors in ("interior", "boundary", "all"):
        try:
            h = rl.holder_space(mesh, u_final, cfg.sample_pairs, cfg.seed, anchors)
        except (rl.BallUnresolved, ValueError) as exc:
            holder[anchors] = {"skipped": str(exc)}
            continue
        holder[anchors] = _holder_dict(h)
        if h.alpha is not None:
            verdicts.append(_verdict(f"holder_space_in_range[{anchors}]", 0 < h.alpha <= 1, h.alpha))
    if cfg.probes and len(traj) >= 5:
        a_hat = holder.get("all", {}).get("alpha")
        ht = rl.holder_time(traj, cfg.probes, cfg.seed, alpha_space=a_hat)
        holder["time"] = _holder_dict(ht)
    reports["holder"] = holder
    return reports, tables, verdicts


def energy_table(report):
    cols = ["time", "energy", "rate_sum", "excess_term", "estimate_total", "dissipation",
            "max_backstress", "max_excess"]
    return cols, np.column_stack([report[c] for c in cols])


def _energy_summary(report):
    return {
        "columns": list(report.keys()),
        "final": {k: float(v[-1]) for k, v in report.items()},
        "max": {k: float(np.max(v)) for k, v in report.items()},
    }


def run_pipeline(cfg, nu=None):
    """Run one trajectory plus diagnostics; returns ``(summary, traj, tables, timings)``."""
    timings = {}
    t0 = time.perf_counter()
    traj = qs.run(cfg.scenario(nu), **cfg.stepper_kwargs())
    timings["solve"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    report = rl.energy_report(traj)
    verdicts = trajectory_invariants(traj, report)
    reports, tables, dverdicts = diagnostics(traj, cfg)
    timings["diagnostics"] = time.perf_counter() - t0
    tables["energy"] = energy_table(report)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "config": echo(cfg if nu is None else replace(cfg, nu=nu, nu_list=None)),
        "nu": traj.params.nu,
        "steps": len(traj) - 1,
        "max_stagger_iters": int(max(s.stagger_iters for s in traj.states)),
        "energy": _energy_summary(report),
        "energy_table": {k: v for k, v in report.items()},
        "reports": reports,
        "invariants": verdicts + dverdicts,
    }
    return summary, traj, tables, timings


def sweep_verdicts(rows):
    ok = [r for r in rows if "error" not in r]
    out = []
    if len(ok) >= 2:
        q = np.array([r["estimate_quantity"] for r in ok])
        ratio = float(q.max() / q.min()) if q.min() > 0 else math.inf
        out.append(_verdict("estimate_bounded_ratio", ratio <= 10.0, ratio, 10.0, 10.0 - ratio))
        nus = np.array([r["nu"] for r in ok])
        exc = np.array([r["max_excess"] for r in ok])
        if np.all(exc > 0):
            slope = float(np.polyfit(np.log(nus), np.log(exc), 1)[0])
            out.append(_verdict("excess_slope", abs(slope - 1.0) <= 0.2, slope, 1.0,
                                0.2 - abs(slope - 1.0)))
        out.append(_verdict("excess_decreasing", bool(np.all(np.diff(exc) <= 0))))
    out.append(_verdict("all_runs_converged", len(ok) == len(rows), len(ok), len(rows)))
    return out


# ----------------------------------------------------------------------------
# verify suite
# ----------------------------------------------------------------------------


def _ritz_min(cfg, probes=100):
    op = gf.CoupledOperator(gf.build_mesh(cfg.nx, cfg.ny, cfg.Lx, cfg.Ly), cfg.material)
    K = op.K_ff
    rng = np.random.default_rng(cfg.seed)
    X = rng.standard_normal((K.shape[0], probes))
    return float(np.min(np.einsum("ij,ij->j", X, K @ X) / np.einsum("ij,ij->j", X, X)))


def _patch_error(cfg):
    mesh = gf.build_mesh(cfg.nx, cfg.ny, cfg.Lx, cfg.Ly)
    p = cfg.material
    M = np.array([[1e-3, 2e-3], [-5e-4, 1e-3], [3e-4, -2e-4]])
    load = qs.LinearRamp(M, rate=0.0, offset=1.0)
    xb = mesh.nodes[mesh.boundary_nodes]
    u, a = gf.CoupledOperator(mesh, p).solve(None, None, load.g(xb, 0), load.a(xb, 0))
    return float(max(np.max(np.abs(u - load.g(mesh.nodes, 0))),
                     np.max(np.abs(a - load.a(mesh.nodes, 0)))))


def verify_pipeline(cfg):
    summary, traj, tables, timings = run_pipeline(cfg)
    checks = []
    rmin = _ritz_min(cfg)
    checks.append(_verdict("coercivity_ritz_positive", rmin > 0, rmin, 0.0, rmin))
    perr = _patch_error(cfg)
    checks.append(_verdict("linear_patch_test", perr <= 1e-10, perr, 1e-10))
    again = qs.run(cfg.scenario(), **cfg.stepper_kwargs())
    same = all(np.array_equal(s.u, r.u) and np.array_equal(s.eps_p, r.eps_p)
               and np.array_equal(s.b, r.b) for s, r in zip(traj.states, again.states))
    checks.append(_verdict("deterministic_rerun", bool(same)))
    summary["invariants"] = summary["invariants"] + checks
    summary["command"] = "verify"
    return summary, traj, tables, timings


# ----------------------------------------------------------------------------
# CLI
# ----------------------------------------------------------------------------


def _failed(summary):
    return [v["name"] for v in summary.get("invariants", []) if v["verdict"] == "fail"]


def report_text(summary):
    lines = [f"schema_version: {summary.get('schema_version')}"]
    if "command" in summary:
        lines.append(f"command: {summary['command']}")
    if "nu" in summary:
        lines.append(f"nu: {summary['nu']:g}")
    if "energy" in summary:
        fin = summary["energy"]["final"]
        lines.append(f"final energy: {fin['energy']:.6g}   estimate total: {fin['estimate_total']:.6g}")
        mx = summary["energy"]["max"]
        lines.append(f"max |b|: {mx['max_backstress']:.6g}   max excess: {mx['max_excess']:.6g}")
    if "sweep" in summary:
        lines.append("sweep:")
        for row in summary["sweep"]:
            if "error" in row:
                lines.append(f"  nu={row['nu']:g}  error: {row['error']}")
            else:
                lines.append(f"  nu={row['nu']:g}  estimate={row['estimate_quantity']:.6g}  "
                             f"max_excess={row['max_excess']:.6g}")
    hold = summary.get("reports", {}).get("holder", {})
    for k, v in hold.items():
        if "alpha" in v:
            lines.append(f"holder[{k}]: alpha={v['alpha']:.4g}")
    lines.append("invariants:")
    for v in summary.get("invariants", []):
        extra = f"  value={v['value']:.6g}" if isinstance(v.get("value"), (int, float)) else ""
        lines.append(f"  [{v['verdict'].upper()}] {v['name']}{extra}")
    return "\n".join(lines) + "\n"


def _load_config(path, command):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError([("config", f"cannot read {path}: {exc}")]) from exc
    return parse_config(text, command)


def _out_dir(args, cfg):
    return Path(args.out or cfg.out_dir)


def _cmd_run(args):
    cfg = _load_config(args.config, "run")
    summary, traj, tables, timings = run_pipeline(cfg)
    summary["command"] = "run"
    out = _out_dir(args, cfg)
    write_outputs(summary, traj, out, tables, cfg.field_stride, timings)
    (out / "config.ini").write_text(echo(cfg))
    return EXIT_INVARIANT if _failed(summary) else EXIT_OK


def _cmd_verify(args):
    cfg = _load_config(args.config, "verify")
    summary, traj, tables, timings = verify_pipeline(cfg)
    out = _out_dir(args, cfg)
    write_outputs(summary, traj, out, tables, cfg.field_stride, timings)
    (out / "config.ini").write_text(echo(cfg))
    failed = _failed(summary)
    for name in failed:
        print(f"invariant failed: {name}", file=sys.stderr)
    return EXIT_INVARIANT if failed else EXIT_OK


def _cmd_sweep(args):
    cfg = _load_config(args.config, "sweep")
    out = _out_dir(args, cfg)
    rows, timings = [], {}
    for nu in cfg.nu_list:
        try:
            summary, traj, tables, tm = run_pipeline(cfg, nu)
        except (qs.StaggerNoConvergence, qs.LocalNoConvergence, gf.NoConvergence) as exc:
            print(f"nu={nu:g}: {exc}", file=sys.stderr)
            rows.append({"nu": nu, "error": str(exc)})
            continue
        summary["command"] = "sweep"
        sub = out / f"nu_{nu:.6e}"
        write_outputs(summary, traj, sub, tables, cfg.field_stride)
        (sub / "config.ini").write_text(summary["config"])
        timings[f"{nu:.6e}"] = tm
        e = summary["energy"]["max"]
        rows.append({"nu": nu, "estimate_quantity": e["estimate_total"],
                     "estimate_final": summary["energy"]["final"]["estimate_total"],
                     "max_excess": e["max_excess"], "max_backstress": e["max_backstress"],
                     "max_stagger_iters": summary["max_stagger_iters"],
                     "failed_invariants": _failed(summary)})
    combined = {"schema_version": SCHEMA_VERSION, "command": "sweep", "config": echo(cfg),
                "sweep": rows, "invariants": sweep_verdicts(rows)}
    ok = [r for r in rows if "error" not in r]
    table = {"sweep": (["nu", "estimate_quantity", "estimate_final", "max_excess", "max_backstress"],
                       [[r["nu"], r["estimate_quantity"], r["estimate_final"], r["max_excess"],
                         r["max_backstress"]] for r in ok])}
    write_outputs(combined, None, out, table, timings=timings)
    (out / "config.ini").write_text(echo(cfg))
    if len(ok) < len(rows):
        return EXIT_SOLVER
    return EXIT_INVARIANT if _failed(combined) or any(r["failed_invariants"] for r in ok) else EXIT_OK


def _cmd_diagnose(args):
    d = Path(args.directory)
    cfg = _load_config(args.config or d / "config.ini", None)
    try:
        traj = read_trajectory(d, cfg)
    except (OSError, ValueError) as exc:
        raise IoError(f"cannot read trajectory from {d}: {exc}") from exc
    report = rl.energy_report(traj)
    reports, tables, verdicts = diagnostics(traj, cfg)
    tables["energy"] = energy_table(report)
    summary = {"schema_version": SCHEMA_VERSION, "command": "diagnose", "config": echo(cfg),
               "energy": _energy_summary(report), "reports": reports,
               "invariants": trajectory_invariants(traj, report) + verdicts}
    out = d / "diagnostics"
    write_outputs(summary, None, out, tables)
    return EXIT_INVARIANT if _failed(summary) else EXIT_OK


def _cmd_report(args):
    p = Path(args.path)
    if p.is_dir():
        p = p / "summary.json"
    try:
        summary = json.loads(p.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise IoError(f"cannot read summary {p}: {exc}") from exc
    sys.stdout.write(report_text(summary))
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="afcosserat", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, helptext in (("run", "run one trajectory with diagnostics"),
                           ("sweep", "run the regularization sweep"),
                           ("verify", "run and check every invariant")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config")
        p.add_argument("-o", "--out", help="output directory (overrides [output] dir)")
    p = sub.add_parser("diagnose", help="diagnostics on a stored trajectory")
    p.add_argument("directory")
    p.add_argument("--config")
    p = sub.add_parser("report", help="print a digest of a summary")
    p.add_argument("path")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


_COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "verify": _cmd_verify,
             "diagnose": _cmd_diagnose, "report": _cmd_report}


def cli(argv=None):
    """Entry point; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return _COMMANDS[args.command](args)
    except (ParseError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except qs.InadmissibleInitialData as exc:
        print(f"inadmissible initial data: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (qs.StaggerNoConvergence, qs.LocalNoConvergence, gf.NoConvergence,
            cm.NoConvergence) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except IoError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def main():
    sys.exit(cli())
