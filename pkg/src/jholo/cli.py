"""Scenario runner: ``jholo --config scenario.json --out DIR``.

A scenario config is a JSON document validated against :data:`CONFIG_SCHEMA`.
Every run writes ``report.json`` (re-validated against :data:`REPORT_SCHEMA`)
and ``results.csv``; runs that produce a disc also write ``fields.csv``.

Exit codes: 0 success, 1 configuration error, 2 gate refusal, 3 divergence
or another numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field

import jsonschema
import numpy as np

from .errors import ConfigurationError, DivergenceError, GateError, GeometryError, JHoloError
from .geometry import GridFunction, build_grid, lp_norm
from .structures import catalog

log = logging.getLogger("jholo")

EXIT_OK, EXIT_CONFIG, EXIT_GATE, EXIT_DIVERGED = 0, 1, 2, 3
SCENARIOS = ("solve", "glue", "attach", "envelope", "lelong", "diagnose")
DEFAULT_GRID = {"solve": (64, 256), "glue": (64, 256), "attach": (160, 1024), "envelope": (32, 128),
                "lelong": (32, 128), "diagnose": (64, 256)}

# ---------------------------------------------------------------------------
# schemas
# ---------------------------------------------------------------------------
_POS = {"type": "number", "exclusiveMinimum": 0}
_COMPLEX = {"oneOf": [{"type": "number"},
                      {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}]}
_POINT = {"anyOf": [_COMPLEX, {"type": "array", "items": _COMPLEX, "minItems": 1}]}
_ARCS = {"type": "array", "minItems": 1,
         "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}}
_FIELD = {"type": "object", "additionalProperties": False,
          "properties": {"name": {"enum": ["log-abs", "neg-abs-im", "re", "abs2", "const"]},
                         "params": {"type": "object", "additionalProperties": {"type": "number"}},
                         "expr": {"type": "string", "maxLength": 65536}},
          "oneOf": [{"required": ["name"]}, {"required": ["expr"]}]}
_START = {"type": "array", "minItems": 1, "items": {"type": "array", "items": _COMPLEX}}
_ENTRY = {"oneOf": [{"type": "string"},
                    {"type": "array", "items": {"type": "string"}, "minItems": 2, "maxItems": 2}]}

CONFIG_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "scenario",
    "type": "object",
    "additionalProperties": False,
    "required": ["scenario"],
    "properties": {
        "scenario": {"enum": list(SCENARIOS)},
        "grid": {"type": "array", "items": {"type": "integer", "minimum": 4}, "minItems": 2, "maxItems": 2},
        "p": {"type": "number", "exclusiveMinimum": 2},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "tol": _POS,
        "force": {"type": "boolean"},
        "fields": {"type": "boolean"},
        "structure": {
            "type": "object", "additionalProperties": False,
            "properties": {"catalog": {"enum": ["standard", "beltrami", "beltrami-field", "rh-model", "bump"]},
                           "n": {"type": "integer", "minimum": 1, "maximum": 3},
                           "params": {"type": "object"},
                           "matrix": {"type": "array", "minItems": 1,
                                      "items": {"type": "array", "minItems": 1, "items": _ENTRY}}},
            "oneOf": [{"required": ["catalog"]}, {"required": ["matrix"]}]},
        "solve": {"type": "object", "additionalProperties": False,
                  "properties": {"start": _START, "a": _COMPLEX,
                                 "max_iter": {"type": "integer", "minimum": 1},
                                 "probes": {"type": "integer", "minimum": 1}}},
        "glue": {"type": "object", "additionalProperties": False,
                 "properties": {"arcs": _ARCS, "alpha": _POS, "delta": {"type": "number", "minimum": 0},
                                "eps": _POS, "probes": {"type": "integer", "minimum": 1}}},
        "attach": {"type": "object", "additionalProperties": False,
                   "properties": {"m": {"type": "integer", "minimum": 1}, "gap": _POS, "alpha": _POS,
                                  "kappa": {"type": "number", "minimum": 1}, "eps": _POS,
                                  "N": {"oneOf": [{"type": "integer", "minimum": 1},
                                                  {"type": "array", "minItems": 1,
                                                   "items": {"type": "integer", "minimum": 1}}]},
                                  "c": {"type": "array", "minItems": 1, "items": _COMPLEX},
                                  "pins": {"type": "array", "maxItems": 3, "items": _COMPLEX},
                                  "probes": {"type": "integer", "minimum": 1},
                                  "allowance": {"type": "number", "minimum": 0}}},
        "envelope": {"type": "object", "additionalProperties": False,
                     "properties": {"f": _FIELD, "points": {"type": "array", "minItems": 1, "items": _POINT},
                                    "degree": {"type": "integer", "minimum": 1, "maximum": 12},
                                    "budget": {"type": "integer", "minimum": 0},
                                    "scale": _POS,
                                    "oracle": {"oneOf": [{"type": "boolean"},
                                                         {"type": "integer", "minimum": 4}]}}},
        "lelong": {"type": "object", "additionalProperties": False,
                   "properties": {"weights": {"type": "array",
                                              "items": {"type": "object", "additionalProperties": False,
                                                        "required": ["point", "weight"],
                                                        "properties": {"point": _COMPLEX,
                                                                       "weight": {"type": "number",
                                                                                  "minimum": 0}}}},
                                  "f": _FIELD, "p": _POINT,
                                  "radii": {"type": "array", "minItems": 3, "items": _POS},
                                  "samples": {"type": "integer", "minimum": 8}}},
        "diagnose": {"type": "object", "additionalProperties": False,
                     "properties": {"start": _START, "probes": {"type": "integer", "minimum": 1},
                                    "count": {"type": "integer", "minimum": 1}}},
    },
}

_VALUE = {"type": ["number", "string", "boolean", "null", "array", "object"]}
REPORT_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "report",
    "type": "object",
    "additionalProperties": False,
    "required": ["scenario", "status", "exit_code", "seed", "forced", "config", "summary", "details", "error"],
    "properties": {
        "scenario": {"enum": list(SCENARIOS) + [None]},
        "status": {"enum": ["ok", "config-error", "gate-refusal", "diverged"]},
        "exit_code": {"enum": [0, 1, 2, 3]},
        "seed": {"type": ["integer", "null"]},
        "forced": {"type": "boolean"},
        "config": {"type": ["object", "null"]},
        "summary": {"type": "array",
                    "items": {"type": "array", "minItems": 3, "maxItems": 3,
                              "items": [{"type": "string"}, {"type": "string"}, _VALUE]}},
        "details": {"type": "object"},
        "error": {"oneOf": [{"type": "null"},
                            {"type": "object", "required": ["type", "message"]}]},
    },
}


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------
def _complex(v) -> complex:
    return complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v)


def _point(v, n: int) -> np.ndarray:
    if isinstance(v, list) and v and isinstance(v[0], list):
        pts = [_complex(x) for x in v]
    else:
        pts = [_complex(v)]
    if len(pts) != n:
        raise ConfigurationError(f"point has {len(pts)} coordinates but n = {n}")
    return np.asarray(pts, dtype=complex)


def plain(x):
    """Numbers, complex values and arrays to JSON-ready data; non-finite floats become strings."""
    if isinstance(x, dict):
        return {str(k): plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return plain(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [plain(float(x.real)), plain(float(x.imag))]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if x is None or isinstance(x, str):
        return x
    return str(x)


def fmt(v) -> str:
    """CSV cell: floats with 17 significant digits."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


@dataclass
class Outcome:
    summary: list = field(default_factory=list)  # (run, quantity, value)
    details: dict = field(default_factory=dict)
    fields: dict = field(default_factory=dict)  # run -> GridFunction
    code: int = EXIT_OK
    error: dict | None = None

    def add(self, run: str, **values):
        for k, v in values.items():
            self.summary.append((run, k, v))


def error_record(exc: BaseException) -> dict:
    rec = {"type": type(exc).__name__, "message": str(exc)}
    for attr in ("rho", "residual", "stage", "measure", "line", "column", "defect"):
        v = getattr(exc, attr, None)
        if v is not None:
            rec[attr] = v
    if isinstance(exc, jsonschema.ValidationError):
        rec["schema_path"] = "/".join(map(str, exc.absolute_schema_path))
        rec["instance_path"] = "$" + "".join(f"[{p!r}]" if isinstance(p, int) else f".{p}"
                                             for p in exc.absolute_path)
    return rec


def exit_code_for(exc: BaseException) -> int:
    from .expr import ExpressionError

    if isinstance(exc, (jsonschema.ValidationError, ConfigurationError, GeometryError, ExpressionError)):
        return EXIT_CONFIG
    if isinstance(exc, GateError):
        return EXIT_GATE
    return EXIT_DIVERGED


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------
@dataclass
class Scenario:
    kind: str
    grid: tuple
    p: float
    seed: int
    tol: float | None
    force: bool
    fields: bool
    raw: dict

    def block(self) -> dict:
        return self.raw.get(self.kind, {})


def load_config(doc: dict, seed=None, grid=None, p=None, tol=None, force=None) -> Scenario:
    """Validate ``doc`` and apply command-line overrides."""
    jsonschema.validate(doc, CONFIG_SCHEMA)
    kind = doc["scenario"]
    g = tuple(grid) if grid is not None else tuple(doc.get("grid", DEFAULT_GRID[kind]))
    sc = Scenario(kind=kind, grid=g, p=float(p if p is not None else doc.get("p", 4.0)),
                  seed=int(seed if seed is not None else doc.get("seed", 0)),
                  tol=tol if tol is not None else doc.get("tol"),
                  force=bool(force or doc.get("force", False)), fields=bool(doc.get("fields", True)), raw=doc)
    if not sc.p > 2:
        raise ConfigurationError("p must exceed 2")
    if sc.tol is not None and not sc.tol > 0:
        raise ConfigurationError("tolerances must be positive")
    if not 0 <= sc.seed < 2**64:
        raise ConfigurationError("seed must be an unsigned 64-bit integer")
    if kind in ("glue", "attach") and sc.p != 4.0:
        raise ConfigurationError(f"the {kind} scenario runs with p = 4")
    return sc


def structure_of(sc: Scenario, default: str = "standard", n: int = 1):
    from .expr import matrix_field_from_text

    spec = sc.raw.get("structure", {"catalog": default, "n": n})
    if "matrix" in spec:
        return matrix_field_from_text(spec["matrix"], int(spec.get("n", len(spec["matrix"]))))
    return catalog(spec["catalog"], spec.get("n"), **spec.get("params", {}))


def field_of(spec: dict | None, n: int, default: str):
    from .envelope import scalar_field
    from .expr import scalar_field_from_text

    spec = spec or {"name": default}
    if "expr" in spec:
        return scalar_field_from_text(spec["expr"], n)
    return scalar_field(spec["name"], n, **spec.get("params", {}))


def start_of(spec, grid, n: int, p: float) -> GridFunction:
    """Polynomial start: ``spec[j][k]`` is the coefficient of ``zeta^k`` in component ``j``."""
    if spec is None:
        spec = [[0, 1]] + [[0]] * (n - 1)
    if len(spec) != n:
        raise ConfigurationError(f"start has {len(spec)} components but n = {n}")
    z = grid.nodes
    vals = np.zeros((n,) + z.shape, dtype=complex)
    for j, coeffs in enumerate(spec):
        for k, c in enumerate(coeffs):
            vals[j] += _complex(c) * z**k
    return GridFunction(vals, grid, p=p)


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------
def run_solve(sc: Scenario, out: Outcome):
    from .crsolver import newton_solve
    from .dbar import dbar_residual

    b = sc.block()
    A = structure_of(sc)
    grid = build_grid(*sc.grid)
    phi = start_of(b.get("start"), grid, A.n, sc.p)
    u, tr = newton_solve(phi, A, _complex(b.get("a", 0.0)), tol=sc.tol or 1e-9, max_iter=b.get("max_iter", 30),
                         force=sc.force, probes=b.get("probes", 64), seed=sc.seed)
    out.details["trace"] = tr.as_dict()
    out.details["iterations"] = tr.records()
    final = lp_norm(dbar_residual(u, A))
    out.add("solve", iterations=tr.iterations, initial_residual=tr.initial_residual, final_residual=final,
            converged=tr.converged, rho=tr.lqj["rho"], Q=tr.lqj["Q"], L=tr.lqj["L"], deviation=tr.deviation,
            certificate_bound=tr.certificate_bound, certificate_holds=tr.certificate_holds,
            pin_error=tr.pin_error)
    out.fields["solve"] = u
    if not tr.converged:
        raise DivergenceError(f"Newton stopped at residual {final:.3g} above tol", trace=tr)


def run_glue(sc: Scenario, out: Outcome):
    from .gluer import bump_scenario, cousin_glue

    b = sc.block()
    spec = sc.raw.get("structure", {"catalog": "bump", "n": 2})
    if spec.get("catalog") != "bump" or spec.get("n", 2) != 2:
        raise ConfigurationError("the glue scenario uses the two-chart bump structure in C^2")
    eps_s = float(spec.get("params", {}).get("eps", 0.05))
    grid = build_grid(*sc.grid)
    problem = bump_scenario(grid, arcs=b.get("arcs"), alpha=b.get("alpha", 0.05), eps=eps_s,
                            delta=b.get("delta", 2e-5), probes=b.get("probes", 16), seed=sc.seed)
    res = cousin_glue(problem, b.get("eps", 1e-3), tol=sc.tol or 1e-8, probes=b.get("probes", 16),
                      seed=sc.seed, force=sc.force)
    centre = float(np.abs(res.u0_hat.at(0.0) - problem.u0.at(0.0)).max())
    out.details["glue"] = res.summary()
    out.add("glue", match_residual=res.match_residual, max_deviation=max(res.deviations.values()),
            pin_error=res.pin_error, centre_error=centre, rho=res.lqj.get("rho", float("nan")))
    for j, d in sorted(res.deviations.items(), key=lambda kv: str(kv[0])):
        out.add(f"glue/chart{j}", deviation=d)
    out.fields["glue"] = res.u0_hat


def run_attach(sc: Scenario, out: Outcome):
    from .rh import N_LADDER, STAGE_TOL, attach_disc, rh_scenario

    b = sc.block()
    spec = sc.raw.get("structure", {"catalog": "rh-model", "n": 2})
    if spec.get("catalog") != "rh-model":
        raise ConfigurationError("the attach scenario uses the rh-model structure")
    grid = build_grid(*sc.grid)
    torus, dec = rh_scenario(grid, eps_structure=float(spec.get("params", {}).get("eps", 0.1)),
                             m=b.get("m", 3), gap=b.get("gap", 0.2), alpha=b.get("alpha"),
                             kappa=b.get("kappa", 4.0), n=spec.get("n", 2))
    N = b.get("N", list(N_LADDER))
    cs = sorted((_complex(c) for c in b.get("c", [1.0])), key=lambda c: (c.real, c.imag))
    eps = b.get("eps", 0.1)
    out.details["runs"] = []
    first_error = None
    for c in cs:
        run = f"attach/c={c.real:.17g}{c.imag:+.17g}j"
        try:
            res = attach_disc(torus, dec, eps, c=c, N=N, tol=sc.tol or STAGE_TOL, probes=b.get("probes", 8),
                              seed=sc.seed, allowance=b.get("allowance", 0.05), force=sc.force,
                              pins=[_complex(z) for z in b.get("pins", [])])
        except JHoloError as exc:
            if exit_code_for(exc) == EXIT_CONFIG:
                raise
            out.details["runs"].append({"c": c, "error": error_record(exc)})
            out.add(run, ok=False, error=type(exc).__name__, stage=str(getattr(exc, "stage", "") or ""))
            first_error = first_error or exc
            continue
        out.details["runs"].append({"c": c, "result": res.as_dict()})
        out.add(run, ok=True, N=res.N, measure=res.measure, measure_fraction=res.measure / (2 * np.pi),
                attach_distance=res.attach_distance, center_error=res.center_error)
        out.fields[run] = res.h
    if first_error is not None:
        raise first_error


def run_envelope(sc: Scenario, out: Outcome):
    from .envelope import DiscFamily, envelope_estimate, perron_oracle

    b = sc.block()
    A = structure_of(sc)
    f = field_of(b.get("f"), A.n, "neg-abs-im")
    grid = build_grid(*sc.grid)
    fam = DiscFamily(grid, A, degree=b.get("degree", 6), budget=b.get("budget", 2000), scale=b.get("scale", 0.5),
                     tol=sc.tol or 1e-9, seed=sc.seed)
    oracle = b.get("oracle", A.n == 1 and A.zero)
    per = None
    if oracle:
        if A.n != 1 or not A.zero:
            raise ConfigurationError("the lattice oracle is for n = 1 and A = 0")
        per = perron_oracle(f, size=64 if oracle is True else int(oracle))
        out.details["oracle"] = {"size": len(per.x) - 1, "iterations": per.iterations, "change": per.change}
    out.details["points"] = []
    for i, pt in enumerate(b.get("points", [0.0])):
        p = _point(pt, A.n)
        est = envelope_estimate(f, p, A, fam)
        row = dict(value=est.value, f_at_p=f.value(p), evaluations=est.evaluations, failures=est.failures)
        if per is not None:
            row["oracle"] = per.at(complex(p[0]))
            row["oracle_gap"] = abs(est.value - row["oracle"])
        out.add(f"envelope/{i}", **row)
        out.details["points"].append(est.as_dict())
        if est.witness is not None:
            out.fields[f"envelope/{i}"] = est.witness


def run_lelong(sc: Scenario, out: Outcome):
    from .envelope import WeightedPoints, lelong_chain, lelong_number_estimate

    b = sc.block()
    ws = b.get("weights", [])
    if ws:
        w = WeightedPoints(np.array([_complex(x["point"]) for x in ws]), np.array([x["weight"] for x in ws]))
        ch = lelong_chain(w)
        out.details["chain"] = ch
        out.add("lelong/chain", green_at_0=ch["green_at_0"], lelong=ch["lelong"], k_term=ch["k_term"],
                holds=ch["holds"])
    if "f" in b:
        n = int(sc.raw.get("structure", {}).get("n", 1))
        f = field_of(b["f"], n, "log-abs")
        radii = sorted(b.get("radii", [1e-2, 1e-3, 1e-4, 1e-5]), reverse=True)
        p = _point(b.get("p", [0.0] * n if n > 1 else 0.0), n)
        nu = lelong_number_estimate(f, p, radii, samples=b.get("samples", 256), seed=sc.seed)
        out.add("lelong/number", estimate=nu)


def run_diagnose(sc: Scenario, out: Outcome):
    from .crsolver import (LinearizedOperator, LQJReport, estimate_lipschitz, frechet_remainders, random_probes,
                           right_inverse)
    from .dbar import cauchy_green, dbar_residual

    b = sc.block()
    A = structure_of(sc)
    grid = build_grid(*sc.grid)
    phi = start_of(b.get("start"), grid, A.n, sc.p).project()
    rng = np.random.default_rng(sc.seed)
    count = b.get("count", 4)
    worst = 0.0
    for g in random_probes(phi, count, rng):
        r = lp_norm(g.like(cauchy_green(g).dzbar - g.values)) / (1 + lp_norm(g))
        worst = max(worst, r)
    slopes = []
    for _ in range(count):
        V = random_probes(phi, 1, rng, normalize="sobolev")[0]
        slopes.append(frechet_remainders(A, phi, V)[1])
    Q = right_inverse(LinearizedOperator(A, phi), 0.0, probes=b.get("probes", 16), seed=sc.seed)
    L = estimate_lipschitz(phi, A, np.random.default_rng(sc.seed + 1))
    rep = LQJReport.from_constants(L, Q.op_norm_estimate, sample_size=b.get("probes", 16))
    r0 = lp_norm(dbar_residual(phi, A))
    out.details["lqj"] = rep.as_dict()
    out.add("diagnose", cauchy_green_defect=worst, frechet_slope_min=min(slopes), frechet_slope_max=max(slopes),
            inverse_defect=Q.defect, Q=rep.Q, L=rep.L, rho=rep.rho, residual=r0, gate_passed=bool(r0 < rep.rho))


RUNNERS = {"solve": run_solve, "glue": run_glue, "attach": run_attach, "envelope": run_envelope,
           "lelong": run_lelong, "diagnose": run_diagnose}


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------
def run_scenario(sc: Scenario) -> Outcome:
    out = Outcome()
    try:
        RUNNERS[sc.kind](sc, out)
    except (JHoloError, jsonschema.ValidationError) as exc:
        out.code = exit_code_for(exc)
        out.error = error_record(exc)
        if isinstance(exc, DivergenceError) and getattr(exc, "trace", None) is not None:
            out.details.setdefault("trace", exc.trace.as_dict())
    return out


def build_report(sc: Scenario | None, out: Outcome, doc=None) -> dict:
    status = {EXIT_OK: "ok", EXIT_CONFIG: "config-error", EXIT_GATE: "gate-refusal", EXIT_DIVERGED: "diverged"}
    rep = {"scenario": sc.kind if sc else (doc or {}).get("scenario") if isinstance(doc, dict) else None,
           "status": status[out.code], "exit_code": out.code, "seed": sc.seed if sc else None,
           "forced": bool(sc.force) if sc else False,
           "config": None, "summary": [list(r) for r in out.summary], "details": out.details, "error": out.error}
    if sc is not None:
        cfg = dict(sc.raw)
        cfg.update(grid=list(sc.grid), p=sc.p, seed=sc.seed, force=sc.force)
        if sc.tol is not None:
            cfg["tol"] = sc.tol
        rep["config"] = cfg
    if rep["scenario"] not in SCENARIOS:
        rep["scenario"] = None
    rep = plain(rep)
    jsonschema.validate(rep, REPORT_SCHEMA)
    return rep


def write_outputs(outdir: str, report: dict, out: Outcome, fields: bool = True):
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(outdir, "results.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["run", "quantity", "value"])
        for run, q, v in out.summary:
            w.writerow([run, q, fmt(v)])
    if fields and out.fields:
        with open(os.path.join(outdir, "fields.csv"), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["run", "component", "i_r", "i_theta", "r", "theta", "re", "im"])
            for run in sorted(out.fields):
                u = out.fields[run]
                r, th = u.grid.r, u.grid.theta
                for c in range(u.n):
                    for i in range(len(r)):
                        for k in range(len(th)):
                            v = u.values[c, i, k]
                            w.writerow([run, c, i, k, fmt(r[i]), fmt(th[k]), fmt(v.real), fmt(v.imag)])


def _grid_arg(text: str):
    try:
        a, b = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected NR,NTHETA") from None
    return a, b


def _seed_arg(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="jholo", description="Run a pseudoholomorphic disc scenario.")
    ap.add_argument("--config", required=True, help="scenario JSON file")
    ap.add_argument("--out", default="out", help="output directory (default: out)")
    ap.add_argument("--seed", type=_seed_arg, help="override the config seed")
    ap.add_argument("--grid", type=_grid_arg, help="override the grid as NR,NTHETA")
    ap.add_argument("--p", type=float, help="Sobolev exponent p > 2 (default 4)")
    ap.add_argument("--tol", type=float, help="override the scenario tolerance")
    ap.add_argument("--force", action="store_true", help="bypass gates (marked in the report)")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    sc = None
    doc = None
    try:
        with open(args.config, encoding="utf-8") as fh:
            doc = json.load(fh)
        sc = load_config(doc, seed=args.seed, grid=args.grid, p=args.p, tol=args.tol, force=args.force)
    except (OSError, json.JSONDecodeError, jsonschema.ValidationError, JHoloError) as exc:
        out = Outcome(code=EXIT_CONFIG, error=error_record(exc))
        path = out.error.get("instance_path")
        print(f"config error{' at ' + path if path else ''}: {out.error['message'].splitlines()[0]}",
              file=sys.stderr)
        write_outputs(args.out, build_report(None, out, doc), out)
        return EXIT_CONFIG
    if sc.force:
        log.warning("gates bypassed (--force); results are not certified")
    out = run_scenario(sc)
    write_outputs(args.out, build_report(sc, out), out, sc.fields)
    if out.error:
        print(f"{out.error['type']}: {out.error['message']}", file=sys.stderr)
    return out.code


if __name__ == "__main__":
    sys.exit(main())
