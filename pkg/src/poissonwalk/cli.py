"""Scenario runner: ``poissonwalk run|list|validate``.

A scenario is a JSON file with a fixed set of top-level fields (unknown
fields are rejected). ``run`` writes ``<name>.json`` (the report),
``<name>.<label>.csv`` traces and ``<name>.timing.json`` (wall clock, kept
out of the report so reports are byte-identical across runs and thread
counts).

Exit codes: 0 success, 2 validation error, 3 budget/resolution error,
4 diagnostic verdict differs from the expected one.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .criteria import (StripSpec, an_sets_check, checkpoint_grid, entropy_criterion_check, ray_map_for,
                       ray_tracking_statistic, strip_statistic)
from .densities import DensityGrid, convolution_entropy_sequence, entropy_sequence_csv
from .entropy import (FakeDriftOracle, FreeSRWOracle, TrivialOracle, ergodic_rn_trace,
                      furstenberg_entropy_affine, furstenberg_entropy_estimate, smb_statistic)
from .errors import BudgetExceededError, HorizonTooShortError, ResolutionError, ScenarioValidationError
from .gauges import (dl_vertex_gauge, free_word_gauge, lamplighter_orbit_gauge, lamplighter_word_gauge,
                     temperance_estimate)
from .groups.core import orbit_norm
from .groups.walks import (StepDistribution, distribution_from_json, element_from_json, parse_family,
                           simulate_walk, vertical_drift)
from .reports import csv_text, dumps, mean_stderr
from .stopping import (StoppingTimeSpec, bounded_density_transform, entropy_scaling_check,
                       expected_tau_identity_check, first_moment_bound_check, theta_chisquare)

SCHEMA_VERSION = 1
KINDS = ("walk", "entropy-sequence", "smb", "furstenberg", "stopping", "ray", "strip",
         "entropy-criterion", "an-sets", "temperance")
FIELDS = ("schema_version", "name", "description", "kind", "walk", "density", "horizon", "paths",
          "seed", "params", "expect")
ENV_OUT = "POISSONWALK_OUT"

EXIT_OK, EXIT_VALIDATION, EXIT_BUDGET, EXIT_FAIL = 0, 2, 3, 4


# --------------------------------------------------------------- scenarios

@dataclass
class Scenario:
    name: str
    kind: str
    seed: int
    walk: dict | None = None
    density: dict | None = None
    horizon: int | None = None
    paths: int | None = None
    params: dict = field(default_factory=dict)
    expect: str | None = None
    description: str = ""

    def to_json(self) -> dict:
        out = {"schema_version": SCHEMA_VERSION, "name": self.name, "kind": self.kind, "seed": self.seed,
               "params": self.params}
        for key in ("walk", "density", "horizon", "paths", "expect"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        if self.description:
            out["description"] = self.description
        return out


# kind -> (allowed params, needs walk, needs density, needs paths/horizon)
_KIND_PARAMS = {
    "walk": ({"checkpoints"}, True, False, True),
    "entropy-sequence": ({"n_max", "cells_per_unit"}, False, True, False),
    "smb": ({"n", "budget"}, True, False, True),
    "furstenberg": ({"oracle", "drift", "shifts", "limit_factor", "ergodic", "reference", "rel_tol"},
                    True, False, True),
    "stopping": ({"mode", "trigger", "samples", "eps", "chisquare", "entropy_scaling", "threshold",
                  "region", "cells_per_unit"}, False, False, False),
    "ray": ({"checkpoints", "rate", "threshold", "limit_factor"}, True, False, True),
    "strip": ({"width", "strip", "threshold", "checkpoints", "limit_factor"}, True, False, True),
    "entropy-criterion": ({"oracle", "drift", "epsilon", "budget"}, True, False, True),
    "an-sets": ({"sets", "epsilon", "gamma", "checkpoints", "rate", "limit_factor"}, True, False, True),
    "temperance": ({"gauge", "max_radius", "method"}, True, False, False),
}


def _positive_int(obj: dict, key: str, required: bool) -> int | None:
    if key not in obj:
        if required:
            raise ScenarioValidationError("required", key)
        return None
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ScenarioValidationError(f"must be a positive integer, got {value!r}", key)
    return value


def _check_density(obj) -> dict:
    if not isinstance(obj, dict) or obj.get("kind") not in ("uniform", "gaussian"):
        raise ScenarioValidationError("expected {\"kind\": \"uniform\"|\"gaussian\", ...}", "density")
    allowed = {"uniform": {"kind", "lo", "hi"}, "gaussian": {"kind", "mean", "sd"}}[obj["kind"]]
    extra = set(obj) - allowed
    if extra:
        raise ScenarioValidationError(f"unknown fields {sorted(extra)}", "density")
    if obj["kind"] == "uniform" and not obj.get("lo", 0.0) < obj.get("hi", 1.0):
        raise ScenarioValidationError("need lo < hi", "density")
    if obj["kind"] == "gaussian" and not obj.get("sd", 1.0) > 0:
        raise ScenarioValidationError("need sd > 0", "density")
    return obj


def validate(obj: Any) -> Scenario:
    """Check a parsed scenario; raises :class:`ScenarioValidationError` naming the field."""
    if not isinstance(obj, dict):
        raise ScenarioValidationError("scenario must be a JSON object")
    unknown = sorted(set(obj) - set(FIELDS))
    if unknown:
        raise ScenarioValidationError(f"unknown field(s) {unknown}", unknown[0])
    if obj.get("schema_version") != SCHEMA_VERSION:
        raise ScenarioValidationError(f"expected {SCHEMA_VERSION}, got {obj.get('schema_version')!r}",
                                      "schema_version")
    name = obj.get("name")
    if not isinstance(name, str) or not name or any(c in name for c in "/\\ "):
        raise ScenarioValidationError("must be a non-empty string without spaces or slashes", "name")
    kind = obj.get("kind")
    if kind not in KINDS:
        raise ScenarioValidationError(f"must be one of {', '.join(KINDS)}", "kind")
    seed = obj.get("seed")
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ScenarioValidationError("a non-negative integer seed is required", "seed")
    params = obj.get("params", {})
    if not isinstance(params, dict):
        raise ScenarioValidationError("must be an object", "params")
    allowed, needs_walk, needs_density, needs_ensemble = _KIND_PARAMS[kind]
    extra = sorted(set(params) - allowed)
    if extra:
        raise ScenarioValidationError(f"unknown parameter(s) {extra} for kind {kind}", f"params.{extra[0]}")
    if kind == "stopping":
        mode = params.get("mode", "walk")
        if mode not in ("walk", "bounded-density"):
            raise ScenarioValidationError("must be 'walk' or 'bounded-density'", "params.mode")
        needs_walk, needs_density, needs_ensemble = mode == "walk", mode == "bounded-density", False
    walk = obj.get("walk")
    if needs_walk and walk is None:
        raise ScenarioValidationError("required", "walk")
    if walk is not None:
        if not isinstance(walk, dict):
            raise ScenarioValidationError("must be an object", "walk")
        try:
            parse_family(walk)
            if kind != "temperance":
                distribution_from_json(walk)
        except (ValueError, KeyError, TypeError) as exc:
            raise ScenarioValidationError(str(exc), "walk") from None
    density = obj.get("density")
    if needs_density and density is None:
        raise ScenarioValidationError("required", "density")
    if density is not None:
        _check_density(density)
    horizon = _positive_int(obj, "horizon", needs_ensemble)
    paths = _positive_int(obj, "paths", needs_ensemble)
    expect = obj.get("expect")
    if expect not in (None, "PASS", "FAIL"):
        raise ScenarioValidationError("must be 'PASS' or 'FAIL'", "expect")
    desc = obj.get("description", "")
    if not isinstance(desc, str):
        raise ScenarioValidationError("must be a string", "description")
    return Scenario(name, kind, seed, walk, density, horizon, paths, dict(params), expect, desc)


def load_scenario(path: str | Path) -> Scenario:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioValidationError(f"cannot read scenario: {exc.strerror}", "file") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioValidationError(f"invalid JSON: {exc}", "file") from None
    return validate(obj)


def gallery_dir() -> Path:
    return Path(str(resources.files("poissonwalk") / "scenarios"))


def list_scenarios(directory: str | Path | None = None) -> list[dict]:
    """Catalog ``[{name, kind, file, valid, error}]`` of the ``*.json`` files in ``directory``."""
    d = Path(directory) if directory is not None else gallery_dir()
    out = []
    for f in sorted(d.glob("*.json")):
        try:
            sc = load_scenario(f)
            out.append({"name": sc.name, "kind": sc.kind, "file": f.name, "valid": True, "error": None})
        except ScenarioValidationError as exc:
            out.append({"name": f.stem, "kind": None, "file": f.name, "valid": False, "error": str(exc)})
    return out


def resolve_scenario_path(ref: str) -> Path:
    """A file path, or the name of a bundled gallery scenario."""
    p = Path(ref)
    if p.exists():
        return p
    g = gallery_dir() / f"{ref}.json"
    if g.exists():
        return g
    return p


# ------------------------------------------------------------------ runners

@dataclass
class Outcome:
    result: dict
    csv: dict = field(default_factory=dict)
    verdict: str | None = None


def _density(obj: dict, cells_per_unit: int) -> DensityGrid:
    if obj["kind"] == "uniform":
        return DensityGrid.uniform(float(obj.get("lo", 0.0)), float(obj.get("hi", 1.0)), cells_per_unit)
    return DensityGrid.gaussian(float(obj.get("mean", 0.0)), float(obj.get("sd", 1.0)),
                                cells_per_unit=cells_per_unit)


def _oracle(name: str, dist: StepDistribution, drift: float):
    if name == "trivial":
        return TrivialOracle()
    if name == "fake-drift":
        return FakeDriftOracle(drift)
    if name == "free-srw":
        if dist.family[0] != "free":
            raise ScenarioValidationError("the free-srw oracle needs a free-group walk", "params.oracle")
        return FreeSRWOracle(dist.family[1])
    raise ScenarioValidationError(f"unknown oracle {name!r}", "params.oracle")


def _verdict(passed: bool) -> str:
    return "PASS" if passed else "FAIL"


def run_walk(sc: Scenario, dist: StepDistribution, threads: int) -> Outcome:
    times = checkpoint_grid(sc.horizon, sc.params.get("checkpoints", ()))
    norms = np.zeros((sc.paths, len(times)))
    first = None
    for i in range(sc.paths):
        path = simulate_walk(dist, sc.horizon, sc.seed, i)
        norms[i] = [orbit_norm(path.positions[t]) for t in times]
        if i == 0:
            first = path
    rate = norms / np.asarray(times, dtype=float)
    est, se = mean_stderr(rate[:, -1])
    result = {"escape_rate": {"estimate": est, "stderr": se, "times": times,
                              "trace": rate.mean(axis=0).tolist()}}
    if dist.family[0] in ("lamplighter", "dl", "sol", "affine"):
        result["vertical_drift"] = vertical_drift(dist, seed=sc.seed).to_json()
    trace = csv_text(["n", "mean_norm_over_n"], zip(times, rate.mean(axis=0).tolist()))
    return Outcome(result, {"trace": trace, "path0": first.to_csv()})


def run_entropy_sequence(sc: Scenario, threads: int) -> Outcome:
    cpu = int(sc.params.get("cells_per_unit", 2 ** 12))
    n_max = int(sc.params.get("n_max", 2))
    f = _density(sc.density, cpu)
    h = convolution_entropy_sequence(f, n_max)
    inc = np.diff(h)
    nonincreasing = bool(np.all(np.diff(inc) <= 1e-9)) if inc.size > 1 else True
    result = {"entropies": h.tolist(), "increments": inc.tolist(), "cells_per_unit": cpu,
              "increments_nonincreasing": nonincreasing}
    return Outcome(result, {"entropy": entropy_sequence_csv(h)}, _verdict(nonincreasing))


def run_smb(sc: Scenario, dist: StepDistribution, threads: int) -> Outcome:
    n = int(sc.params.get("n", sc.horizon))
    kw = {"budget": int(sc.params["budget"])} if "budget" in sc.params else {}
    rep = smb_statistic(dist, n, sc.seed, sc.paths, **kw)
    return Outcome({"smb": rep.to_json()}, {"trace": rep.trace_csv()})


def run_furstenberg(sc: Scenario, dist: StepDistribution, threads: int) -> Outcome:
    p = sc.params
    if dist.family[0] == "affine":
        rep = furstenberg_entropy_affine(dist, sc.paths, sc.horizon, sc.seed)
        return Outcome({"furstenberg": rep.to_json()}, {"trace": rep.trace_csv()})
    default = "free-srw" if dist.family[0] == "free" and dist.family[1] >= 2 else "trivial"
    oracle = _oracle(p.get("oracle", default), dist, float(p.get("drift", 0.3)))
    lf = int(p.get("limit_factor", 3))
    rep = furstenberg_entropy_estimate(dist, oracle, sc.paths, sc.horizon, sc.seed, shifts=p.get("shifts"),
                                       limit_factor=lf, threads=threads)
    result = {"furstenberg": rep.to_json()}
    csvs = {"trace": rep.trace_csv()}
    if p.get("ergodic", False):
        erg = ergodic_rn_trace(dist, oracle, sc.paths, sc.horizon, sc.seed, limit_factor=lf, threads=threads)
        result["ergodic"] = erg.to_json()
        csvs["ergodic"] = erg.trace_csv()
    verdict = None
    if "reference" in p:
        ref = float(p["reference"])
        tol = float(p.get("rel_tol", 0.02))
        ok = abs(rep.estimate - ref) <= tol * abs(ref)
        result["reference"] = {"value": ref, "rel_tol": tol, "passed": ok}
        verdict = _verdict(ok)
    return Outcome(result, csvs, verdict)


def run_stopping(sc: Scenario, threads: int) -> Outcome:
    p = sc.params
    if p.get("mode", "walk") == "bounded-density":
        cpu = int(p.get("cells_per_unit", 2 ** 12))
        mu = _density(sc.density, cpu)
        region = tuple(p["region"]) if "region" in p else None
        tr = bounded_density_transform(mu, p.get("threshold"), region, float(p.get("eps", 1e-12)))
        ok = tr.sup <= tr.sup_bound * (1 + 1e-9) and tr.entropy > 0
        return Outcome({"bounded_density": tr.to_json()}, {"theta": tr.theta.to_csv()}, _verdict(ok))
    dist = distribution_from_json(sc.walk)
    if "trigger" not in p:
        raise ScenarioValidationError("required for mode 'walk'", "params.trigger")
    try:
        members = [element_from_json(dist.family, g) for g in p["trigger"]]
    except (ValueError, KeyError, TypeError) as exc:
        raise ScenarioValidationError(str(exc), "params.trigger") from None
    spec = StoppingTimeSpec.members(members)
    samples = int(p.get("samples", 10_000))
    checks = [expected_tau_identity_check(dist, spec, samples, sc.seed),
              first_moment_bound_check(dist, spec, samples, sc.seed)]
    if p.get("chisquare", False):
        checks.append(theta_chisquare(dist, spec, samples, sc.seed, float(p.get("eps", 1e-12))))
    if p.get("entropy_scaling", False):
        if sc.paths is None or sc.horizon is None:
            raise ScenarioValidationError("entropy scaling needs paths and horizon", "params.entropy_scaling")
        oracle = _oracle("free-srw", dist, 0.0)
        checks.append(entropy_scaling_check(dist, spec, oracle, sc.paths, sc.horizon, sc.seed,
                                            threads=threads))
    ok = all(c.passed for c in checks)
    return Outcome({"trigger": spec.name, "checks": [c.to_json() for c in checks]}, {}, _verdict(ok))


def run_ray(sc: Scenario, dist: StepDistribution, threads: int) -> Outcome:
    p = sc.params
    raymap = ray_map_for(dist, sc.seed, p.get("rate"), threads=threads)
    rep = ray_tracking_statistic(dist, raymap, sc.paths, sc.horizon, sc.seed, p.get("checkpoints", ()),
                                 float(p.get("threshold", 0.1)), int(p.get("limit_factor", 3)),
                                 threads=threads)
    return Outcome({"ray": rep.to_json()}, {"trace": rep.to_csv()}, _verdict(rep.passed))


def run_strip(sc: Scenario, dist: StepDistribution, threads: int) -> Outcome:
    p = sc.params
    if dist.family[0] != "free":
        raise ScenarioValidationError("strips are implemented for free groups", "walk")
    spec = StripSpec(dist.family[1], int(p.get("width", 2)), p.get("strip", "geodesic"))
    rep = strip_statistic(dist, spec, sc.paths, sc.horizon, sc.seed, float(p.get("threshold", 0.05)),
                          p.get("checkpoints", ()), int(p.get("limit_factor", 3)), threads=threads)
    return Outcome({"strip": rep.to_json()}, {"trace": rep.to_csv()}, _verdict(rep.passed))


def run_entropy_criterion(sc: Scenario, dist: StepDistribution, threads: int) -> Outcome:
    p = sc.params
    oracle = _oracle(p.get("oracle", "trivial"), dist, float(p.get("drift", 0.3)))
    kw = {"budget": int(p["budget"])} if "budget" in p else {}
    rep = entropy_criterion_check(dist, oracle, sc.horizon, sc.paths, sc.seed,
                                  float(p.get("epsilon", 0.2)), **kw)
    return Outcome({"entropy_criterion": rep.to_json()}, {"trace": rep.to_csv()}, _verdict(rep.passed))


def run_an_sets(sc: Scenario, dist: StepDistribution, threads: int) -> Outcome:
    p = sc.params
    raymap = ray_map_for(dist, sc.seed, p.get("rate"), threads=threads)
    rep = an_sets_check(dist, p.get("sets", "ray-ball"), sc.paths, sc.horizon, sc.seed,
                        float(p.get("epsilon", 0.1)), tuple(p.get("gamma", (1,))), raymap,
                        p.get("checkpoints", ()), int(p.get("limit_factor", 3)), threads=threads)
    return Outcome({"an_sets": rep.to_json()}, {"trace": rep.to_csv()}, _verdict(rep.passed))


def run_temperance(sc: Scenario, threads: int) -> Outcome:
    p = sc.params
    fam = parse_family(sc.walk)
    kind = p.get("gauge", "word")
    if fam[0] == "free":
        gauge = free_word_gauge(fam[1])
    elif fam[0] == "lamplighter":
        gauge = lamplighter_word_gauge(fam[1]) if kind == "word" else lamplighter_orbit_gauge(fam[1])
    elif fam[0] == "dl":
        gauge = dl_vertex_gauge(fam[1], fam[2])
    else:
        raise ScenarioValidationError(f"no gauge for family {fam[0]}", "walk")
    rep = temperance_estimate(gauge, int(p.get("max_radius", 8)), p.get("method", "auto"))
    return Outcome({"gauge": gauge.name, "growth": rep.to_json()}, {"growth": rep.to_csv()},
                   _verdict(rep.temperate))


def execute(sc: Scenario, threads: int = 1) -> Outcome:
    if sc.kind == "entropy-sequence":
        return run_entropy_sequence(sc, threads)
    if sc.kind == "stopping":
        return run_stopping(sc, threads)
    if sc.kind == "temperance":
        return run_temperance(sc, threads)
    dist = distribution_from_json(sc.walk)
    runner: Callable = {"walk": run_walk, "smb": run_smb, "furstenberg": run_furstenberg, "ray": run_ray,
                        "strip": run_strip, "entropy-criterion": run_entropy_criterion,
                        "an-sets": run_an_sets}[sc.kind]
    return runner(sc, dist, threads)


def build_report(sc: Scenario, outcome: Outcome, overrides: dict) -> dict:
    return {"schema_version": SCHEMA_VERSION, "version": __version__, "scenario": sc.to_json(),
            "overrides": overrides, "kind": sc.kind, "result": outcome.result, "verdict": outcome.verdict,
            "expected": sc.expect or ("PASS" if outcome.verdict else None),
            "csv_files": sorted(f"{sc.name}.{label}.csv" for label in outcome.csv)}


def run(path: str | Path, seed: int | None = None, out: str | Path | None = None, paths: int | None = None,
        steps: int | None = None, threads: int = 1) -> tuple[dict, Path]:
    """Load, override, execute and write one scenario; returns the report and its path."""
    raw = json.loads(Path(path).read_text(encoding="utf-8")) if Path(path).exists() else None
    if raw is None:
        raise ScenarioValidationError(f"no such scenario {str(path)!r}", "file")
    overrides = {}
    for key, value in (("seed", seed), ("paths", paths), ("horizon", steps)):
        if value is not None:
            raw[key] = value
            overrides[key] = value
    sc = validate(raw)
    start = time.perf_counter()
    outcome = execute(sc, threads)
    elapsed = time.perf_counter() - start
    report = build_report(sc, outcome, overrides)
    out_dir = Path(out or os.environ.get(ENV_OUT) or "poissonwalk-out")
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / f"{sc.name}.json"
    report_path.write_text(dumps(report), encoding="utf-8")
    for label, text in outcome.csv.items():
        (out_dir / f"{sc.name}.{label}.csv").write_text(text, encoding="utf-8")
    (out_dir / f"{sc.name}.timing.json").write_text(
        dumps({"wall_clock_seconds": round(elapsed, 6), "threads": threads}), encoding="utf-8")
    return report, report_path


# ---------------------------------------------------------------------- CLI

def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="poissonwalk",
        description="Run seeded random-walk boundary experiments from JSON scenarios.",
        epilog="experiment kinds: " + ", ".join(KINDS)
        + ". Exit codes: 0 ok, 2 validation, 3 budget, 4 diagnostic verdict differs from expectation.",
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario file (or a bundled scenario by name)",
                       description="Run a scenario. Kinds: " + ", ".join(KINDS) + ".")
    r.add_argument("scenario")
    r.add_argument("--seed", type=int)
    r.add_argument("--out", help=f"output directory (default ${ENV_OUT} or ./poissonwalk-out)")
    r.add_argument("--paths", type=int, help="override the ensemble size")
    r.add_argument("--steps", type=int, help="override the horizon")
    r.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    ls = sub.add_parser("list", help="list scenarios in a directory (default: bundled gallery)")
    ls.add_argument("directory", nargs="?")
    v = sub.add_parser("validate", help="validate a scenario file")
    v.add_argument("scenario")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "list":
            for row in list_scenarios(args.directory):
                status = "ok" if row["valid"] else f"invalid ({row['error']})"
                print(f"{row['name']:32s} {row['kind'] or '-':18s} {status}")
            return EXIT_OK
        path = resolve_scenario_path(args.scenario)
        if args.command == "validate":
            sc = load_scenario(path)
            print(f"{sc.name}: valid {sc.kind} scenario")
            return EXIT_OK
        if args.threads < 1:
            raise ScenarioValidationError("must be >= 1", "threads")
        report, report_path = run(path, args.seed, args.out, args.paths, args.steps, args.threads)
    except ScenarioValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (BudgetExceededError, HorizonTooShortError, ResolutionError) as exc:
        print(f"budget error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    verdict, expected = report["verdict"], report["expected"]
    print(f"{report['scenario']['name']}: verdict {verdict or 'n/a'}"
          f" (expected {expected or 'n/a'}) -> {report_path}")
    if verdict is not None and verdict != expected:
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
