"""Batch front-end: datasets and run manifests in, reports and curves out.

Dataset files
-------------
``{"schema": "missinfo/dataset/1", "model": <tag or object>,
   "units": [<model-specific object>, ...], "weights": [w, ...]}``

``weights`` is optional (defaults to ones).  Known model tags:
``bernoulli_mcar``, ``normal_mean``, ``two_sample_allele``, ``tilting``,
``haplotype_cc`` (object form with ``num_haplotype``/``ref_haplotype``), and
the pseudo-model ``entropy_families`` whose units are
``{"posterior": [p, ...]}`` over a finite space with a uniform null.

Run manifests
-------------
``{"schema": "missinfo/manifest/1", "model": ..., "dataset": "path.json",
   "hypothesis": {"null_values": [...], "nuisance_policy": "fix_at_null_mle"},
   "measures": ["ri1", "ri0", "ri_half", "ri_curve", "bi1", "bi2", "bi0",
                "bi_s", "entropy", "completed_ratio", "diagnostics"],
   "prior": {"kind": "uniform_interval", "lo": -1, "hi": 1},
   "mc": {"seed": 0, "draws": 4096},
   "grid": {"lo": ..., "hi": ..., "count": 101},
   "lod_base": "natural",
   "out": {"report": "report.json", "curve": "curve.csv"}}``

A manifest may instead carry ``"entries": [...]`` with one object of the
above shape per analysis; entries run concurrently up to the worker limit.
Posterior-variability measures (``bi1``, ``bi2``) require a prior; a curve
request requires a grid.  Reports are bit-identical across runs with the
same manifest and seed.  Exit codes: 0 success, 2 validation error,
3 numerical failure, 4 failed diagnostic suite.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import dataclasses
import hashlib
import json
import logging
import math
import os
import sys
from importlib import resources
from pathlib import Path

from . import __version__
from .bayes import (
    PriorSpec,
    bayes_factor_ob,
    compute_bi0,
    compute_bi1,
    compute_bi2,
    compute_bi_s,
)
from .diagnostics import compute_ri_e, em_identity_suite
from .em_engine import fit_mle, fit_null_mle, null_point
from .large_sample import (
    completed_stat_ratio,
    large_sample_report,
    ri_curve,
)
from .model_api import (
    AVERAGE_OVER_PRIOR,
    DataError,
    HypothesisSpec,
    MCConfig,
    MissinfoError,
    NumericalError,
    UnitDataset,
    UnsupportedOperationError,
)
from .models import build_model, entropy_measure

log = logging.getLogger("missinfo")

DATASET_SCHEMA = "missinfo/dataset/1"
MANIFEST_SCHEMA = "missinfo/manifest/1"
REPORT_SCHEMA = "missinfo/report/1"
ENTROPY_TAG = "entropy_families"
MEASURES = ("ri1", "ri0", "ri_half", "ri_curve", "bi1", "bi2", "bi0", "bi_s",
            "entropy", "completed_ratio", "diagnostics")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_DIAGNOSTIC = 4


# ----------------------------------------------------------------------
# dataset io
# ----------------------------------------------------------------------
def load_dataset(path: Path):
    """Returns (model-or-None, UnitDataset-or-posteriors, model_spec, raw)."""
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise DataError(f"cannot read dataset {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    if raw.get("schema") != DATASET_SCHEMA:
        raise DataError(f"{path}: expected schema {DATASET_SCHEMA!r}, "
                        f"got {raw.get('schema')!r}")
    spec = raw.get("model")
    units_json = raw.get("units")
    if not isinstance(units_json, list) or not units_json:
        raise DataError(f"{path}: 'units' must be a nonempty list")
    weights = raw.get("weights")
    tag = spec if isinstance(spec, str) else (spec or {}).get("tag")
    if tag == ENTROPY_TAG:
        posts = [u.get("posterior") for u in units_json]
        if any(p is None for p in posts):
            raise DataError(f"{path}: entropy units need a 'posterior' field")
        return None, posts, spec, raw
    model = build_model(spec)
    units = [model.unit_from_json(u) for u in units_json]
    data = UnitDataset.of(units, weights)
    return model, data, spec, raw


def save_dataset(path: Path, model, data: UnitDataset, model_spec=None) -> None:
    obj = {"schema": DATASET_SCHEMA,
           "model": model_spec if model_spec is not None else model.tag,
           "units": [model.unit_to_json(u) for u in data.units],
           "weights": list(data.weights)}
    Path(path).write_text(_dumps(obj))


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {k: _jsonable(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float):
        if math.isnan(obj):
            return None
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if hasattr(obj, "tolist"):
        return _jsonable(obj.tolist())
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        return obj.item()
    return obj


# ----------------------------------------------------------------------
# manifest handling
# ----------------------------------------------------------------------
def manifest_hash(manifest: dict) -> str:
    canon = json.dumps(manifest, sort_keys=True, separators=(",", ":"))
    return "sha256:" + hashlib.sha256(canon.encode()).hexdigest()


def _entry_seed(base_seed: int, name: str) -> int:
    digest = hashlib.blake2b(f"{base_seed}:{name}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big") >> 1


def _validate_entry(entry: dict, manifest_dir: Path) -> dict:
    measures = entry.get("measures")
    if not isinstance(measures, list) or not measures:
        raise DataError("manifest must request at least one measure")
    unknown = [m for m in measures if m not in MEASURES]
    if unknown:
        raise DataError(f"unknown measures {unknown}; known: {', '.join(MEASURES)}")
    if "dataset" not in entry:
        raise DataError("manifest entry needs a 'dataset' path")
    if ("bi1" in measures or "bi2" in measures) and "prior" not in entry:
        raise DataError("posterior-variability measures (bi1, bi2) require a prior")
    if "ri_curve" in measures and "grid" not in entry:
        raise DataError("ri_curve requires a grid specification")
    out = dict(entry)
    out["dataset_path"] = (manifest_dir / entry["dataset"]).resolve()
    return out


def _lod_scale(entry: dict) -> float:
    base = entry.get("lod_base", "natural")
    if base == "natural":
        return 1.0
    if base in ("log10", "base10"):
        return 1.0 / math.log(10.0)
    raise DataError(f"unknown lod_base {base!r}; use 'natural' or 'log10'")


def run_entry(entry: dict, out_dir: Path, seed: int) -> tuple[int, dict, list[Path]]:
    """Run one manifest entry; returns (exit code, report dict, written paths)."""
    measures = entry["measures"]
    model, data, model_spec, _ = load_dataset(entry["dataset_path"])
    lod_scale = _lod_scale(entry)
    mc_cfg = entry.get("mc", {})
    mc = MCConfig(seed=int(mc_cfg.get("seed", seed)), draws=int(mc_cfg.get("draws", 4096)))
    report: dict = {
        "schema": REPORT_SCHEMA,
        "tool_version": __version__,
        "model": model_spec,
        "dataset": str(entry["dataset_path"]),
        "seed": mc.seed,
        "lod_base": entry.get("lod_base", "natural"),
        "measures": {},
        "flags": [],
    }
    written: list[Path] = []
    code = EXIT_OK

    if model is None:  # entropy pseudo-model
        extra = [m for m in measures if m != "entropy"]
        if extra:
            raise DataError(f"measures {extra} are not defined for {ENTROPY_TAG}; "
                            "only 'entropy' applies")
        ent = entropy_measure(data)
        report["measures"]["entropy"] = _jsonable(ent)
        return code, report, written

    if "entropy" in measures:
        raise DataError(f"'entropy' applies only to {ENTROPY_TAG} datasets; "
                        f"got model {model.tag}")

    hyp_cfg = entry.get("hypothesis")
    if hyp_cfg is None:
        raise DataError("manifest entry needs a 'hypothesis' with null_values")
    hyp = HypothesisSpec(tuple(hyp_cfg["null_values"]),
                         hyp_cfg.get("nuisance_policy", "fix_at_null_mle"))
    prior = PriorSpec.from_json(entry["prior"]) if "prior" in entry else None
    if prior is not None and hyp.nuisance_policy == AVERAGE_OVER_PRIOR \
            and model.nuisance_indices:
        raise UnsupportedOperationError(
            "averaging the nuisance over a prior is not supported; it would need "
            "a nuisance prior specification, which this tool does not construct. "
            "Use nuisance_policy 'fix_at_null_mle'.")

    fit_alt = fit_mle(model, data)
    fit_null = fit_null_mle(model, data, hyp)
    theta_0 = null_point(model, hyp, fit_null)
    report["fits"] = {
        "alternative": _fit_json(fit_alt, lod_scale),
        "null": _fit_json(fit_null, lod_scale),
    }
    boundary = tuple(f for f in fit_alt.flags + fit_null.flags)
    report["flags"] = sorted(set(boundary))

    if {"ri1", "ri0", "ri_half"} & set(measures):
        ls = large_sample_report(model, data, fit_alt.theta, theta_0,
                                 boundary_flags=boundary)
        for name in ("ri1", "ri0", "ri_half"):
            if name in measures:
                report["measures"][name] = {"value": getattr(ls, name),
                                            "flags": list(ls.flags)}
        report["measures"]["evidence"] = {
            "lod_ob": ls.lod_ob * lod_scale,
            "expected_lod_co": ls.expected_lod_co * lod_scale,
            "q_gain_at_null": ls.q_gain_at_null * lod_scale,
            "ri_gap": abs(ls.ri1 - ls.ri0),
            "per_unit": [{"lod": p.lod * lod_scale,
                          "lod_complete": p.lod_complete * lod_scale,
                          "ri1": p.ri1} for p in ls.per_unit],
        }

    if "completed_ratio" in measures:
        csr = completed_stat_ratio(model, data, fit_alt.theta, theta_0)
        report["measures"]["completed_ratio"] = {
            "r_from_alt": csr.r_from_alt, "r_from_null": csr.r_from_null,
            "statistics": _jsonable(csr.statistics), "flags": list(csr.flags)}

    if "bi0" in measures:
        b = compute_bi0(model, data, theta_0, mc=mc)
        report["measures"]["bi0"] = {"value": b.value, "score": b.score,
                                     "info_missing": b.info_missing,
                                     "flags": list(b.flags)}
    if "bi_s" in measures:
        b = compute_bi_s(model, data, theta_0, mc=mc)
        report["measures"]["bi_s"] = {"value": b.value, "flags": list(b.flags)}
    if "bi1" in measures:
        b = compute_bi1(model, data, theta_0, prior, mc)
        report["measures"]["bi1"] = {"value": b.value, "mc_se": b.mc_se,
                                     "flags": list(b.flags)}
    if "bi2" in measures:
        b = compute_bi2(model, data, theta_0, prior, mc)
        report["measures"]["bi2"] = {"value": b.value, "mc_se": b.mc_se,
                                     "flags": list(b.flags)}
    if prior is not None and ("bi1" in measures or "bi2" in measures):
        bf = bayes_factor_ob(model, data, theta_0, prior, mc)
        report["measures"]["bayes_factor"] = _jsonable(bf)

    if "ri_curve" in measures:
        grid_cfg = entry["grid"]
        lo, hi = float(grid_cfg["lo"]), float(grid_cfg["hi"])
        count = int(grid_cfg.get("count", 101))
        idx = model.interest_indices
        if len(idx) != 1:
            raise UnsupportedOperationError("ri_curve needs a scalar interest parameter")
        pts = []
        for k in range(count):
            t = lo + (hi - lo) * k / max(count - 1, 1)
            vals = list(fit_alt.theta.values)
            vals[idx[0]] = t
            pts.append(model.point(vals))
        curve = ri_curve(model, data, fit_alt.theta,
                         [p for p in pts if p.values != fit_alt.theta.values])
        curve_name = entry.get("out", {}).get("curve", "curve.csv")
        curve_path = out_dir / curve_name
        with curve_path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["theta", "ri", "flag"])
            for cp in curve:
                writer.writerow([cp.theta.values[idx[0]],
                                 "" if cp.value is None else repr(cp.value), cp.note])
        written.append(curve_path)
        report["measures"]["ri_curve"] = {"path": str(curve_path), "points": len(curve)}

    if "diagnostics" in measures:
        ident = em_identity_suite(model, data, fit_alt.theta, seed=mc.seed, draws=mc.draws)
        rie = compute_ri_e(model, data, fit_alt.theta, draws=mc.draws)
        report["measures"]["diagnostics"] = {
            "identities_passed": ident.passed,
            "identity_rows": _jsonable(ident.rows),
            "ri_e": rie.value, "i_ob": rie.i_ob, "i_mi": rie.i_mi,
        }
        if not ident.passed:
            code = EXIT_DIAGNOSTIC
    return code, report, written


def _fit_json(fit, lod_scale: float) -> dict:
    return {"theta": list(fit.theta.values), "roles": list(fit.theta.roles),
            "loglik": fit.loglik * lod_scale, "iterations": fit.iterations,
            "converged": fit.converged, "gradient_norm": fit.gradient_norm,
            "flags": list(fit.flags)}


def run_manifest(manifest: dict, manifest_dir: Path, out_dir: Path,
                 seed_override: int | None, workers: int) -> tuple[int, list[Path]]:
    if manifest.get("schema") != MANIFEST_SCHEMA:
        raise DataError(f"expected manifest schema {MANIFEST_SCHEMA!r}, "
                        f"got {manifest.get('schema')!r}")
    entries_cfg = manifest.get("entries")
    if entries_cfg is None:
        entries_cfg = [manifest]
    if not isinstance(entries_cfg, list) or not entries_cfg:
        raise DataError("'entries' must be a nonempty list")
    base_seed = seed_override if seed_override is not None \
        else int(manifest.get("mc", {}).get("seed", 0))
    mhash = manifest_hash(manifest)
    out_dir.mkdir(parents=True, exist_ok=True)

    prepared = []
    for i, raw_entry in enumerate(entries_cfg):
        entry = dict(manifest.get("defaults", {}))
        entry.update(raw_entry)
        entry.pop("entries", None)
        entry.pop("schema", None)
        name = entry.get("name", f"entry{i}")
        entry = _validate_entry(entry, manifest_dir)
        if seed_override is not None or "mc" not in entry or "seed" not in entry["mc"]:
            mc = dict(entry.get("mc", {}))
            mc["seed"] = _entry_seed(base_seed, name) if len(entries_cfg) > 1 else base_seed
            entry["mc"] = mc
        prepared.append((i, name, entry))

    results: dict[int, tuple[int, dict, list[Path]]] = {}

    def job(item):
        i, name, entry = item
        code, report, written = run_entry(entry, out_dir, base_seed)
        report["entry"] = name
        report["manifest_hash"] = mhash
        return i, (code, report, written)

    if workers > 1 and len(prepared) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            for i, res in pool.map(job, prepared):
                results[i] = res
    else:
        for item in prepared:
            i, res = job(item)
            results[i] = res

    written_all: list[Path] = []
    codes = []
    for i, name, entry in prepared:
        code, report, written = results[i]
        codes.append(code)
        report_name = entry.get("out", {}).get(
            "report", f"{name}.json" if len(prepared) > 1 else "report.json")
        path = out_dir / report_name
        path.write_text(_dumps(_jsonable(report)))
        written_all.append(path)
        written_all.extend(written)
        log.info("entry %s -> %s", name, path)
    if any(c == EXIT_DIAGNOSTIC for c in codes):
        return EXIT_DIAGNOSTIC, written_all
    return EXIT_OK, written_all


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------
def cmd_run(args) -> int:
    manifest_path = Path(args.manifest)
    try:
        manifest = json.loads(manifest_path.read_text())
    except OSError as exc:
        log.error("cannot read manifest %s: %s", manifest_path, exc)
        return EXIT_VALIDATION
    except json.JSONDecodeError as exc:
        log.error("%s:%d: invalid JSON: %s", manifest_path, exc.lineno, exc.msg)
        return EXIT_VALIDATION
    try:
        code, written = run_manifest(manifest, manifest_path.parent.resolve(),
                                     Path(args.out), args.seed, args.workers)
    except (DataError, UnsupportedOperationError) as exc:
        log.error("validation error: %s", exc)
        return EXIT_VALIDATION
    except MissinfoError as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    for p in written:
        print(p)
    return code


def cmd_validate(args) -> int:
    path = Path(args.dataset)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        log.error("cannot read %s: %s", path, exc)
        return EXIT_VALIDATION
    except json.JSONDecodeError as exc:
        log.error("%s:%d: invalid JSON: %s", path, exc.lineno, exc.msg)
        return EXIT_VALIDATION
    if args.model is not None:
        raw = dict(raw)
        raw["model"] = args.model
    violations: list[str] = []
    if raw.get("schema") != DATASET_SCHEMA:
        violations.append(f"schema: expected {DATASET_SCHEMA!r}, got {raw.get('schema')!r}")
    spec = raw.get("model")
    tag = spec if isinstance(spec, str) else (spec or {}).get("tag")
    units = raw.get("units") or []
    weights = raw.get("weights")
    if weights is not None:
        if len(weights) != len(units):
            violations.append("weights: length does not match units")
        for i, w in enumerate(weights):
            if not isinstance(w, (int, float)) or w < 0 or not math.isfinite(w):
                violations.append(f"weights[{i}]: must be finite and nonnegative")
        if weights and all(w == 0 for w in weights):
            violations.append("weights: must not all be zero")
    if tag == ENTROPY_TAG:
        for i, u in enumerate(units):
            post = u.get("posterior")
            if not post:
                violations.append(f"unit {i}: missing 'posterior'")
                continue
            s = sum(post)
            if any(p < 0 for p in post):
                violations.append(f"unit {i}: negative posterior probability")
            if abs(s - 1) > 1e-9:
                violations.append(f"unit {i}: posterior sums to {s!r}, not 1")
    elif not violations or tag is not None:
        try:
            model = build_model(spec)
        except DataError as exc:
            violations.append(str(exc))
        else:
            for i, u in enumerate(units):
                try:
                    unit = model.unit_from_json(u)
                except DataError as exc:
                    violations.append(f"unit {i}: {exc}")
                    continue
                for problem in model.validate_unit(unit):
                    violations.append(f"unit {i}: {problem}")
    if violations:
        for v in violations:
            print(v)
        print(f"{len(violations)} violation(s) in {path}")
        return EXIT_VALIDATION
    print(f"no violations in {path}")
    return EXIT_OK


def _data_file(name: str) -> str:
    return resources.files("missinfo.data").joinpath(name).read_text()


def cmd_demo(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in ("allele_counts_demo.json", "sibpair_ibs_demo.json"):
        (out_dir / name).write_text(_data_file(name))
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "mc": {"seed": args.seed if args.seed is not None else 20240611},
        "entries": [
            {"name": "allele_counts",
             "dataset": "allele_counts_demo.json",
             "hypothesis": {"null_values": [0.0]},
             "measures": ["ri1", "ri0", "ri_half", "completed_ratio", "diagnostics"]},
            {"name": "sibpair_ibs",
             "dataset": "sibpair_ibs_demo.json",
             "hypothesis": {"null_values": [0.0]},
             "prior": {"kind": "uniform_interval", "lo": -1.0, "hi": 1.0},
             "measures": ["bi0", "bi_s", "bi1", "bi2", "ri_curve"],
             "grid": {"lo": -3.0, "hi": -0.05, "count": 60},
             "out": {"curve": "sibpair_curve.csv"}},
        ],
    }
    (out_dir / "manifest.json").write_text(_dumps(manifest))
    code, written = run_manifest(manifest, out_dir, out_dir, args.seed, args.workers)
    reports = {p.stem: json.loads(p.read_text()) for p in written if p.suffix == ".json"}
    ac = reports["allele_counts"]["measures"]
    stats = ac["completed_ratio"]["statistics"]
    print(f"allele counts: chi2_obs={stats['chi2_obs']:.4f} "
          f"chi2_joint_em={stats['chi2_joint_em']:.4f} "
          f"chi2_separate_em={stats['chi2_separate_em']:.4f}")
    print(f"allele counts: ri1={ac['ri1']['value']:.4f} ri0={ac['ri0']['value']:.4f} "
          f"ratios=({ac['completed_ratio']['r_from_alt']:.4f}, "
          f"{ac['completed_ratio']['r_from_null']:.4f})")
    sp = reports["sibpair_ibs"]["measures"]
    print(f"sib pair: bi0={sp['bi0']['value']:.4f} bi_s={sp['bi_s']['value']:.4f} "
          f"bi1={sp['bi1']['value']:.4f} bi2={sp['bi2']['value']:.4f} "
          f"(curve: {sp['ri_curve']['path']})")
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="missinfo",
        description="Relative-information measures for tests with incomplete data")
    parser.add_argument("--log-level", default="warning",
                        choices=["debug", "info", "warning", "error"])
    sub = parser.add_subparsers(dest="command", required=True)

    default_workers = int(os.environ.get("MISSINFO_WORKERS", "1"))

    p_run = sub.add_parser("run", help="run a manifest of analyses")
    p_run.add_argument("--manifest", required=True)
    p_run.add_argument("--out", default="missinfo_out")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the manifest Monte Carlo seed")
    p_run.add_argument("--workers", type=int, default=default_workers)
    p_run.set_defaults(func=cmd_run)

    p_val = sub.add_parser("validate", help="check a dataset file against its schema")
    p_val.add_argument("--dataset", required=True)
    p_val.add_argument("--model", default=None, help="override the file's model tag")
    p_val.set_defaults(func=cmd_validate)

    p_demo = sub.add_parser("demo", help="run the shipped demonstration datasets")
    p_demo.add_argument("--out", default="demo_out")
    p_demo.add_argument("--seed", type=int, default=None)
    p_demo.add_argument("--workers", type=int, default=default_workers)
    p_demo.set_defaults(func=cmd_demo)

    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level.upper()),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DataError, UnsupportedOperationError) as exc:
        log.error("validation error: %s", exc)
        return EXIT_VALIDATION
    except MissinfoError as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
