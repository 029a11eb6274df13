"""End-to-end orchestration: store -> graphs -> metrics -> SZZ -> features -> fit -> xeval -> report."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from mention_lab.config import PipelineConfig
from mention_lab.count_models import (
    DesignMatrix,
    ModelError,
    bh_adjust,
    check_table_columns,
    fit_glm,
    fit_hurdle,
    model_selection,
    predict_from_coefficients,
    vif_screen,
)
from mention_lab.features import (
    AGE_SCALE,
    FeatureRow,
    InsufficientHistory,
    assemble,
    make_split,
    population_stats,
    read_features,
    write_features,
)
from mention_lab.focus_metrics import commit_module_matrix, daf, degree_table, social_specialization_table
from mention_lab.ingest import ProjectData, ProjectId, list_projects, load_project, norm_login, validate_store
from mention_lab.mention_graph import build_graph, write_edges
from mention_lab.szz import buggy_commit_counts, fixing_commit_counts, run_szz
from mention_lab.timeutil import Window
from mention_lab.xeval import (
    coefficient_table,
    cross_predict,
    export_coefficients,
    export_heatmap,
    fit_project_models,
    tables_from_features,
)

logger = logging.getLogger(__name__)

STAGES = ("load", "graph", "metrics", "szz", "features", "fit", "xeval", "report")
METRIC_FIELDS = ("developer", "OSS_rho", "OSS_kappa", "ISS_kappa", "ISS_rho", "DAF", "social_outdegree",
                 "observed_call_indegree", "responsiveness", "commits", "buggy_commits", "fixing_commits")


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"stage '{stage}' failed: {message}")
        self.stage = stage
        self.message = message


@dataclass
class ReportBundle:
    out_dir: Path
    files: list[str] = field(default_factory=list)  # paths relative to out_dir
    exclusions: dict[str, str] = field(default_factory=dict)

    @property
    def digest(self) -> str:
        h = hashlib.sha256()
        for rel in sorted(self.files):
            h.update(rel.encode() + b"\0")
            h.update((self.out_dir / rel).read_bytes())
            h.update(b"\0")
        return h.hexdigest()


# ---------------------------------------------------------------- metrics

def developer_metrics(data: ProjectData, window: Window | None = None, *, daf_depth: int = 1,
                      track_renames: bool = True, ignore_whitespace: bool = True) -> list[dict]:
    """One row per developer (edge participant or committer) with window-restricted metrics.

    Undefined specialization scores stay ``None``.
    """
    window = window or Window()
    graph = build_graph(data, window=window)
    social = social_specialization_table(graph)
    degrees = degree_table(graph, data.threads, window)
    modules = commit_module_matrix(data.commits, window, daf_depth)
    result = run_szz(data, window=window, track_renames=track_renames, ignore_whitespace=ignore_whitespace)
    buggy = buggy_commit_counts(data, window, result)
    fixing = fixing_commit_counts(data, result, window)
    commits: dict[str, int] = {}
    for c in data.commits:
        if c.author_login and c.author_date in window:
            key = norm_login(c.author_login)
            commits[key] = commits.get(key, 0) + 1
    rows = []
    for dev in sorted(set(social) | set(degrees) | set(commits)):
        soc = social.get(dev, {})
        deg = degrees.get(dev, {})
        focus = daf(modules, dev)
        rows.append({
            "developer": dev,
            "OSS_rho": soc.get("OSS_rho"), "OSS_kappa": soc.get("OSS_kappa"),
            "ISS_kappa": soc.get("ISS_kappa"), "ISS_rho": soc.get("ISS_rho"),
            "DAF": focus.normalized if focus is not None else None,
            "social_outdegree": deg.get("social_outdegree", 0),
            "observed_call_indegree": deg.get("observed_call_indegree", 0),
            "responsiveness": deg.get("responsiveness", 0),
            "commits": commits.get(dev, 0),
            "buggy_commits": buggy.get(dev, 0),
            "fixing_commits": fixing.get(dev, 0),
        })
    return rows


def write_metrics(rows: list[dict], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRIC_FIELDS)
        for r in rows:
            writer.writerow(["" if r[k] is None else (repr(r[k]) if isinstance(r[k], float) else r[k])
                             for k in METRIC_FIELDS])


def write_attributions(result, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for a in result.attributions:
            fh.write(json.dumps(a.to_dict(), sort_keys=True) + "\n")


# ---------------------------------------------------------------- fitting

def _json_float(v):
    if isinstance(v, float) and not math.isfinite(v):
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    return v


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        return _json_float(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return _json_float(obj)


def fit_pooled(rows: list[FeatureRow], zero_columns, count_columns, protected_columns=(),
               vif_threshold: float = 4.0, selection: bool = True, model: str = "hurdle") -> dict:
    """VIF screening followed by a fit on the pooled feature table.

    ``model`` is ``"hurdle"`` (default) or a single-equation ``"poisson"`` / ``"negbin"`` fit
    on the count columns. Constant columns carry no information and are removed first.
    Returns the fit.json payload.
    """
    if model not in ("hurdle", "poisson", "negbin"):
        raise ValueError(f"unknown model {model!r}")
    check_table_columns(zero_columns, count_columns)
    if not rows:
        raise ModelError("no feature rows to fit")
    names = sorted(set(zero_columns) | set(count_columns))
    X = np.array([[float(getattr(r, c)) for c in names] for r in rows])
    y = np.array([r.future_mentions for r in rows], dtype=float)
    constant = [c for j, c in enumerate(names) if np.ptp(X[:, j]) == 0.0]
    live = [c for c in names if c not in constant]
    if constant:
        logger.warning("dropping constant columns: %s", ", ".join(constant))
    if len(live) >= 2:
        kept, vif = vif_screen(X[:, [names.index(c) for c in live]], live, protected_columns, vif_threshold)
    else:
        kept, vif = live, []
    design = DesignMatrix.build({c: X[:, names.index(c)] for c in kept}, y)
    zero_cols = [c for c in zero_columns if c in kept]
    count_cols = [c for c in count_columns if c in kept]
    if model == "hurdle":
        fitted = fit_hurdle(design, zero_cols, count_cols)
        pred = fitted.predict(design)
    else:
        fitted = fit_glm(design.select(count_cols), model)
        fitted = replace(fitted, p_adjusted=dict(zip(fitted.columns,
                                                     bh_adjust([fitted.p_values[c] for c in fitted.columns]))))
        pred = fitted.predict(design.select(count_cols))
    payload = {
        "model": model,
        "n_obs": len(rows),
        "projects": sorted({r.project for r in rows}),
        "dropped_constant": constant,
        "vif": vif,
        "vif_threshold": vif_threshold,
        "kept_columns": kept,
        model: fitted.to_dict(),
        "mae": float(np.mean(np.abs(y - pred))),
        "mse": float(np.mean((y - pred) ** 2)),
        "scaling_notes": {"github_age_days": f"days / {AGE_SCALE:g}",
                          "github_age_days_sq": f"(days / {AGE_SCALE:g})^2",
                          "log_*": "ln(1 + x)"},
        "optimizer": {"method": "Newton-Raphson with step halving", "tol": 1e-8, "max_iter": 100},
    }
    if selection and model == "hurdle":
        try:
            report = model_selection(design, ("poisson", "negbin", "hurdle"), zero_cols, count_cols)
            payload["selection"] = report.to_dict()
        except ModelError as exc:
            payload["selection"] = {"error": str(exc)}
    return _clean(payload)


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_fit(path_or_obj) -> dict:
    if isinstance(path_or_obj, dict):
        return path_or_obj
    return json.loads(Path(path_or_obj).read_text(encoding="utf-8"))


def predict_developer(fit, row) -> dict:
    """Hurdle prediction for one feature row (a mapping or :class:`FeatureRow`) from fit.json."""
    fit = load_fit(fit)
    if fit.get("model") != "hurdle":
        raise ValueError("predictions need a hurdle fit")
    if not isinstance(row, dict):
        row = {k: getattr(row, k) for k in row.__dataclass_fields__}
    h = fit["hurdle"]
    return predict_from_coefficients(h["zero"]["coefficients"], h["count"]["coefficients"], row)


# ---------------------------------------------------------------- report

def _stars(p: float | None) -> str:
    if p is None or not isinstance(p, (int, float)):
        return ""
    for cut, mark in ((0.001, "***"), (0.01, "**"), (0.05, "*"), (0.1, "†")):
        if p < cut:
            return mark
    return ""


def _num(v, digits: int = 3) -> str:
    if v is None:
        return "n/a"
    if isinstance(v, str):
        return v
    return f"{v:.{digits}f}"


def render_report(config: PipelineConfig, stats: dict, fit: dict, splits: list[dict],
                  exclusions: dict[str, str], xeval_summary: dict) -> str:
    out = ["# Future @-mention analysis", ""]
    out += ["## Configuration", "", "```ini", config.to_ini().rstrip(), "```", ""]
    out += ["## Projects", ""]
    for s in splits:
        out.append(f"- {s['project']}: observation {s['data_start']} .. {s['split']}, "
                   f"response {s['split']} .. {s['data_end']} ({s['response_months']} months)")
    for project, reason in sorted(exclusions.items()):
        out.append(f"- excluded {project}: {reason}")
    out.append("")
    out += ["## Population statistics", "", "| statistic | value |", "|---|---|"]
    for k in sorted(stats):
        v = stats[k]
        out.append(f"| {k} | {_num(v, 4) if isinstance(v, float) else ('n/a' if v is None else v)} |")
    out.append("")
    out += ["## VIF screening", "", f"Threshold {fit['vif_threshold']}; protected controls are never dropped.", "",
            "| column | initial VIF | final VIF | dropped at step | protected |", "|---|---|---|---|---|"]
    for r in fit["vif"]:
        out.append(f"| {r['column']} | {_num(r['vif_initial'], 2)} | {_num(r['vif_final'], 2)} | "
                   f"{r['dropped_at_step'] or ''} | {'yes' if r['protected'] else ''} |")
    if fit["dropped_constant"]:
        out.append("")
        out.append("Constant columns removed before screening: " + ", ".join(fit["dropped_constant"]))
    out.append("")
    h = fit["hurdle"]
    zero, count = h["zero"], h["count"]
    names = [c for c in count["columns"] if c != "intercept"]
    names += [c for c in zero["columns"] if c != "intercept" and c not in names]
    names.append("intercept")
    out += ["## Hurdle model", "",
            "| covariate | count | (s.e.) | zero | (s.e.) |", "|---|---|---|---|---|"]
    for c in names:
        cells = []
        for comp in (count, zero):
            if c in comp["coefficients"]:
                cells.append(f"{comp['coefficients'][c]:.3f}{_stars(comp['p_adjusted'][c])}")
                cells.append(f"({comp['std_errors'][c]:.3f})")
            else:
                cells += ["", ""]
        out.append(f"| {c} | " + " | ".join(cells) + " |")
    out += ["", f"Observations: {fit['n_obs']}", f"Mean absolute error: {fit['mae']:.3f}",
            f"Mean squared error: {fit['mse']:.3f}",
            f"Log-likelihood: {h['log_likelihood']:.3f} (zero {zero['log_likelihood']:.3f}, "
            f"count {count['log_likelihood']:.3f}); AIC {h['aic']:.3f}", "",
            "Significance after Benjamini-Hochberg adjustment: † p<0.1; * p<0.05; ** p<0.01; *** p<0.001.", ""]
    sel = fit.get("selection")
    if sel:
        out += ["## Model comparison", ""]
        if "error" in sel:
            out.append(f"Comparison not available: {sel['error']}")
        else:
            out += ["| model | parameters | log-likelihood | AIC |", "|---|---|---|---|"]
            for m in sel["aic"]:
                out.append(f"| {m} | {sel['n_params'][m]} | {sel['log_likelihood'][m]:.3f} | {sel['aic'][m]:.3f} |")
            out.append("")
            for pair, v in sel["vuong"].items():
                out.append(f"- Vuong {pair}: " + ("undefined" if v is None else f"V = {v[0]:.3f}, p = {v[1]:.4f}"))
            out.append(f"- preferred by AIC: {sel['preferred']}")
        out.append("")
    out += ["## Cross-project prediction", ""]
    if xeval_summary.get("skipped"):
        out.append(f"Skipped: {xeval_summary['skipped']}")
    else:
        out.append(f"Projects: {', '.join(xeval_summary['projects'])}")
        for project, reason in sorted(xeval_summary["excluded"].items()):
            out.append(f"- excluded {project}: {reason}")
        out += ["", f"- mean off-diagonal MAE (count component): {xeval_summary['mean_mae']:.3f}",
                f"- mean off-diagonal AUC (zero component): {_num(xeval_summary['mean_auc'])}", "",
                "Heatmaps: [count MAE](xeval/count_mae.svg) ([csv](xeval/count_mae.csv)), "
                "[zero AUC](xeval/zero_auc.svg) ([csv](xeval/zero_auc.csv)), "
                "[count coefficients](xeval/coefficients_count.svg), "
                "[zero coefficients](xeval/coefficients_zero.svg)"]
    out.append("")
    return "\n".join(out)


# ---------------------------------------------------------------- xeval

def run_xeval(rows: list[FeatureRow], out_dir, min_rows: int = 30) -> dict:
    """Per-project simplified fits, cross-prediction matrices and heatmaps under ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pairs, excluded = fit_project_models(tables_from_features(rows), min_rows=min_rows)
    if len(pairs) < 2:
        return {"skipped": f"{len(pairs)} project(s) eligible; need at least 2", "excluded": excluded,
                "files": []}
    count, zero = cross_predict(pairs)
    files = []
    files += export_heatmap(count, count.dendrogram_order, out_dir / "count_mae")
    files += export_heatmap(zero, zero.dendrogram_order, out_dir / "zero_auc")
    for comp in ("count", "zero"):
        projects, names, values = coefficient_table(pairs, comp)
        files += export_coefficients(projects, names, values, out_dir / f"coefficients_{comp}",
                                     f"{comp} component coefficients")
    off_mae = count.off_diagonal()
    off_auc = zero.off_diagonal()
    off_auc = off_auc[np.isfinite(off_auc)]
    return {"projects": [p.project for p in pairs], "excluded": excluded,
            "mean_mae": float(np.nanmean(off_mae)),
            "mean_auc": float(off_auc.mean()) if off_auc.size else None,
            "files": [str(f) for f in files]}


# ---------------------------------------------------------------- driver

def _stage(name):
    def wrap(fn):
        def run(*args, **kwargs):
            logger.info("stage %s", name)
            try:
                return fn(*args, **kwargs)
            except StageError:
                raise
            except Exception as exc:  # any failure halts the pipeline, named by stage
                raise StageError(name, f"{type(exc).__name__}: {exc}") from exc
        return run
    return wrap


def run_pipeline(config: PipelineConfig) -> ReportBundle:
    """Run every stage; artifacts written so far are kept if a stage fails."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bundle = ReportBundle(out)

    def emit(rel: str) -> Path:
        path = out / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        if rel not in bundle.files:
            bundle.files.append(rel)
        return path

    config.save(emit("config.ini"))

    @_stage("load")
    def load():
        ids = [ProjectId.parse(p) for p in config.projects] or list_projects(config.store_dir)
        if not ids:
            raise ValueError(f"no projects in store {config.store_dir}")
        loaded = []
        validation = {}
        for pid in ids:
            report = validate_store(config.store_dir, pid)
            validation[str(pid)] = report.to_dict()
            if not report.complete:
                bundle.exclusions[str(pid)] = "incomplete store: " + "; ".join(report.reasons)
                continue
            loaded.append(load_project(config.store_dir, pid))
        write_json(_clean(validation), emit("validation.json"))
        if not loaded:
            raise ValueError("every project failed validation")
        return loaded

    @_stage("graph")
    def graphs(projects):
        for data in projects:
            write_edges(build_graph(data), emit(f"graphs/{data.project.slug}.edges.jsonl"))

    @_stage("metrics")
    def metrics(projects):
        for data in projects:
            rows = developer_metrics(data, daf_depth=config.daf_depth, track_renames=config.track_renames,
                                     ignore_whitespace=config.ignore_whitespace)
            write_metrics(rows, emit(f"metrics/{data.project.slug}.csv"))

    @_stage("szz")
    def szz(projects):
        for data in projects:
            result = run_szz(data, track_renames=config.track_renames, ignore_whitespace=config.ignore_whitespace)
            write_attributions(result, emit(f"szz/{data.project.slug}.jsonl"))

    @_stage("features")
    def features(projects):
        rows, splits = [], []
        for data in projects:
            try:
                split = make_split(data, config.response_months, config.min_observation_months)
            except InsufficientHistory as exc:
                bundle.exclusions[str(data.project)] = f"insufficient history: {exc}"
                continue
            splits.append(split.to_dict())
            rows.extend(assemble(data, split, min_participation_months=config.min_participation_months,
                                 participation=config.participation, daf_depth=config.daf_depth,
                                 track_renames=config.track_renames,
                                 ignore_whitespace=config.ignore_whitespace))
        write_features(rows, emit("features.csv"))
        write_json({"splits": splits, "exclusions": dict(sorted(bundle.exclusions.items()))}, emit("splits.json"))
        return rows, splits

    @_stage("fit")
    def fit(rows):
        payload = fit_pooled(rows, config.zero_columns, config.count_columns, config.protected_columns,
                             config.vif_threshold)
        write_json(payload, emit("fit.json"))
        return payload

    @_stage("xeval")
    def xeval(rows):
        summary = run_xeval(rows, out / "xeval", config.min_rows)
        for f in summary.pop("files"):
            emit(str(Path(f).relative_to(out)))
        write_json(_clean(summary), emit("xeval/summary.json"))
        return summary

    @_stage("report")
    def report(projects, payload, splits, summary):
        stats = population_stats(projects)
        text = render_report(config, stats, payload, splits, bundle.exclusions, summary)
        emit("report.md").write_text(text, encoding="utf-8")
        write_json(_clean(stats), emit("population_stats.json"))

    projects = load()
    graphs(projects)
    metrics(projects)
    szz(projects)
    rows, splits = features(projects)
    payload = fit(rows)
    summary = xeval(rows)
    report(projects, payload, splits, summary)
    bundle.files.sort()
    return bundle


def fit_features_file(features_path, config: PipelineConfig | None = None, model: str = "hurdle") -> dict:
    config = config or PipelineConfig()
    return fit_pooled(read_features(features_path), config.zero_columns, config.count_columns,
                      config.protected_columns, config.vif_threshold, model=model)


__all__ = ["STAGES", "StageError", "ReportBundle", "developer_metrics", "write_metrics", "fit_pooled",
           "fit_features_file", "predict_developer", "render_report", "run_xeval", "run_pipeline",
           "write_json", "load_fit"]
