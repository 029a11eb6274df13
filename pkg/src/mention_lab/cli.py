"""Command-line entry point: ``mention-lab <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from mention_lab.config import ConfigError, PipelineConfig
from mention_lab.features import InsufficientHistory, assemble, make_split, read_features, write_features
from mention_lab.ingest import ProjectId, ingest_project, list_projects, load_project, validate_store
from mention_lab.mention_graph import build_graph, write_edges
from mention_lab.pipeline import (
    StageError,
    developer_metrics,
    fit_features_file,
    predict_developer,
    run_pipeline,
    run_xeval,
    write_attributions,
    write_json,
    write_metrics,
)
from mention_lab.szz import run_szz
from mention_lab.timeutil import Window

logger = logging.getLogger("mention_lab")


class CliError(Exception):
    pass


def _config(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    overrides = {}
    for attr, key in (("store", "store_dir"), ("response_months", "response_months"),
                      ("min_rows", "min_rows"), ("out_dir", "out_dir")):
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "project", None) and isinstance(args.project, list):
        overrides["projects"] = tuple(args.project)
    return cfg.replace(**overrides)


def _checked_project(store, project: str) -> ProjectId:
    pid = ProjectId.parse(project)
    report = validate_store(store, pid)
    if not report.complete:
        raise CliError(f"{pid} failed validation: {'; '.join(report.reasons)}")
    return pid


def cmd_ingest(args, cfg):
    if args.from_api == bool(args.fixtures):
        raise CliError("choose exactly one of --from-api or --fixtures DIR")
    manifest = ingest_project("api" if args.from_api else "fixture", args.project, cfg.store_dir,
                              fixture_dir=args.fixtures)
    report = validate_store(cfg.store_dir, ProjectId.parse(args.project))
    print(json.dumps({"manifest": manifest, "validation": report.to_dict()}, indent=2, sort_keys=True))
    if not report.complete:
        raise CliError(f"store for {args.project} is incomplete: {'; '.join(report.reasons)}")


def cmd_graph(args, cfg):
    pid = _checked_project(cfg.store_dir, args.project)
    graph = build_graph(load_project(cfg.store_dir, pid), window=Window.parse(args.window))
    write_edges(graph, args.out)
    print(f"{len(graph.edges)} edges ({len(graph.of_kind('call'))} calls) -> {args.out}")


def cmd_metrics(args, cfg):
    pid = _checked_project(cfg.store_dir, args.project)
    rows = developer_metrics(load_project(cfg.store_dir, pid), Window.parse(args.window),
                             daf_depth=cfg.daf_depth, track_renames=cfg.track_renames,
                             ignore_whitespace=cfg.ignore_whitespace)
    write_metrics(rows, args.out)
    print(f"{len(rows)} developers -> {args.out}")


def cmd_szz(args, cfg):
    pid = _checked_project(cfg.store_dir, args.project)
    result = run_szz(load_project(cfg.store_dir, pid), track_renames=cfg.track_renames,
                     ignore_whitespace=cfg.ignore_whitespace)
    write_attributions(result, args.out)
    print(f"{len(result.links)} fix links, {len(result.attributions)} attributions, "
          f"{len(result.dangling)} dangling, {len(result.skipped)} skipped -> {args.out}")


def cmd_features(args, cfg):
    ids = [ProjectId.parse(p) for p in cfg.projects] or list_projects(cfg.store_dir)
    rows = []
    for pid in ids:
        report = validate_store(cfg.store_dir, pid)
        if not report.complete:
            print(f"excluded {pid}: incomplete store ({'; '.join(report.reasons)})", file=sys.stderr)
            continue
        data = load_project(cfg.store_dir, pid)
        try:
            split = make_split(data, cfg.response_months, cfg.min_observation_months)
        except InsufficientHistory as exc:
            print(f"excluded {pid}: {exc}", file=sys.stderr)
            continue
        rows.extend(assemble(data, split, min_participation_months=cfg.min_participation_months,
                             participation=cfg.participation, daf_depth=cfg.daf_depth,
                             track_renames=cfg.track_renames, ignore_whitespace=cfg.ignore_whitespace))
    write_features(rows, args.out)
    print(f"{len(rows)} rows -> {args.out}")


def cmd_fit(args, cfg):
    payload = fit_features_file(args.features, cfg, model=args.model)
    write_json(payload, args.out)
    print(f"{payload['model']} fit on {payload['n_obs']} rows: MAE {payload['mae']:.3f}, "
          f"MSE {payload['mse']:.3f} -> {args.out}")


def cmd_xeval(args, cfg):
    out = Path(args.out_dir)
    summary = run_xeval(read_features(args.features), out, cfg.min_rows)
    summary.pop("files")
    write_json(summary, out / "summary.json")
    if summary.get("skipped"):
        raise CliError(f"cross-project evaluation skipped: {summary['skipped']}")
    print(f"{len(summary['projects'])} projects; mean MAE {summary['mean_mae']:.3f} -> {out}")


def cmd_report(args, cfg):
    bundle = run_pipeline(cfg)
    for project, reason in sorted(bundle.exclusions.items()):
        print(f"excluded {project}: {reason}", file=sys.stderr)
    print(f"report -> {bundle.out_dir / 'report.md'} (digest {bundle.digest})")


def cmd_predict(args, cfg):
    if args.row:
        text = Path(args.row).read_text(encoding="utf-8") if Path(args.row).is_file() else args.row
        row = json.loads(text)
    else:
        if not (args.features and args.developer):
            raise CliError("give --row JSON, or --features with --developer")
        matches = [r for r in read_features(args.features)
                   if r.developer == args.developer.lower() and (not args.in_project or r.project == args.in_project)]
        if len(matches) != 1:
            raise CliError(f"expected one feature row for {args.developer}, found {len(matches)}")
        row = matches[0]
    print(json.dumps(predict_developer(args.fit, row), indent=2, sort_keys=True))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline config file (INI)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="mention-lab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="load a project into the store")
    p.add_argument("--project", required=True)
    p.add_argument("--from-api", action="store_true")
    p.add_argument("--fixtures")
    p.add_argument("--store")
    p.set_defaults(func=cmd_ingest)

    for name, func, helptext in (("graph", cmd_graph, "write mention edges"),
                                 ("metrics", cmd_metrics, "per-developer metrics")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--store")
        p.add_argument("--project", required=True)
        p.add_argument("--window", default="..", help="START..END (either side may be empty)")
        p.add_argument("--out", required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("szz", parents=[common], help="attribute bug-inducing commits")
    p.add_argument("--store")
    p.add_argument("--project", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_szz)

    p = sub.add_parser("features", parents=[common], help="assemble the feature table")
    p.add_argument("--store")
    p.add_argument("--project", action="append", help="restrict to a project (repeatable)")
    p.add_argument("--response-months", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("fit", parents=[common], help="fit the pooled model")
    p.add_argument("--features", required=True)
    p.add_argument("--model", default="hurdle", choices=("hurdle", "poisson", "negbin"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("xeval", parents=[common], help="cross-project prediction and heatmaps")
    p.add_argument("--features", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--min-rows", type=int)
    p.set_defaults(func=cmd_xeval)

    p = sub.add_parser("report", parents=[common], help="run the whole pipeline")
    p.add_argument("--store")
    p.add_argument("--out-dir")
    p.add_argument("--response-months", type=int)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("predict", parents=[common], help="predict future mentions for one developer")
    p.add_argument("--fit", required=True)
    p.add_argument("--row", help="feature row as JSON text or a JSON file")
    p.add_argument("--features")
    p.add_argument("--developer")
    p.add_argument("--in-project", help="owner/name, when the developer appears in several projects")
    p.set_defaults(func=cmd_predict)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        args.func(args, cfg)
    except (StageError, CliError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # exit status must reflect any failure
        logger.debug("unhandled error", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
