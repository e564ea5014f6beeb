"""Command-line driver: validate, summarize, fit, chart, serve.

Exit codes: 0 success, 1 internal error, 2 usage/input error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from carcasswatch.config import ConfigError, RunConfig, load_config

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2


class UsageError(Exception):
    """Bad invocation or unreadable input; maps to exit code 2."""


def _fail(message: str) -> None:
    print(f"error: {message}", file=sys.stderr)


def _write_json(path: Path, payload) -> None:
    from carcasswatch.artifact import canonical_json, to_native

    path.write_text(canonical_json(to_native(payload)) + "\n")


def _write_csv(path: Path, rows: list) -> None:
    from carcasswatch.artifact import to_native

    rows = to_native(rows)
    with path.open("w", newline="") as fh:
        if not rows:
            fh.write("")
            return
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def _format_table(headers: list, rows: list) -> str:
    cells = [[str(h) for h in headers]] + [[str(c) for c in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    lines = []
    for i, row in enumerate(cells):
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _load_input(config: RunConfig):
    from carcasswatch.ingest import parse_csv

    if not config.input:
        raise UsageError("no input CSV given (use --input or the config file)")
    path = Path(config.input)
    if not path.exists():
        raise UsageError(f"input file not found: {path}")
    schema = config.columns or None
    return parse_csv(path, schema=schema)


def _load_artifact(config: RunConfig):
    from carcasswatch.artifact import ArtifactError, load_artifact

    if not config.artifact:
        raise UsageError("no artifact path given (use --artifact or the config file)")
    path = Path(config.artifact)
    if not path.exists():
        raise UsageError(f"artifact file not found: {path}")
    try:
        return load_artifact(path)
    except ArtifactError as exc:
        raise UsageError(str(exc)) from exc


# ------------------------------------------------------------- subcommands


def cmd_validate(config: RunConfig, args) -> int:
    records, rejects = _load_input(config)
    total = sum(r.count for r in records)
    print(f"rows accepted: {len(records)} (animals: {total})")
    print(f"rows rejected: {len(rejects)}")
    reasons: dict = {}
    for reject in rejects:
        reasons[reject.reason] = reasons.get(reject.reason, 0) + 1
    for reason, count in sorted(reasons.items(), key=lambda kv: -kv[1]):
        print(f"  {count:6d}  {reason}")
    return EXIT_OK


def cmd_summarize(config: RunConfig, args) -> int:
    from carcasswatch.ingest import aggregate_weekly
    from carcasswatch.summaries import (
        cumulative_series,
        group_summary,
        region_summary,
        species_ranking,
    )

    records, rejects = _load_input(config)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    panel = aggregate_weekly(records)
    regions = region_summary(panel)
    groups = group_summary(panel)
    species = species_ranking(records)
    series = cumulative_series(panel)

    _write_csv(out / "region_summary.csv", regions)
    _write_json(out / "region_summary.json", regions)
    _write_csv(out / "group_summary.csv", groups)
    _write_json(out / "group_summary.json", groups)
    _write_csv(out / "species_ranking.csv", species)
    _write_json(out / "species_ranking.json", species)
    _write_json(out / "series.json", series)

    print(f"records: {len(records)} (rejected {len(rejects)}); "
          f"total animals: {sum(r.count for r in records)}")
    if regions:
        print("\nper region")
        print(_format_table(
            ["region", "total", "weekly_mean", "max", "n_visits"],
            [[r["region"], r["total"], r["weekly_mean"], r["max"], r["n_visits"]]
             for r in regions],
        ))
    if groups:
        print("\nper species group")
        print(_format_table(
            ["group", "min", "q1", "median", "mean", "q3", "max", "total"],
            [[g["species_group"], g["min"], g["q1"], g["median"],
              f"{g['mean']:.2f}", g["q3"], g["max"], g["total"]] for g in groups],
        ))
    print(f"\ntables written to {out}/")
    return EXIT_OK


def _summary_rows(summaries: dict) -> list:
    def pick(s, key):
        return s[key] if isinstance(s, dict) else getattr(s, key)

    return [
        [name] + [f"{pick(s, k):.3f}" for k in ("mean", "sd", "q10", "q50", "q90", "mode")]
        for name, s in summaries.items()
    ]


def cmd_fit(config: RunConfig, args) -> int:
    from carcasswatch.artifact import save_artifact
    from carcasswatch.estimator import StrandingModel

    records, rejects = _load_input(config)
    if not records:
        raise UsageError("input contains no usable records")
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    artifact_path = out / "artifact.zip"
    report_path = out / "fit_report.txt"

    stage = "model fit"
    try:
        model = StrandingModel(
            level=config.level,
            max_edge_km=config.max_edge_km,
            extension_km=config.extension_km,
            max_evaluations=config.max_evaluations,
            predictive_draws=config.predictive_draws,
            seed=config.seed,
        )
        model.fit(records)
        stage = "artifact export"
        artifact = model.to_artifact()
        save_artifact(artifact, artifact_path)
        stage = "report"
        lines = [
            "carcasswatch fit report",
            "=======================",
            f"input: {config.input}",
            f"records: {len(records)} (rejected {len(rejects)})",
            f"panel anchor week: {artifact.anchor_week[0]}-W{artifact.anchor_week[1]:02d}",
            f"latent dimension: {len(artifact.latent_names)}",
            f"mesh vertices: {len(artifact.mesh_data['vertices'])}",
            f"log marginal at mode: {model.result_.log_marginal:.3f}",
            f"outer evaluations: {model.result_.n_evaluations}",
            "",
            "hyperparameters",
            _format_table(
                ["name", "mean", "sd", "q10", "q50", "q90", "mode"],
                _summary_rows(artifact.hyper_summaries),
            ),
            "",
            "fixed effects",
            _format_table(
                ["name", "mean", "sd", "q10", "q50", "q90", "mode"],
                _summary_rows(artifact.fixed_effect_summaries()),
            ),
            "",
        ]
        report_path.write_text("\n".join(lines))
    except Exception as exc:
        for path in (artifact_path, report_path):
            path.unlink(missing_ok=True)
        _fail(f"fit failed during {stage}: {exc}")
        return EXIT_INTERNAL
    print(f"artifact: {artifact_path}")
    print(f"report:   {report_path}")
    return EXIT_OK


def cmd_chart(config: RunConfig, args) -> int:
    from carcasswatch import monitor

    artifact = _load_artifact(config)
    try:
        chart = monitor.build_chart(
            artifact,
            args.region,
            args.group,
            level=config.level,
            band=config.band,
            n_draws=config.predictive_draws,
        )
    except LookupError as exc:
        raise UsageError(str(exc)) from exc
    rows = [
        [w, "" if o is None else f"{o:g}", f"{lo:.2f}", f"{m:.2f}", f"{u:.2f}", f]
        for w, o, lo, m, u, f in zip(
            chart.weeks, chart.observed, chart.lower,
            chart.expected, chart.upper, chart.flags,
        )
    ]
    print(f"control chart: region {chart.region}, group {chart.species_group}, "
          f"level {chart.level} ({chart.band} band)")
    print(_format_table(["week", "observed", "lower", "expected", "upper", "flag"], rows))
    if args.json:
        _write_json(Path(args.json), chart.to_json())
        print(f"chart JSON written to {args.json}")
    return EXIT_OK


def cmd_serve(config: RunConfig, args) -> int:
    from carcasswatch.service import serve

    artifact = _load_artifact(config)
    static = args.static or None
    print(f"serving artifact {config.artifact} on {config.host}:{config.port}")
    serve(artifact, config, static_dir=static)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="carcasswatch",
        description="Coastal stranding surveillance: ingest, fit, monitor, serve.",
    )
    parser.add_argument("--config", help="path to a key=value config file")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="surveillance CSV path")
    common.add_argument("--output-dir", dest="output_dir", help="output directory")
    common.add_argument("--columns", help="column-name map JSON path")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--level", type=float, help="SPC credible level in (0,1)")

    p = sub.add_parser("validate", parents=[common], help="ingest-only dry run")
    p.set_defaults(handler=cmd_validate)

    p = sub.add_parser("summarize", parents=[common], help="descriptive tables")
    p.set_defaults(handler=cmd_summarize)

    p = sub.add_parser("fit", parents=[common], help="fit and write an artifact")
    p.add_argument("--max-evaluations", dest="max_evaluations", type=int)
    p.add_argument("--predictive-draws", dest="predictive_draws", type=int)
    p.add_argument("--max-edge-km", dest="max_edge_km", type=float)
    p.add_argument("--extension-km", dest="extension_km", type=float)
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("chart", parents=[common], help="print one control chart")
    p.add_argument("--artifact", help="fitted artifact path")
    p.add_argument("--region", type=int, required=True)
    p.add_argument("--group", required=True)
    p.add_argument("--band", choices=["predictive", "latent"])
    p.add_argument("--json", help="also write the chart JSON here")
    p.set_defaults(handler=cmd_chart)

    p = sub.add_parser("serve", parents=[common], help="run the JSON HTTP service")
    p.add_argument("--artifact", help="fitted artifact path")
    p.add_argument("--port", type=int)
    p.add_argument("--host")
    p.add_argument("--static", help="static asset directory to mount at /")
    p.set_defaults(handler=cmd_serve)
    return parser


_OVERRIDE_KEYS = (
    "input", "output_dir", "columns", "seed", "level", "artifact", "port",
    "host", "max_evaluations", "predictive_draws", "max_edge_km",
    "extension_km", "band",
)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK

    overrides = {
        key: getattr(args, key)
        for key in _OVERRIDE_KEYS
        if getattr(args, key, None) is not None
    }
    try:
        config = load_config(args.config, overrides=overrides)
    except ConfigError as exc:
        _fail(str(exc))
        return EXIT_USAGE

    try:
        return args.handler(config, args)
    except UsageError as exc:
        _fail(str(exc))
        return EXIT_USAGE
    except KeyboardInterrupt:
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover - catch-all safety net
        _fail(f"internal error: {exc}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
