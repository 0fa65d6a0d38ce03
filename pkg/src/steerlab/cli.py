"""Command-line interface.

Subcommands: gen, fit, crossval, analyze, anova, simulate, models, serve.
Exit codes: 0 success, 2 validation/usage error, 1 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, curvegen, datasets, fitting, inference, metrics, simulator
from .models import FORM_IDS, ModelForm, catalog
from .session import ProtocolError


def _parse_bands(text):
    bands = []
    for part in text.split(","):
        lo, _, hi = part.partition(":")
        bands.append((float(lo), float(hi)))
    return bands


def _parse_forms(spec: str):
    if spec == "all":
        return [ModelForm(fid) for fid in FORM_IDS]
    forms = []
    for token in spec.split(","):
        token = token.strip()
        intercept = True
        if token.endswith("-noint"):
            token, intercept = token[: -len("-noint")], False
        forms.append(ModelForm(token, intercept=intercept))
    return forms


def _load_features(path: str):
    if path == "reference":
        return datasets.reference_features()
    return fitting.read_features_csv(path)


def cmd_gen(args) -> int:
    k_targets = [float(k) for k in args.k.split(",")]
    bands = _parse_bands(args.l_band) if args.l_band else curvegen.default_length_bands()
    np_values = None
    if args.np_step:
        np_values = np.round(np.arange(args.np_min, args.np_max + 1e-9, args.np_step), 10)
    grid = curvegen.default_param_grid(args.am_max, np_values)
    candidates = curvegen.grid_search(
        k_targets, bands, grid, min_radius_px=args.min_radius, width=args.width
    )
    if not candidates:
        print("no candidates found", file=sys.stderr)
        return 2
    trials = curvegen.assemble_trialset(candidates)
    written = curvegen.write_trialset(trials, args.out)
    for trial in trials:
        print(
            f"{trial.trial_id}: L={trial.length:.2f} K={trial.total_curvature:.4f} "
            f"AM={list(trial.sinusoid.angle_multipliers)} np={trial.sinusoid.periods} "
            f"a={trial.sinusoid.amplitude:.3f}"
        )
    print(f"wrote {len(written)} trialspec documents to {args.out}")
    return 0


def cmd_fit(args) -> int:
    features = _load_features(args.data)
    fits = []
    for form in _parse_forms(args.models):
        if form.form_id == "NL" and any(f.nl is None for f in features):
            print(f"skipping NL: feature table has no nl column", file=sys.stderr)
            continue
        fits.append(fitting.fit_model(form, features))
    if not fits:
        print("no models fitted", file=sys.stderr)
        return 2
    report = fitting.fit_report_document(fits)
    for m in report["models"]:
        coef = ", ".join(
            f"{name}={c['estimate']:.4g}{c['stars']}" for name, c in m["coefficients"].items()
        )
        print(
            f"{m['rank']}. {m['form_id']}{'' if m['intercept'] else ' (no intercept)'}: "
            f"{coef} | adj r2={m['r2_adjusted']:.4f} AIC={m['aic']:.2f} dAIC={m['delta_aic']:.2f}"
        )
    if args.out:
        fitting.write_fit_report(fits, args.out)
        print(f"wrote fit report to {args.out}")
    return 0


def cmd_crossval(args) -> int:
    features, reps = fitting.read_repetitions_csv(args.data)
    results = []
    for form in _parse_forms(args.models):
        if form.form_id == "NL" and any(f.nl is None for f in features):
            continue
        report = fitting.cross_validate(features, reps, form, folds=args.folds, seed=args.seed)
        results.append(report)
    results.sort(key=lambda r: r.mean_rmse)
    for r in results:
        label = r.form_id + ("" if r.intercept else " (no intercept)")
        print(f"{label}: mean RMSE {r.mean_rmse:.2f} ms (folds: "
              + ", ".join(f"{v:.2f}" for v in r.fold_rmse) + ")")
    if args.out:
        doc = {
            "format": "fitreport v1",
            "cross_validation": [
                {
                    "form_id": r.form_id,
                    "intercept": r.intercept,
                    "mean_rmse": r.mean_rmse,
                    "fold_rmse": r.fold_rmse,
                    "folds": [list(f) for f in r.fold_definitions],
                }
                for r in results
            ],
        }
        Path(args.out).write_text(json.dumps(doc, indent=2), encoding="utf-8")
        print(f"wrote cross-validation report to {args.out}")
    return 0


def _iter_log_files(paths):
    for p in paths:
        path = Path(p)
        if path.is_dir():
            yield from sorted(path.rglob("*.trajlog"))
        else:
            yield path


def cmd_analyze(args) -> int:
    docs = curvegen.read_trialset_documents(args.trials)
    tunnels = {}
    flipped_tunnels = {}
    for doc in docs:
        spec = curvegen.trialspec_from_document(doc)
        tunnels[doc["trial_id"]] = spec.tunnel(flipped=False)
        flipped_tunnels[doc["trial_id"]] = spec.tunnel(flipped=True)

    rows = []
    trajs = []
    for log_file in _iter_log_files(args.logs):
        traj = metrics.read_trajlog(log_file)
        if traj.trial_id not in tunnels:
            print(f"unknown trial_id {traj.trial_id!r} in {log_file}", file=sys.stderr)
            return 2
        tunnel = (flipped_tunnels if traj.flipped else tunnels)[traj.trial_id]
        resampled = metrics.resample(traj)
        rows.append((traj.trial_id, traj.participant_id, metrics.trial_measures(resampled, tunnel)))
        trajs.append(traj)
    if not rows:
        print("no trajectory logs found", file=sys.stderr)
        return 2

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    measures_path = metrics.write_measures_csv(rows, out_dir / "measures.csv")
    print(f"wrote {len(rows)} measure rows to {measures_path}")

    summary = metrics.summarize(trajs, tunnels)
    summary_path = out_dir / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2), encoding="utf-8")
    print(f"wrote per-trial-type summary to {summary_path}")

    if args.heatmap_cell:
        by_type = {}
        for traj in trajs:
            by_type.setdefault(traj.trial_id, []).append(
                metrics.resample(traj) if len(traj.t) >= 4 else traj
            )
        for trial_id, group in sorted(by_type.items()):
            tunnel = tunnels[trial_id]
            flat = [t if not t.flipped else _flip_traj(t) for t in group]
            hm = metrics.heatmap(flat, tunnel, args.heatmap_cell)
            metrics.write_heatmap_csv(hm, out_dir / f"heatmap_{trial_id}.csv")
        print(f"wrote heatmaps for {len(by_type)} trial types")
    return 0


def _flip_traj(traj):
    from dataclasses import replace

    return replace(traj, y=-traj.y, flipped=False)


def cmd_anova(args) -> int:
    rows = metrics.read_measures_csv(args.measures)
    cells = {}
    for rec in rows:
        level_l = int(rec["trial_id"][1])
        level_k = int(rec["trial_id"][4])
        cells.setdefault((level_l, level_k), {}).setdefault(rec["participant_id"], []).append(
            rec[args.measure]
        )
    participants = sorted({pid for cell in cells.values() for pid in cell})
    cell_values = {}
    for key, per_pid in cells.items():
        cell_values[key] = [float(np.mean(per_pid[pid])) for pid in participants]
    data = inference.rm_dataset_from_cells(cell_values)
    effects = inference.rm_anova(data)
    for e in effects:
        print(
            f"{e.effect}: F={e.F:.4f} p={e.p:.6g} eps={e.gg_epsilon:.4f} "
            f"eta_p2={e.partial_eta_sq:.4f}"
        )
    if args.out:
        doc = fitting.anova_report_document(effects)
        Path(args.out).write_text(json.dumps(doc, indent=2), encoding="utf-8")
        print(f"wrote ANOVA report to {args.out}")
    return 0


def cmd_simulate(args) -> int:
    trials = curvegen.read_trialset(args.trials)
    cfg = simulator.AgentConfig(
        base_speed=args.base_speed,
        curvature_gain=args.curvature_gain,
        beta=args.beta,
        lateral_noise_sd=args.noise,
        lookahead=args.lookahead,
    )
    logs = simulator.simulate_corpus(
        trials, args.participants, args.reps, cfg, seed=args.seed
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for traj in logs:
        name = f"{traj.participant_id}_{traj.trial_id}_r{traj.repetition:02d}.trajlog"
        metrics.write_trajlog(traj, out_dir / name)
    print(f"wrote {len(logs)} trajectory logs to {out_dir}")
    return 0


def cmd_models(args) -> int:
    if args.action != "list":
        print(f"unknown models action {args.action!r}", file=sys.stderr)
        return 2
    for entry in catalog():
        print(
            f"{entry['form_id']}: {entry['formula']} "
            f"(features: {', '.join(entry['required_features'])}"
            + ("; no-intercept refit available)" if entry["no_intercept_refit"] else ")")
        )
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    data_dir = args.data_dir or os.environ.get("STEERLAB_DATA_DIR") or "steerlab-data"
    app = create_app(args.trials, data_dir, break_ms=args.break_ms)
    print(f"serving trials from {args.trials}; data in {data_dir}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="steerlab", description=__doc__)
    parser.add_argument("--version", action="version", version=f"steerlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="grid-search curves and write a trial set")
    p.add_argument("--k", default="10,16,22", help="comma-separated total-curvature targets")
    p.add_argument("--l-band", default=None,
                   help="comma-separated lo:hi length bands, one per L level")
    p.add_argument("--out", required=True, help="output directory for trialspec documents")
    p.add_argument("--width", type=float, default=curvegen.WIDTH_DEFAULT)
    p.add_argument("--min-radius", type=float, default=15.0,
                   help="reject curves whose sharpest bend has a smaller radius (px)")
    p.add_argument("--am-max", type=int, default=5, help="largest angle multiplier")
    p.add_argument("--np-min", type=float, default=0.5)
    p.add_argument("--np-max", type=float, default=4.0)
    p.add_argument("--np-step", type=float, default=0.1)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("fit", help="fit movement-time models to a feature table")
    p.add_argument("--data", required=True,
                   help="feature CSV (trial_id,L,K[,nl],mt_mean) or 'reference'")
    p.add_argument("--models", default="all",
                   help="'all' or comma list of form ids; append -noint for no-intercept")
    p.add_argument("--out", default=None, help="write a fitreport v1 JSON file")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("crossval", help="5-fold repetition cross-validation")
    p.add_argument("--data", required=True,
                   help="repetition CSV (trial_id,L,K[,nl],repetition,mt_ms)")
    p.add_argument("--models", default="all")
    p.add_argument("--folds", choices=("contiguous", "random"), default="contiguous")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_crossval)

    p = sub.add_parser("analyze", help="compute measures from trajectory logs")
    p.add_argument("--logs", nargs="+", required=True, help="trajlog files or directories")
    p.add_argument("--trials", required=True, help="trial set path")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--heatmap-cell", type=float, default=None,
                   help="also write per-type heatmaps with this cell size (px)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("anova", help="repeated-measures ANOVA on a measures CSV")
    p.add_argument("--measures", required=True)
    p.add_argument("--measure", choices=("mt_ms", "opm", "v_avg", "exits", "w_e"),
                   default="mt_ms")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_anova)

    p = sub.add_parser("simulate", help="generate a synthetic steering corpus")
    p.add_argument("--trials", required=True)
    p.add_argument("--participants", type=int, default=20)
    p.add_argument("--reps", type=int, default=15)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--base-speed", type=float, default=0.25)
    p.add_argument("--curvature-gain", type=float, default=150.0)
    p.add_argument("--beta", type=float, default=0.6)
    p.add_argument("--noise", type=float, default=4.0)
    p.add_argument("--lookahead", type=float, default=40.0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("models", help="model catalog")
    p.add_argument("action", choices=("list",))
    p.set_defaults(func=cmd_models)

    p = sub.add_parser("serve", help="run the experiment HTTP service")
    p.add_argument("--trials", required=True)
    p.add_argument("--data-dir", default=None,
                   help="session storage (default: $STEERLAB_DATA_DIR or ./steerlab-data)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8700)
    p.add_argument("--break-ms", type=float, default=15000.0)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, FileNotFoundError, ProtocolError,
            curvegen.AssemblyError, curvegen.TargetUnreachableError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # internal failure
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
