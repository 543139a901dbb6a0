"""Command-line interface.

Subcommands: analyze, route, propagate, simulate, metrics, prepare,
serve-mock.  Commands that take --report write the JSON report there and
render a CSV table plus a PNG figure next to it (same stem) unless
--no-figures is given.

Exit codes: 0 success, 1 usage error, 2 I/O error, 3 backend/protocol error.
All diagnostics go to standard error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import figures
from .config import RunConfig
from .detect import DetectionConfig, stationary_statistics
from .harness import compare_injection
from .imaging import build_grid, psnr, ssim
from .propagation import Refiner, ToyUpsampler, boosted_video_pipeline
from .protocol import ProtocolError, RemoteBackendError
from .remote import mock_server, remote_registry
from .routing import BackendError, boosted_frame_pipeline, builtin_registry, window5
from .videoio import (
    SequenceError,
    load_sequence,
    prepare_lr,
    save_sequence,
    write_json,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _build_parser() -> _Parser:
    parser = _Parser(prog="patchvsr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_in=True, needs_report=False):
        if needs_in:
            p.add_argument("--in", dest="input", required=True, help="frame directory or .y4m file")
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--report", required=needs_report, help="JSON report path")
        p.add_argument("--no-figures", action="store_true", help="skip CSV/PNG rendering")
        p.add_argument("--seed", type=int, help="override the configured seed")

    p = sub.add_parser("analyze", help="stationary-sequence statistics over a video")
    common(p)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--threshold", type=float, default=35.0)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("route", help="five-frame adaptive routing over a sequence")
    common(p)
    p.add_argument("--out", help="directory for SR frames")
    p.add_argument("--backend", help="host:port of a protocol server (overrides config)")
    p.set_defaults(func=cmd_route)

    p = sub.add_parser("propagate", help="patch-pool propagation over a sequence")
    common(p)
    p.add_argument("--out", help="directory for SR frames")
    p.add_argument("--pipeline", choices=["boosted-video", "naive-sequential"],
                   default="boosted-video")
    p.add_argument("--trace", help="JSONL pool-update trace path")
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("simulate", help="redundancy-injection ladder comparison")
    common(p)
    p.add_argument("--gt", help="ground-truth sequence for scoring")
    p.add_argument("--levels", type=int, default=5, help="max copies per anchor")
    p.add_argument("--anchors", type=int, default=10)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("metrics", help="PSNR/SSIM between two sequences")
    common(p)
    p.add_argument("--gt", required=True)
    p.add_argument("--metric", choices=["psnr", "ssim"], default="psnr")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("prepare", help="bicubic LR set + manifest from ground truth")
    common(p)
    p.add_argument("--out", required=True, help="LR output directory")
    p.add_argument("--scale", type=int, help="downsampling factor (default: config scale)")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("serve-mock", help="run the mock protocol server")
    common(p, needs_in=False)
    p.add_argument("--port", type=int, default=0)
    p.add_argument("--behavior", choices=["bicubic", "nearest", "error"], default="bicubic")
    p.add_argument("--error-code", type=int, default=3)
    p.set_defaults(func=cmd_serve_mock)

    return parser


def _load_config(args) -> RunConfig:
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {args.config}: invalid JSON: {exc}") from exc
    except FileNotFoundError as exc:
        raise SequenceError(f"config {args.config}: {exc.strerror}") from exc
    except ValueError as exc:
        raise UsageError(f"config {args.config}: {exc}") from exc
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    return cfg


def _grid_for(video, cfg: RunConfig):
    return build_grid(video[0].width, video[0].height, cfg.patch_size, cfg.stride)


def _write_csv(path, header, rows):
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _emit(args, report: dict, csv_spec, figure_fn):
    """Write the JSON report and, unless disabled, the CSV and figure beside it."""
    if not args.report:
        return
    report_path = Path(args.report)
    write_json(report_path, report)
    if args.no_figures:
        return
    header, rows = csv_spec
    _write_csv(report_path.with_suffix(".csv"), header, rows)
    figure_fn(report, report_path.with_suffix(".png"))


def cmd_analyze(args) -> int:
    cfg = _load_config(args)
    video = load_sequence(args.input)
    grid = _grid_for(video, cfg)
    report = stationary_statistics(video, grid, args.window, args.threshold)
    report["config"] = cfg.to_dict()
    _emit(
        args,
        report,
        (
            ["index", "x", "y", "stationary", "windows"],
            [
                [row["index"], row["x"], row["y"], row["stationary"], row["windows"]]
                for row in report["positions"]
            ],
        ),
        figures.save_stationary_map,
    )
    print(f"stationary ratio {report['ratio']:.4f} over {report['windows']} windows")
    return 0


def _registry_for(args, cfg: RunConfig):
    endpoint = getattr(args, "backend", None) or cfg.backend
    if endpoint:
        host, _, port = endpoint.partition(":")
        if not host or not port.isdigit():
            raise UsageError(f"--backend must be host:port, got {endpoint!r}")
        return remote_registry(host, int(port), cfg.cost_weights)
    return builtin_registry(cfg.backend_kind, cfg.cost_weights)


def cmd_route(args) -> int:
    cfg = _load_config(args)
    video = load_sequence(args.input)
    grid = _grid_for(video, cfg)
    registry = _registry_for(args, cfg)
    detection = DetectionConfig(gamma=cfg.gamma_routing)
    outputs = []
    rows = []
    for t in range(len(video)):
        out, plan, cost = boosted_frame_pipeline(
            window5(video, t), grid, detection, registry, cfg.flow, cfg.scale
        )
        outputs.append(out)
        rows.append(
            {
                "frame": t,
                "cost_ratio": cost["ratio"],
                "total_cost": cost["total_cost"],
                "labels": plan.label_counts(),
            }
        )
    if args.out:
        save_sequence(args.out, outputs)
    report = {
        "config": cfg.to_dict(),
        "frames": len(video),
        "mean_cost_ratio": float(np.mean([row["cost_ratio"] for row in rows])),
        "per_frame": rows,
    }
    _emit(
        args,
        report,
        (
            ["frame", "cost_ratio", "L1", "L3", "L5"],
            [
                [r["frame"], r["cost_ratio"], r["labels"]["L1"], r["labels"]["L3"], r["labels"]["L5"]]
                for r in rows
            ],
        ),
        figures.save_cost_timeline,
    )
    print(f"routed {len(video)} frames, mean cost ratio {report['mean_cost_ratio']:.3f}")
    return 0


def cmd_propagate(args) -> int:
    cfg = _load_config(args)
    video = load_sequence(args.input)
    grid = _grid_for(video, cfg)
    update_mode = "always" if args.pipeline == "naive-sequential" else "motion"
    trace: list = []
    outputs = boosted_video_pipeline(
        video,
        grid,
        gamma=cfg.gamma_pdp,
        refiner=Refiner(alpha=cfg.refiner_alpha),
        upsampler=ToyUpsampler(cfg.scale),
        flow_params=cfg.flow,
        hidden_channels=cfg.hidden_channels,
        update_mode=update_mode,
        trace=trace,
    )
    if args.out:
        save_sequence(args.out, outputs)
    if args.trace:
        with Path(args.trace).open("w") as fh:
            for row in trace:
                fh.write(json.dumps(row) + "\n")
    replacements: dict[str, list] = {"forward": [], "backward": []}
    for direction in replacements:
        per_frame: dict[int, list] = {}
        for row in trace:
            if row["direction"] == direction:
                per_frame.setdefault(row["frame_index"], []).append(row["replaced"])
        replacements[direction] = [
            {"frame": t, "replaced_fraction": float(np.mean(flags))}
            for t, flags in sorted(per_frame.items())
        ]
    report = {
        "config": cfg.to_dict(),
        "pipeline": args.pipeline,
        "frames": len(video),
        "replacements": replacements,
    }
    _emit(
        args,
        report,
        (
            ["direction", "frame", "replaced_fraction"],
            [
                [direction, row["frame"], row["replaced_fraction"]]
                for direction, rows in replacements.items()
                for row in rows
            ],
        ),
        figures.save_replacement_timeline,
    )
    print(f"propagated {len(video)} frames ({args.pipeline})")
    return 0


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    video = load_sequence(args.input)
    gt = load_sequence(args.gt) if args.gt else None
    grid = _grid_for(video, cfg)
    levels = tuple(range(args.levels + 1))

    def make_pipeline(update_mode):
        def run(frames):
            return boosted_video_pipeline(
                frames,
                grid,
                gamma=cfg.gamma_pdp,
                refiner=Refiner(alpha=cfg.refiner_alpha),
                upsampler=ToyUpsampler(cfg.scale),
                flow_params=cfg.flow,
                hidden_channels=cfg.hidden_channels,
                update_mode=update_mode,
            )

        return run

    report = {"config": cfg.to_dict(), "levels": list(levels), "pipelines": {}}
    for name, mode in (("boosted-video", "motion"), ("naive-sequential", "always")):
        report["pipelines"][name] = compare_injection(
            make_pipeline(mode),
            video,
            replications=levels,
            seed=cfg.seed,
            n_anchor_frames=args.anchors,
            gt_video=gt,
        )
    csv_rows = []
    for name, run in report["pipelines"].items():
        for row in run["levels"]:
            csv_rows.append(
                [
                    name,
                    row["replication"],
                    row["max_abs_diff_dynamic_originals"],
                    row["max_abs_diff_originals"],
                    row.get("mean_score_dynamic_originals", ""),
                ]
            )
    _emit(
        args,
        report,
        (["pipeline", "replication", "max_diff_dynamic", "max_diff_originals", "mean_score"], csv_rows),
        figures.save_injection_ladder,
    )
    for name, run in report["pipelines"].items():
        flag = "invariant" if run["summary"]["invariant_on_dynamic_originals"] else "drifts"
        print(f"{name}: {flag} (max diff {run['summary']['max_diff_any_level']})")
    return 0


def cmd_metrics(args) -> int:
    cfg = _load_config(args)
    video = load_sequence(args.input)
    reference = load_sequence(args.gt)
    if len(video) != len(reference):
        raise UsageError(
            f"sequences differ in length: {len(video)} vs {len(reference)} frames"
        )
    score = psnr if args.metric == "psnr" else ssim
    per_frame = [
        {"frame": t, "score": float(score(video[t], reference[t]))} for t in range(len(video))
    ]
    report = {
        "config": cfg.to_dict(),
        "metric": args.metric,
        "frames": len(per_frame),
        "mean": float(np.mean([row["score"] for row in per_frame])),
        "per_frame": per_frame,
    }
    _emit(
        args,
        report,
        (["frame", "score"], [[row["frame"], row["score"]] for row in per_frame]),
        figures.save_metric_curve,
    )
    print(f"mean {args.metric} {report['mean']:.4f} over {len(per_frame)} frames")
    return 0


def cmd_prepare(args) -> int:
    cfg = _load_config(args)
    video = load_sequence(args.input)
    scale = args.scale or cfg.scale
    try:
        lr, manifest = prepare_lr(video, scale)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    save_sequence(args.out, lr)
    write_json(Path(args.out) / "manifest.json", manifest)
    print(f"wrote {len(lr)} LR frames at 1/{scale} to {args.out}")
    return 0


def cmd_serve_mock(args) -> int:
    try:
        handle = mock_server(args.port, args.behavior, args.error_code)
    except OSError as exc:
        raise RemoteBackendError(3, f"cannot bind port {args.port}: {exc}", 0) from exc
    print(f"mock backend ({args.behavior}) listening on {handle.host}:{handle.port}", flush=True)
    try:
        while True:
            import time

            time.sleep(3600)
    except KeyboardInterrupt:
        return 0
    finally:
        handle.close()


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ProtocolError, RemoteBackendError, BackendError, LookupError) as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return 3
    except SequenceError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
