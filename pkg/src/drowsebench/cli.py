"""Command-line front end for the benchmark and decision toolkit.

Subcommands:

    echo-server     serve frame echoes until interrupted
    stream-bench    paced streaming against an echo server, per resolution
    pipeline-bench  simulate the staged pipeline from a profile file
    detect          EAR series CSV -> blinks and per-blink features
    optimize        pick cost-minimal thresholds for score CSVs
    vote            weighted ensemble vote from model stats
    gen             synthesize EAR series or score datasets
    report          re-render an exported CSV as a summary table

Exit codes: 0 success, 1 usage error, 2 runtime or I/O error,
3 degenerate input data.
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys

from .blink import (
    BlinkDetectionConfig,
    detect_blinks,
    extract_all_features,
    read_ear_csv,
    write_ear_csv,
    write_features_csv,
)
from .decision import (
    DEFAULT_W_FN,
    DEFAULT_W_FP,
    DegenerateDataError,
    compare_to_default,
    optimize_threshold,
    read_model_stats_json,
    read_scores_csv,
    sweep,
    threshold_grid,
    vote,
    write_curve_csv,
    write_scores_csv,
)
from .pipeline import (
    TIMING_CSV_HEADER,
    average_stage_set,
    load_stage_sets,
    queue_stability,
    read_timings_csv,
    simulate_session,
    summarize_timings,
    write_timings_csv,
)
from .protocol import CodecError, PixelFormat
from .report import ReportTable, mean_std_cell
from .synth import ScoreDatasetSpec, evenly_spaced_script, gen_ear_series, gen_score_dataset
from .transport import (
    RTT_CSV_HEADER,
    EchoServer,
    ProtocolError,
    interval_stats,
    raw_bandwidth,
    read_rtt_csv,
    run_echo_server,
    stream_and_measure,
    write_rtt_csv,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{message}\n{self.format_usage().rstrip()}")


def _parse_endpoint(text: str) -> tuple[str, int]:
    host, sep, port_text = text.rpartition(":")
    try:
        port = int(port_text)
    except ValueError:
        port = -1
    if not sep or not host or not 0 <= port <= 65535:
        raise UsageError(f"expected HOST:PORT, got {text!r}")
    return host, port


def _parse_resolutions(text: str) -> list[tuple[int, int]]:
    resolutions = []
    for item in text.split(","):
        w, sep, h = item.partition("x")
        try:
            resolutions.append((int(w), int(h)))
        except ValueError:
            raise UsageError(f"expected WIDTHxHEIGHT, got {item!r}") from None
        if not sep or resolutions[-1][0] <= 0 or resolutions[-1][1] <= 0:
            raise UsageError(f"expected WIDTHxHEIGHT, got {item!r}")
    if not resolutions:
        raise UsageError("empty resolution list")
    return resolutions


def _parse_class_spec(text: str, flag: str) -> tuple[int, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise UsageError(f"{flag} expects COUNT,MEAN,STD, got {text!r}")
    try:
        return int(parts[0]), float(parts[1]), float(parts[2])
    except ValueError:
        raise UsageError(f"{flag} expects COUNT,MEAN,STD, got {text!r}") from None


def _parse_decisions(text: str) -> list[int]:
    try:
        decisions = [int(item) for item in text.split(",")]
    except ValueError:
        raise UsageError(f"--decisions expects a comma list of 0/1, got {text!r}") from None
    if any(d not in (0, 1) for d in decisions):
        raise UsageError(f"--decisions expects a comma list of 0/1, got {text!r}")
    return decisions


def _emit(args, table: ReportTable, payload: dict) -> None:
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        print(table.render())


def cmd_echo_server(args) -> int:
    host, port = _parse_endpoint(args.listen)
    run_echo_server(host, port)
    return 0


def cmd_stream_bench(args) -> int:
    if bool(args.connect) == bool(args.loopback):
        raise UsageError("exactly one of --connect or --loopback is required")
    if args.fps <= 0:
        raise UsageError(f"--fps must be positive, got {args.fps}")
    if args.frames < 2:
        raise UsageError(f"--frames must be at least 2, got {args.frames}")
    resolutions = _parse_resolutions(args.res)
    pixel_format = PixelFormat.RGB24 if args.pixel_format == "rgb24" else PixelFormat.EMPTY

    server = None
    try:
        if args.loopback:
            server = EchoServer().start()
            host, port = server.address
        else:
            host, port = _parse_endpoint(args.connect)

        table = ReportTable(
            title=(
                f"stream-bench: {args.frames} frames at {args.fps} fps, "
                f"{pixel_format.name.lower()} payload via {host}:{port}"
            ),
            headers=["resolution", "frames", "inter-arrival ms", "median ms",
                     "rtt ms", "raw Mbit/s"],
        )
        payload = {
            "fps": args.fps,
            "frames": args.frames,
            "pixel_format": pixel_format.name.lower(),
            "resolutions": [],
        }
        for width, height in resolutions:
            records = stream_and_measure(
                host, port, args.fps, args.frames, width, height, pixel_format
            )
            stats = interval_stats(records)
            rtts = [r.rtt_us for r in records]
            bandwidth = raw_bandwidth(width, height, 24, round(args.fps))
            table.add_row(
                f"{width}x{height}",
                len(records),
                mean_std_cell(stats.mean_us / 1000, stats.std_us / 1000),
                f"{stats.median_us / 1000:.3f}",
                mean_std_cell(statistics.fmean(rtts) / 1000, statistics.pstdev(rtts) / 1000),
                f"{bandwidth / 1e6:.3f}",
            )
            payload["resolutions"].append(
                {
                    "resolution": f"{width}x{height}",
                    "inter_arrival_us": {
                        "count": stats.count,
                        "mean": stats.mean_us,
                        "std": stats.std_us,
                        "median": stats.median_us,
                        "min": stats.min_us,
                        "max": stats.max_us,
                    },
                    "rtt_us": {
                        "mean": statistics.fmean(rtts),
                        "std": statistics.pstdev(rtts),
                    },
                    "raw_bandwidth_bps": bandwidth,
                }
            )
            if args.out:
                write_rtt_csv(records, f"{args.out}-{width}x{height}.csv")
        _emit(args, table, payload)
    finally:
        if server is not None:
            server.stop()
    return 0


def cmd_pipeline_bench(args) -> int:
    if args.fps <= 0:
        raise UsageError(f"--fps must be positive, got {args.fps}")
    if args.frames < 1:
        raise UsageError(f"--frames must be at least 1, got {args.frames}")
    stage_sets = load_stage_sets(args.profile)
    if len(stage_sets) > 1:
        stage_sets["average"] = average_stage_set(stage_sets)
    duration_s = args.frames / args.fps

    table = ReportTable(
        title=f"pipeline-bench: {args.frames} frames at {args.fps} fps, seed {args.seed}",
        headers=["profile", "face ms", "landmark ms", "blink ms", "total ms",
                 "max queue", "verdict"],
    )
    payload = {"fps": args.fps, "frames": args.frames, "seed": args.seed, "profiles": []}
    for index, (name, profiles) in enumerate(stage_sets.items()):
        trace = simulate_session(args.fps, duration_s, profiles, args.seed + index)
        summary = summarize_timings(trace.records)
        verdict = queue_stability(profiles, args.fps)
        if verdict.stable:
            verdict_text = (
                f"stable (service {verdict.service_ms:.3f} ms <= "
                f"budget {verdict.budget_ms:.3f} ms)"
            )
        else:
            verdict_text = f"unstable (backlog +{verdict.backlog_growth_rate:.2f} frames/s)"
        table.add_row(
            name,
            mean_std_cell(summary.face.mean_ms, summary.face.std_ms),
            mean_std_cell(summary.landmark.mean_ms, summary.landmark.std_ms),
            mean_std_cell(summary.blink.mean_ms, summary.blink.std_ms),
            mean_std_cell(summary.total.mean_ms, summary.total.std_ms),
            trace.max_queue_length,
            verdict_text,
        )
        payload["profiles"].append(
            {
                "profile": name,
                "stages": {
                    "face": {"mean_ms": summary.face.mean_ms, "std_ms": summary.face.std_ms},
                    "landmark": {
                        "mean_ms": summary.landmark.mean_ms,
                        "std_ms": summary.landmark.std_ms,
                    },
                    "blink": {"mean_ms": summary.blink.mean_ms, "std_ms": summary.blink.std_ms},
                    "total": {"mean_ms": summary.total.mean_ms, "std_ms": summary.total.std_ms},
                },
                "max_queue_length": trace.max_queue_length,
                "backlog": trace.backlog,
                "stable": verdict.stable,
                "backlog_growth_rate": verdict.backlog_growth_rate,
            }
        )
        if args.out:
            write_timings_csv(trace.records, f"{args.out}-{name}.csv")
    _emit(args, table, payload)
    return 0


def cmd_detect(args) -> int:
    series = read_ear_csv(args.infile)
    if not series:
        raise DegenerateDataError(f"{args.infile} holds no EAR samples")
    if args.fps <= 0:
        raise UsageError(f"--fps must be positive, got {args.fps}")
    try:
        config = BlinkDetectionConfig(
            close_threshold=args.close_threshold, min_closed_frames=args.min_closed_frames
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    blinks = detect_blinks(series, config)
    features = extract_all_features(blinks, series, args.fps)
    table = ReportTable(
        title=f"detect: {len(blinks)} blinks in {len(series)} samples",
        headers=["blink_id", "start", "apex", "end", "amplitude", "velocity",
                 "duration_s", "freq_per_min"],
    )
    payload = {"samples": len(series), "blinks": []}
    for blink_id, (blink, feats) in enumerate(zip(blinks, features)):
        table.add_row(
            blink_id,
            blink.start_frame,
            blink.apex_frame,
            blink.end_frame,
            f"{feats.amplitude:.3f}",
            f"{feats.velocity:.3f}",
            f"{feats.duration_s:.3f}",
            f"{feats.freq_per_min:.1f}",
        )
        payload["blinks"].append(
            {
                "blink_id": blink_id,
                "start_frame": blink.start_frame,
                "apex_frame": blink.apex_frame,
                "end_frame": blink.end_frame,
                "min_ear": blink.min_ear,
                "baseline_ear": blink.baseline_ear,
                "amplitude": feats.amplitude,
                "velocity": feats.velocity,
                "duration_s": feats.duration_s,
                "freq_per_min": feats.freq_per_min,
            }
        )
    _emit(args, table, payload)
    if args.out:
        write_features_csv(features, args.out)
        print(f"wrote {len(features)} feature rows to {args.out}")
    return 0


def cmd_optimize(args) -> int:
    if args.w_fn < 0 or args.w_fp < 0:
        raise UsageError("cost weights must be non-negative")
    grid = threshold_grid()
    table = ReportTable(
        title=f"optimize: cost = {args.w_fn:g}*fn + {args.w_fp:g}*fp over {len(grid)} thresholds",
        headers=["model", "opt t", "cost", "fp", "fn",
                 "def t", "cost", "fp", "fn", "fp change", "fn change"],
    )
    payload = {"w_fn": args.w_fn, "w_fp": args.w_fp, "models": []}
    for model_id, path in enumerate(args.scores, start=1):
        sequences = read_scores_csv(path)
        threshold, _ = optimize_threshold(sequences, grid, args.w_fn, args.w_fp)
        cmp = compare_to_default(sequences, threshold, w_fn=args.w_fn, w_fp=args.w_fp)

        def pct(value: float | None) -> str:
            return "n/a" if value is None else f"{value:+.1f}%"

        table.add_row(
            model_id,
            f"{cmp.optimal_threshold:.2f}",
            f"{cmp.optimal_cost:.2f}",
            f"{cmp.optimal_fpr:.2f}",
            f"{cmp.optimal_fnr:.3f}",
            f"{cmp.default_threshold:.2f}",
            f"{cmp.default_cost:.2f}",
            f"{cmp.default_fpr:.2f}",
            f"{cmp.default_fnr:.3f}",
            pct(cmp.fpr_change_pct),
            pct(cmp.fnr_change_pct),
        )
        payload["models"].append(
            {
                "model_id": model_id,
                "file": str(path),
                "optimal_threshold": cmp.optimal_threshold,
                "optimal": {
                    "cost": cmp.optimal_cost,
                    "fpr": cmp.optimal_fpr,
                    "fnr": cmp.optimal_fnr,
                },
                "default_threshold": cmp.default_threshold,
                "default": {
                    "cost": cmp.default_cost,
                    "fpr": cmp.default_fpr,
                    "fnr": cmp.default_fnr,
                },
                "fpr_change_pct": cmp.fpr_change_pct,
                "fnr_change_pct": cmp.fnr_change_pct,
            }
        )
        if args.curve_out:
            suffix = f"-model{model_id}" if len(args.scores) > 1 else ""
            write_curve_csv(
                sweep(sequences, grid, args.w_fn, args.w_fp),
                f"{args.curve_out}{suffix}.csv",
            )
    _emit(args, table, payload)
    return 0


def cmd_vote(args) -> int:
    stats = read_model_stats_json(args.stats)
    decisions = _parse_decisions(args.decisions)
    if len(decisions) != len(stats):
        raise UsageError(f"{len(decisions)} decisions for {len(stats)} models")
    result = vote(decisions, stats)
    print(
        json.dumps(
            {
                "weights": list(result.weights),
                "total_weight": result.total_weight,
                "prediction": result.prediction,
                "decision": result.decision.name.lower(),
            },
            indent=2,
        )
    )
    return 0


def cmd_gen(args) -> int:
    if args.what == "ear":
        if args.blinks < 0:
            raise UsageError(f"--blinks must be >= 0, got {args.blinks}")
        if args.fps <= 0:
            raise UsageError(f"--fps must be positive, got {args.fps}")
        if args.noise < 0:
            raise UsageError(f"--noise must be >= 0, got {args.noise}")
        script = evenly_spaced_script(
            n_blinks=args.blinks,
            fps=args.fps,
            total_frames=args.frames,
            noise_std=args.noise,
            seed=args.seed,
        )
        series, truth = gen_ear_series(script)
        write_ear_csv(series, args.out)
        print(f"wrote {len(series)} EAR samples ({len(truth)} blinks) to {args.out}")
    else:
        n_alert, alert_mean, alert_std = _parse_class_spec(args.alert, "--alert")
        n_drowsy, drowsy_mean, drowsy_std = _parse_class_spec(args.drowsy, "--drowsy")
        try:
            spec = ScoreDatasetSpec(
                n_alert=n_alert,
                n_drowsy=n_drowsy,
                alert_mean=alert_mean,
                alert_std=alert_std,
                drowsy_mean=drowsy_mean,
                drowsy_std=drowsy_std,
                seed=args.seed,
            )
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        sequences = gen_score_dataset(spec)
        write_scores_csv(sequences, args.out)
        print(f"wrote {len(sequences)} scored sequences to {args.out}")
    return 0


def cmd_report(args) -> int:
    with open(args.infile, newline="") as fh:
        first = fh.readline().strip()
    header = first.split(",")

    if header == TIMING_CSV_HEADER:
        rows = read_timings_csv(args.infile)
        if not rows:
            raise DegenerateDataError(f"{args.infile} holds no timing rows")
        table = ReportTable(
            title=f"timing summary of {args.infile} ({len(rows)} frames)",
            headers=["stage", "duration ms"],
        )
        payload = {"frames": len(rows), "stages": {}}
        for stage in ("face_ms", "landmark_ms", "blink_ms", "total_ms"):
            values = [row[stage] for row in rows]
            mean, std = statistics.fmean(values), statistics.pstdev(values)
            table.add_row(stage.removesuffix("_ms"), mean_std_cell(mean, std))
            payload["stages"][stage.removesuffix("_ms")] = {"mean_ms": mean, "std_ms": std}
        _emit(args, table, payload)
        return 0

    if header == RTT_CSV_HEADER:
        records = read_rtt_csv(args.infile)
        if len(records) < 2:
            raise DegenerateDataError(f"{args.infile} holds fewer than two records")
        stats = interval_stats(records)
        rtts = [r.rtt_us for r in records]
        table = ReportTable(
            title=f"round-trip summary of {args.infile} ({len(records)} frames)",
            headers=["metric", "value ms"],
        )
        table.add_row("inter-arrival", mean_std_cell(stats.mean_us / 1000, stats.std_us / 1000))
        table.add_row("inter-arrival median", f"{stats.median_us / 1000:.3f}")
        table.add_row("rtt", mean_std_cell(
            statistics.fmean(rtts) / 1000, statistics.pstdev(rtts) / 1000))
        payload = {
            "frames": len(records),
            "inter_arrival_us": {
                "count": stats.count,
                "mean": stats.mean_us,
                "std": stats.std_us,
                "median": stats.median_us,
                "min": stats.min_us,
                "max": stats.max_us,
            },
            "rtt_us": {"mean": statistics.fmean(rtts), "std": statistics.pstdev(rtts)},
        }
        _emit(args, table, payload)
        return 0

    raise ValueError(f"{args.infile}: unrecognized CSV header {first!r}")


def build_parser() -> _Parser:
    parser = _Parser(
        prog="drowsebench",
        description="Benchmark and decision toolkit for a real-time blink pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("echo-server", help="serve frame echoes until interrupted")
    p.add_argument("--listen", required=True, metavar="HOST:PORT")
    p.set_defaults(func=cmd_echo_server)

    p = sub.add_parser("stream-bench", help="paced streaming benchmark")
    p.add_argument("--connect", metavar="HOST:PORT")
    p.add_argument("--loopback", action="store_true",
                   help="benchmark against an in-process echo server")
    p.add_argument("--fps", type=float, default=30.0)
    p.add_argument("--frames", type=int, default=500)
    p.add_argument("--res", default="320x240,640x480,960x540,1280x720",
                   help="comma list of WIDTHxHEIGHT")
    p.add_argument("--pixel-format", choices=["rgb24", "empty"], default="rgb24")
    p.add_argument("--out", metavar="PREFIX", help="write per-resolution round-trip CSVs")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_stream_bench)

    p = sub.add_parser("pipeline-bench", help="simulate the staged pipeline")
    p.add_argument("--profile", required=True, help="stage profile JSON file")
    p.add_argument("--fps", type=float, default=30.0)
    p.add_argument("--frames", type=int, default=450)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", metavar="PREFIX", help="write per-profile timing CSVs")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_pipeline_bench)

    p = sub.add_parser("detect", help="detect blinks in an EAR series CSV")
    p.add_argument("--in", dest="infile", required=True, metavar="EAR_CSV")
    p.add_argument("--fps", type=float, default=30.0)
    p.add_argument("--close-threshold", type=float, default=0.2)
    p.add_argument("--min-closed-frames", type=int, default=2)
    p.add_argument("--out", metavar="FEATURES_CSV")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("optimize", help="cost-minimal thresholds for score CSVs")
    p.add_argument("--scores", action="append", required=True, metavar="SCORES_CSV",
                   help="repeat for several models")
    p.add_argument("--w-fn", type=float, default=DEFAULT_W_FN)
    p.add_argument("--w-fp", type=float, default=DEFAULT_W_FP)
    p.add_argument("--curve-out", metavar="PREFIX", help="write threshold sweep CSVs")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("vote", help="weighted ensemble vote")
    p.add_argument("--stats", required=True, metavar="STATS_JSON")
    p.add_argument("--decisions", required=True, metavar="D1,D2,...")
    p.set_defaults(func=cmd_vote)

    p = sub.add_parser("gen", help="synthesize benchmark inputs")
    gen_sub = p.add_subparsers(dest="what", required=True, parser_class=_Parser)

    g = gen_sub.add_parser("ear", help="scripted EAR series")
    g.add_argument("--blinks", type=int, required=True)
    g.add_argument("--fps", type=float, default=30.0)
    g.add_argument("--frames", type=int, help="minimum series length")
    g.add_argument("--noise", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, metavar="EAR_CSV")
    g.set_defaults(func=cmd_gen)

    g = gen_sub.add_parser("scores", help="labeled score dataset")
    g.add_argument("--alert", required=True, metavar="COUNT,MEAN,STD")
    g.add_argument("--drowsy", required=True, metavar="COUNT,MEAN,STD")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, metavar="SCORES_CSV")
    g.set_defaults(func=cmd_gen)

    p = sub.add_parser("report", help="summarize an exported CSV")
    p.add_argument("--in", dest="infile", required=True, metavar="CSV")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DegenerateDataError as exc:
        print(f"degenerate data: {exc}", file=sys.stderr)
        return 3
    except (OSError, CodecError, ProtocolError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
