"""Command line interface.

Exit codes: 0 on success, 1 on usage errors (bad flags, invalid
estimator/setting combinations), 2 on data errors (unreadable or malformed
input files).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from importlib import resources
from pathlib import Path

from .bench import BenchConfig, run_benchmark
from .binning import build_binning, build_mapping, diagram_points, resolve_bins
from .core import CalibrationDataError, CalibrationSetting, extract_events
from .density import Grid, bootstrap_reliability, estimate_lce, resolve_bandwidth
from .estimators import make_estimator
from .io import read_scores_csv, write_curve_csv, write_dataset_csv, write_diagram_csv, write_scores_csv
from .synth import analytic_posterior, distorted_posterior, sample_dataset, sample_mixture_spec

log = logging.getLogger("calibrex")

EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _bins_arg(text: str):
    if text.lower() == "sqrt":
        return "sqrt"
    try:
        b = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("bins must be a positive integer or 'sqrt'") from None
    if b < 1:
        raise argparse.ArgumentTypeError("bins must be positive")
    return b


def _bandwidth_arg(text: str):
    if text.lower() in ("auto", "silverman"):
        return "silverman"
    try:
        h = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("bandwidth must be a positive number or 'auto'") from None
    if not h > 0:
        raise argparse.ArgumentTypeError("bandwidth must be positive")
    return h


def _band_arg(text: str):
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("band must look like LOW,HIGH") from None
    if not 0 <= lo < hi <= 100:
        raise argparse.ArgumentTypeError("band needs 0 <= LOW < HIGH <= 100")
    return lo, hi


def _setting_arg(text: str):
    try:
        return CalibrationSetting.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="calibrex", description="Expected calibration error estimation.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    e = sub.add_parser("eval", help="estimate the calibration error of a score file")
    e.add_argument("scores")
    e.add_argument("--setting", type=_setting_arg, default=CalibrationSetting.confidence())
    e.add_argument("--estimator", default="legacy",
                   help="legacy, adaptive, convex, adaptive-convex or kde (ECE_* ids also accepted)")
    e.add_argument("--bins", type=_bins_arg, default=None, help="bin count or 'sqrt' (default 15)")
    e.add_argument("--bandwidth", type=_bandwidth_arg, default=None,
                   help="KDE bandwidth or 'auto' for Silverman's rule (default auto)")
    e.add_argument("--metric", choices=("ece", "mce"), default="ece")
    e.add_argument("--json", action="store_true", help="print one JSON object")

    r = sub.add_parser("reliability", help="export a KDE reliability curve")
    r.add_argument("scores")
    r.add_argument("--setting", type=_setting_arg, default=CalibrationSetting.confidence())
    r.add_argument("--bandwidth", type=_bandwidth_arg, default="silverman")
    r.add_argument("--bootstrap", type=int, default=0, help="number of resamples (0 disables bands)")
    r.add_argument("--band", type=_band_arg, default=(5.0, 95.0))
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--grid", type=int, default=4096, help="grid points on [0, 1]")
    r.add_argument("--every", type=int, default=1, help="write every k-th grid point")
    r.add_argument("--out", required=True)
    r.add_argument("--svg")

    d = sub.add_parser("diagram", help="export reliability diagram points")
    d.add_argument("scores")
    d.add_argument("--setting", type=_setting_arg, default=CalibrationSetting.confidence())
    d.add_argument("--bins", type=_bins_arg, default=15)
    d.add_argument("--binning", choices=("uniform", "adaptive"), default="uniform")
    d.add_argument("--mapping", choices=("one_bin", "convex"), default="one_bin")
    d.add_argument("--out", required=True)
    d.add_argument("--svg")

    s = sub.add_parser("synth", help="sample a Gaussian-mixture dataset")
    s.add_argument("--classes", type=int, required=True)
    s.add_argument("--dims", type=int, required=True)
    s.add_argument("--modes", type=int, default=4)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="dataset CSV")
    s.add_argument("--spec-out", required=True, help="mixture spec JSON")
    s.add_argument("--scores-out", help="also write posterior scores in score-CSV format")
    s.add_argument("--temperature", type=float, default=1.0,
                   help="temperature applied to the posterior scores")

    b = sub.add_parser("benchmark", help="run the synthetic estimator benchmark")
    b.add_argument("--config", required=True,
                   help="config JSON path, or 'desk' / 'full' for the bundled configs")
    b.add_argument("--out", required=True)
    b.add_argument("--resume", action="store_true")
    b.add_argument("--workers", type=int, default=None,
                   help="worker processes (default $CALIBREX_WORKERS or 1)")
    return p


def _check_class(setting: CalibrationSetting, n_classes: int):
    if setting.kind == "class_specific" and setting.cls >= n_classes:
        raise UsageError(f"class {setting.cls} outside [0, {n_classes - 1}]")


def cmd_eval(args) -> int:
    name = args.estimator.strip().lower()
    is_kde = name in ("kde", "density", "ece_d")
    if is_kde and args.bins is not None:
        raise UsageError("--bins does not apply to the kde estimator")
    if not is_kde and args.bandwidth is not None:
        raise UsageError("--bandwidth only applies to the kde estimator")
    try:
        est = make_estimator(name, bins=args.bins if args.bins is not None else 15,
                             bandwidth=args.bandwidth or "silverman",
                             setting=args.setting, metric=args.metric)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    data = read_scores_csv(args.scores)
    _check_class(args.setting, data.n_classes)
    result = est.estimate(data).to_dict()
    if args.json:
        print(json.dumps(result, sort_keys=True))
    else:
        hyper = " ".join(f"{k}={v}" for k, v in sorted(result["hyperparams"].items()))
        print(f"{result['estimator']} setting={result['setting']} {hyper} value={result['value']:.6g}")
    return 0


def _events_for(args, data):
    if args.setting.kind == "class_wise":
        raise UsageError("curves need a single event set: use confidence or class:<c>")
    _check_class(args.setting, data.n_classes)
    return extract_events(data, args.setting)


def cmd_reliability(args) -> int:
    if args.bootstrap < 0 or args.bootstrap == 1:
        raise UsageError("--bootstrap must be 0 or at least 2")
    if args.grid < 2 or args.every < 1:
        raise UsageError("--grid must be >= 2 and --every >= 1")
    data = read_scores_csv(args.scores)
    events = _events_for(args, data)
    grid = Grid.uniform(args.grid)
    if args.bandwidth == "silverman" and len(events) < 2:
        raise CalibrationDataError("Silverman's rule needs at least two samples")
    h = resolve_bandwidth(args.bandwidth, events.score)
    if args.bootstrap:
        curve = bootstrap_reliability(events, h, grid, args.bootstrap, args.band, args.seed)
    else:
        curve = estimate_lce(events, h, grid)
    comments = [f"setting={args.setting}", f"bandwidth={h!r}", f"n={len(events)}",
                f"degenerate={'true' if curve.degenerate else 'false'}"]
    if args.bootstrap:
        comments.append(f"bootstrap={args.bootstrap} band={args.band[0]:g},{args.band[1]:g} seed={args.seed}")
    write_curve_csv(args.out, curve, args.every, comments)
    if args.svg:
        from .plotting import reliability_svg
        lo = hi = None
        if curve.bands is not None:
            lo, hi = curve.bands[0], curve.bands[2]
        reliability_svg(args.svg, curve.grid.points, curve.rel, lo, hi,
                        title=f"Reliability curve ({args.setting}, h={h:.3g})")
    print(f"wrote {args.out}")
    return 0


def cmd_diagram(args) -> int:
    data = read_scores_csv(args.scores)
    events = _events_for(args, data)
    b = resolve_bins(args.bins, len(events))
    if args.binning == "adaptive" and b > len(events):
        raise UsageError(f"cannot build {b} adaptive bins from {len(events)} samples")
    scheme = build_binning(args.binning, events.score, b)
    mapping = build_mapping(args.mapping, events.score, scheme)
    points = diagram_points(events, mapping, scheme)
    comments = [f"setting={args.setting}", f"binning={args.binning}", f"mapping={args.mapping}",
                f"requested_bins={b}", f"bins={scheme.n_bins}",
                f"merged_bins={b - scheme.n_bins}"]
    write_diagram_csv(args.out, points, comments)
    if args.svg:
        from .plotting import diagram_svg
        diagram_svg(args.svg, points.edges[:-1], points.edges[1:], points.mean_score,
                    points.event_rate, title=f"Reliability diagram ({args.setting}, {scheme.n_bins} bins)")
    print(f"wrote {args.out}")
    return 0


def cmd_synth(args) -> int:
    if args.classes < 2 or args.dims < 1 or args.modes < 1 or args.n < 1:
        raise UsageError("need --classes >= 2, --dims >= 1, --modes >= 1, --n >= 1")
    if not args.temperature > 0:
        raise UsageError("--temperature must be positive")
    spec = sample_mixture_spec(args.classes, args.dims, args.seed, args.modes)
    ds = sample_dataset(spec, args.n, args.seed + 1)
    write_dataset_csv(args.out, ds.features, ds.labels)
    Path(args.spec_out).write_text(spec.to_json() + "\n")
    if args.scores_out:
        if args.temperature == 1.0:
            scores = analytic_posterior(spec, ds.features)
        else:
            scores = distorted_posterior(spec, ds.features, args.temperature)
        write_scores_csv(args.scores_out, scores, ds.labels)
    print(f"wrote {args.out}")
    return 0


def _load_config(name: str) -> BenchConfig:
    if name in ("desk", "full"):
        text = resources.files("calibrex").joinpath(f"configs/{name}.json").read_text()
        return BenchConfig.from_json(text)
    return BenchConfig.from_json(Path(name).read_text())


def cmd_benchmark(args) -> int:
    workers = args.workers
    if workers is None:
        env = os.environ.get("CALIBREX_WORKERS", "1")
        try:
            workers = int(env)
        except ValueError:
            raise UsageError(f"CALIBREX_WORKERS must be an integer, got {env!r}") from None
    if workers < 1:
        raise UsageError("--workers must be >= 1")
    try:
        config = _load_config(args.config)
    except (OSError, json.JSONDecodeError) as exc:
        raise CalibrationDataError(f"cannot load config: {exc}") from None
    except (ValueError, TypeError) as exc:
        raise UsageError(f"invalid config: {exc}") from None

    def progress(done, total):
        log.info("cells %d/%d", done, total)

    report = run_benchmark(config, args.out, resume=args.resume, workers=workers, progress=progress)
    csv_path, _ = report.write(args.out)
    from .plotting import benchmark_svg
    for setting in config.settings:
        benchmark_svg(Path(args.out) / f"benchmark_{setting}.svg", report.rows, setting)
    print(f"wrote {csv_path}")
    return 0


COMMANDS = {
    "eval": cmd_eval,
    "reliability": cmd_reliability,
    "diagram": cmd_diagram,
    "synth": cmd_synth,
    "benchmark": cmd_benchmark,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CalibrationDataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SystemExit as exc:  # --help
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
