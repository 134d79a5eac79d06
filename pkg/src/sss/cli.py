"""Command-line entry point: ``sss analyze | simulate | threshold | oracle``.

Exit status is 0 on success, 2 for usage or input errors and 3 for
numerical failures. Errors are reported as a single ``error: ...`` line on
stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import _kernels
from .grid import FORMATS, GridError, load_image
from .inference import ANGLE_PRESETS, curvature_analysis, slope_analysis, trace_streamlines
from .kernel import LocalMoments, estimate_sigma
from .grid import interior

log = logging.getLogger("sss")

OUTPUTS = ("map-png", "class-csv", "summary-json", "streamlines-svg")
EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# option parsing helpers


def parse_floats(text: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated list of numbers, got {text!r}") from None
    if not vals:
        raise UsageError("empty list")
    return vals


def parse_bandwidths(text: str) -> list[float]:
    hs = parse_floats(text)
    if any(not (h > 0 and math.isfinite(h)) for h in hs):
        raise UsageError(f"bandwidths must be positive, got {text!r}")
    return sorted(set(hs))


def parse_angles(text: str) -> tuple[float, ...]:
    if text in ANGLE_PRESETS:
        return ANGLE_PRESETS[text]
    if text.startswith("custom:"):
        return tuple(parse_floats(text[len("custom:") :]))
    raise UsageError(f"angles must be one of {sorted(ANGLE_PRESETS)} or custom:<radians,...>")


def parse_sigma(text: str) -> float | None:
    """``known:<value>`` gives a fixed sigma; ``estimate`` returns None."""
    if text == "estimate":
        return None
    if text.startswith("known:"):
        try:
            s = float(text[len("known:") :])
        except ValueError:
            raise UsageError(f"bad sigma value in {text!r}") from None
        if not s > 0:
            raise UsageError(f"sigma must be positive, got {s}")
        return s
    raise UsageError("sigma must be 'known:<value>' or 'estimate'")


def _g(x: float) -> str:
    return format(x, "g")


def _f(x: float) -> str:
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# analyze


@dataclass
class RunConfig:
    input: Path
    format: str | None = None
    bandwidths: list[float] = field(default_factory=lambda: [2.0, 4.0, 8.0, 16.0])
    alpha: float = 0.05
    sigma: float | None = None
    angles: tuple[float, ...] = ANGLE_PRESETS["six"]
    outputs: tuple[str, ...] = OUTPUTS
    kinds: tuple[str, ...] = ("slope", "curvature")
    margin: int | None = None
    out_dir: Path = Path("sss_out")
    tau2u2: bool = False
    one_sided: bool = False
    seed_stride: int = 4
    step: float = 0.5
    max_steps: int = 400

    def __post_init__(self):
        if not self.outputs:
            raise UsageError("at least one output is required")
        bad = set(self.outputs) - set(OUTPUTS)
        if bad:
            raise UsageError(f"unknown outputs {sorted(bad)}; choose from {OUTPUTS}")
        if not 0 < self.alpha < 1:
            raise UsageError(f"alpha must lie in (0, 1), got {self.alpha}")
        self.bandwidths = sorted(float(h) for h in self.bandwidths)


def _class_csv_curvature(res) -> str:
    from .inference import Category

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["i", "j"] + [f"T_{_f(t)}" for t in res.angles] + ["category"])
    m = res.region.margin
    n_r, n_c = res.region.shape
    for a in range(n_r):
        for b in range(n_c):
            w.writerow(
                [a + m, b + m]
                + [_f(res.stats[k, a, b]) for k in range(len(res.angles))]
                + [Category(int(res.category[a, b])).label]
            )
    return buf.getvalue()


def _class_csv_slope(res) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["i", "j", "R", "T_0", "T_90", "significant"])
    m = res.region.margin
    n_r, n_c = res.region.shape
    t0, t90 = res.stats
    for a in range(n_r):
        for b in range(n_c):
            w.writerow(
                [a + m, b + m, _f(res.R[a, b]), _f(t0[a, b]), _f(t90[a, b]), int(res.significant[a, b])]
            )
    return buf.getvalue()


def analyze(cfg: RunConfig) -> dict:
    """Run the configured analyses and write the requested files; returns the summary."""
    from .render import render_map, render_streamlines

    grid = load_image(cfg.input, cfg.format)
    sigma_mode = "known" if cfg.sigma is not None else "estimate"
    sigma = cfg.sigma if cfg.sigma is not None else estimate_sigma(grid)
    if not sigma > 0:
        raise ValueError(
            "estimated sigma is zero (image has no pixel-to-pixel variation); pass --sigma known:<value>"
        )
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def emit(name: str, data: bytes | str):
        path = cfg.out_dir / name
        if isinstance(data, str):
            data = data.encode("utf-8")
        path.write_bytes(data)
        written.append(path)

    summary = {
        "input": str(cfg.input),
        "shape": [grid.rows, grid.cols],
        "sigma": {"mode": sigma_mode, "value": sigma},
        "alpha": cfg.alpha,
        "bandwidths": cfg.bandwidths,
        "angles": list(cfg.angles),
        "margin_override": cfg.margin,
        "results": [],
    }
    try:
        for h in cfg.bandwidths:
            region = interior(grid, h, margin=cfg.margin)
            lm = LocalMoments(grid, h, region=region)
            tag = _g(h)
            if "slope" in cfg.kinds:
                res = slope_analysis(grid, h, cfg.alpha, sigma, moments=lm, tau2u2=cfg.tau2u2)
                entry = {
                    "h": h,
                    "kind": "slope",
                    "region": _region_dict(region),
                    "threshold": res.threshold.to_dict(),
                    "cutoff_R": res.cutoff,
                    "n_significant": res.n_significant,
                }
                if "streamlines-svg" in cfg.outputs:
                    lines = trace_streamlines(res, cfg.seed_stride, cfg.step, cfg.max_steps)
                    entry["n_streamlines"] = len(lines)
                    emit(f"streamlines_h{tag}.svg", render_streamlines(lines, grid))
                if "map-png" in cfg.outputs:
                    emit(f"slope_h{tag}.png", render_map(res, grid))
                if "class-csv" in cfg.outputs:
                    emit(f"slope_h{tag}.csv", _class_csv_slope(res))
                summary["results"].append(entry)
            if "curvature" in cfg.kinds:
                res = curvature_analysis(
                    grid, h, cfg.alpha, sigma, cfg.angles, moments=lm, one_sided=cfg.one_sided
                )
                summary["results"].append(
                    {
                        "h": h,
                        "kind": "curvature",
                        "region": _region_dict(region),
                        "threshold": res.threshold.to_dict(),
                        "counts": res.counts(),
                        "n_significant": res.n_significant,
                    }
                )
                if "map-png" in cfg.outputs:
                    emit(f"curvature_h{tag}.png", render_map(res, grid))
                if "class-csv" in cfg.outputs:
                    emit(f"curvature_h{tag}.csv", _class_csv_curvature(res))
        if "summary-json" in cfg.outputs:
            emit("summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    except BaseException:
        for path in written:
            path.unlink(missing_ok=True)
        raise
    return summary


def _region_dict(region) -> dict:
    return {
        "margin": region.margin,
        "g_rows": region.g_rows,
        "g_cols": region.g_cols,
        "g": region.g,
        "non_square": not region.is_square,
    }


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_analyze(args) -> int:
    if not Path(args.input).exists():
        raise FileNotFoundError(f"input not found: {args.input}")
    cfg = RunConfig(
        input=Path(args.input),
        format=args.format,
        bandwidths=parse_bandwidths(args.h),
        alpha=args.alpha,
        sigma=parse_sigma(args.sigma),
        angles=parse_angles(args.angles),
        outputs=tuple(o.strip() for o in args.outputs.split(",") if o.strip()),
        kinds=tuple(k.strip() for k in args.kind.split(",") if k.strip()),
        margin=args.margin,
        out_dir=Path(args.out_dir),
        tau2u2=args.compat_tau2u2,
        one_sided=args.one_sided,
    )
    bad = set(cfg.kinds) - {"slope", "curvature"}
    if bad or not cfg.kinds:
        raise UsageError("--kind must list slope and/or curvature")
    summary = analyze(cfg)
    for r in summary["results"]:
        log.info("h=%s %s: %d significant pixels", _g(r["h"]), r["kind"], r["n_significant"])
    return EXIT_OK


def _load_config_file(path: Path) -> dict:
    if not path.exists():
        raise FileNotFoundError(f"input not found: {path}")
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ImportError:  # Python < 3.11
            import tomli as tomllib
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    return json.loads(path.read_text())


def _cmd_simulate(args) -> int:
    from .sim import SimConfig, type1_experiment

    data = _load_config_file(Path(args.config)) if args.config else {}
    overrides = {
        "replicates": 1000 if args.full else args.reps,
        "master_seed": args.seed,
        "mode": args.mode,
        "alpha": args.alpha,
        "margin_override": args.margin,
        "rows": args.rows,
        "cols": args.cols,
        "workers": args.workers,
    }
    for k, v in overrides.items():
        if v is not None:
            data[k] = v
    if args.h is not None:
        data["bandwidths"] = parse_bandwidths(args.h)
    if args.angles is not None:
        data["angles"] = parse_angles(args.angles)
    if args.sigma is not None:
        data["sigma_mode"] = "known" if parse_sigma(args.sigma) is not None else "estimate"
    if args.one_sided:
        data["one_sided"] = True
    try:
        config = SimConfig.from_mapping(data)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    text = type1_experiment(config).to_csv()
    _write_text(args.out, text)
    return EXIT_OK


def _cmd_threshold(args) -> int:
    from .evt import make_threshold

    if args.order not in ("slope", "curvature"):
        raise UsageError("--order must be slope or curvature")
    spec = make_threshold(
        args.alpha, args.N, args.g, args.h, args.order, one_sided=args.one_sided, tau2u2=args.compat_tau2u2
    )
    sys.stdout.write(json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def _cmd_oracle(args) -> int:
    from .corr_oracle import correlation_table

    rows = correlation_table(size=args.size, bandwidths=parse_bandwidths(args.h), seed=args.seed)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    keys = ["h", "order", "angle_deg", "lag_i", "lag_j", "analytic", "empirical", "abs_diff"]
    w.writerow(keys)
    for r in rows:
        w.writerow([_f(r[k]) if isinstance(r[k], float) else r[k] for k in keys])
    _write_text(args.out, buf.getvalue())
    return EXIT_OK


def _write_text(out, text):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sss", description="Significance in scale space for 2-D images.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", help="slope/curvature significance maps for an image")
    a.add_argument("--input", required=True)
    a.add_argument("--format", choices=FORMATS)
    a.add_argument("--h", default="2,4,8,16", help="comma-separated bandwidths in pixels")
    a.add_argument("--alpha", type=float, default=0.05)
    a.add_argument("--sigma", default="estimate", help="known:<value> or estimate")
    a.add_argument("--angles", default="six", help="six, table4 or custom:<radians,...>")
    a.add_argument("--margin", type=int, help="interior margin override in pixels")
    a.add_argument("--out-dir", default="sss_out")
    a.add_argument("--outputs", default=",".join(OUTPUTS))
    a.add_argument("--kind", default="slope,curvature")
    a.add_argument("--compat-tau2u2", action="store_true", help="compare R with 2u^2 instead of u^2")
    a.add_argument("--one-sided", action="store_true")
    a.set_defaults(func=_cmd_analyze)

    s = sub.add_parser("simulate", help="Type-I error experiment on white-noise fields")
    s.add_argument("--config", help="JSON or TOML file with SimConfig fields")
    s.add_argument("--mode", choices=("slope_per_angle", "slope_joint", "curvature_per_angle", "curvature_joint"))
    s.add_argument("--reps", type=int)
    s.add_argument("--full", action="store_true", help="1000 replicates")
    s.add_argument("--seed", type=int)
    s.add_argument("--h")
    s.add_argument("--alpha", type=float)
    s.add_argument("--angles")
    s.add_argument("--sigma")
    s.add_argument("--margin", type=int)
    s.add_argument("--rows", type=int)
    s.add_argument("--cols", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--one-sided", action="store_true")
    s.add_argument("--out", help="CSV path (default stdout)")
    s.set_defaults(func=_cmd_simulate)

    t = sub.add_parser("threshold", help="print the resolved critical value as JSON")
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--N", type=int, default=1)
    t.add_argument("--g", type=int, required=True)
    t.add_argument("--h", type=float, required=True)
    t.add_argument("--order", default="slope")
    t.add_argument("--one-sided", action="store_true")
    t.add_argument("--compat-tau2u2", action="store_true")
    t.set_defaults(func=_cmd_threshold)

    o = sub.add_parser("oracle", help="analytic vs empirical lag correlations as CSV")
    o.add_argument("--size", type=int, default=400)
    o.add_argument("--h", default="4,8")
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--out")
    o.set_defaults(func=_cmd_oracle)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    _kernels.configure_threads()
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        msg = str(exc) if str(exc).startswith("input not found") else f"input not found: {exc.filename}"
        sys.stderr.write(f"error: {msg}\n")
        return EXIT_USAGE
    except (UsageError, GridError, ValueError) as exc:
        sys.stderr.write(f"error: {' '.join(str(exc).split())}\n")
        return EXIT_USAGE
    except (ArithmeticError, AssertionError, RuntimeError) as exc:
        sys.stderr.write(f"error: numerical failure: {' '.join(str(exc).split())}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
