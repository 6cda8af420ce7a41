"""Command-line front end.

Subcommands
-----------
curves        closed-form g2_m0 curves vs mean photon number and vs lag
simulate-hbt  two-detector (no object) Monte Carlo: temporal/spatial curves
simulate-gi   full ghost-imaging scan: images, metrics, PGM/CSV artifacts
analyze       correlate externally recorded count or timestamp CSVs
fit           fit (nbar, sigma, v) to a g2_10(lag) curve CSV
metrics       contrast/PSNR of an exported image against a truth mask

Runs are configured by a flat ``key = value`` file plus flag overrides; all
randomness derives from the single ``seed`` key by labeled hashing.  Every
artifact-writing command finishes by writing ``manifest.json`` with a
config echo and per-output checksums (its presence marks a completed run).

Exit codes: 0 success, 2 configuration error, 3 insufficient events or
signal, 4 I/O or data-format error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, _rng, analytic, estimator
from .detect import (
    CountSeries,
    CsvFormatError,
    ObjectMask,
    letter_t_mask,
    read_counts_csv,
    read_timestamps_csv,
    rebin,
    sample_counts,
    write_counts_csv,
)
from .estimator import InsufficientEventsError, correlation_curve, read_curve_csv, write_curve_csv
from .fieldgen import (
    FieldSizeError,
    SourceConfig,
    generate_stack,
    iter_field_chunks,
    temporal_mu,
)
from .detect import DetectorConfig, point_intensity
from .fitting import FitError, fit_g2_10_curve
from .imaging import (
    DegenerateMaskError,
    ImagingRunConfig,
    eta_bucket_for_target,
    metrics as image_metrics,
    read_image_csv,
    reconstruct,
    reconstruct_traditional,
    run_ghost_scan,
    write_image_csv,
)
from .pgm import PgmError, write_pgm16

__all__ = ["main", "ConfigError"]


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config files
# ---------------------------------------------------------------------------

_CONFIG_TYPES = {
    "grid_nx": int,
    "grid_ny": int,
    "grain_px": float,
    "frames": int,
    "coherence_frames": float,
    "mean_intensity": float,
    "eta_ref": float,
    "eta_bucket": float,
    "nbar_bucket_target": float,
    "bin_width": int,
    "mmax": int,
    "m_list": str,
    "object_path": str,
    "out_dir": str,
    "seed": int,
    "pairs": str,
    "max_lag": int,
    "lag_step": int,
    "control_frames": int,
    "stroke_px": int,
}

_CONFIG_DEFAULTS = {
    "grid_nx": 64,
    "grid_ny": 64,
    "grain_px": 4.0,
    "frames": 100_000,
    "coherence_frames": 0.1,
    "mean_intensity": 1.0,
    "eta_ref": 0.2,
    "eta_bucket": None,
    "nbar_bucket_target": 0.5,
    "bin_width": 1,
    "mmax": 8,
    "m_list": "0,1,2,3,4",
    "object_path": "",
    "out_dir": "out",
    "seed": 1,
    "pairs": "1,0;0,0",
    "max_lag": 80,
    "lag_step": 4,
    "control_frames": 0,
    "stroke_px": 0,
}


def parse_config_file(path) -> dict:
    """Parse a flat ``key = value`` config file ('#' starts a comment)."""
    cfg: dict = {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}: line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _CONFIG_TYPES:
            raise ConfigError(f"{path}: line {lineno}: unknown key {key!r}")
        try:
            cfg[key] = _CONFIG_TYPES[key](value)
        except ValueError as e:
            raise ConfigError(f"{path}: line {lineno}: bad value for {key}: {value!r}") from e
    return cfg


def _merged_config(args, overrides: dict) -> dict:
    cfg = dict(_CONFIG_DEFAULTS)
    if getattr(args, "config", None):
        cfg.update(parse_config_file(args.config))
    for key, val in overrides.items():
        if val is not None:
            cfg[key] = val
    return cfg


def _parse_m_list(text: str) -> tuple[int, ...]:
    try:
        ms = tuple(int(t) for t in text.replace(";", ",").split(",") if t.strip() != "")
    except ValueError as e:
        raise ConfigError(f"bad m_list {text!r}") from e
    if not ms:
        raise ConfigError("m_list is empty")
    return ms


def _parse_pairs(text: str) -> list[tuple[int, int]]:
    pairs = []
    try:
        for part in text.split(";"):
            if not part.strip():
                continue
            m, n = part.split(",")
            pairs.append((int(m), int(n)))
    except ValueError as e:
        raise ConfigError(f"bad pairs spec {text!r}; expected like '1,0;0,0'") from e
    if not pairs:
        raise ConfigError("no (m, n) pairs given")
    return pairs


# ---------------------------------------------------------------------------
# run manifest
# ---------------------------------------------------------------------------


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True,
            text=True,
            timeout=5,
            cwd=Path(__file__).parent,
        )
        if out.returncode == 0:
            return out.stdout.strip()
    except Exception:
        pass
    return f"v{__version__}"


def write_manifest(out_dir: Path, config: dict, outputs: list[Path], t_start: float, command: str) -> Path:
    """Checksum every emitted file; written last so presence = completed run."""
    manifest = {
        "tool": "zpgi",
        "version": __version__,
        "git": _git_describe(),
        "command": command,
        "config": {k: config[k] for k in sorted(config)},
        "seed": config.get("seed"),
        "duration_s": round(time.monotonic() - t_start, 3),
        "outputs": {p.name: _sha256(p) for p in sorted(outputs)},
    }
    path = out_dir / "manifest.json"
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def _out_dir(cfg: dict) -> Path:
    d = Path(cfg["out_dir"])
    d.mkdir(parents=True, exist_ok=True)
    return d


# ---------------------------------------------------------------------------
# curves
# ---------------------------------------------------------------------------


def cmd_curves(args) -> int:
    t0 = time.monotonic()
    cfg = _merged_config(args, {"out_dir": args.out_dir, "m_list": args.m_list, "seed": None})
    out = _out_dir(cfg)
    ms = _parse_m_list(cfg["m_list"])
    if args.nbar_points < 2 or args.tau_points < 2:
        raise ConfigError("need at least 2 grid points")
    if args.nbar_min <= 0 or args.nbar_max <= args.nbar_min:
        raise ConfigError("require 0 < nbar-min < nbar-max")
    outputs = []

    nbars = np.geomspace(args.nbar_min, args.nbar_max, args.nbar_points)
    path = out / "g2_vs_nbar.csv"
    with open(path, "w", newline="") as f:
        f.write("nbar,m,g2\n")
        for m in ms:
            for nb in nbars:
                g = analytic.g2_m0(m, analytic.PhotonStatsParams(nbar=float(nb), mu=args.mu))
                f.write(f"{float(nb)!r},{m},{g!r}\n")
    outputs.append(path)

    taus = np.linspace(-args.tau_max, args.tau_max, args.tau_points)
    p = analytic.PhotonStatsParams(nbar=args.nbar, sigma=args.sigma, v=args.v)
    path = out / "g2_vs_tau.csv"
    with open(path, "w", newline="") as f:
        f.write("tau,m,g2\n")
        for m in ms:
            for t in taus:
                g = analytic.g2_m0_tau(m, float(t), p)
                f.write(f"{float(t)!r},{m},{g!r}\n")
    outputs.append(path)

    write_manifest(out, {**cfg, "nbar": args.nbar, "sigma": args.sigma, "v": args.v, "mu": args.mu}, outputs, t0, "curves")
    print(f"wrote {len(outputs)} curve files to {out}")
    return 0


# ---------------------------------------------------------------------------
# simulate-hbt
# ---------------------------------------------------------------------------


def _hbt_lags(cfg: dict) -> list[int]:
    step = max(1, cfg["lag_step"])
    return list(range(-cfg["max_lag"], cfg["max_lag"] + 1, step))


def _hbt_block_bins(cfg: dict) -> int | None:
    """Jackknife block length for serially correlated bins (None = iid)."""
    tau_c = cfg["coherence_frames"] / max(1, cfg["bin_width"])
    if tau_c <= 0.22:
        return None
    return math.ceil(50.0 * tau_c)


def _simulate_hbt_temporal(cfg: dict, out: Path, threads: int) -> list[Path]:
    src = SourceConfig(
        nx=cfg["grid_nx"],
        ny=cfg["grid_ny"],
        grain_px=cfg["grain_px"],
        frames=cfg["frames"],
        coherence_frames=cfg["coherence_frames"],
        mean_intensity=cfg["mean_intensity"],
        seed=_rng.derive_seed(cfg["seed"], "field"),
    )
    stack = generate_stack(src)
    pix = (src.ny // 2, src.nx // 2)
    trace = point_intensity(stack, pix)
    s1 = sample_counts(trace, cfg["eta_ref"], cfg["bin_width"], _rng.derive_seed(cfg["seed"], "det1"), "ch1")
    s2 = sample_counts(trace, cfg["eta_ref"], cfg["bin_width"], _rng.derive_seed(cfg["seed"], "det2"), "ch2")
    outputs = []
    counts_path = out / "counts_temporal.csv"
    write_counts_csv(counts_path, s1, s2)
    outputs.append(counts_path)
    lags = _hbt_lags(cfg)
    block = _hbt_block_bins(cfg)
    for m, n in _parse_pairs(cfg["pairs"]):
        curve = correlation_curve(s1, s2, m, n, lags, cap=cfg["mmax"], block_bins=block)
        path = out / f"hbt_temporal_m{m}n{n}.csv"
        write_curve_csv(path, curve)
        outputs.append(path)
    return outputs


def _simulate_hbt_spatial(cfg: dict, out: Path, threads: int) -> list[Path]:
    src = SourceConfig(
        nx=cfg["grid_nx"],
        ny=cfg["grid_ny"],
        grain_px=cfg["grain_px"],
        frames=cfg["frames"],
        coherence_frames=cfg["coherence_frames"],
        mean_intensity=cfg["mean_intensity"],
        seed=_rng.derive_seed(cfg["seed"], "field-spatial"),
    )
    if temporal_mu(src, 1.0) > 1e-9:
        raise ConfigError(
            "spatial HBT streams independent frames; set coherence_frames <= 0.22"
        )
    ny, nx = src.ny, src.nx
    y_row = ny // 2
    x_fixed = nx // 2
    cap = cfg["mmax"]
    kdim = cap + 2
    tallies = np.zeros((nx, kdim, kdim), dtype=np.int64)
    det_seed = _rng.derive_seed(cfg["seed"], "det-spatial")
    chunk_idx = 0
    for f0, chunk in iter_field_chunks(src, workers=threads):
        intens = np.abs(chunk[:, y_row, :]) ** 2  # (nf, nx)
        rng = _rng.generator(det_seed, "chunk", chunk_idx)
        counts = rng.poisson(cfg["eta_ref"] * intens.astype(np.float64))
        fixed = np.minimum(counts[:, x_fixed], cap + 1)
        scan = np.minimum(counts, cap + 1)
        flat = scan * kdim + fixed[:, None]
        for x in range(nx):
            tallies[x] += np.bincount(flat[:, x], minlength=kdim * kdim).reshape(kdim, kdim)
        chunk_idx += 1
    outputs = []
    for m, n in _parse_pairs(cfg["pairs"]):
        pts = []
        for x in range(nx):
            hist = estimator.JointHistogram(counts=tallies[x], cap=cap, lag=0)
            dr = x - x_fixed
            try:
                g, se = estimator.g2_hat(hist, m, n)
                pts.append(estimator.CurvePoint(lag=dr, g2=g, stderr=se, events=int(tallies[x][m, n])))
            except InsufficientEventsError:
                pts.append(estimator.CurvePoint(lag=dr, g2=float("nan"), stderr=float("nan"), events=0, starved=True))
        curve = estimator.CorrelationCurve(m=m, n=n, points=tuple(sorted(pts, key=lambda p: p.lag)))
        path = out / f"hbt_spatial_m{m}n{n}.csv"
        write_curve_csv(path, curve)
        outputs.append(path)
    return outputs


def cmd_simulate_hbt(args) -> int:
    t0 = time.monotonic()
    cfg = _merged_config(
        args,
        {
            "out_dir": args.out_dir,
            "seed": args.seed,
            "frames": args.frames,
            "eta_ref": args.eta_ref,
            "coherence_frames": args.coherence_frames,
            "grid_nx": args.grid_nx,
            "grid_ny": args.grid_ny,
            "pairs": args.pairs,
            "max_lag": args.max_lag,
            "lag_step": args.lag_step,
            "bin_width": args.bin_width,
        },
    )
    out = _out_dir(cfg)
    outputs = []
    if args.mode in ("temporal", "both"):
        outputs += _simulate_hbt_temporal(cfg, out, args.threads)
    if args.mode in ("spatial", "both"):
        outputs += _simulate_hbt_spatial(cfg, out, args.threads)
    write_manifest(out, cfg, outputs, t0, "simulate-hbt")
    print(f"wrote {len(outputs)} files to {out}")
    return 0


# ---------------------------------------------------------------------------
# simulate-gi
# ---------------------------------------------------------------------------


def _load_object(cfg: dict) -> ObjectMask:
    if cfg["object_path"]:
        return ObjectMask.from_pgm(cfg["object_path"])
    stroke = cfg["stroke_px"] if cfg["stroke_px"] > 0 else None
    return letter_t_mask(cfg["grid_ny"], cfg["grid_nx"], stroke)


def _gi_config(cfg: dict, independent_reference: bool = False, frames: int | None = None) -> ImagingRunConfig:
    mask = _load_object(cfg)
    eta_bucket = cfg["eta_bucket"]
    if eta_bucket is None:
        eta_bucket = eta_bucket_for_target(mask, cfg["nbar_bucket_target"], cfg["mean_intensity"])
    src = SourceConfig(
        nx=cfg["grid_nx"],
        ny=cfg["grid_ny"],
        grain_px=cfg["grain_px"],
        frames=frames if frames is not None else cfg["frames"],
        coherence_frames=cfg["coherence_frames"],
        mean_intensity=cfg["mean_intensity"],
        seed=0,
    )
    det = DetectorConfig(
        eta_ref=cfg["eta_ref"], eta_bucket=eta_bucket, bin_width=cfg["bin_width"], seed=0
    )
    return ImagingRunConfig(
        source=src,
        detector=det,
        object_mask=mask,
        m_list=_parse_m_list(cfg["m_list"]),
        include_traditional=True,
        seed=cfg["seed"],
        independent_reference=independent_reference,
    )


def cmd_simulate_gi(args) -> int:
    t0 = time.monotonic()
    cfg = _merged_config(
        args,
        {
            "out_dir": args.out_dir,
            "seed": args.seed,
            "frames": args.frames,
            "m_list": args.m_list,
            "eta_ref": args.eta_ref,
            "control_frames": args.control_frames,
        },
    )
    out = _out_dir(cfg)
    run_cfg = _gi_config(cfg)
    cfg["eta_bucket"] = run_cfg.detector.eta_bucket  # echo the derived value
    result = run_ghost_scan(run_cfg, threads=args.threads)
    truth = run_cfg.object_mask
    outputs = []
    all_metrics = []
    for m in run_cfg.m_list:
        image = reconstruct(result, m)
        stem = f"image_g2_m{m}0"
        write_image_csv(out / f"{stem}.csv", image)
        write_pgm16(out / f"{stem}.pgm", np.where(np.isfinite(image.values), image.values, np.nan))
        outputs += [out / f"{stem}.csv", out / f"{stem}.pgm"]
        all_metrics.append(image_metrics(image, truth).to_dict())
    if run_cfg.include_traditional:
        image = reconstruct_traditional(result)
        write_image_csv(out / "image_traditional.csv", image)
        write_pgm16(out / "image_traditional.pgm", image.values)
        outputs += [out / "image_traditional.csv", out / "image_traditional.pgm"]
        all_metrics.append(image_metrics(image, truth).to_dict())
    if cfg["control_frames"] > 0:
        control_cfg = _gi_config(cfg, independent_reference=True, frames=cfg["control_frames"])
        control = run_ghost_scan(control_cfg, threads=args.threads)
        image = reconstruct(control, min(run_cfg.m_list))
        write_image_csv(out / "image_control.csv", image)
        outputs.append(out / "image_control.csv")
        mm = image_metrics(image, truth).to_dict()
        mm["statistic"] = "control " + mm["statistic"]
        all_metrics.append(mm)
    metrics_path = out / "metrics.json"
    with open(metrics_path, "w") as f:
        json.dump(
            {
                "provenance": {
                    "tool": "zpgi",
                    "version": __version__,
                    "git": _git_describe(),
                    "seed": cfg["seed"],
                    "config": {k: cfg[k] for k in sorted(cfg)},
                },
                "images": all_metrics,
            },
            f,
            indent=2,
            sort_keys=True,
        )
        f.write("\n")
    outputs.append(metrics_path)
    write_manifest(out, cfg, outputs, t0, "simulate-gi")
    print(f"wrote {len(outputs)} files to {out}")
    return 0


# ---------------------------------------------------------------------------
# analyze / fit / metrics
# ---------------------------------------------------------------------------


def cmd_analyze(args) -> int:
    t0 = time.monotonic()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.counts:
        s1, s2 = read_counts_csv(args.counts)
    elif args.timestamps:
        if not args.bin_ns:
            raise ConfigError("--timestamps requires --bin-ns")
        chans = read_timestamps_csv(args.timestamps, args.bin_ns)
        if len(chans) != 2:
            raise ConfigError(f"need exactly 2 channels, found {sorted(chans)}")
        s1, s2 = (chans[k] for k in sorted(chans))
    else:
        raise ConfigError("give --counts or --timestamps")
    if args.rebin > 1:
        s1 = rebin(s1, args.rebin)
        s2 = rebin(s2, args.rebin)
    lags = list(range(-args.max_lag, args.max_lag + 1, max(1, args.lag_step)))
    block = args.block_bins if args.block_bins > 0 else None
    outputs = []
    for m, n in _parse_pairs(args.pairs):
        curve = correlation_curve(s1, s2, m, n, lags, cap=args.cap, block_bins=block)
        path = out / f"analyze_m{m}n{n}.csv"
        write_curve_csv(path, curve)
        outputs.append(path)
    cfg = {
        "source": args.counts or args.timestamps,
        "pairs": args.pairs,
        "max_lag": args.max_lag,
        "lag_step": args.lag_step,
        "rebin": args.rebin,
        "block_bins": args.block_bins,
        "cap": args.cap,
        "out_dir": str(out),
        "seed": None,
    }
    write_manifest(out, cfg, outputs, t0, "analyze")
    print(f"wrote {len(outputs)} curve files to {out}")
    return 0


def cmd_fit(args) -> int:
    curve = read_curve_csv(args.curve)
    result = fit_g2_10_curve(curve)
    payload = result.to_dict()
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def cmd_metrics(args) -> int:
    image = read_image_csv(args.image_csv, grain_px=args.grain_px)
    truth = ObjectMask.from_pgm(args.truth)
    m = image_metrics(image, truth)
    payload = {
        "provenance": {"tool": "zpgi", "version": __version__, "git": _git_describe()},
        "metrics": m.to_dict(),
    }
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="zpgi", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"zpgi {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("curves", help="closed-form g2 curves to CSV")
    p.add_argument("--out-dir", default="out-curves")
    p.add_argument("--m-list", default=None, help="comma-separated m values (default 0..4)")
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--nbar-min", type=float, default=0.01)
    p.add_argument("--nbar-max", type=float, default=20.0)
    p.add_argument("--nbar-points", type=int, default=400)
    p.add_argument("--nbar", type=float, default=0.5, help="nbar for the tau curve")
    p.add_argument("--sigma", type=float, default=0.05)
    p.add_argument("--v", type=float, default=1.0)
    p.add_argument("--tau-max", type=float, default=80.0)
    p.add_argument("--tau-points", type=int, default=161)
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("simulate-hbt", help="two-detector correlation Monte Carlo")
    p.add_argument("--config", default=None, help="key = value config file")
    p.add_argument("--mode", choices=("temporal", "spatial", "both"), default="temporal")
    p.add_argument("--out-dir", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--frames", type=int, default=None)
    p.add_argument("--eta-ref", type=float, default=None)
    p.add_argument("--coherence-frames", type=float, default=None)
    p.add_argument("--grid-nx", type=int, default=None)
    p.add_argument("--grid-ny", type=int, default=None)
    p.add_argument("--pairs", default=None, help="m,n pairs like '1,0;0,0'")
    p.add_argument("--max-lag", type=int, default=None)
    p.add_argument("--lag-step", type=int, default=None)
    p.add_argument("--bin-width", type=int, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_simulate_hbt)

    p = sub.add_parser("simulate-gi", help="ghost-imaging scan with images and metrics")
    p.add_argument("--config", default=None)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--frames", type=int, default=None)
    p.add_argument("--m-list", default=None)
    p.add_argument("--eta-ref", type=float, default=None)
    p.add_argument("--control-frames", type=int, default=None, help="frames for a decorrelated-reference control image (0 = off)")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_simulate_gi)

    p = sub.add_parser("analyze", help="correlate recorded count/timestamp CSVs")
    p.add_argument("--counts", default=None, help="two-channel count CSV")
    p.add_argument("--timestamps", default=None, help="channel,timestamp_ns CSV")
    p.add_argument("--bin-ns", type=int, default=0, help="bin width for timestamp data (ns)")
    p.add_argument("--pairs", default="1,0;0,0")
    p.add_argument("--max-lag", type=int, default=0)
    p.add_argument("--lag-step", type=int, default=1)
    p.add_argument("--rebin", type=int, default=1)
    p.add_argument("--block-bins", type=int, default=0, help="jackknife block length (0 = iid errors)")
    p.add_argument("--cap", type=int, default=estimator.DEFAULT_CAP)
    p.add_argument("--out-dir", default="out-analyze")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("fit", help="fit (nbar, sigma, v) to a g2_10 curve CSV")
    p.add_argument("--curve", required=True)
    p.add_argument("--out", default=None, help="write the fit JSON here as well")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("metrics", help="image metrics against a truth mask")
    p.add_argument("--image-csv", required=True)
    p.add_argument("--truth", required=True, help="truth mask PGM")
    p.add_argument("--grain-px", type=float, default=1.0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_metrics)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (InsufficientEventsError, FitError, DegenerateMaskError) as e:
        print(f"insufficient events: {e}", file=sys.stderr)
        return 3
    except (CsvFormatError, PgmError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return 4
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (ValueError, FieldSizeError, MemoryError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    raise SystemExit(main())
