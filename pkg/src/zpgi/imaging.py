"""Ghost-imaging pipeline: scan every reference pixel against the bucket.

A run streams speckle frames; per frame it draws one bucket count behind
the object and one count for every reference pixel, tallying each pixel's
joint (reference, bucket) outcome at lag 0.  Images are maps of
g2_hat(m, 0) over reference pixels: with small mean photon numbers the
m = 1 map comes out negative (transmitting region below the background),
the m = 0 map positive, and raising m trades events for contrast.  An
intensity-style reconstruction <n1*n2>/(<n1><n2>) is kept alongside for
comparison.

Run outputs are exact integer tallies, reproducible bit-for-bit from
(config, seed) for any thread count.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numba
import numpy as np

from . import _kernels, _rng
from .detect import CountSeries, DetectorConfig, ObjectMask
from .estimator import JointHistogram
from .fieldgen import SourceConfig, make_field_plan, synthesize_chunk, temporal_mu

__all__ = [
    "ImagingRunConfig",
    "GhostScanResult",
    "ImageMap",
    "ImageMetrics",
    "DegenerateMaskError",
    "run_ghost_scan",
    "reconstruct",
    "reconstruct_traditional",
    "reconstruct_traditional_from_series",
    "metrics",
    "eta_bucket_for_target",
    "write_image_csv",
    "read_image_csv",
]

HIST_CAP = 8  # per-pixel joint histograms go to 8 photons + overflow
MIN_MARGINAL_EVENTS = 100  # below this a pixel is starved (flagged, excluded)
PSNR_CAP_DB = 99.0
TALLY_BUDGET_BYTES = 1 << 29


class DegenerateMaskError(ValueError):
    pass


@dataclass(frozen=True)
class ImagingRunConfig:
    """Full description of one ghost-imaging run.

    When ``seed`` is set, all subsystem seeds (field, both detectors, the
    decorrelated-reference control field) are derived from it by labeled
    hashing and the seeds inside ``source``/``detector`` are ignored.
    """

    source: SourceConfig
    detector: DetectorConfig
    object_mask: ObjectMask
    m_list: tuple[int, ...] = (0, 1, 2, 3, 4)
    include_traditional: bool = True
    seed: int | None = None
    independent_reference: bool = False

    def __post_init__(self):
        if len(self.m_list) == 0:
            raise ValueError("m_list must be non-empty")
        if any(m < 0 or m > HIST_CAP for m in self.m_list):
            raise ValueError(f"m_list entries must be in [0, {HIST_CAP}]")
        if self.object_mask.shape != (self.source.ny, self.source.nx):
            raise ValueError(
                f"object mask {self.object_mask.shape} does not match grid "
                f"{(self.source.ny, self.source.nx)}"
            )


@dataclass(frozen=True)
class GhostScanResult:
    """Per-pixel joint tallies at lag 0 plus the bucket count series."""

    hist_stack: np.ndarray  # (ny*nx, cap+2, cap+2) int64
    cap: int
    n_bins: int
    shape: tuple[int, int]
    bucket: CountSeries
    ref_sum: np.ndarray  # (ny*nx,) total reference counts per pixel
    ref_bucket_sum: np.ndarray  # (ny*nx,) sum of ref*bucket per pixel
    bucket_sum: int
    grain_px: float

    def histogram(self, y: int, x: int) -> JointHistogram:
        ny, nx = self.shape
        return JointHistogram(
            counts=self.hist_stack[y * nx + x].copy(), cap=self.cap, lag=0
        )


def eta_bucket_for_target(mask: ObjectMask, nbar_target: float, mean_intensity: float = 1.0) -> float:
    """Scale factor giving the bucket ``nbar_target`` mean counts per frame."""
    total = float(mask.values.sum()) * mean_intensity
    if total <= 0:
        raise ValueError("mask transmits nothing; cannot set a bucket rate")
    return nbar_target / total


def _scan_seeds(config: ImagingRunConfig) -> tuple[int, int, int, int]:
    if config.seed is not None:
        root = config.seed
        return (
            _rng.derive_seed(root, "field"),
            _rng.derive_seed(root, "detector-ref"),
            _rng.derive_seed(root, "detector-bucket"),
            _rng.derive_seed(root, "field-independent"),
        )
    return (
        config.source.seed,
        _rng.derive_seed(config.detector.seed, "detector-ref"),
        _rng.derive_seed(config.detector.seed, "detector-bucket"),
        _rng.derive_seed(config.source.seed, "field-independent"),
    )


def run_ghost_scan(config: ImagingRunConfig, threads: int = 1, progress=None) -> GhostScanResult:
    """Stream the full scan; returns exact tallies.

    Deterministic in (config, seed); ``threads`` only sets the degree of
    parallelism.  The object must match the grid, detection is per frame
    (bin_width 1), and frames are temporally independent speckle
    realizations (lag-0 tallies are insensitive to frame ordering, so a
    finite coherence time would only stretch the effective sample count).
    """
    src = config.source
    det = config.detector
    if det.bin_width != 1:
        raise ValueError("imaging scans tally per frame; set bin_width=1 (rebin downstream)")
    npx = src.ny * src.nx
    kdim = HIST_CAP + 2
    threads = max(1, int(threads))
    nb_threads = min(threads, numba.config.NUMBA_NUM_THREADS)
    numba.set_num_threads(nb_threads)
    if (nb_threads + 1) * npx * kdim * kdim * 8 > TALLY_BUDGET_BYTES:
        raise MemoryError(
            f"per-pixel joint histograms for a {src.ny}x{src.nx} grid exceed the "
            "tally budget; scan the grid in pixel blocks (chunked mode) or reduce the cap"
        )

    field_seed, ref_seed, bucket_seed, indep_seed = _scan_seeds(config)
    plan = make_field_plan(
        SourceConfig(
            nx=src.nx,
            ny=src.ny,
            grain_px=src.grain_px,
            frames=src.frames,
            coherence_frames=src.coherence_frames,
            mean_intensity=src.mean_intensity,
            seed=field_seed,
        )
    )
    plan_ref = None
    if config.independent_reference:
        plan_ref = make_field_plan(
            SourceConfig(
                nx=src.nx,
                ny=src.ny,
                grain_px=src.grain_px,
                frames=src.frames,
                coherence_frames=src.coherence_frames,
                mean_intensity=src.mean_intensity,
                seed=indep_seed,
            )
        )

    tallies = np.zeros((nb_threads, npx, kdim, kdim), dtype=np.int64)
    s1 = np.zeros((nb_threads, npx), dtype=np.int64)
    s12 = np.zeros((nb_threads, npx), dtype=np.int64)
    ws = np.zeros((nb_threads, src.ny, src.nx), dtype=np.float32)
    mask32 = config.object_mask.values.astype(np.float32)
    kappa_y = plan.kappa_y.astype(np.float64)
    kappa_x = plan.kappa_x.astype(np.float64)
    bucket_parts = []

    f0 = 0
    idx = 0
    while f0 < src.frames:
        nf = min(plan.chunk_frames, src.frames - f0)
        e_bucket = synthesize_chunk(plan, idx, nf, workers=threads)
        if plan_ref is not None:
            e_ref = synthesize_chunk(plan_ref, idx, nf, workers=threads)
            same = False
        else:
            e_ref = e_bucket
            same = True
        bucket_out = np.zeros(nf, dtype=np.int32)
        _kernels.scan_chunk(
            e_bucket,
            e_ref,
            same,
            plan.ratio_y,
            plan.ratio_x,
            kappa_y,
            kappa_x,
            mask32,
            float(det.eta_ref),
            float(det.eta_bucket),
            float(det.dark_rate),
            float(det.dark_rate),
            np.uint64(ref_seed),
            np.uint64(bucket_seed),
            f0,
            kdim,
            tallies,
            s1,
            s12,
            bucket_out,
            ws,
        )
        bucket_parts.append(bucket_out)
        f0 += nf
        idx += 1
        if progress is not None:
            progress(f0, src.frames)

    hist_stack = tallies.sum(axis=0)
    bucket_counts = np.concatenate(bucket_parts).astype(np.int64)
    return GhostScanResult(
        hist_stack=hist_stack,
        cap=HIST_CAP,
        n_bins=src.frames,
        shape=(src.ny, src.nx),
        bucket=CountSeries(counts=bucket_counts, channel="bucket", bin_width=1),
        ref_sum=s1.sum(axis=0),
        ref_bucket_sum=s12.sum(axis=0),
        bucket_sum=int(bucket_counts.sum()),
        grain_px=src.grain_px,
    )


@dataclass(frozen=True)
class ImageMap:
    """Per-reference-pixel map of one correlation statistic."""

    values: np.ndarray  # NaN where starved
    events: np.ndarray  # joint-event count behind each pixel value
    starved: np.ndarray  # bool; flagged pixels are excluded from metrics
    label: str
    grain_px: float = 1.0

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def reconstruct(result: GhostScanResult, m: int) -> ImageMap:
    """Image via g2_hat(m, 0) per pixel; starved pixels flagged, not filled."""
    if not 0 <= m <= result.cap:
        raise ValueError(f"m = {m} outside histogram cap {result.cap}")
    ny, nx = result.shape
    h = result.hist_stack
    n_m = h[:, m, :].sum(axis=1).astype(np.float64)
    n_0 = h[:, :, 0].sum(axis=1).astype(np.float64)
    n_m0 = h[:, m, 0].astype(np.float64)
    starved = (n_m < MIN_MARGINAL_EVENTS) | (n_0 < MIN_MARGINAL_EVENTS)
    if starved.all():
        raise DegenerateMaskError(f"all pixels starved for m = {m}")
    with np.errstate(divide="ignore", invalid="ignore"):
        g = n_m0 * float(result.n_bins) / (n_m * n_0)
    g[starved] = np.nan
    return ImageMap(
        values=g.reshape(ny, nx),
        events=h[:, m, 0].reshape(ny, nx).copy(),
        starved=starved.reshape(ny, nx),
        label=f"g2_{m}0(0)",
        grain_px=result.grain_px,
    )


def reconstruct_traditional(result: GhostScanResult) -> ImageMap:
    """Intensity-style image <n1*n2>/(<n1><n2>) from the exact count sums."""
    ny, nx = result.shape
    s1 = result.ref_sum.astype(np.float64)
    s12 = result.ref_bucket_sum.astype(np.float64)
    s2 = float(result.bucket_sum)
    starved = (s1 < MIN_MARGINAL_EVENTS) | np.full(s1.shape, s2 < MIN_MARGINAL_EVENTS)
    if starved.all():
        raise DegenerateMaskError("all pixels starved for the intensity estimator")
    with np.errstate(divide="ignore", invalid="ignore"):
        g = s12 * float(result.n_bins) / (s1 * s2)
    g[starved] = np.nan
    events = np.full(s1.shape, result.n_bins, dtype=np.int64)
    return ImageMap(
        values=g.reshape(ny, nx),
        events=events.reshape(ny, nx),
        starved=starved.reshape(ny, nx),
        label="traditional g2(0)",
        grain_px=result.grain_px,
    )


def reconstruct_traditional_from_series(ref_counts: np.ndarray, bucket: CountSeries, grain_px: float = 1.0) -> ImageMap:
    """Same estimator from explicit per-pixel count series (small grids).

    ``ref_counts`` has shape (n_bins, ny, nx); agrees with
    :func:`reconstruct_traditional` on the same data.
    """
    ref_counts = np.asarray(ref_counts, dtype=np.int64)
    nb, ny, nx = ref_counts.shape
    if nb != len(bucket):
        raise ValueError(f"{nb} reference bins vs {len(bucket)} bucket bins")
    s1 = ref_counts.sum(axis=0).reshape(-1).astype(np.float64)
    s12 = np.einsum("tyx,t->yx", ref_counts, bucket.counts).reshape(-1).astype(np.float64)
    s2 = float(bucket.counts.sum())
    starved = (s1 < MIN_MARGINAL_EVENTS) | np.full(s1.shape, s2 < MIN_MARGINAL_EVENTS)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = s12 * float(nb) / (s1 * s2)
    g[starved] = np.nan
    return ImageMap(
        values=g.reshape(ny, nx),
        events=np.full((ny, nx), nb, dtype=np.int64),
        starved=starved.reshape(ny, nx),
        label="traditional g2(0)",
        grain_px=grain_px,
    )


@dataclass(frozen=True)
class ImageMetrics:
    """Region contrast and fidelity of a reconstruction against the truth."""

    visibility: float
    visibility_se: float
    psnr_db: float
    contrast_sign: str  # "positive" | "negative"
    in_mean: float
    in_se: float
    out_mean: float
    out_se: float
    n_in: int
    n_out: int
    statistic: str

    def separation_sigma(self) -> float:
        """|in - out| in units of the combined standard error."""
        denom = math.hypot(self.in_se, self.out_se)
        return abs(self.in_mean - self.out_mean) / denom if denom > 0 else math.inf

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "visibility": self.visibility,
            "visibility_se": self.visibility_se,
            "psnr_db": self.psnr_db,
            "contrast_sign": self.contrast_sign,
            "in_mean": self.in_mean,
            "in_se": self.in_se,
            "out_mean": self.out_mean,
            "out_se": self.out_se,
            "n_in": self.n_in,
            "n_out": self.n_out,
        }


def _region_stats(values: np.ndarray, n_eff_divisor: float) -> tuple[float, float, int]:
    n = values.size
    mean = float(values.mean())
    if n < 2:
        return mean, math.inf, n
    sd = float(values.std(ddof=1))
    n_eff = max(2.0, n / n_eff_divisor)
    return mean, sd / math.sqrt(n_eff), n


def metrics(image: ImageMap, truth: ObjectMask) -> ImageMetrics:
    """Visibility, PSNR and region statistics of a reconstruction.

    Regions come from the truth mask binarized at 0.5; starved pixels are
    excluded.  Visibility is (in - out)/(in + out) on the raw statistic
    values, signed (negative images are not flipped).  Region standard
    errors divide the spatial scatter by an effective sample count
    n/(pi*grain_px**2), since pixels within one speckle grain are
    correlated.  PSNR is 10*log10(1/MSE) between the min-max normalized
    image and the binarized truth, capped at 99 dB for an exact match.
    """
    if image.shape != truth.shape:
        raise ValueError(f"image {image.shape} vs truth {truth.shape}")
    valid = ~image.starved & np.isfinite(image.values)
    tbin = truth.values >= 0.5
    sel_in = valid & tbin
    sel_out = valid & ~tbin
    if sel_in.sum() == 0 or sel_out.sum() == 0:
        raise DegenerateMaskError(
            "truth mask must contain both transmitting and opaque pixels with valid data"
        )
    cell = max(1.0, math.pi * image.grain_px**2)
    in_mean, in_se, n_in = _region_stats(image.values[sel_in], cell)
    out_mean, out_se, n_out = _region_stats(image.values[sel_out], cell)
    ssum = in_mean + out_mean
    diff = in_mean - out_mean
    visibility = diff / ssum if ssum != 0 else 0.0
    if ssum != 0:
        vis_se = 2.0 * math.sqrt((out_mean * in_se) ** 2 + (in_mean * out_se) ** 2) / ssum**2
    else:
        vis_se = math.inf
    # PSNR on the min-max normalized image against the binary truth
    vals = image.values[valid]
    lo, hi = float(vals.min()), float(vals.max())
    if hi > lo:
        norm = (image.values - lo) / (hi - lo)
        mse = float(np.mean((norm[valid] - tbin[valid].astype(np.float64)) ** 2))
    else:
        mse = float(np.mean((0.5 - tbin[valid].astype(np.float64)) ** 2))
    psnr = PSNR_CAP_DB if mse == 0.0 else min(PSNR_CAP_DB, 10.0 * math.log10(1.0 / mse))
    return ImageMetrics(
        visibility=float(visibility),
        visibility_se=float(vis_se),
        psnr_db=float(psnr),
        contrast_sign="positive" if diff >= 0 else "negative",
        in_mean=in_mean,
        in_se=in_se,
        out_mean=out_mean,
        out_se=out_se,
        n_in=n_in,
        n_out=n_out,
        statistic=image.label,
    )


# ---------------------------------------------------------------------------
# image files
# ---------------------------------------------------------------------------


def write_image_csv(path, image: ImageMap) -> None:
    ny, nx = image.shape
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["y", "x", "g2", "events"])
        for y in range(ny):
            for x in range(nx):
                w.writerow([y, x, repr(float(image.values[y, x])), int(image.events[y, x])])


def read_image_csv(path, label: str = "image", grain_px: float = 1.0) -> ImageMap:
    rows = []
    with open(path, newline="") as f:
        rd = csv.reader(f)
        header = next(rd, None)
        if header is None or [h.strip() for h in header] != ["y", "x", "g2", "events"]:
            raise ValueError(f"{path}: expected header y,x,g2,events")
        for lineno, row in enumerate(rd, start=2):
            if not row:
                continue
            try:
                y, x, g, ev = int(row[0]), int(row[1]), float(row[2]), int(row[3])
            except (ValueError, IndexError) as e:
                raise ValueError(f"{path}: line {lineno}: malformed row {row!r}") from e
            rows.append((y, x, g, ev))
    if not rows:
        raise ValueError(f"{path}: empty image")
    ny = max(r[0] for r in rows) + 1
    nx = max(r[1] for r in rows) + 1
    values = np.full((ny, nx), np.nan)
    events = np.zeros((ny, nx), dtype=np.int64)
    for y, x, g, ev in rows:
        values[y, x] = g
        events[y, x] = ev
    starved = ~np.isfinite(values)
    return ImageMap(values=values, events=events, starved=starved, label=label, grain_px=grain_px)
