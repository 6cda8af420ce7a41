"""Pseudothermal speckle field synthesis.

Stands in for a laser + rotating diffuser source: a complex circular-Gaussian
field on a (frames, ny, nx) grid with

* spatial intensity correlation  mu(dr)  = exp(-|dr|**2 / grain_px**2)
* temporal intensity correlation mu(tau) = exp(-(tau / coherence_frames)**2)

Both are produced spectrally: complex white Gaussian noise is shaped by
Gaussian filters ``exp(-(grain_px*k)**2/4)`` in space and
``exp(-(coherence_frames*w)**2/4)`` along the frame axis, then inverse-FFTed
and scaled so the per-pixel mean intensity is exactly ``mean_intensity``.
Boundary conditions are periodic; for a finite coherence time the frame count
must comfortably exceed it (asserted).

Distances are in pixels and times in frame intervals throughout.  Physical
scales (detector bin length, speckle size on the camera) map onto these
units one-to-one; see docs/math_notes.md for a worked conversion table.

Two access paths exist:

* :func:`generate_stack` builds the full stack in memory (exact, supports
  temporal coherence), for HBT-style runs on small grids.
* :func:`iter_field_chunks` streams frame chunks for long runs.  Frames are
  temporally independent there (it refuses configs where that is not an
  accurate model), and the spatial synthesis can run on a reduced grid with
  spectral support guaranteed by the grain filter, which a fused kernel
  upsamples on the fly (:class:`FieldPlan`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from . import _rng
from .pgm import write_pgm16

__all__ = [
    "SourceConfig",
    "FieldStack",
    "FieldSizeError",
    "generate_stack",
    "spatial_mu",
    "temporal_mu",
    "FieldPlan",
    "iter_field_chunks",
    "dump_intensity_movie",
]

# fixed streaming granularity: ~2**23 full-resolution samples per chunk.
# Chunk boundaries are config-derived (never thread-derived), so streamed
# runs are bit-reproducible for any thread count.
CHUNK_TARGET_SAMPLES = 1 << 23

# spectral modes below this relative power are dropped in the reduced-grid
# plan; the truncated mass distorts the correlation shape by < 1e-4.
MODE_POWER_CUTOFF = 1e-6


class FieldSizeError(MemoryError):
    pass


@dataclass(frozen=True)
class SourceConfig:
    """Speckle source description.

    Attributes
    ----------
    nx, ny : int
        Grid size in pixels.
    grain_px : float
        Speckle grain 1/e half-width (pixels) of the spatial intensity
        correlation exp(-|dr|**2/grain_px**2).
    frames : int
        Number of time frames.
    coherence_frames : float
        Temporal coherence time tau_c in frame intervals;
        |g1(tau)|**2 = exp(-(tau/tau_c)**2), i.e. sigma = 1/tau_c in the
        Gaussian-spectrum convention.  math.inf freezes the pattern.
    mean_intensity : float
        Mean intensity <I> per pixel (arbitrary units).
    seed : int
        64-bit reproducibility seed.
    """

    nx: int
    ny: int
    grain_px: float
    frames: int
    coherence_frames: float
    mean_intensity: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1 or self.frames < 1:
            raise ValueError("nx, ny, frames must all be >= 1")
        if self.grain_px <= 0:
            raise ValueError(f"grain_px must be > 0, got {self.grain_px}")
        if not self.coherence_frames > 0:
            raise ValueError(f"coherence_frames must be > 0, got {self.coherence_frames}")
        if self.mean_intensity <= 0:
            raise ValueError(f"mean_intensity must be > 0, got {self.mean_intensity}")


@dataclass(frozen=True)
class FieldStack:
    """Immutable (frames, ny, nx) complex field movie."""

    field: np.ndarray
    config: SourceConfig

    def intensity(self) -> np.ndarray:
        return np.abs(self.field) ** 2


def spatial_mu(config: SourceConfig, dr) -> float:
    """Model spatial coherence mu(dr) = exp(-|dr|**2 / grain_px**2).

    ``dr`` is a scalar distance or a (dy, dx) displacement in pixels.
    """
    d2 = float(np.sum(np.square(np.asarray(dr, dtype=np.float64))))
    return math.exp(-d2 / config.grain_px**2)


def temporal_mu(config: SourceConfig, lag_frames: float) -> float:
    """Model temporal coherence mu(tau) = exp(-(tau/coherence_frames)**2)."""
    if math.isinf(config.coherence_frames):
        return 1.0
    return math.exp(-((lag_frames / config.coherence_frames) ** 2))


def _spatial_filter(ny: int, nx: int, grain_px: float) -> np.ndarray:
    kx = 2.0 * np.pi * np.fft.fftfreq(nx)
    ky = 2.0 * np.pi * np.fft.fftfreq(ny)
    return np.exp(-(grain_px**2) * (ky[:, None] ** 2 + kx[None, :] ** 2) / 4.0)


def _temporal_filter(frames: int, tau_c: float) -> np.ndarray:
    if math.isinf(tau_c):
        h = np.zeros(frames)
        h[0] = 1.0
        return h
    w = 2.0 * np.pi * np.fft.fftfreq(frames)
    return np.exp(-(tau_c**2) * w**2 / 4.0)


def generate_stack(config: SourceConfig, max_bytes: int = 1 << 31) -> FieldStack:
    """Synthesize the full field stack in memory.

    Pure function of (config, seed): identical inputs give bit-identical
    stacks.  Raises :class:`FieldSizeError` when the stack would exceed
    ``max_bytes``; long scans should stream chunks instead (see
    :func:`iter_field_chunks` and the imaging pipeline).
    """
    nbytes = config.frames * config.ny * config.nx * 16
    if nbytes > max_bytes:
        raise FieldSizeError(
            f"field stack needs {nbytes/2**30:.1f} GiB (> {max_bytes/2**30:.1f} GiB); "
            "use the chunked/streaming mode instead of an in-memory stack"
        )
    tau_c = config.coherence_frames
    if not math.isinf(tau_c) and tau_c > 1.0 and config.frames < 8 * tau_c:
        raise ValueError(
            f"frames={config.frames} too short for coherence_frames={tau_c}; "
            "need frames >= 8 * coherence_frames for the periodic synthesis"
        )
    rng = _rng.generator(config.seed, "field-stack")
    shape = (config.frames, config.ny, config.nx)
    w = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    h = _temporal_filter(config.frames, tau_c)[:, None, None] * _spatial_filter(
        config.ny, config.nx, config.grain_px
    )[None, :, :]
    w *= h
    ntot = config.frames * config.ny * config.nx
    # ifftn carries 1/ntot; rescale so Var(E) = mean_intensity exactly
    # (the white noise has unit variance per quadrature, i.e. 2 per mode)
    power = float(np.sum(h**2))
    scale = ntot * math.sqrt(config.mean_intensity / (2.0 * power))
    field = sfft.ifftn(w, axes=(0, 1, 2), workers=-1)
    field *= scale
    return FieldStack(field=field, config=config)


# ---------------------------------------------------------------------------
# streamed synthesis (temporally independent frames)
# ---------------------------------------------------------------------------


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class FieldPlan:
    """Plan for streamed spatial synthesis on a reduced grid.

    The grain filter bounds the field's spatial bandwidth, so for smooth
    grains the exact band-limited field lives on a grid coarser than the
    output by an integer ratio r (a power of two).  Chunks carry the reduced
    field; consumers evaluate full-resolution samples by bilinear
    interpolation with the per-phase variance correction ``kappa`` (the
    interpolated Gaussian field keeps exact thermal statistics per pixel,
    with a few-percent distortion of the correlation shape at r > 1).
    """

    config: SourceConfig
    ly: int
    lx: int
    ratio_y: int
    ratio_x: int
    mode_ky: np.ndarray  # int indices into the reduced k-grid
    mode_kx: np.ndarray
    mode_amp: np.ndarray  # filter amplitude per kept mode, float32
    scale: float  # normalization so <|E|^2> = mean_intensity
    kappa_y: np.ndarray  # per-phase variance correction, length ratio_y
    kappa_x: np.ndarray
    chunk_frames: int

    @property
    def n_modes(self) -> int:
        return len(self.mode_amp)


def _phase_kappa(ratio: int, grain_px: float) -> np.ndarray:
    """Variance correction for bilinear interpolation at each subpixel phase."""
    kappa = np.ones(ratio)
    g1 = math.exp(-(ratio**2) / (2.0 * grain_px**2))  # field corr. of corner pair
    for p in range(1, ratio):
        f = p / ratio
        var = (1 - f) ** 2 + f**2 + 2.0 * f * (1 - f) * g1
        kappa[p] = 1.0 / math.sqrt(var)
    return kappa


def make_field_plan(config: SourceConfig, allow_reduced: bool = True) -> FieldPlan:
    """Choose the reduced grid and spectral support for streamed synthesis."""
    # keep modes with |H|^2 >= cutoff: k <= sqrt(2 ln(1/cutoff)) / grain
    kmax = math.sqrt(2.0 * math.log(1.0 / MODE_POWER_CUTOFF)) / config.grain_px
    ly, lx = config.ny, config.nx
    if allow_reduced and _is_pow2(config.nx) and _is_pow2(config.ny):
        # halve while every kept mode stays below the reduced grid's Nyquist
        while lx >= 4 and kmax < 0.95 * math.pi * (lx // 2) / config.nx:
            lx //= 2
        while ly >= 4 and kmax < 0.95 * math.pi * (ly // 2) / config.ny:
            ly //= 2
    ry, rx = config.ny // ly, config.nx // lx
    kx = 2.0 * np.pi * np.fft.fftfreq(lx, d=rx)  # in output-pixel units
    ky = 2.0 * np.pi * np.fft.fftfreq(ly, d=ry)
    amp = np.exp(-(config.grain_px**2) * (ky[:, None] ** 2 + kx[None, :] ** 2) / 4.0)
    keep = amp**2 >= MODE_POWER_CUTOFF * float(amp.max()) ** 2
    iy, ix = np.nonzero(keep)
    amps = amp[iy, ix]
    power = float(np.sum(amps**2))
    scale = ly * lx * math.sqrt(config.mean_intensity / power)
    chunk = max(1, CHUNK_TARGET_SAMPLES // (config.nx * config.ny))
    return FieldPlan(
        config=config,
        ly=ly,
        lx=lx,
        ratio_y=ry,
        ratio_x=rx,
        mode_ky=iy.astype(np.int64),
        mode_kx=ix.astype(np.int64),
        mode_amp=amps.astype(np.float32),
        scale=scale,
        kappa_y=_phase_kappa(ry, config.grain_px),
        kappa_x=_phase_kappa(rx, config.grain_px),
        chunk_frames=chunk,
    )


def synthesize_chunk(plan: FieldPlan, chunk_index: int, nframes: int, *, seed_label: str = "field-chunk", workers: int = 1) -> np.ndarray:
    """Reduced-grid field for one chunk: (nframes, ly, lx) complex64.

    Deterministic in (config.seed, seed_label, chunk_index) only.
    """
    cfg = plan.config
    rng = _rng.generator(cfg.seed, seed_label, chunk_index)
    noise = rng.standard_normal((nframes, plan.n_modes, 2), dtype=np.float32)
    w = (noise[..., 0] + 1j * noise[..., 1]) * (plan.mode_amp * np.float32(plan.scale / math.sqrt(2.0)))
    spec = np.zeros((nframes, plan.ly, plan.lx), dtype=np.complex64)
    spec[:, plan.mode_ky, plan.mode_kx] = w
    return sfft.ifft2(spec, workers=workers)


def upsample_field(plan: FieldPlan, reduced: np.ndarray) -> np.ndarray:
    """Full-resolution field from a reduced chunk (numpy reference path).

    Bilinear with periodic wrap and per-phase variance correction; the
    numba scan kernel implements the identical arithmetic.
    """
    cfg = plan.config
    ry, rx = plan.ratio_y, plan.ratio_x
    if ry == 1 and rx == 1:
        return reduced
    f, ly, lx = reduced.shape
    out = np.empty((f, cfg.ny, cfg.nx), dtype=reduced.dtype)
    for py in range(ry):
        fy = py / ry
        for px in range(rx):
            fx = px / rx
            base = reduced
            right = np.roll(reduced, -1, axis=2)
            down = np.roll(reduced, -1, axis=1)
            diag = np.roll(right, -1, axis=1)
            interp = (
                (1 - fy) * ((1 - fx) * base + fx * right)
                + fy * ((1 - fx) * down + fx * diag)
            ) * (plan.kappa_y[py] * plan.kappa_x[px])
            out[:, py::ry, px::rx] = interp
    return out


def iter_field_chunks(config: SourceConfig, *, allow_reduced: bool = True, workers: int = 1):
    """Yield (start_frame, full-resolution complex64 chunk) for long runs.

    Frames are temporally independent; configs whose coherence time makes
    consecutive frames observably correlated are refused, since the steady
    stream cannot honor them.
    """
    if temporal_mu(config, 1.0) > 1e-9:
        raise ValueError(
            f"coherence_frames={config.coherence_frames} implies correlated frames; "
            "streamed chunks require effectively independent frames "
            "(coherence_frames <= 0.22) - use generate_stack for coherent runs"
        )
    plan = make_field_plan(config, allow_reduced=allow_reduced)
    f0 = 0
    idx = 0
    while f0 < config.frames:
        nf = min(plan.chunk_frames, config.frames - f0)
        reduced = synthesize_chunk(plan, idx, nf, workers=workers)
        yield f0, upsample_field(plan, reduced)
        f0 += nf
        idx += 1


def dump_intensity_movie(stack: FieldStack, directory, prefix: str = "frame") -> list[str]:
    """Write per-frame intensity as 16-bit P5 PGM files; returns the paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    intensity = stack.intensity()
    paths = []
    for i in range(intensity.shape[0]):
        p = directory / f"{prefix}_{i:06d}.pgm"
        write_pgm16(p, intensity[i])
        paths.append(str(p))
    return paths
