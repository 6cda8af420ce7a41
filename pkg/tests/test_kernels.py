import numba
import numpy as np
import pytest
from scipy import stats

from zpgi import _kernels, _rng
from zpgi import fieldgen as fg
from zpgi.fieldgen import SourceConfig


class TestKeyedPoisson:
    def test_matches_python_reference(self):
        # table-free python twin; the table's 2e-7 interpolation error can
        # flip a draw only when u falls within it of a CDF step, which the
        # fixed seeds here never hit
        lam_rng = np.random.default_rng(0)
        for trial in range(5000):
            lam = float(lam_rng.uniform(0.0, 4.0))
            u = _rng.keyed_u01(7, trial, 13)
            expected = _rng.poisson_from_u01(lam, u)
            got = _kernels.poisson_keyed_scalar(np.uint64(7), trial, 13, lam)
            assert got == expected

    def test_goodness_of_fit(self):
        for lam in (0.05, 0.3, 1.0, 3.0, 9.5):
            draws = np.array(
                [_kernels.poisson_keyed_scalar(np.uint64(42), f, 0, lam) for f in range(40_000)]
            )
            kmax = int(stats.poisson.ppf(1 - 1e-6, lam)) + 1
            obs = np.bincount(np.minimum(draws, kmax), minlength=kmax + 1)
            pmf = stats.poisson.pmf(np.arange(kmax + 1), lam)
            pmf[kmax] = 1.0 - pmf[:kmax].sum()
            keep = pmf * len(draws) >= 5
            chi2 = float(np.sum((obs[keep] - len(draws) * pmf[keep]) ** 2 / (len(draws) * pmf[keep])))
            p = 1.0 - stats.chi2.cdf(chi2, keep.sum() - 1)
            assert p > 1e-4, f"lambda={lam}: chi2 GOF p={p}"

    def test_keying_is_stable(self):
        a = _kernels.poisson_keyed_scalar(np.uint64(1), 5, 9, 1.3)
        b = _kernels.poisson_keyed_scalar(np.uint64(1), 5, 9, 1.3)
        assert a == b

    def test_zero_rate(self):
        assert _kernels.poisson_keyed_scalar(np.uint64(1), 0, 0, 0.0) == 0


def _python_scan_reference(e_red, plan, mask, eta_ref, eta_bucket, seed_ref, seed_bucket, f0, kdim):
    """Direct per-sample replay of the scan kernel's algorithm."""
    up = fg.upsample_field(plan, e_red)
    nf, ny, nx = up.shape
    npx = ny * nx
    tallies = np.zeros((npx, kdim, kdim), dtype=np.int64)
    s1 = np.zeros(npx, dtype=np.int64)
    s12 = np.zeros(npx, dtype=np.int64)
    bucket = np.zeros(nf, dtype=np.int64)
    for fi in range(nf):
        intens = np.abs(up[fi]) ** 2
        blam = float((mask * intens).sum())
        nb = _rng.poisson_from_u01(eta_bucket * blam, _rng.keyed_u01(seed_bucket, f0 + fi, 0))
        bucket[fi] = nb
        nbc = min(nb, kdim - 1)
        for y in range(ny):
            for x in range(nx):
                pix = y * nx + x
                lam = eta_ref * float(intens[y, x])
                m = _rng.poisson_from_u01(lam, _rng.keyed_u01(seed_ref, f0 + fi, pix))
                tallies[pix, min(m, kdim - 1), nbc] += 1
                s1[pix] += m
                s12[pix] += m * nb
    return tallies, s1, s12, bucket


class TestScanChunk:
    @pytest.fixture()
    def setup(self):
        cfg = SourceConfig(nx=16, ny=16, grain_px=2.0, frames=40, coherence_frames=0.1, seed=3)
        plan = fg.make_field_plan(cfg)
        e = fg.synthesize_chunk(plan, 0, 40)
        mask = np.zeros((16, 16), dtype=np.float32)
        mask[4:12, 6:10] = 1.0
        return cfg, plan, e, mask

    def _run(self, plan, e, mask, same=True, threads=1, f0=0):
        kdim = 6
        nth = min(threads, numba.config.NUMBA_NUM_THREADS)
        numba.set_num_threads(nth)
        ny, nx = mask.shape
        tallies = np.zeros((nth, ny * nx, kdim, kdim), dtype=np.int64)
        s1 = np.zeros((nth, ny * nx), dtype=np.int64)
        s12 = np.zeros((nth, ny * nx), dtype=np.int64)
        bucket = np.zeros(e.shape[0], dtype=np.int32)
        ws = np.zeros((nth, ny, nx), dtype=np.float32)
        _kernels.scan_chunk(
            e, e, same, plan.ratio_y, plan.ratio_x,
            plan.kappa_y.astype(np.float64), plan.kappa_x.astype(np.float64),
            mask, 0.4, 0.02, 0.0, 0.0,
            np.uint64(111), np.uint64(222), f0, kdim,
            tallies, s1, s12, bucket, ws,
        )
        return tallies.sum(axis=0), s1.sum(axis=0), s12.sum(axis=0), bucket

    def test_matches_python_reference(self, setup):
        cfg, plan, e, mask = setup
        got = self._run(plan, e, mask)
        exp = _python_scan_reference(e, plan, mask, 0.4, 0.02, 111, 222, 0, 6)
        # float32 vs float64 intensity rounding can flip a rare draw; the
        # fixed seed here yields exact agreement
        assert np.array_equal(got[0], exp[0])
        assert np.array_equal(got[1], exp[1])
        assert np.array_equal(got[2], exp[2])
        assert np.array_equal(got[3].astype(np.int64), exp[3])

    def test_thread_count_invariance(self, setup):
        cfg, plan, e, mask = setup
        a = self._run(plan, e, mask, threads=1)
        b = self._run(plan, e, mask, threads=2)
        numba.set_num_threads(numba.config.NUMBA_NUM_THREADS)
        for x, y in zip(a, b):
            assert np.array_equal(x, y)

    def test_frame_offset_changes_draws(self, setup):
        cfg, plan, e, mask = setup
        a = self._run(plan, e, mask, f0=0)
        b = self._run(plan, e, mask, f0=40)
        assert not np.array_equal(a[0], b[0])

    def test_tally_totals(self, setup):
        cfg, plan, e, mask = setup
        tallies, s1, s12, bucket = self._run(plan, e, mask)
        assert tallies.sum(axis=(1, 2)).tolist() == [40] * (16 * 16)
