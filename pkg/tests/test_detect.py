import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zpgi import analytic as an
from zpgi import detect
from zpgi.detect import CountSeries, CsvFormatError, DetectorConfig, ObjectMask
from zpgi.fieldgen import FieldStack, SourceConfig, generate_stack


def const_stack(value, frames=4, ny=3, nx=3):
    cfg = SourceConfig(nx=nx, ny=ny, grain_px=1.0, frames=frames, coherence_frames=0.1)
    field = np.full((frames, ny, nx), value, dtype=np.complex128)
    return FieldStack(field=field, config=cfg)


class TestObjectMask:
    def test_clamps(self):
        m = ObjectMask(values=np.array([[-1.0, 0.5], [2.0, 1.0]]))
        assert m.values.min() == 0.0 and m.values.max() == 1.0

    def test_letter_t_has_both_regions(self):
        m = detect.letter_t_mask(64, 64)
        n_in = m.n_transmitting()
        assert 0 < n_in < 64 * 64

    def test_pgm_round_trip(self, tmp_path):
        from zpgi.pgm import write_pgm16

        m = detect.letter_t_mask(32, 32)
        p = tmp_path / "mask.pgm"
        write_pgm16(p, m.values)
        m2 = ObjectMask.from_pgm(p)
        assert np.allclose(m2.values, m.values, atol=1e-4)

    def test_p2_ascii(self, tmp_path):
        p = tmp_path / "m.pgm"
        p.write_text("P2\n# comment\n2 2\n4\n0 2\n4 4\n")
        m = ObjectMask.from_pgm(p)
        assert np.allclose(m.values, [[0.0, 0.5], [1.0, 1.0]])


class TestDetectorConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            DetectorConfig(eta_ref=-1.0, eta_bucket=1.0)
        with pytest.raises(ValueError):
            DetectorConfig(eta_ref=1.0, eta_bucket=1.0, bin_width=0)


class TestIntensities:
    def test_point_zero_field(self):
        tr = detect.point_intensity(const_stack(0.0), (1, 1))
        assert np.all(tr == 0.0)

    def test_point_unit_field(self):
        tr = detect.point_intensity(const_stack(1.0), (0, 2))
        assert np.allclose(tr, 1.0)

    def test_point_out_of_grid(self):
        with pytest.raises(ValueError):
            detect.point_intensity(const_stack(1.0), (5, 0))

    def test_point_lln(self):
        cfg = SourceConfig(nx=1, ny=1, grain_px=1.0, frames=1_000_000, coherence_frames=1e-6, seed=2)
        tr = detect.point_intensity(generate_stack(cfg), (0, 0))
        assert abs(tr.mean() - 1.0) < 0.005

    def test_bucket_opaque(self):
        mask = ObjectMask(values=np.zeros((3, 3)))
        tr = detect.bucket_intensity(const_stack(1.0), mask)
        assert np.all(tr == 0.0)

    def test_bucket_single_pixel_equals_point(self):
        cfg = SourceConfig(nx=4, ny=4, grain_px=1.0, frames=50, coherence_frames=1e-6, seed=4)
        stack = generate_stack(cfg)
        v = np.zeros((4, 4))
        v[2, 1] = 1.0
        tr = detect.bucket_intensity(stack, ObjectMask(values=v))
        assert np.allclose(tr, detect.point_intensity(stack, (2, 1)))

    def test_bucket_all_pass_constant(self):
        tr = detect.bucket_intensity(const_stack(1.0), ObjectMask(values=np.ones((3, 3))))
        assert np.allclose(tr, 9.0)

    def test_bucket_dim_mismatch(self):
        with pytest.raises(ValueError):
            detect.bucket_intensity(const_stack(1.0), ObjectMask(values=np.ones((2, 2))))


class TestSampleCounts:
    def test_poisson_moments_constant_trace(self):
        trace = np.ones(1_000_000)
        s = detect.sample_counts(trace, eta=1.0, seed=10)
        mean = s.counts.mean()
        fano = s.counts.var() / mean
        assert abs(mean - 1.0) <= 0.003
        assert abs(fano - 1.0) <= 0.01

    def test_bose_einstein_from_exponential_intensity(self):
        # one independent speckle frame per bin at nbar = 1: thermal counting
        n = 1_000_000
        rng = np.random.default_rng(11)
        trace = rng.exponential(1.0, n)
        s = detect.sample_counts(trace, eta=1.0, seed=12)
        for m, pm in ((0, 0.5), (1, 0.25)):
            phat = np.mean(s.counts == m)
            se = np.sqrt(pm * (1 - pm) / n)
            assert abs(phat - pm) <= 3 * se

    def test_fano_thermal_vs_long_bins(self):
        # exponential intensity per bin: Fano = 1 + nbar; pooling many
        # independent frames per bin drives Fano back toward 1
        n = 400_000
        rng = np.random.default_rng(13)
        trace = rng.exponential(1.0, n)
        s1 = detect.sample_counts(trace, eta=1.0, seed=14)
        fano1 = s1.counts.var() / s1.counts.mean()
        assert abs(fano1 - 2.0) < 0.05
        sblk = detect.sample_counts(trace, eta=0.01, bin_width=100, seed=15)
        fano_blk = sblk.counts.var() / sblk.counts.mean()
        assert abs(fano_blk - 1.0) < 0.1

    def test_eta_zero(self):
        s = detect.sample_counts(np.ones(100), eta=0.0, seed=1)
        assert np.all(s.counts == 0)

    def test_deterministic(self):
        tr = np.linspace(0, 2, 1000)
        a = detect.sample_counts(tr, 0.7, seed=5)
        b = detect.sample_counts(tr, 0.7, seed=5)
        c = detect.sample_counts(tr, 0.7, seed=6)
        assert np.array_equal(a.counts, b.counts)
        assert not np.array_equal(a.counts, c.counts)

    def test_mean_scales_with_bin_width(self):
        tr = np.ones(100_000)
        s1 = detect.sample_counts(tr, 0.3, bin_width=1, seed=7)
        s5 = detect.sample_counts(tr, 0.3, bin_width=5, seed=8)
        assert abs(s5.counts.mean() / s1.counts.mean() - 5.0) < 0.25

    def test_dark_rate(self):
        s = detect.sample_counts(np.zeros(200_000), 1.0, seed=9, dark_rate=0.25)
        assert abs(s.counts.mean() - 0.25) < 0.01


class TestRebin:
    def test_examples(self):
        s = CountSeries(counts=np.array([1, 0, 2, 1]), channel="a", bin_width=1)
        r = detect.rebin(s, 2)
        assert r.counts.tolist() == [1, 3]
        assert r.bin_width == 2
        assert detect.rebin(s, 1) is s

    def test_k_zero_rejected(self):
        s = CountSeries(counts=np.array([1, 2]))
        with pytest.raises(ValueError):
            detect.rebin(s, 0)

    @settings(max_examples=50, deadline=None)
    @given(
        counts=st.lists(st.integers(0, 20), min_size=1, max_size=200),
        k=st.integers(1, 17),
    )
    def test_conserves_counts(self, counts, k):
        s = CountSeries(counts=np.array(counts, dtype=np.int64))
        r = detect.rebin(s, k)
        n = (len(counts) // k) * k
        assert r.counts.sum() == sum(counts[:n])
        assert len(r) == len(counts) // k


class TestCsv:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        a = CountSeries(counts=rng.poisson(1.0, 500), channel="ch1")
        b = CountSeries(counts=rng.poisson(0.5, 500), channel="ch2")
        p = tmp_path / "counts.csv"
        detect.write_counts_csv(p, a, b)
        a2, b2 = detect.read_counts_csv(p)
        assert np.array_equal(a.counts, a2.counts)
        assert np.array_equal(b.counts, b2.counts)

    def test_malformed_row_names_line(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("bin_index,count_ch1,count_ch2\n0,1,2\n1,x,0\n")
        with pytest.raises(CsvFormatError, match="line 3"):
            detect.read_counts_csv(p)

    def test_bad_header(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("a,b\n0,1\n")
        with pytest.raises(CsvFormatError):
            detect.read_counts_csv(p)

    def test_timestamps_binning(self, tmp_path):
        p = tmp_path / "ts.csv"
        p.write_text(
            "channel,timestamp_ns\n"
            "1,50\n1,150\n1,160\n2,340\n2,10\n"
        )
        chans = detect.read_timestamps_csv(p, bin_width_ns=100)
        assert sorted(chans) == ["1", "2"]
        assert chans["1"].counts.tolist() == [1, 2, 0, 0]
        assert chans["2"].counts.tolist() == [1, 0, 0, 1]

    def test_timestamps_malformed(self, tmp_path):
        p = tmp_path / "ts.csv"
        p.write_text("channel,timestamp_ns\n1,abc\n")
        with pytest.raises(CsvFormatError, match="line 2"):
            detect.read_timestamps_csv(p, 10)
