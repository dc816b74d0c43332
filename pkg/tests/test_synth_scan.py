"""Synthetic dataset generation: determinism, noise statistics, jitter."""

import math

import numpy as np
import pytest

from ionoptics.rabi_model import BeamProfileParams, SpamModel, apply_spam, p_excited
from ionoptics.synth_scan import SynthConfig, default_scan_grid, generate, position_jitter

TWO_PI = 2.0 * math.pi


def small_config(beam_a, beam_b=None, **kw):
    truth = (beam_a,) if beam_b is None else (beam_a, beam_b)
    defaults = dict(
        truth=truth,
        positions_um=(-2.0, -0.5, 1.0, 2.5),
        durations_s=(0.0, 1e-4, 2e-4, 3e-4, 5e-4),
        shots=200,
        rng_seed=11,
    )
    defaults.update(kw)
    return SynthConfig(**defaults)


class TestDeterminism:
    def test_same_config_same_dataset(self, beam_a):
        cfg = small_config(beam_a)
        assert generate(cfg) == generate(cfg)

    def test_seed_changes_data(self, beam_a):
        a = generate(small_config(beam_a, rng_seed=1))[0]
        b = generate(small_config(beam_a, rng_seed=2))[0]
        assert a != b

    def test_record_draw_reconstructable_from_indices(self, beam_a):
        # counter-based keying: record (beam k, position i, duration j)
        # depends only on (seed, k, i, j)
        cfg = small_config(beam_a)
        ds = generate(cfg)[0]
        i, j = 2, 3
        rec = ds.records[i * len(cfg.durations_s) + j]
        p = float(apply_spam(
            p_excited(beam_a, cfg.positions_um[i], cfg.durations_s[j]), cfg.spam))
        key = np.array([cfg.rng_seed, (0 << 40) | (i << 20) | j], dtype=np.uint64)
        rng = np.random.Generator(np.random.Philox(key=key))
        assert rec.p1 == rng.binomial(cfg.shots, p) / cfg.shots

    def test_beams_use_disjoint_streams(self, beam_a, beam_b):
        # same truth for both beams: identical probabilities must still get
        # independent draws
        cfg = small_config(beam_a, beam_a)
        ds_a, ds_b = generate(cfg)
        assert [r.p1 for r in ds_a.records] != [r.p1 for r in ds_b.records]


class TestContent:
    def test_analytic_mode_is_exact_model(self, beam_a):
        cfg = small_config(beam_a, analytic=True)
        ds = generate(cfg)[0]
        for rec in ds.records:
            expected = float(apply_spam(
                p_excited(beam_a, rec.position_um, rec.duration_s), cfg.spam))
            assert rec.p1 == pytest.approx(expected, abs=1e-15)

    def test_two_beam_mode_emits_two_labeled_datasets(self, beam_a, beam_b):
        datasets = generate(small_config(beam_a, beam_b))
        assert [ds.beam_label for ds in datasets] == ["A", "B"]
        grid = [(r.position_um, r.duration_s) for r in datasets[0].records]
        assert grid == [(r.position_um, r.duration_s) for r in datasets[1].records]

    def test_p1_quantized_to_shots(self, beam_a):
        cfg = small_config(beam_a, shots=50)
        for rec in generate(cfg)[0].records:
            assert rec.shots == 50
            assert (rec.p1 * 50) == pytest.approx(round(rec.p1 * 50), abs=1e-9)

    def test_empirical_mean_matches_model(self, beam_a):
        # across seeds, per-record means converge to the model probability
        n_seeds = 300
        cfg0 = small_config(beam_a)
        sums = np.zeros(len(cfg0.positions_um) * len(cfg0.durations_s))
        for seed in range(n_seeds):
            ds = generate(small_config(beam_a, rng_seed=seed))[0]
            sums += [r.p1 for r in ds.records]
        means = sums / n_seeds
        for idx, rec in enumerate(generate(small_config(beam_a, analytic=True))[0].records):
            p = rec.p1
            se = math.sqrt(max(p * (1 - p), 1e-6) / (200 * n_seeds))
            assert abs(means[idx] - p) < 5 * se


class TestValidation:
    def test_truth_count(self, beam_a, beam_b):
        with pytest.raises(ValueError):
            SynthConfig(truth=(), positions_um=(0.0, 1.0), durations_s=(0.0, 1e-4))
        with pytest.raises(ValueError):
            SynthConfig(truth=(beam_a, beam_b, beam_a),
                        positions_um=(0.0, 1.0), durations_s=(0.0, 1e-4))

    def test_single_beam_without_tuple_accepted(self, beam_a):
        cfg = SynthConfig(truth=beam_a, positions_um=(0.0, 1.0),
                          durations_s=(0.0, 1e-4))
        assert cfg.truth == (beam_a,)

    def test_grids_must_increase(self, beam_a):
        with pytest.raises(ValueError):
            small_config(beam_a, positions_um=(0.0, 0.0, 1.0))
        with pytest.raises(ValueError):
            small_config(beam_a, durations_s=(1e-4, 0.5e-4))

    def test_shots_positive(self, beam_a):
        with pytest.raises(ValueError):
            small_config(beam_a, shots=0)

    def test_seed_domain(self, beam_a):
        with pytest.raises(ValueError):
            small_config(beam_a, rng_seed=-1)


class TestJitter:
    def test_offsets_bounded_and_probabilities_untouched(self, beam_a):
        ds = generate(small_config(beam_a))[0]
        blurred = position_jitter(ds, 0.5, rng_seed=4)
        assert blurred.position_resolution_um == 0.5
        for before, after in zip(ds.records, blurred.records):
            assert abs(after.position_um - before.position_um) <= 0.25
            assert after.p1 == before.p1
            assert after.duration_s == before.duration_s

    def test_deterministic(self, beam_a):
        ds = generate(small_config(beam_a))[0]
        assert position_jitter(ds, 0.5, rng_seed=4) == position_jitter(ds, 0.5, rng_seed=4)
        assert position_jitter(ds, 0.5, rng_seed=4) != position_jitter(ds, 0.5, rng_seed=5)

    def test_zero_resolution_identity(self, beam_a):
        ds = generate(small_config(beam_a))[0]
        blurred = position_jitter(ds, 0.0, rng_seed=4)
        assert [r.position_um for r in blurred.records] == [
            r.position_um for r in ds.records]
        assert blurred.position_resolution_um == 0.0

    def test_negative_resolution_rejected(self, beam_a):
        ds = generate(small_config(beam_a))[0]
        with pytest.raises(ValueError):
            position_jitter(ds, -0.1)


class TestDefaultGrid:
    def test_single_beam_span_and_counts(self, beam_a):
        positions, durations = default_scan_grid(beam_a)
        assert len(positions) == 61
        assert len(durations) == 21
        assert positions[0] == pytest.approx(-3 * 1.86)
        assert positions[-1] == pytest.approx(3 * 1.86)
        assert durations[0] == 0.0
        # three full oscillation periods of sin^2(Omega t / 2)
        assert durations[-1] == pytest.approx(3 * TWO_PI / beam_a.omega0, rel=1e-12)

    def test_two_beam_span_covers_both(self, beam_a, beam_b):
        positions, durations = default_scan_grid((beam_a, beam_b))
        assert positions[0] == pytest.approx(0.0 - 3 * 1.86)
        assert positions[-1] == pytest.approx(4.31 + 3 * 1.88)
        # slowest beam sets the duration span
        assert durations[-1] == pytest.approx(3 * TWO_PI / beam_a.omega0, rel=1e-12)
        # step stays at or below the narrowest width / 10
        step = positions[1] - positions[0]
        assert step <= 1.86 / 10 + 1e-12

    def test_feeds_generate(self, beam_a):
        positions, durations = default_scan_grid(beam_a, 11, 5)
        cfg = SynthConfig(truth=beam_a, positions_um=positions, durations_s=durations)
        ds = generate(cfg)[0]
        assert len(ds.records) == len(positions) * len(durations)
