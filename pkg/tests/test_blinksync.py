from fractions import Fraction

import numpy as np
import pytest

from blinkpose import blinksync, synthgen
from blinkpose.blinksync import BlinkConfig, FrameLabel, PhaseEstimate
from blinkpose.errors import DemuxError, InputError
from blinkpose.frameio import FrameSource

from conftest import make_sweep_scene


def blank_source(count, fps=240.0):
    return FrameSource.from_array(np.zeros((count, 4, 4), dtype=np.uint8), fps)


class TestBlinkConfig:
    def test_default_period_is_eight_frames(self):
        assert BlinkConfig().period_frames == 8

    def test_period_must_round_to_integer(self):
        # 20 ms at 240 fps -> 4.8 frames, 4% off the nearest integer
        with pytest.raises(InputError, match="whole frame"):
            BlinkConfig(on_ms=10.0, off_ms=10.0, fps=240.0)

    def test_period_must_be_at_least_three(self):
        with pytest.raises(InputError, match="at least 3"):
            BlinkConfig(on_ms=4.0, off_ms=4.0, fps=250.0)

    def test_durations_positive(self):
        with pytest.raises(InputError):
            BlinkConfig(on_ms=0.0)
        with pytest.raises(InputError):
            BlinkConfig(off_ms=-1.0)


class TestBlinkSchedule:
    def test_default_phase_zero(self):
        sched = blinksync.blink_schedule(BlinkConfig(), 0.0)
        assert sched == [1.0, 1.0, 0.4, 0.0, 0.0, 0.0, 0.0, 0.0]

    def test_aligned_single_frame_window(self):
        # one frame interval of light, phase on the grid: identity pattern
        cfg = BlinkConfig(on_ms=4.0, off_ms=28.0, fps=250.0)
        assert blinksync.blink_schedule(cfg, 0.0) == [1.0] + [0.0] * 7

    def test_wrap_around_cycle_boundary(self):
        cfg = BlinkConfig()
        sched = blinksync.blink_schedule(cfg, 7 * Fraction(1000, 240))
        assert sched[7] == 1.0 and sched[0] == 1.0
        assert sched[1] == pytest.approx(0.4)
        assert all(f == 0.0 for f in sched[2:7])

    def test_phase_out_of_range(self):
        with pytest.raises(InputError):
            blinksync.blink_schedule(BlinkConfig(), 40.0)
        with pytest.raises(InputError):
            blinksync.blink_schedule(BlinkConfig(), -0.5)

    def test_sweep_counts(self):
        # coarse sweep here; the acceptance suite runs the 0.01 ms version
        cfg = BlinkConfig()
        for k in range(0, 3333, 10):
            sched = blinksync.blink_schedule(cfg, Fraction(k, 100))
            assert sum(1 for f in sched if f == 1.0) in (1, 2)
            assert sum(1 for f in sched if f > 0.0) in (3, 4)


class TestEstimatePhase:
    def make_signal(self, offset, cycles=4, P=8):
        sig = np.zeros(cycles * P)
        for k in range(cycles):
            sig[k * P + offset % P] = 1.0
            sig[k * P + (offset + 1) % P] = 1.0
        return sig

    def test_pattern_at_zero(self):
        est = blinksync.estimate_phase(self.make_signal(0), BlinkConfig())
        assert est.offset == 0
        assert 0 <= est.confidence <= 1

    def test_shift_equivariance(self):
        base = blinksync.estimate_phase(self.make_signal(0), BlinkConfig())
        shifted = blinksync.estimate_phase(self.make_signal(3), BlinkConfig())
        assert (base.offset, shifted.offset) == (0, 3)

    def test_signal_too_short(self):
        with pytest.raises(InputError, match="too short"):
            blinksync.estimate_phase(np.zeros(15), BlinkConfig())

    def test_noiseless_synthetic_exact_for_every_offset(self):
        for offset in range(8):
            src, _ = synthgen.simulate(make_sweep_scene(offset, 0.0))
            sig = blinksync.brightness_signal(src)
            est = blinksync.estimate_phase(sig, BlinkConfig())
            assert est.offset == offset


class TestBrightnessSignal:
    def test_alternating_extremes(self):
        frames = np.zeros((6, 4, 4), dtype=np.uint8)
        frames[1::2] = 255
        sig = blinksync.brightness_signal(FrameSource.from_array(frames, 240.0))
        assert list(sig) == [0.0, 1.0, 0.0, 1.0, 0.0, 1.0]

    def test_constant_sequence_normalizes_to_zero(self):
        frames = np.full((4, 4, 4), 128, dtype=np.uint8)
        sig = blinksync.brightness_signal(FrameSource.from_array(frames, 240.0))
        assert np.all(sig == 0.0)

    def test_percentile_validation(self):
        src = blank_source(4)
        with pytest.raises(InputError):
            blinksync.brightness_signal(src, percentile=0.0)

    def test_on_frames_separate_from_off_frames_at_noise_2(self):
        src, truth = synthgen.simulate(make_sweep_scene(0, 2.0))
        sig = blinksync.brightness_signal(src)
        on = [s for s, f in zip(sig, truth.on_fraction) if f >= 0.99]
        off = [s for s, f in zip(sig, truth.on_fraction) if f <= 0.01]
        assert min(on) - max(off) > 0.5


class TestClassifyFrames:
    def test_matches_schedule_example(self):
        cfg = BlinkConfig()
        labels = blinksync.classify_frames([0.0] * 8, PhaseEstimate(0, 1.0), cfg)
        expected = [FrameLabel.ON, FrameLabel.ON, FrameLabel.TRANSITION] + [FrameLabel.OFF] * 5
        assert labels == expected

    def test_never_on_config_labels_everything_off(self):
        cfg = BlinkConfig(on_ms=0.001, off_ms=33.332, fps=240.0)
        labels = blinksync.classify_frames([0.0] * 16, PhaseEstimate(0, 1.0), cfg)
        assert all(l is FrameLabel.OFF for l in labels)

    def test_every_cycle_has_on_and_off_for_every_offset(self):
        cfg = BlinkConfig()
        for offset in range(8):
            labels = blinksync.classify_frames([0.0] * 8, PhaseEstimate(offset, 1.0), cfg)
            assert labels.count(FrameLabel.ON) >= 1
            assert labels.count(FrameLabel.OFF) >= 4

    def test_invalid_offset(self):
        with pytest.raises(InputError):
            blinksync.classify_frames([0.0] * 8, PhaseEstimate(8, 1.0), BlinkConfig())


def craft_labels(offset, cycles, P=8):
    one_cycle = [FrameLabel.OFF] * P
    one_cycle[offset % P] = FrameLabel.ON
    one_cycle[(offset + 1) % P] = FrameLabel.ON
    one_cycle[(offset + 2) % P] = FrameLabel.TRANSITION
    return one_cycle * cycles


def craft_labels_single_on(cycles, P=8):
    """Off-grid phase pattern: one fully-on frame per cycle at slot 1."""
    one_cycle = [FrameLabel.OFF] * P
    one_cycle[1] = FrameLabel.ON
    one_cycle[2] = FrameLabel.TRANSITION
    return one_cycle * cycles


class TestDemux:
    def test_counts_and_effective_fps(self):
        src = blank_source(160)
        cfg = BlinkConfig()
        labels = craft_labels_single_on(20)
        sig = np.tile([0.5, 1.0, 0.4, 0.0, 0.01, 0.02, 0.03, 0.04], 20)
        dm = blinksync.demux(src, labels, sig, cfg, PhaseEstimate(1, 1.0))
        assert len(dm.on_indices) == len(dm.off_indices) == 20
        assert dm.effective_fps == 30.0
        assert dm.on_indices[0] == 1 and dm.off_indices[0] == 3
        assert dm.skew_frames[0] == 2

    def test_adjacent_picks_skew_time_is_8_33_ms(self):
        src = blank_source(16)
        cfg = BlinkConfig()
        labels = craft_labels_single_on(2)
        sig = np.tile([0.5, 1.0, 0.4, 0.0, 0.01, 0.02, 0.03, 0.04], 2)
        dm = blinksync.demux(src, labels, sig, cfg, PhaseEstimate(1, 1.0))
        assert dm.skew_frames[0] == 2
        assert dm.skew_frames[0] / dm.source_fps * 1000 == pytest.approx(8.3333, abs=1e-3)

    def test_trailing_incomplete_cycle_dropped(self):
        src = blank_source(20)
        cfg = BlinkConfig()
        labels = craft_labels(0, 2) + [FrameLabel.OFF] * 4
        sig = np.zeros(20)
        sig[0] = sig[1] = sig[8] = sig[9] = 1.0
        dm = blinksync.demux(src, labels, sig, cfg, PhaseEstimate(0, 1.0))
        assert len(dm.on_indices) == 2

    def test_cycle_without_on_is_an_error_naming_the_cycle(self):
        src = blank_source(16)
        cfg = BlinkConfig()
        labels = craft_labels(0, 1) + [FrameLabel.TRANSITION] * 8
        with pytest.raises(DemuxError, match="cycle 1"):
            blinksync.demux(src, labels, np.zeros(16), cfg, PhaseEstimate(0, 1.0))

    def test_no_complete_cycles(self):
        src = blank_source(7)
        with pytest.raises(DemuxError, match="no complete cycles"):
            blinksync.demux(src, [FrameLabel.OFF] * 7, np.zeros(7), BlinkConfig(), PhaseEstimate(0, 1.0))

    def test_labels_length_mismatch(self):
        with pytest.raises(InputError):
            blinksync.demux(blank_source(16), [FrameLabel.OFF] * 8, np.zeros(8), BlinkConfig(), PhaseEstimate(0, 1.0))

    def test_picks_lie_within_their_cycle_and_have_right_labels(self, demuxed_default):
        src, truth, sig, phase, labels, dm = demuxed_default
        P = dm.period_frames
        for k, (on, off) in enumerate(zip(dm.on_indices, dm.off_indices)):
            assert k * P <= on < (k + 1) * P
            assert k * P <= off < (k + 1) * P
            assert labels[on] is FrameLabel.ON
            assert labels[off] is FrameLabel.OFF

    def test_cycle_count_invariant_on_default_scene(self, demuxed_default):
        src, truth, sig, phase, labels, dm = demuxed_default
        assert len(dm.on_indices) == src.count // dm.period_frames == 20

    def test_skew_bound_on_synthetic_scenes(self):
        bc = BlinkConfig()
        for offset in (0, 3, 5, 6):
            for sigma in (0.0, 4.0):
                src, _ = synthgen.simulate(make_sweep_scene(offset, sigma))
                sig = blinksync.brightness_signal(src)
                phase = blinksync.estimate_phase(sig, bc)
                labels = blinksync.classify_frames(sig, phase, bc)
                dm = blinksync.demux(src, labels, sig, bc, phase)
                assert max(dm.skew_frames) <= 4
                assert max(dm.skew_frames) <= dm.period_frames - 1

    def test_json_round_trip(self, demuxed_default):
        *_, dm = demuxed_default
        back = blinksync.DemuxResult.from_json_dict(dm.to_json_dict())
        assert back == dm


class TestPhaseDrift:
    def test_clean_signal_reports_no_drift(self, demuxed_default):
        src, truth, sig, phase, labels, dm = demuxed_default
        assert blinksync.check_phase_drift(sig, BlinkConfig(), phase.offset) is False

    def test_flipped_phase_reports_drift(self):
        cfg = BlinkConfig()
        first = np.tile([1.0, 1, 0.4, 0, 0, 0, 0, 0], 80)
        second = np.tile([0, 0, 0, 0, 1.0, 1, 0.4, 0], 80)
        sig = np.concatenate([first, second])
        assert blinksync.check_phase_drift(sig, cfg, 0) is True
