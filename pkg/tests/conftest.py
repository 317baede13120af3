import pytest

from blinkpose import blinksync, synthgen

FRAME_INTERVAL_MS = 1000.0 / 240.0


def make_sweep_scene(offset: int, noise_sigma: float, seed: int = 3) -> synthgen.SceneConfig:
    """Compact two-LED scene with the blink aligned to integer offset."""
    joints = {
        "left_knee": synthgen.JointScene(
            motion_x=synthgen.MotionAxis(center=80.0, amplitude=8.0, period_frames=320.0),
            motion_y=synthgen.MotionAxis(center=80.0, amplitude=5.0, period_frames=256.0),
        ),
        "right_knee": synthgen.JointScene(
            motion_x=synthgen.MotionAxis(center=180.0, amplitude=8.0, period_frames=320.0),
            motion_y=synthgen.MotionAxis(center=80.0, amplitude=5.0, period_frames=256.0),
        ),
    }
    return synthgen.SceneConfig(
        seed=seed,
        width=256,
        height=160,
        fps=240.0,
        duration_frames=160,
        blink=blinksync.BlinkConfig(),
        blink_phase_ms=offset * FRAME_INTERVAL_MS,
        noise_sigma=noise_sigma,
        background_level=20.0,
        joints=joints,
    )


@pytest.fixture(scope="session")
def default_sim():
    """Default 6-LED scene at noise sigma 4, shared across tests."""
    cfg = synthgen.default_scene(noise_sigma=4.0)
    src, truth = synthgen.simulate(cfg)
    return cfg, src, truth


@pytest.fixture(scope="session")
def demuxed_default(default_sim):
    cfg, src, truth = default_sim
    bc = blinksync.BlinkConfig()
    sig = blinksync.brightness_signal(src)
    phase = blinksync.estimate_phase(sig, bc)
    labels = blinksync.classify_frames(sig, phase, bc)
    dm = blinksync.demux(src, labels, sig, bc, phase)
    return src, truth, sig, phase, labels, dm
