"""blinkpose: ground-truth 2D joint trajectories from blinking-LED HFR video.

Core pipeline: load a frame manifest (frameio), recover the LED blink
phase and demultiplex on/off sequences (blinksync), extract LED keypoints
(leddetect), store and exchange keypoint series (groundtruth), evaluate
estimates against the truth (evalkit).  synthgen renders synthetic scenes
with exact truth for testing, service exposes the HTTP API, cli drives
everything.
"""

__version__ = "0.1.0"
