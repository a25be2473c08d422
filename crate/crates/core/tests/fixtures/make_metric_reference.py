"""Reference SSIM/PSNR values from scikit-image for deterministic image pairs.

The pairs are rebuilt bit-for-bit by tests/metric_oracles.rs from the same
64-bit LCG, so only the scores are stored.
"""
import json
from pathlib import Path

import numpy as np
from skimage.metrics import peak_signal_noise_ratio, structural_similarity

MASK = (1 << 64) - 1
C, H, W = 3, 24, 20
PAIRS = 50


class Lcg:
    def __init__(self, seed):
        self.state = seed & MASK

    def byte(self):
        self.state = (self.state * 6364136223846793005 + 1442695040888963407) & MASK
        return self.state >> 56


def pair(index):
    rng = Lcg(1000 + index)
    amp = 1 + index % 8
    a = np.array([rng.byte() for _ in range(C * H * W)], dtype=np.int64)
    noise = np.array([rng.byte() for _ in range(C * H * W)], dtype=np.int64)
    b = np.clip(a + (noise - 128) * amp // 8, 0, 255)
    return (a / 256.0).reshape(C, H, W), (b / 256.0).reshape(C, H, W)


def main():
    rows = []
    for i in range(PAIRS):
        a, b = pair(i)
        rows.append(
            {
                "ssim": structural_similarity(
                    a, b, channel_axis=0, gaussian_weights=True, sigma=1.5,
                    use_sample_covariance=False, data_range=1.0,
                ),
                "psnr": peak_signal_noise_ratio(a, b, data_range=1.0),
            }
        )
    out = Path(__file__).with_name("metric_reference.json")
    out.write_text(json.dumps({"shape": [C, H, W], "pairs": rows}, indent=1) + "\n")


if __name__ == "__main__":
    main()
