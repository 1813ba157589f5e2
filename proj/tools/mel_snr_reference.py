#!/usr/bin/env python3
# Copyright 2026 The mbdiff Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Straight-line Mel-SNR reference with a naive DFT.

Prints the L/M/H/A report for the golden noisy pair used by the metric
tests. The pair is built from closed-form sines plus noise from a 64-bit
LCG so that the C++ tests can rebuild it bit for bit.
"""

import math

import numpy as np

SR = 16000
N = 8000
N_FFT = 512
HOP = 128
N_MELS = 80
EPS = 1e-8
CLAMP = 25.0


def lcg_gaussian(n, seed):
    """Sum of 12 LCG uniforms minus 6 (Irwin-Hall), one value per sample."""
    mask = (1 << 64) - 1
    state = seed
    out = []
    for _ in range(n):
        acc = 0.0
        for _ in range(12):
            state = (state * 6364136223846793005 + 1442695040888963407) & mask
            acc += (state >> 11) * 2.0**-53
        out.append(acc - 6.0)
    return out


def golden_pair():
    ref = []
    for k in range(N):
        t = k / SR
        ref.append(0.6 * math.sin(2 * math.pi * 220.0 * t)
                   + 0.3 * math.sin(2 * math.pi * 1375.0 * t + 0.5)
                   + 0.15 * math.sin(2 * math.pi * 3150.0 * t + 1.0))
    noise = lcg_gaussian(N, 2026)
    p_ref = sum(v * v for v in ref) / N
    p_noise = sum(v * v for v in noise) / N
    g = math.sqrt(0.1 * p_ref / p_noise)
    rec = [r + g * v for r, v in zip(ref, noise)]
    return np.array(ref), np.array(rec)


def hz_to_mel(f):
    return 2595.0 * math.log10(1.0 + f / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (m / 2595.0) - 1.0)


def mel_matrix():
    n_bins = N_FFT // 2 + 1
    top = hz_to_mel(SR / 2)
    edges = [mel_to_hz(top * i / (N_MELS + 1)) for i in range(N_MELS + 2)]
    fb = np.zeros((N_MELS, n_bins))
    for m in range(N_MELS):
        lo, c, hi = edges[m], edges[m + 1], edges[m + 2]
        for k in range(n_bins):
            f = k * SR / N_FFT
            if lo < f < hi:
                w = (f - lo) / (c - lo) if f <= c else (hi - f) / (hi - c)
                fb[m, k] = w * 2.0 / (hi - lo)
    return fb


def mel_power(x, fb):
    half = N_FFT // 2
    n = len(x)
    padded = np.array([x[abs(i - half) if i - half < n else 2 * (n - 1) - (i - half)]
                       for i in range(n + 2 * half)])
    window = np.array([0.5 - 0.5 * math.cos(2 * math.pi * i / N_FFT) for i in range(N_FFT)])
    k = np.arange(N_FFT // 2 + 1)[:, None]
    j = np.arange(N_FFT)[None, :]
    cos_m = np.cos(2 * np.pi * k * j / N_FFT)
    sin_m = np.sin(2 * np.pi * k * j / N_FFT)
    n_frames = 1 + n // HOP
    out = np.zeros((N_MELS, n_frames))
    for f in range(n_frames):
        frame = padded[f * HOP:f * HOP + N_FFT] * window
        re = cos_m @ frame
        im = sin_m @ frame
        out[:, f] = fb @ (re * re + im * im)
    return out


def mel_snr(ref, rec):
    scale = 1.0 / (EPS + math.sqrt(np.mean(ref * ref)))
    fb = mel_matrix()
    z = mel_power(ref * scale, fb)
    zh = mel_power(rec * scale, fb)
    dist = np.maximum((np.sqrt(z) - np.sqrt(zh)) ** 2, EPS)
    s = np.clip(10 * np.log10(np.maximum(z, EPS) / dist), -CLAMP, CLAMP)
    per_bin = s.mean(axis=1)
    low, mid = 27, 54
    bands = [per_bin[:low].mean(), per_bin[low:mid].mean(), per_bin[mid:].mean()]
    return bands + [sum(bands) / 3]


if __name__ == "__main__":
    ref, rec = golden_pair()
    names = ["Mel-SNR-L", "Mel-SNR-M", "Mel-SNR-H", "Mel-SNR-A"]
    for name, v in zip(names, mel_snr(ref, rec)):
        print(f"{name} {v:.6f}")
