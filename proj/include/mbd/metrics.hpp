// Copyright 2026 The mbdiff Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mbd/audio.hpp"

namespace mbd {

struct MelConfig {
    int n_fft = 512;
    int hop = 128;
    int n_mels = 80;
    double fmin = 0.0;
    double fmax = 0.0;  // <= 0 means Nyquist
    double eps_floor = 1e-8;
    double clamp_db = 25.0;

    void validate() const;
};

// n_mels x n_frames power values, row-major by mel bin.
struct MelSpectrogram {
    int n_mels = 0;
    int n_frames = 0;
    std::vector<double> values;

    double at(int mel_bin, int frame) const { return values[static_cast<std::size_t>(mel_bin) * n_frames + frame]; }
};

// Triangular HTK-mel filters over rfft bins, each scaled by
// 2 / (f_right - f_left) so filters have equal area. Row-major
// n_mels x (n_fft / 2 + 1).
std::vector<double> mel_filter_matrix(int sample_rate, int n_fft, int n_mels, double fmin, double fmax);

// |rfft(frame * hann)|^2 for a fixed frame length. Owns its FFTW plan.
class PowerSpectrum {
public:
    explicit PowerSpectrum(int n_fft);
    ~PowerSpectrum();
    PowerSpectrum(const PowerSpectrum&) = delete;
    PowerSpectrum& operator=(const PowerSpectrum&) = delete;

    int n_fft() const { return n_fft_; }
    int n_bins() const { return n_fft_ / 2 + 1; }
    const std::vector<double>& window() const { return window_; }
    // frame.size() == n_fft; out.size() == n_bins.
    void compute(std::span<const double> frame, std::span<double> out);

private:
    struct Impl;
    int n_fft_;
    std::vector<double> window_;
    std::unique_ptr<Impl> impl_;
};

// Centered frames (reflect padding of n_fft/2), periodic Hann window,
// power spectrum through the mel filter matrix.
MelSpectrogram mel_power_spectrogram(const AudioSignal& x, const MelConfig& cfg = {});
MelSpectrogram mel_power_spectrogram(std::span<const double> x, int sample_rate, const MelConfig& cfg = {});

struct MelSnrReport {
    double snr_low = 0.0;
    double snr_mid = 0.0;
    double snr_high = 0.0;
    double snr_avg = 0.0;
};

// Mel bins [0, low_end) form L, [low_end, mid_end) M, the rest H.
// For 80 bins: 27 / 27 / 26.
struct MelThirds {
    int low_end;
    int mid_end;
};
MelThirds mel_thirds(int n_mels);

// Clamped per-bin SNR on mel spectrograms of ref and rec, both scaled by
// 1 / (eps + rms(ref)). Distortion is (sqrt z - sqrt zhat)^2 floored at
// eps_floor; the SNR is averaged over time, then over each mel third.
MelSnrReport mel_snr(const AudioSignal& ref, const AudioSignal& rec, const MelConfig& cfg = {});

// True when mel_snr(a ref, a rec) matches mel_snr(ref, rec) in every band
// within tol_db.
bool scale_invariance_check(const AudioSignal& ref, const AudioSignal& rec, double a, const MelConfig& cfg = {},
                            double tol_db = 1e-9);

}  // namespace mbd
