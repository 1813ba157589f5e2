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

#include "mbd/metrics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include "mbd/filterbank.hpp"

namespace mbd {

void MelConfig::validate() const {
    if (n_fft < 2) throw std::invalid_argument("MelConfig: n_fft must be >= 2");
    if (hop < 1 || hop > n_fft) throw std::invalid_argument("MelConfig: need 1 <= hop <= n_fft");
    if (n_mels < 3) throw std::invalid_argument("MelConfig: n_mels must be >= 3");
    if (!(eps_floor > 0.0)) throw std::invalid_argument("MelConfig: eps_floor must be positive");
    if (!(clamp_db > 0.0)) throw std::invalid_argument("MelConfig: clamp_db must be positive");
}

std::vector<double> mel_filter_matrix(int sample_rate, int n_fft, int n_mels, double fmin, double fmax) {
    if (fmax <= 0.0) fmax = 0.5 * sample_rate;
    if (!(fmin >= 0.0 && fmin < fmax)) throw std::invalid_argument("mel filters: need 0 <= fmin < fmax");
    const int n_bins = n_fft / 2 + 1;
    const double lo = mel(fmin);
    const double hi = mel(fmax);
    std::vector<double> edges(n_mels + 2);
    for (int i = 0; i < n_mels + 2; ++i) edges[i] = mel_inv(lo + (hi - lo) * i / (n_mels + 1));

    std::vector<double> fb(static_cast<std::size_t>(n_mels) * n_bins, 0.0);
    for (int m = 0; m < n_mels; ++m) {
        const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
        const double area = 2.0 / (right - left);
        for (int k = 0; k < n_bins; ++k) {
            const double f = static_cast<double>(k) * sample_rate / n_fft;
            const double rise = (f - left) / (center - left);
            const double fall = (right - f) / (right - center);
            fb[static_cast<std::size_t>(m) * n_bins + k] = std::max(0.0, std::min(rise, fall)) * area;
        }
    }
    return fb;
}

namespace {
// FFTW planning is not thread-safe.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

struct PowerSpectrum::Impl {
    double* in = nullptr;
    fftw_complex* out = nullptr;
    fftw_plan plan = nullptr;
};

PowerSpectrum::PowerSpectrum(int n_fft) : n_fft_(n_fft), window_(n_fft), impl_(std::make_unique<Impl>()) {
    if (n_fft < 2) throw std::invalid_argument("PowerSpectrum: n_fft must be >= 2");
    for (int i = 0; i < n_fft; ++i) window_[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n_fft);
    std::lock_guard lock(planner_mutex());
    impl_->in = fftw_alloc_real(n_fft);
    impl_->out = fftw_alloc_complex(n_fft / 2 + 1);
    impl_->plan = fftw_plan_dft_r2c_1d(n_fft, impl_->in, impl_->out, FFTW_ESTIMATE);
}

PowerSpectrum::~PowerSpectrum() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(impl_->plan);
    fftw_free(impl_->in);
    fftw_free(impl_->out);
}

void PowerSpectrum::compute(std::span<const double> frame, std::span<double> out) {
    if (frame.size() != static_cast<std::size_t>(n_fft_) || out.size() != static_cast<std::size_t>(n_bins())) {
        throw std::invalid_argument("PowerSpectrum: size mismatch");
    }
    for (int i = 0; i < n_fft_; ++i) impl_->in[i] = frame[i] * window_[i];
    fftw_execute(impl_->plan);
    for (int k = 0; k < n_bins(); ++k) {
        out[k] = impl_->out[k][0] * impl_->out[k][0] + impl_->out[k][1] * impl_->out[k][1];
    }
}

MelSpectrogram mel_power_spectrogram(std::span<const double> x, int sample_rate, const MelConfig& cfg) {
    cfg.validate();
    if (x.size() < static_cast<std::size_t>(cfg.n_fft)) {
        throw std::invalid_argument("mel spectrogram: signal shorter than one FFT frame");
    }
    const long n = static_cast<long>(x.size());
    const int half = cfg.n_fft / 2;
    std::vector<double> padded(x.size() + 2 * half);
    for (long i = 0; i < static_cast<long>(padded.size()); ++i) {
        long j = i - half;
        if (j < 0) j = -j;
        if (j >= n) j = 2 * (n - 1) - j;
        padded[i] = x[j];
    }

    PowerSpectrum fft(cfg.n_fft);
    const auto fb = mel_filter_matrix(sample_rate, cfg.n_fft, cfg.n_mels, cfg.fmin, cfg.fmax);
    const int n_bins = fft.n_bins();

    MelSpectrogram spec;
    spec.n_mels = cfg.n_mels;
    spec.n_frames = static_cast<int>(1 + x.size() / cfg.hop);
    spec.values.assign(static_cast<std::size_t>(spec.n_mels) * spec.n_frames, 0.0);
    std::vector<double> power(n_bins);
    for (int f = 0; f < spec.n_frames; ++f) {
        fft.compute(std::span(padded).subspan(static_cast<std::size_t>(f) * cfg.hop, cfg.n_fft), power);
        for (int m = 0; m < cfg.n_mels; ++m) {
            const double* row = fb.data() + static_cast<std::size_t>(m) * n_bins;
            double acc = 0.0;
            for (int k = 0; k < n_bins; ++k) acc += row[k] * power[k];
            spec.values[static_cast<std::size_t>(m) * spec.n_frames + f] = acc;
        }
    }
    return spec;
}

MelSpectrogram mel_power_spectrogram(const AudioSignal& x, const MelConfig& cfg) {
    return mel_power_spectrogram(x.samples(), x.sample_rate(), cfg);
}

MelThirds mel_thirds(int n_mels) {
    const int low = (n_mels + 2) / 3;
    const int mid = (n_mels + 1) / 3;
    return {low, low + mid};
}

MelSnrReport mel_snr(const AudioSignal& ref, const AudioSignal& rec, const MelConfig& cfg) {
    cfg.validate();
    if (ref.empty() || rec.empty()) throw std::invalid_argument("mel_snr: empty signal");
    if (ref.sample_rate() != rec.sample_rate()) throw std::invalid_argument("mel_snr: sample rate mismatch");
    std::size_t n = ref.size();
    if (rec.size() != n) {
        n = std::min(n, rec.size());
        warn("mel_snr: length mismatch (" + std::to_string(ref.size()) + " vs " + std::to_string(rec.size()) +
             "), cropping to " + std::to_string(n));
    }

    double energy = 0.0;
    for (std::size_t i = 0; i < n; ++i) energy += ref.samples()[i] * ref.samples()[i];
    const double scale = 1.0 / (cfg.eps_floor + std::sqrt(energy / static_cast<double>(n)));
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = ref.samples()[i] * scale;
        b[i] = rec.samples()[i] * scale;
    }
    const auto z = mel_power_spectrogram(a, ref.sample_rate(), cfg);
    const auto zhat = mel_power_spectrogram(b, ref.sample_rate(), cfg);

    std::vector<double> per_bin(cfg.n_mels, 0.0);
    for (int m = 0; m < cfg.n_mels; ++m) {
        double acc = 0.0;
        for (int f = 0; f < z.n_frames; ++f) {
            const double p = z.at(m, f);
            const double q = zhat.at(m, f);
            const double d = std::sqrt(p) - std::sqrt(q);
            const double distortion = std::max(d * d, cfg.eps_floor);
            const double s = 10.0 * std::log10(std::max(p, cfg.eps_floor) / distortion);
            acc += std::clamp(s, -cfg.clamp_db, cfg.clamp_db);
        }
        per_bin[m] = acc / z.n_frames;
    }

    const auto thirds = mel_thirds(cfg.n_mels);
    auto band_mean = [&](int lo, int hi) {
        double acc = 0.0;
        for (int m = lo; m < hi; ++m) acc += per_bin[m];
        return acc / (hi - lo);
    };
    MelSnrReport r;
    r.snr_low = band_mean(0, thirds.low_end);
    r.snr_mid = band_mean(thirds.low_end, thirds.mid_end);
    r.snr_high = band_mean(thirds.mid_end, cfg.n_mels);
    r.snr_avg = (r.snr_low + r.snr_mid + r.snr_high) / 3.0;
    return r;
}

bool scale_invariance_check(const AudioSignal& ref, const AudioSignal& rec, double a, const MelConfig& cfg,
                            double tol_db) {
    if (!(a > 0.0)) throw std::invalid_argument("scale_invariance_check: a must be positive");
    auto scaled = [a](const AudioSignal& x) {
        std::vector<double> v(x.vec());
        for (auto& s : v) s *= a;
        return AudioSignal(std::move(v), x.sample_rate());
    };
    const auto base = mel_snr(ref, rec, cfg);
    const auto other = mel_snr(scaled(ref), scaled(rec), cfg);
    return std::abs(base.snr_low - other.snr_low) <= tol_db && std::abs(base.snr_mid - other.snr_mid) <= tol_db &&
           std::abs(base.snr_high - other.snr_high) <= tol_db && std::abs(base.snr_avg - other.snr_avg) <= tol_db;
}

}  // namespace mbd
