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


// Acceptance run: one PASS/FAIL line per criterion A1..A9. Pass criterion
// ids on the command line to run a subset. Exit status is nonzero if any
// selected criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "grad_check.hpp"
#include "mbd/config.hpp"
#include "mbd/diffusion.hpp"
#include "mbd/eq.hpp"
#include "mbd/filterbank.hpp"
#include "mbd/metrics.hpp"
#include "mbd/pipeline.hpp"
#include "mbd/schedule.hpp"
#include "test_util.hpp"

using namespace mbd;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) pass = false;
        if (!detail.empty()) detail += "; ";
        detail += what + (ok ? "" : " [FAILED]");
    }
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

AudioSignal scaled(const AudioSignal& x, double a) {
    std::vector<double> v(x.vec());
    for (auto& s : v) s *= a;
    return AudioSignal(std::move(v), x.sample_rate());
}

AudioSignal white(std::size_t n, int sr, std::uint64_t seed) {
    RngStream rng(seed);
    return AudioSignal(rng.gaussian_vector(n), sr);
}

AudioSignal chirp(int sr, double duration) {
    RngStream rng(0);
    return synthesize({SynthKind::chirp, {80.0, 0.45 * sr}, {0.7}, {}}, duration, sr, rng);
}

// ---------------------------------------------------------------- A1

Outcome a1() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    const auto s = power_schedule(7.5, 1e-5, 2.9e-2, 1000);
    o.require(std::abs(s.beta(1000) - 2.9e-2) <= 1e-15, "beta_T = " + fmt("%.17g", s.beta(1000)));
    const auto p1 = power_schedule(1.0, 1e-5, 2.9e-2, 1000);
    const auto lin = linear_schedule(1e-5, 2.9e-2, 1000);
    double worst = 0.0;
    for (int t = 1; t <= 1000; ++t) worst = std::max(worst, std::abs(p1.beta(t) - lin.beta(t)));
    o.require(worst <= 1e-15, "p=1 vs linear max diff " + fmt("%.2g", worst));
    bool decreasing = true;
    for (int t = 1; t <= 1000; ++t) decreasing = decreasing && s.alpha_bar(t) < s.alpha_bar(t - 1);
    o.require(decreasing, "alpha_bar strictly decreasing");
    const double dt = seconds_since(t0);
    o.require(dt < 1.0, "runtime " + fmt("%.3f s", dt));
    return o;
}

// ---------------------------------------------------------------- A2

Outcome a2() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    const auto s = power_schedule();
    // 1e5 scalar trials: the 2% tolerance is then several standard errors wide.
    constexpr int kTrials = 100000;
    const double x0 = 1.5;
    RngStream rng(2);
    std::vector<double> x(kTrials, x0);
    for (int t = 1; t <= s.T; ++t) {
        const double a = std::sqrt(1.0 - s.beta(t)), b = std::sqrt(s.beta(t));
        for (auto& v : x) v = a * v + b * rng.gaussian();
        if (t != 100 && t != 500 && t != 1000) continue;
        double m = 0.0, q = 0.0;
        for (double v : x) m += v;
        m /= kTrials;
        for (double v : x) q += (v - m) * (v - m);
        q /= kTrials;
        const double mean = std::sqrt(s.alpha_bar(t)) * x0, var = 1.0 - s.alpha_bar(t);
        const double mean_err = std::abs(m - mean) / std::max(std::abs(mean), std::sqrt(var));
        const double var_err = std::abs(q / var - 1.0);
        o.require(mean_err <= 0.02 && var_err <= 0.02, "t=" + std::to_string(t) + " mean err " +
                                                            fmt("%.4f", mean_err) + " var err " + fmt("%.4f", var_err));
    }
    const double dt = seconds_since(t0);
    o.require(dt < 10.0, "runtime " + fmt("%.2f s", dt));
    return o;
}

// ---------------------------------------------------------------- A3

Outcome a3() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    const auto s = power_schedule();
    const GaussianOracle oracle(3.0, 0.5, s);
    constexpr std::size_t kChains = 10000;
    auto stats = [](const std::vector<double>& v) {
        double m = 0.0, q = 0.0;
        for (double x : v) m += x;
        m /= static_cast<double>(v.size());
        for (double x : v) q += (x - m) * (x - m);
        return std::pair{m, std::sqrt(q / static_cast<double>(v.size()))};
    };
    RngStream rng(3);
    const auto full = sample(oracle, nullptr, s, subsample(s.T, s.T), rng.gaussian_vector(kChains), rng);
    const auto [m, sd] = stats(full);
    o.require(std::abs(m - 3.0) <= 0.05, "N=1000 mean " + fmt("%.4f", m));
    o.require(std::abs(sd / 0.5 - 1.0) <= 0.10, "std " + fmt("%.4f", sd));
    RngStream rng20(4);
    const auto fast = sample(oracle, nullptr, s, subsample(s.T, 20), rng20.gaussian_vector(kChains), rng20);
    const double m20 = stats(fast).first;
    o.require(std::abs(m20 - 3.0) <= 0.1, "N=20 mean " + fmt("%.4f", m20));
    const double dt = seconds_since(t0);
    o.require(dt < 60.0, "runtime " + fmt("%.2f s", dt));
    return o;
}

// ---------------------------------------------------------------- A4

Outcome a4(const PipelineConfig& desk) {
    Outcome o;
    const int sr = desk.sample_rate;
    auto bank = std::make_shared<const FilterBank>(design_bands(sr, 8, 255));
    std::vector<AudioSignal> corpus;
    for (const auto& x : synth_corpus(desk)) corpus.push_back(normalize_rms(x).first);
    RngStream noise_rng(4);
    EqProfile profile;
    profile.bank = bank;
    profile.sigma_noise = noise_band_stats(*bank, 200000, noise_rng).sigma;
    profile.sigma_data = measure_band_stats(corpus, *bank);
    profile.rho = 0.4;

    const auto w = white(4 * sr, sr, 40);
    const auto c = chirp(sr, 2.0);
    const double snr_w = testing::snr_db(w.samples(), deequalize(equalize(w, profile), profile).samples());
    const double snr_c = testing::snr_db(c.samples(), deequalize(equalize(c, profile), profile).samples());
    o.require(snr_w >= 37.0, "white round trip " + fmt("%.1f dB", snr_w));
    o.require(snr_c >= 37.0, "chirp round trip " + fmt("%.1f dB", snr_c));

    const auto g = profile.gains(), h = profile.inverse_gains();
    double worst = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) worst = std::max(worst, std::abs(g[i] * h[i] - 1.0));
    o.require(worst <= 1e-12, "gain products off by " + fmt("%.1e", worst));

    EqProfile flat = profile;
    flat.rho = 0.0;
    const double snr_0 = testing::snr_db(c.samples(), equalize(c, flat).samples());
    o.require(snr_0 >= 40.0, "rho=0 vs input " + fmt("%.1f dB", snr_0));

    EqProfile full = profile;
    full.rho = 1.0;
    BandAccumulator acc(8);
    for (const auto& x : corpus) {
        const auto y = equalize(x, full);
        const auto bands = split_samples(y.samples(), *bank);
        // Raw (unnormalized) band statistics of the equalized corpus.
        for (std::size_t b = 0; b < bands.size(); ++b) {
            for (double v : bands[b]) {
                acc.sum[b] += v;
                acc.sum_sq[b] += v * v;
            }
            acc.count[b] += static_cast<double>(bands[b].size());
        }
    }
    const auto got = acc.sigma();
    double worst_ratio = 0.0;
    for (std::size_t b = 0; b < got.size(); ++b) {
        worst_ratio = std::max(worst_ratio, std::abs(got[b] / profile.sigma_noise[b] - 1.0));
    }
    o.require(worst_ratio <= 0.10, "rho=1 band std vs noise, worst rel dev " + fmt("%.3f", worst_ratio));
    return o;
}

// ---------------------------------------------------------------- A5

Outcome a5() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    double worst_snr = 1e9, worst_tap = 0.0;
    for (int sr : {8000, 24000}) {
        for (int n_bands : {4, 8}) {
            auto bank = std::make_shared<const FilterBank>(design_bands(sr, n_bands, 255));
            for (int k = 0; k < bank->kernel_len; ++k) {
                double s = 0.0;
                for (const auto& h : bank->kernels) s += h[k];
                worst_tap = std::max(worst_tap, std::abs(s - (k == bank->kernel_len / 2 ? 1.0 : 0.0)));
            }
            for (const auto& x : {white(sr, sr, 50), chirp(sr, 1.0)}) {
                worst_snr = std::min(worst_snr, testing::snr_db(x.samples(), merge(split(x, bank)).samples()));
            }
        }
    }
    o.require(worst_snr >= 40.0, "worst merge(split) SNR " + fmt("%.1f dB", worst_snr));
    o.require(worst_tap <= 1e-6, "worst tap complementarity " + fmt("%.1e", worst_tap));
    const double dt = seconds_since(t0);
    o.require(dt < 5.0, "runtime " + fmt("%.2f s", dt));
    return o;
}

// ---------------------------------------------------------------- A6

Outcome a6() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    const auto cfg = testing::toy_config();
    double worst = 0.0;
    for (std::uint64_t seed : {61u, 62u, 63u}) {
        RngStream rng(seed);
        auto p = init_params(cfg, rng);
        for (auto& v : p.values) v += 0.1 * rng.gaussian();
        auto b = testing::toy_batch(cfg, rng, 3);
        testing::attach_cond(b);
        worst = std::max(worst, testing::gradient_check(p, b.examples).worst_relative_error);
    }
    o.require(worst < 1e-4, std::to_string(ParamLayout::build(cfg).total) + " params x 3 batches, worst rel err " +
                                fmt("%.2e", worst));
    const double dt = seconds_since(t0);
    o.require(dt < 60.0, "runtime " + fmt("%.2f s", dt));
    return o;
}

// ---------------------------------------------------------------- A7

// Noise source shared with tools/mel_snr_reference.py.
std::vector<double> lcg_gaussian(std::size_t n, std::uint64_t seed) {
    std::uint64_t state = seed;
    std::vector<double> out(n);
    for (auto& v : out) {
        double acc = 0.0;
        for (int i = 0; i < 12; ++i) {
            state = state * 6364136223846793005ULL + 1442695040888963407ULL;
            acc += static_cast<double>(state >> 11) * 0x1.0p-53;
        }
        v = acc - 6.0;
    }
    return out;
}

AudioSignal with_noise(const AudioSignal& ref, double relative_power, std::uint64_t seed) {
    const auto noise = lcg_gaussian(ref.size(), seed);
    double p_ref = 0.0, p_noise = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        p_ref += ref.vec()[i] * ref.vec()[i];
        p_noise += noise[i] * noise[i];
    }
    const double g = std::sqrt(relative_power * p_ref / p_noise);
    std::vector<double> v(ref.vec());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += g * noise[i];
    return AudioSignal(std::move(v), ref.sample_rate());
}

Outcome a7() {
    Outcome o;
    constexpr int sr = 16000;
    std::vector<double> v(8000);
    for (int k = 0; k < 8000; ++k) {
        const double t = static_cast<double>(k) / sr;
        v[k] = 0.6 * std::sin(2 * std::numbers::pi * 220.0 * t) + 0.3 * std::sin(2 * std::numbers::pi * 1375.0 * t + 0.5) +
               0.15 * std::sin(2 * std::numbers::pi * 3150.0 * t + 1.0);
    }
    const AudioSignal ref(v, sr);

    const auto broadband = with_noise(ref, 0.05, 5);
    const auto same = mel_snr(broadband, broadband);
    o.require(same.snr_low == 25.0 && same.snr_mid == 25.0 && same.snr_high == 25.0 && same.snr_avg == 25.0,
              "mel_snr(ref, ref) = " + fmt("%.3f dB", same.snr_avg) + " in all bands");

    const auto rec = with_noise(ref, 0.1, 2026);
    o.require(scale_invariance_check(ref, rec, 2.0, {}, 1e-9) && scale_invariance_check(ref, rec, 0.5, {}, 1e-9),
              "joint scaling invariance within 1e-9 dB");

    const auto r = mel_snr(ref, rec);
    const double golden[4] = {-14.493337, -16.892728, -22.033565, -17.806544};
    const double got[4] = {r.snr_low, r.snr_mid, r.snr_high, r.snr_avg};
    double worst = 0.0;
    for (int i = 0; i < 4; ++i) worst = std::max(worst, std::abs(got[i] - golden[i]));
    o.require(worst <= 0.1, "golden pair max deviation " + fmt("%.4f dB", worst));

    double prev = 1e9;
    bool monotone = true;
    std::string sweep;
    for (double p : {1e-4, 1e-3, 1e-2, 1e-1, 1.0}) {
        const double a = mel_snr(ref, with_noise(ref, p, 99)).snr_avg;
        monotone = monotone && a < prev;
        prev = a;
        sweep += (sweep.empty() ? "" : " > ") + fmt("%.2f", a);
    }
    o.require(monotone, "noise sweep " + sweep);
    return o;
}

// ---------------------------------------------------------------- A8 / A9

// State shared by the end-to-end criteria.
struct EndToEnd {
    PipelineConfig desk;
    fs::path root;
    bool trained = false;
    std::vector<BandTrainResult> train;
    double train_seconds = 0.0;
    std::vector<DatasetItem> items;
    std::map<std::string, double> cache;  // memoized mean Mel-SNR-A per decode setup
};

PipelineConfig variant(const EndToEnd& e, const std::string& name) {
    auto c = e.desk;
    c.artifacts = (e.root / name).string();
    if (name == "single_band") c.bands.n_bands = 1;
    if (name == "no_eq") c.eq.enabled = false;
    c.validate();
    return c;
}

std::vector<BandTrainResult> prepare_and_train(const PipelineConfig& cfg) {
    cmd_prepare(cfg);
    return cmd_train(cfg);
}

void ensure_trained(EndToEnd& e) {
    if (e.trained) return;
    const auto t0 = std::chrono::steady_clock::now();
    const auto cfg = variant(e, "full");
    e.train = prepare_and_train(cfg);
    e.train_seconds = seconds_since(t0);
    e.items = load_dataset_index(artifact_paths(cfg));
    e.trained = true;
}

// Mean Mel-SNR-A of items [0, n) decoded from their own tokens.
double mean_snr(EndToEnd& e, const std::string& name, int n, const DecodeOptions& opt) {
    const std::string key = name + "/" + std::to_string(n) + "/" + std::to_string(opt.steps.value_or(0)) +
                            (opt.zero_conditioning ? "/zc" : "");
    if (auto it = e.cache.find(key); it != e.cache.end()) return it->second;
    const auto cfg = variant(e, name);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto& item = e.items.at(i);
        acc += mel_snr(load_wav(item.path), decode_wav(cfg, item.path, opt)).snr_avg;
    }
    return e.cache[key] = acc / n;
}

DecodeOptions steps(int n, bool zero_cond = false) {
    DecodeOptions o;
    o.steps = n;
    o.zero_conditioning = zero_cond;
    return o;
}

constexpr int kCondItems = 5;      // training items used for the conditioning and step checks
constexpr int kAblationItems = 20; // training items averaged in the component ablation

Outcome a8(EndToEnd& e) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    const double earlier_training = e.trained ? e.train_seconds : 0.0;
    ensure_trained(e);
    for (const auto& r : e.train) {
        const double drop = 1.0 - r.smoothed_end / r.smoothed_start;
        o.require(drop >= 0.5, "band" + std::to_string(r.band) + " loss " + fmt("%.3f", r.smoothed_start) + "->" +
                                   fmt("%.3f", r.smoothed_end));
    }
    const double cond = mean_snr(e, "full", kCondItems, steps(20));
    const double zero = mean_snr(e, "full", kCondItems, steps(20, true));
    o.require(cond - zero >= 1.0, "Mel-SNR-A cond " + fmt("%.2f", cond) + " vs zero-cond " + fmt("%.2f", zero) +
                                      " (items 0-4)");

    const auto cfg = variant(e, "full");
    const auto& item = e.items.at(0);
    const auto dir = e.root / "repeat";
    fs::create_directories(dir);
    save_wav(decode_wav(cfg, item.path), dir / "a.wav");
    save_wav(decode_wav(cfg, item.path), dir / "b.wav");
    std::ifstream fa(dir / "a.wav", std::ios::binary), fb(dir / "b.wav", std::ios::binary);
    const std::string ba((std::istreambuf_iterator<char>(fa)), {}), bb((std::istreambuf_iterator<char>(fb)), {});
    o.require(!ba.empty() && ba == bb, "same-seed decode byte-identical");

    const double dt = earlier_training + seconds_since(t0);
    o.require(dt < 1800.0, "runtime " + fmt("%.0f s", dt));
    return o;
}

Outcome a9(EndToEnd& e) {
    Outcome o;
    ensure_trained(e);
    const double q10 = mean_snr(e, "full", kCondItems, steps(10));
    const double q20 = mean_snr(e, "full", kCondItems, steps(20));
    const double q1000 = mean_snr(e, "full", kCondItems, steps(1000));
    o.require(q1000 >= q20 - 0.1 && q20 >= q10 - 0.1,
              "(i) Mel-SNR-A N=1000 " + fmt("%.2f", q1000) + ", N=20 " + fmt("%.2f", q20) + ", N=10 " + fmt("%.2f", q10));

    prepare_and_train(variant(e, "single_band"));
    prepare_and_train(variant(e, "no_eq"));
    const double full = mean_snr(e, "full", kAblationItems, steps(20));
    const double single = mean_snr(e, "single_band", kAblationItems, steps(20));
    const double no_eq = mean_snr(e, "no_eq", kAblationItems, steps(20));
    o.require(full >= single, "(ii) full " + fmt("%.2f", full) + " >= single-band " + fmt("%.2f", single));
    o.require(full >= no_eq, "(ii) full " + fmt("%.2f", full) + " >= no-EQ " + fmt("%.2f", no_eq));

    const double fp = fraction_alpha_bar_above(power_schedule(), 0.99);
    const double fc = fraction_alpha_bar_above(cosine_schedule(1000), 0.99);
    o.require(fp > fc, "(iii) steps with alpha_bar > 0.99: power " + fmt("%.3f", fp) + ", cosine " + fmt("%.3f", fc));
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    std::set<std::string> wanted(argv + 1, argv + argc);
    EndToEnd e;
    e.desk = load_config(MBD_DESK_CONFIG);
    e.root = fs::absolute("acceptance_artifacts");
    fs::create_directories(e.root);
    set_warning_sink([](const std::string&) {});

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"A1", a1},
        {"A2", a2},
        {"A3", a3},
        {"A4", [&] { return a4(e.desk); }},
        {"A5", a5},
        {"A6", a6},
        {"A7", a7},
        {"A8", [&] { return a8(e); }},
        {"A9", [&] { return a9(e); }},
    };
    int failures = 0;
    for (const auto& [id, fn] : criteria) {
        if (!wanted.empty() && !wanted.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& ex) {
            o.pass = false;
            o.detail = std::string("exception: ") + ex.what();
        }
        if (!o.pass) ++failures;
        std::printf("%s %s  %s  (%.1f s)\n", id.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
