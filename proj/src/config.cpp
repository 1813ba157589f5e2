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

#include "mbd/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <variant>
#include <vector>

#include "mbd/error.hpp"

namespace mbd {

namespace {

using Field = std::variant<int*, double*, bool*, std::string*, std::uint64_t*, ScheduleVariant*>;

struct Key {
    std::string name;
    Field field;
};

std::vector<Key> keys(PipelineConfig& c) {
    return {
        {"sample_rate", &c.sample_rate},
        {"eq.enabled", &c.eq.enabled},
        {"eq.n_bands", &c.eq.n_bands},
        {"eq.rho", &c.eq.rho},
        {"eq.kernel_len", &c.eq.kernel_len},
        {"eq.noise_samples", &c.eq.noise_samples},
        {"bands.n_bands", &c.bands.n_bands},
        {"bands.kernel_len", &c.bands.kernel_len},
        {"schedule.variant", &c.schedule.variant},
        {"schedule.p", &c.schedule.p},
        {"schedule.beta0", &c.schedule.beta0},
        {"schedule.betaT", &c.schedule.betaT},
        {"schedule.T", &c.schedule.T},
        {"schedule.cosine_offset", &c.schedule.cosine_offset},
        {"sampling.steps", &c.sampling.steps},
        {"sampling.identity_above", &c.sampling.identity_above},
        {"model.depth", &c.model.depth},
        {"model.base_channels", &c.model.base_channels},
        {"model.growth", &c.model.growth},
        {"model.kernel", &c.model.kernel},
        {"model.t_embed_dim", &c.model.t_embed_dim},
        {"conditioner.K", &c.conditioner.K},
        {"conditioner.n_books", &c.conditioner.n_books},
        {"conditioner.frame_len", &c.conditioner.frame_len},
        {"conditioner.hop", &c.conditioner.hop},
        {"conditioner.dim", &c.conditioner.dim},
        {"conditioner.iters", &c.conditioner.iters},
        {"training.batch", &c.training.batch},
        {"training.iters", &c.training.iters},
        {"training.lr", &c.training.lr},
        {"training.crop", &c.training.crop},
        {"training.loss_window", &c.training.loss_window},
        {"training.log_every", &c.training.log_every},
        {"corpus.dir", &c.corpus.dir},
        {"corpus.synth_items", &c.corpus.synth_items},
        {"corpus.synth_duration_s", &c.corpus.synth_duration_s},
        {"corpus.synth_notes", &c.corpus.synth_notes},
        {"corpus.synth_partials", &c.corpus.synth_partials},
        {"corpus.synth_fmin_hz", &c.corpus.synth_fmin_hz},
        {"corpus.synth_f0_max_hz", &c.corpus.synth_f0_max_hz},
        {"corpus.synth_fmax_hz", &c.corpus.synth_fmax_hz},
        {"seed", &c.seed},
        {"artifacts", &c.artifacts},
    };
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    const char* first = value.data();
    const char* last = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last) throw UsageError("config: bad value for " + key + ": '" + value + "'");
    return out;
}

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

void require(bool ok, const std::string& what) {
    if (!ok) throw UsageError("config: " + what);
}

}  // namespace

void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& raw) {
    std::string value = trim(raw);
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    for (auto& k : keys(cfg)) {
        if (k.name != key) continue;
        std::visit(
            [&](auto* p) {
                using T = std::remove_pointer_t<decltype(p)>;
                if constexpr (std::is_same_v<T, std::string>) {
                    *p = value;
                } else if constexpr (std::is_same_v<T, bool>) {
                    if (value == "true") *p = true;
                    else if (value == "false") *p = false;
                    else throw UsageError("config: " + key + " expects true or false, got '" + value + "'");
                } else if constexpr (std::is_same_v<T, ScheduleVariant>) {
                    try {
                        *p = schedule_variant_from_string(value);
                    } catch (const std::exception& e) {
                        throw UsageError("config: " + key + ": " + e.what());
                    }
                } else {
                    *p = parse_number<T>(key, value);
                }
            },
            k.field);
        return;
    }
    throw UsageError("config: unknown key '" + key + "'");
}

PipelineConfig parse_config(const std::string& text, const std::string& origin) {
    PipelineConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw UsageError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
        }
        try {
            set_config_value(cfg, trim(line.substr(0, eq)), line.substr(eq + 1));
        } catch (const UsageError& e) {
            throw UsageError(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    cfg.validate();
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read config file: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

std::string to_text(const PipelineConfig& cfg) {
    PipelineConfig copy = cfg;
    std::ostringstream os;
    for (auto& k : keys(copy)) {
        os << k.name << " = ";
        std::visit(
            [&](auto* p) {
                using T = std::remove_pointer_t<decltype(p)>;
                if constexpr (std::is_same_v<T, std::string>) os << '"' << *p << '"';
                else if constexpr (std::is_same_v<T, bool>) os << (*p ? "true" : "false");
                else if constexpr (std::is_same_v<T, ScheduleVariant>) os << to_string(*p);
                else if constexpr (std::is_same_v<T, double>) os << format_double(*p);
                else os << *p;
            },
            k.field);
        os << '\n';
    }
    return os.str();
}

void PipelineConfig::validate() const {
    require(sample_rate > 0, "sample_rate must be positive");
    require(eq.n_bands >= 1, "eq.n_bands must be >= 1");
    require(eq.rho >= 0.0 && eq.rho <= 1.0, "eq.rho must lie in [0, 1]");
    require(eq.noise_samples >= 100000, "eq.noise_samples must be >= 1e5");
    require(bands.n_bands >= 1, "bands.n_bands must be >= 1");
    require(eq.kernel_len % 2 == 1 && bands.kernel_len % 2 == 1, "kernel lengths must be odd");
    require(schedule.T >= 1, "schedule.T must be >= 1");
    require(sampling.steps >= 1 && sampling.steps <= schedule.T, "sampling.steps must lie in [1, T]");
    require(sampling.identity_above >= 0, "sampling.identity_above must be >= 0");
    require(conditioner.K >= 1 && conditioner.n_books >= 1 && conditioner.dim >= 1, "conditioner sizes must be positive");
    require(conditioner.frame_len >= 2 && conditioner.hop >= 1, "conditioner frame geometry must be positive");
    require(conditioner.iters >= 1, "conditioner.iters must be >= 1");
    require(training.batch >= 1 && training.iters >= 0 && training.lr > 0.0, "training batch/iters/lr invalid");
    require(training.loss_window >= 1 && training.log_every >= 1, "training windows must be positive");
    require(corpus.synth_items >= 1 && corpus.synth_duration_s > 0.0 && corpus.synth_partials >= 1 &&
                corpus.synth_notes >= 1,
            "corpus synth settings invalid");
    require(corpus.synth_fmin_hz > 0.0 && corpus.synth_f0_max_hz >= corpus.synth_fmin_hz &&
                corpus.synth_fmax_hz > corpus.synth_f0_max_hz &&
                corpus.synth_fmax_hz < 0.5 * sample_rate,
            "corpus synth frequency range must lie in (0, Nyquist)");
    require(!artifacts.empty(), "artifacts path must not be empty");
    try {
        const auto d = denoiser_config();
        d.validate();
        require(training.crop > 0 && training.crop % d.length_multiple() == 0,
                "training.crop must be a positive multiple of " + std::to_string(d.length_multiple()));
    } catch (const std::invalid_argument& e) {
        throw UsageError(std::string("config: ") + e.what());
    }
}

NoiseSchedule PipelineConfig::make_schedule() const {
    switch (schedule.variant) {
        case ScheduleVariant::power: return power_schedule(schedule.p, schedule.beta0, schedule.betaT, schedule.T);
        case ScheduleVariant::linear: return linear_schedule(schedule.beta0, schedule.betaT, schedule.T);
        case ScheduleVariant::cosine: return cosine_schedule(schedule.T, schedule.cosine_offset);
    }
    throw std::logic_error("unhandled schedule variant");
}

DenoiserConfig PipelineConfig::denoiser_config() const {
    DenoiserConfig d;
    d.depth = model.depth;
    d.base_channels = model.base_channels;
    d.growth = model.growth;
    d.kernel = model.kernel;
    d.t_embed_dim = model.t_embed_dim;
    d.T = schedule.T;
    d.cond_dim = conditioner.dim;
    return d;
}

}  // namespace mbd
