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

// mbd: multi-band diffusion pipeline command line.
//
//   mbd prepare          [--config F] [--seed N] [--set key=value ...]
//   mbd train            [--config F] [--seed N] [--band I] [--iters N] [--resume]
//   mbd decode  --input IN --output OUT.wav [--steps N] [--zero-cond]
//   mbd eval    --ref DIR --rec DIR [--csv OUT.csv]
//   mbd inspect-schedule [--config F] [--output OUT.csv]
//
// Exit codes: 0 ok, 1 usage, 2 data error, 3 integrity (hash) error.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mbd/audio.hpp"
#include "mbd/config.hpp"
#include "mbd/error.hpp"
#include "mbd/pipeline.hpp"

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> overrides;
    bool deterministic = false;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "pipeline config file (key = value lines)");
    cmd->add_option("--seed", c.seed, "root seed");
    cmd->add_option("--set", c.overrides, "override one config key, key=value")->take_all();
    cmd->add_flag("--deterministic", c.deterministic, "single-threaded, byte-reproducible run (always on)");
}

mbd::PipelineConfig resolve(const Common& c) {
    mbd::PipelineConfig cfg = c.config.empty() ? mbd::PipelineConfig{} : mbd::load_config(c.config);
    for (const auto& kv : c.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw mbd::UsageError("--set expects key=value, got '" + kv + "'");
        mbd::set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (c.seed) cfg.seed = *c.seed;
    cfg.validate();
    return cfg;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw mbd::DataError("cannot write " + path);
    out << text;
}

int run(int argc, char** argv) {
    CLI::App app{"multi-band diffusion decoder pipeline"};
    app.require_subcommand(1);

    Common prep_c, train_c, dec_c, sched_c;
    auto* prepare = app.add_subcommand("prepare", "build dataset, EQ profile and codebook");
    add_common(prepare, prep_c);

    auto* train = app.add_subcommand("train", "train the per-band denoisers");
    add_common(train, train_c);
    std::optional<int> band, iters;
    bool resume = false;
    train->add_option("--band", band, "train a single band");
    train->add_option("--iters", iters, "override training.iters");
    train->add_flag("--resume", resume, "continue from existing checkpoints");

    auto* decode = app.add_subcommand("decode", "decode tokens (or re-encode a WAV) to audio");
    add_common(decode, dec_c);
    std::string input, output;
    std::optional<int> steps;
    bool zero_cond = false;
    decode->add_option("--input", input, "token file (.tok) or WAV to re-encode")->required();
    decode->add_option("--output", output, "output WAV")->required();
    decode->add_option("--steps", steps, "number of sampling steps");
    decode->add_flag("--zero-cond", zero_cond, "decode with zeroed conditioning");

    auto* eval = app.add_subcommand("eval", "Mel-SNR report over paired WAV files");
    std::string ref_dir, rec_dir, csv_out;
    eval->add_option("--ref", ref_dir, "reference directory")->required();
    eval->add_option("--rec", rec_dir, "reconstruction directory")->required();
    eval->add_option("--csv", csv_out, "write the CSV report here");

    auto* inspect = app.add_subcommand("inspect-schedule", "print the noise schedule table");
    add_common(inspect, sched_c);
    std::string sched_out;
    inspect->add_option("--output", sched_out, "write CSV here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (prepare->parsed()) {
        const auto r = mbd::cmd_prepare(resolve(prep_c));
        std::cout << "prepared " << r.n_items << " items\n";
    } else if (train->parsed()) {
        mbd::TrainOptions opt;
        opt.band = band;
        opt.iters = iters;
        opt.resume = resume;
        for (const auto& r : mbd::cmd_train(resolve(train_c), opt)) {
            std::cout << "band" << r.band << ": " << r.n_params << " params, smoothed loss " << r.smoothed_start
                      << " -> " << r.smoothed_end << "\n";
        }
    } else if (decode->parsed()) {
        const auto cfg = resolve(dec_c);
        mbd::DecodeOptions opt;
        opt.steps = steps;
        opt.zero_conditioning = zero_cond;
        const std::filesystem::path in(input);
        const auto y = in.extension() == ".wav" ? mbd::decode_wav(cfg, in, opt) : mbd::decode_token_file(cfg, in, opt);
        const auto clipped = mbd::save_wav(y, output, mbd::WavEncoding::float32);
        if (clipped) mbd::warn(std::to_string(clipped) + " samples clipped");
    } else if (eval->parsed()) {
        const auto report = mbd::cmd_eval(ref_dir, rec_dir);
        std::cout << mbd::eval_table(report);
        if (!csv_out.empty()) write_file(csv_out, mbd::eval_csv(report));
        if (!report.unpaired.empty()) std::cerr << report.unpaired.size() << " unpaired file(s) skipped\n";
    } else if (inspect->parsed()) {
        const auto text = mbd::cmd_inspect_schedule(resolve(sched_c));
        if (sched_out.empty()) std::cout << text;
        else write_file(sched_out, text);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const mbd::IntegrityError& e) {
        std::cerr << "integrity error: " << e.what() << "\n";
        return 3;
    } catch (const mbd::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
