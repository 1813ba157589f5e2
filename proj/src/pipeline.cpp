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

#include "mbd/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>

#include "mbd/denoiser.hpp"
#include "mbd/diffusion.hpp"
#include "mbd/eq.hpp"
#include "mbd/error.hpp"
#include "mbd/filterbank.hpp"
#include "mbd/hash.hpp"

namespace fs = std::filesystem;

namespace mbd {

namespace {

// Child-stream ids; every consumer of randomness gets its own stream.
constexpr std::uint64_t kCorpusStream = 1;
constexpr std::uint64_t kNoiseStatsStream = 2;
constexpr std::uint64_t kCodebookStream = 3;
constexpr std::uint64_t kTrainStreamBase = 100;
constexpr std::uint64_t kDecodeStreamBase = 200;

std::string band_name(int band) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "band%d", band);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("failed writing " + path.string());
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("missing artifact: " + path.string() + " (run prepare first)");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

std::shared_ptr<const FilterBank> band_bank(const PipelineConfig& cfg) {
    return std::make_shared<const FilterBank>(design_bands(cfg.sample_rate, cfg.bands.n_bands, cfg.bands.kernel_len));
}

EqProfile load_profile(const ArtifactPaths& paths) { return eq_profile_from_json(read_json(paths.eq_profile())); }
Codebook load_codebook(const ArtifactPaths& paths) { return codebook_from_json(read_json(paths.codebook())); }

void check_hash(const nlohmann::json& manifest, const std::string& key, const std::string& actual) {
    const auto& hashes = manifest.at("hashes");
    if (!hashes.contains(key)) throw IntegrityError("manifest has no hash for " + key);
    const auto expected = hashes.at(key).get<std::string>();
    if (expected != actual) {
        throw IntegrityError("hash mismatch for " + key + ": manifest " + expected + ", found " + actual);
    }
}

nlohmann::json load_manifest(const ArtifactPaths& paths) {
    if (!fs::exists(paths.manifest())) throw DataError("missing manifest: " + paths.manifest().string());
    return read_json(paths.manifest());
}

// Hashes of everything prepare produces; train and decode both depend on them.
void verify_prepared(const PipelineConfig& cfg, const ArtifactPaths& paths, const nlohmann::json& manifest) {
    check_hash(manifest, "dataset_index", hash_file(paths.dataset_index()));
    check_hash(manifest, "eq_profile", hash_file(paths.eq_profile()));
    check_hash(manifest, "codebook", hash_file(paths.codebook()));
    check_hash(manifest, "band_filterbank", filterbank_hash(*band_bank(cfg)));
    for (const auto& item : load_dataset_index(paths)) {
        if (hash_file(item.path) != item.hash) throw IntegrityError("dataset item changed: " + item.path.string());
    }
}

// Conditioning for one (normalized) signal: averaged, standardized embeddings.
ConditioningFrames conditioning(const TokenSequence& tokens, const Codebook& book) {
    auto c = embed(tokens, book);
    EmbeddingScaler::from_codebook(book).apply(c);
    return c;
}

// Symmetric zero padding to a multiple of m, matching forward().
std::vector<double> pad_to_multiple(std::span<const double> x, int m) {
    const std::size_t padded = (x.size() + m - 1) / m * m;
    std::vector<double> out(padded, 0.0);
    std::copy(x.begin(), x.end(), out.begin() + static_cast<long>((padded - x.size()) / 2));
    return out;
}

}  // namespace

fs::path ArtifactPaths::checkpoint(int band) const { return root / (band_name(band) + ".ckpt"); }
fs::path ArtifactPaths::sidecar(int band) const { return root / (band_name(band) + ".json"); }
fs::path ArtifactPaths::loss_log(int band) const { return root / (band_name(band) + "_loss.csv"); }

ArtifactPaths artifact_paths(const PipelineConfig& cfg) {
    if (const char* env = std::getenv("MBD_ARTIFACTS"); env && *env) return {fs::path(env)};
    return {fs::path(cfg.artifacts)};
}

std::vector<DatasetItem> load_dataset_index(const ArtifactPaths& paths) {
    const auto j = read_json(paths.dataset_index());
    std::vector<DatasetItem> items;
    for (const auto& e : j.at("items")) {
        DatasetItem it;
        it.name = e.at("name").get<std::string>();
        it.path = paths.dataset_dir() / e.at("file").get<std::string>();
        it.n_samples = e.at("n_samples").get<std::size_t>();
        it.hash = e.at("hash").get<std::string>();
        items.push_back(std::move(it));
    }
    return items;
}

std::vector<AudioSignal> load_dataset(const ArtifactPaths& paths) {
    std::vector<AudioSignal> out;
    for (const auto& item : load_dataset_index(paths)) out.push_back(load_wav(item.path));
    return out;
}

std::pair<AudioSignal, double> normalize_rms(const AudioSignal& x) {
    double sq = 0.0;
    for (double v : x.samples()) sq += v * v;
    const double rms = x.empty() ? 0.0 : std::sqrt(sq / static_cast<double>(x.size()));
    if (!(rms > 0.0)) return {x, 1.0};
    std::vector<double> y(x.samples().begin(), x.samples().end());
    for (double& v : y) v /= rms;
    return {AudioSignal(std::move(y), x.sample_rate()), rms};
}

std::vector<AudioSignal> synth_corpus(const PipelineConfig& cfg) {
    const RngStream root = RngStream(cfg.seed).child(kCorpusStream);
    const double log_lo = std::log(cfg.corpus.synth_fmin_hz);
    const double log_hi = std::log(cfg.corpus.synth_f0_max_hz);
    std::vector<AudioSignal> corpus;
    for (int i = 0; i < cfg.corpus.synth_items; ++i) {
        RngStream rng = root.child(static_cast<std::uint64_t>(i));
        SynthSpec spec;
        spec.kind = SynthKind::sine_mixture;
        for (int n = 0; n < cfg.corpus.synth_notes; ++n) {
            const double f0 = std::exp(log_lo + (log_hi - log_lo) * rng.uniform());
            const double level = 0.1 + 0.2 * rng.uniform();
            const double tilt = 0.5 + rng.uniform();
            for (int k = 1; k <= cfg.corpus.synth_partials; ++k) {
                const double phase = 2.0 * std::numbers::pi * rng.uniform();
                if (k * f0 > cfg.corpus.synth_fmax_hz) continue;
                spec.frequencies_hz.push_back(k * f0);
                spec.amplitudes.push_back(level * std::pow(static_cast<double>(k), -tilt));
                spec.phases.push_back(phase);
            }
        }
        corpus.push_back(synthesize(spec, cfg.corpus.synth_duration_s, cfg.sample_rate, rng));
    }
    return corpus;
}

PrepareResult cmd_prepare(const PipelineConfig& cfg) {
    cfg.validate();
    const auto paths = artifact_paths(cfg);
    fs::create_directories(paths.dataset_dir());

    std::vector<AudioSignal> corpus;
    std::vector<std::string> names;
    if (cfg.corpus.dir.empty()) {
        corpus = synth_corpus(cfg);
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "item_%03zu", i);
            names.emplace_back(buf);
        }
    } else {
        std::vector<fs::path> files;
        if (!fs::is_directory(cfg.corpus.dir)) throw DataError("corpus directory not found: " + cfg.corpus.dir);
        for (const auto& e : fs::directory_iterator(cfg.corpus.dir)) {
            if (e.is_regular_file() && e.path().extension() == ".wav") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            auto x = load_wav(f);
            if (x.sample_rate() != cfg.sample_rate) {
                throw DataError(f.string() + ": sample rate " + std::to_string(x.sample_rate()) + " != configured " +
                                std::to_string(cfg.sample_rate));
            }
            corpus.push_back(std::move(x));
            names.push_back(f.stem().string());
        }
    }
    if (corpus.empty()) throw DataError("empty corpus");

    nlohmann::json index = {{"sample_rate", cfg.sample_rate}, {"items", nlohmann::json::array()}};
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const std::string file = names[i] + ".wav";
        const auto path = paths.dataset_dir() / file;
        save_wav(corpus[i], path, WavEncoding::float32);
        index["items"].push_back(
            {{"name", names[i]}, {"file", file}, {"n_samples", corpus[i].size()}, {"hash", hash_file(path)}});
    }
    write_json(paths.dataset_index(), index);

    const RngStream root(cfg.seed);
    auto eq_bank = std::make_shared<const FilterBank>(design_bands(cfg.sample_rate, cfg.eq.n_bands, cfg.eq.kernel_len));
    EqProfile profile;
    profile.bank = eq_bank;
    profile.rho = cfg.eq.rho;
    profile.sigma_data = measure_band_stats(corpus, *eq_bank);
    if (std::all_of(profile.sigma_data.begin(), profile.sigma_data.end(),
                    [](double s) { return s <= kBandStdFloor; })) {
        throw DataError("degenerate corpus statistics: every band is silent");
    }
    RngStream noise_rng = root.child(kNoiseStatsStream);
    profile.sigma_noise = noise_band_stats(*eq_bank, static_cast<std::size_t>(cfg.eq.noise_samples), noise_rng).sigma;
    profile.validate();
    write_json(paths.eq_profile(), to_json(profile));

    const FrameGeometry geometry{cfg.conditioner.frame_len, cfg.conditioner.hop, cfg.sample_rate};
    FrameMatrix frames(0, cfg.conditioner.dim);
    for (const auto& raw : corpus) {
        const auto x = normalize_rms(raw).first;
        const auto f = extract_frames(x, geometry.frame_len, geometry.hop, cfg.conditioner.dim);
        frames.values.insert(frames.values.end(), f.values.begin(), f.values.end());
        frames.n_rows += f.n_rows;
    }
    RngStream book_rng = root.child(kCodebookStream);
    const auto fit = fit_codebook(frames, geometry, cfg.conditioner.K, cfg.conditioner.n_books, cfg.conditioner.iters,
                                  book_rng);
    write_json(paths.codebook(), to_json(fit.codebook));

    nlohmann::json manifest = {
        {"tool_version", kToolVersion},
        {"rng_algorithm", RngStream::kAlgorithm},
        {"seed", cfg.seed},
        {"config", to_text(cfg)},
        {"hashes",
         {{"dataset_index", hash_file(paths.dataset_index())},
          {"eq_profile", hash_file(paths.eq_profile())},
          {"eq_filterbank", filterbank_hash(*eq_bank)},
          {"band_filterbank", filterbank_hash(*band_bank(cfg))},
          {"codebook", hash_file(paths.codebook())}}},
        {"checkpoints", nlohmann::json::object()},
    };
    write_json(paths.manifest(), manifest);

    PrepareResult result;
    result.n_items = corpus.size();
    result.sigma_data = profile.sigma_data;
    for (const auto& h : fit.inertia_history) result.codebook_inertia.push_back(h.empty() ? 0.0 : h.back());
    return result;
}

std::pair<double, double> smoothed_endpoints(const std::vector<double>& losses, int window) {
    if (losses.empty()) return {0.0, 0.0};
    const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(std::max(window, 1)), losses.size());
    double head = 0.0, tail = 0.0;
    for (std::size_t i = 0; i < w; ++i) {
        head += losses[i];
        tail += losses[losses.size() - w + i];
    }
    return {head / static_cast<double>(w), tail / static_cast<double>(w)};
}

namespace {

// Per-item training material for one band: padded band signal and the
// conditioning resampled to its bottleneck length.
struct BandItem {
    std::vector<double> x;
    BottleneckCond cond;
};

std::vector<double> read_loss_log(const fs::path& path) {
    std::vector<double> losses;
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        const auto comma = line.find(',');
        if (comma != std::string::npos) losses.push_back(std::stod(line.substr(comma + 1)));
    }
    return losses;
}

void write_loss_log(const fs::path& path, const std::vector<double>& losses) {
    std::ostringstream os;
    os << "iter,loss\n";
    char buf[64];
    for (std::size_t i = 0; i < losses.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i + 1, losses[i]);
        os << buf;
    }
    write_text(path, os.str());
}

BandTrainResult train_band(const PipelineConfig& cfg, const ArtifactPaths& paths, int band,
                           const std::vector<BandItem>& items, const NoiseSchedule& sched, const TrainOptions& options) {
    const auto dcfg = cfg.denoiser_config();
    const int m = dcfg.length_multiple();
    const int crop = cfg.training.crop;
    const int iters = options.iters.value_or(cfg.training.iters);
    const RngStream band_rng = RngStream(cfg.seed).child(kTrainStreamBase + static_cast<std::uint64_t>(band));

    Checkpoint ck;
    std::vector<double> losses;
    if (options.resume && fs::exists(paths.checkpoint(band))) {
        ck = load_checkpoint(paths.checkpoint(band));
        if (!(ck.params.config == dcfg)) throw DataError("resume: checkpoint config differs from current config");
        losses = read_loss_log(paths.loss_log(band));
        losses.resize(std::min<std::size_t>(losses.size(), ck.optimizer.step));
    } else {
        RngStream init_rng = band_rng.child(0);
        ck.params = init_params(dcfg, init_rng);
        ck.optimizer = AdamState::for_params(ck.params.size(), cfg.training.lr);
    }

    std::vector<TrainingExample> batch(static_cast<std::size_t>(cfg.training.batch));
    std::vector<BottleneckCond> conds(batch.size());
    for (int it = static_cast<int>(ck.optimizer.step); it < iters; ++it) {
        RngStream rng = band_rng.child(1 + static_cast<std::uint64_t>(it));
        for (std::size_t k = 0; k < batch.size(); ++k) {
            const auto& item = items[rng.uniform_int(items.size())];
            const std::size_t slots = (item.x.size() - static_cast<std::size_t>(crop)) / m + 1;
            const std::size_t off = rng.uniform_int(slots) * m;
            auto pair = training_pair(std::span(item.x).subspan(off, crop), sched, rng);
            batch[k].x_t = std::move(pair.x_t);
            batch[k].t = pair.t;
            batch[k].eps = std::move(pair.eps);
            auto& c = conds[k];
            c = BottleneckCond(crop / m, item.cond.dim);
            const auto first = item.cond.values.begin() + static_cast<long>(off / m * item.cond.dim);
            std::copy(first, first + static_cast<long>(c.values.size()), c.values.begin());
            batch[k].cond = &c;
        }
        LossAndGrad lg;
        try {
            lg = loss_and_grad(ck.params, batch);
        } catch (const DataError& e) {
            throw DataError(band_name(band) + " iteration " + std::to_string(it + 1) + ": " + e.what());
        }
        if (!std::isfinite(lg.loss)) {
            throw DataError(band_name(band) + " iteration " + std::to_string(it + 1) + ": non-finite loss");
        }
        adam_update(ck.params.values, ck.optimizer, lg.grad);
        losses.push_back(lg.loss);
        if ((it + 1) % cfg.training.log_every == 0) {
            const double tail = smoothed_endpoints(losses, cfg.training.loss_window).second;
            std::fprintf(stderr, "%s iter %d loss %.5f (smoothed %.5f)\n", band_name(band).c_str(), it + 1, lg.loss,
                         tail);
        }
    }

    save_checkpoint(ck, paths.checkpoint(band));
    write_loss_log(paths.loss_log(band), losses);

    BandTrainResult r;
    r.band = band;
    r.losses = losses;
    std::tie(r.smoothed_start, r.smoothed_end) = smoothed_endpoints(losses, cfg.training.loss_window);
    r.n_params = ck.params.size();
    write_json(paths.sidecar(band), {{"band", band},
                                     {"iterations", losses.size()},
                                     {"n_params", r.n_params},
                                     {"smoothed_loss_start", r.smoothed_start},
                                     {"smoothed_loss_end", r.smoothed_end},
                                     {"denoiser", to_json(dcfg)},
                                     {"checkpoint_hash", hash_file(paths.checkpoint(band))}});
    return r;
}

}  // namespace

std::vector<BandTrainResult> cmd_train(const PipelineConfig& cfg, const TrainOptions& options) {
    cfg.validate();
    const auto paths = artifact_paths(cfg);
    auto manifest = load_manifest(paths);
    verify_prepared(cfg, paths, manifest);
    if (options.band && (*options.band < 0 || *options.band >= cfg.bands.n_bands)) {
        throw UsageError("--band must lie in [0, " + std::to_string(cfg.bands.n_bands) + ")");
    }

    const auto corpus = load_dataset(paths);
    const auto profile = load_profile(paths);
    const auto book = load_codebook(paths);
    const auto bank = band_bank(cfg);
    const auto sched = cfg.make_schedule();
    const int m = cfg.denoiser_config().length_multiple();

    std::vector<std::vector<BandItem>> per_band(static_cast<std::size_t>(cfg.bands.n_bands));
    for (const auto& raw : corpus) {
        const auto x = normalize_rms(raw).first;
        const AudioSignal xe = cfg.eq.enabled ? equalize(x, profile) : x;
        const auto bands = split_samples(xe.samples(), *bank);
        const auto padded_len = (x.size() + m - 1) / m * m;
        if (padded_len < static_cast<std::size_t>(cfg.training.crop)) {
            throw DataError("corpus item shorter than training.crop");
        }
        const auto cond = upsample_linear(conditioning(encode(x, book), book), static_cast<int>(padded_len / m));
        for (int b = 0; b < cfg.bands.n_bands; ++b) {
            per_band[b].push_back({pad_to_multiple(bands[b], m), cond});
        }
    }

    std::vector<BandTrainResult> results;
    for (int b = 0; b < cfg.bands.n_bands; ++b) {
        if (options.band && *options.band != b) continue;
        results.push_back(train_band(cfg, paths, b, per_band[b], sched, options));
        manifest["checkpoints"][band_name(b)] = hash_file(paths.checkpoint(b));
    }
    manifest["config"] = to_text(cfg);
    write_json(paths.manifest(), manifest);
    return results;
}

void verify_manifest(const PipelineConfig& cfg) {
    const auto paths = artifact_paths(cfg);
    const auto manifest = load_manifest(paths);
    check_hash(manifest, "eq_profile", hash_file(paths.eq_profile()));
    check_hash(manifest, "codebook", hash_file(paths.codebook()));
    check_hash(manifest, "band_filterbank", filterbank_hash(*band_bank(cfg)));
    const auto& ckpts = manifest.at("checkpoints");
    for (int b = 0; b < cfg.bands.n_bands; ++b) {
        if (!ckpts.contains(band_name(b))) throw DataError(band_name(b) + " has not been trained");
        const auto path = paths.checkpoint(b);
        if (!fs::exists(path)) throw IntegrityError("checkpoint missing: " + path.string());
        const auto actual = hash_file(path);
        const auto expected = ckpts.at(band_name(b)).get<std::string>();
        if (actual != expected) {
            throw IntegrityError("hash mismatch for " + band_name(b) + " checkpoint: manifest " + expected +
                                 ", found " + actual);
        }
    }
}

AudioSignal decode_tokens(const PipelineConfig& cfg, const TokenSequence& tokens, std::size_t n_samples,
                          const DecodeOptions& options) {
    cfg.validate();
    verify_manifest(cfg);
    const auto paths = artifact_paths(cfg);
    const auto book = load_codebook(paths);
    if (tokens.codebook_hash != codebook_hash(book)) {
        throw IntegrityError("tokens were produced by a different codebook");
    }
    if (!(tokens.geometry == book.geometry)) throw DataError("token frame geometry does not match the codebook");
    if (tokens.geometry.sample_rate != cfg.sample_rate) throw DataError("token sample rate does not match config");
    const int steps = options.steps.value_or(cfg.sampling.steps);
    if (steps < 1 || steps > cfg.schedule.T) throw UsageError("--steps must lie in [1, T]");

    const auto sched = cfg.make_schedule();
    const auto plan = subsample(cfg.schedule.T, steps);
    const auto cond = conditioning(tokens, book);
    const ConditioningFrames* cond_ptr = options.zero_conditioning ? nullptr : &cond;
    const RngStream root(options.seed.value_or(cfg.seed));
    SampleOptions sample_opts;
    sample_opts.identity_above = cfg.sampling.identity_above;

    std::vector<double> sum(n_samples, 0.0);
    for (int b = 0; b < cfg.bands.n_bands; ++b) {
        const auto ck = load_checkpoint(paths.checkpoint(b));
        const ConvDenoiser denoiser(ck.params);
        RngStream rng = root.child(kDecodeStreamBase + static_cast<std::uint64_t>(b));
        auto prior = rng.gaussian_vector(n_samples);
        const auto y = sample(denoiser, cond_ptr, sched, plan, std::move(prior), rng, sample_opts);
        for (std::size_t i = 0; i < n_samples; ++i) sum[i] += y[i];
    }
    AudioSignal merged(std::move(sum), cfg.sample_rate);
    if (!cfg.eq.enabled) return merged;
    return deequalize(merged, load_profile(paths));
}

AudioSignal decode_wav(const PipelineConfig& cfg, const fs::path& wav, const DecodeOptions& options) {
    const auto x = load_wav(wav);
    if (x.sample_rate() != cfg.sample_rate) throw DataError(wav.string() + ": sample rate does not match config");
    verify_manifest(cfg);
    const auto book = load_codebook(artifact_paths(cfg));
    const auto [xn, rms] = normalize_rms(x);
    const auto y = decode_tokens(cfg, encode(xn, book), x.size(), options);
    std::vector<double> out(y.samples().begin(), y.samples().end());
    for (double& v : out) v *= rms;
    return AudioSignal(std::move(out), y.sample_rate());
}

AudioSignal decode_token_file(const PipelineConfig& cfg, const fs::path& path, const DecodeOptions& options) {
    verify_manifest(cfg);
    const auto tokens = load_tokens(path);
    if (tokens.n_frames < 1) throw DataError("token file has no frames");
    const std::size_t n = static_cast<std::size_t>(tokens.n_frames - 1) * tokens.geometry.hop +
                          static_cast<std::size_t>(tokens.geometry.frame_len);
    return decode_tokens(cfg, tokens, n, options);
}

EvalReport cmd_eval(const fs::path& ref_dir, const fs::path& rec_dir, const MelConfig& mel) {
    auto list = [](const fs::path& dir) {
        if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
        std::map<std::string, fs::path> files;
        for (const auto& e : fs::directory_iterator(dir)) {
            if (e.is_regular_file() && e.path().extension() == ".wav") files[e.path().filename().string()] = e.path();
        }
        return files;
    };
    const auto refs = list(ref_dir);
    const auto recs = list(rec_dir);

    EvalReport report;
    for (const auto& [name, path] : refs) {
        const auto it = recs.find(name);
        if (it == recs.end()) {
            report.unpaired.push_back(name);
            warn("eval: " + name + " has no reconstruction; skipped");
            continue;
        }
        const auto ref = load_wav(path);
        const auto rec = load_wav(it->second);
        if (ref.sample_rate() != rec.sample_rate()) throw DataError("eval: sample rate mismatch for " + name);
        report.rows.push_back({name, mel_snr(ref, rec, mel)});
    }
    for (const auto& [name, path] : recs) {
        if (!refs.count(name)) {
            report.unpaired.push_back(name);
            warn("eval: " + name + " has no reference; skipped");
        }
    }
    if (report.rows.empty()) throw DataError("eval: no file names in common between the two directories");

    const double n = static_cast<double>(report.rows.size());
    for (const auto& r : report.rows) {
        report.mean.snr_low += r.report.snr_low / n;
        report.mean.snr_mid += r.report.snr_mid / n;
        report.mean.snr_high += r.report.snr_high / n;
        report.mean.snr_avg += r.report.snr_avg / n;
    }
    return report;
}

std::string eval_csv(const EvalReport& report) {
    std::ostringstream os;
    os << "file,Mel-SNR-L,Mel-SNR-M,Mel-SNR-H,Mel-SNR-A\n";
    char buf[256];
    auto row = [&](const std::string& name, const MelSnrReport& r) {
        std::snprintf(buf, sizeof(buf), "%s,%.4f,%.4f,%.4f,%.4f\n", name.c_str(), r.snr_low, r.snr_mid, r.snr_high,
                      r.snr_avg);
        os << buf;
    };
    for (const auto& r : report.rows) row(r.file, r.report);
    row("mean", report.mean);
    return os.str();
}

std::string eval_table(const EvalReport& report) {
    std::size_t width = 4;
    for (const auto& r : report.rows) width = std::max(width, r.file.size());
    std::ostringstream os;
    char buf[512];
    std::snprintf(buf, sizeof(buf), "%-*s  %9s  %9s  %9s  %9s\n", static_cast<int>(width), "file", "Mel-SNR-L",
                  "Mel-SNR-M", "Mel-SNR-H", "Mel-SNR-A");
    os << buf << std::string(width + 44, '-') << '\n';
    auto row = [&](const std::string& name, const MelSnrReport& r) {
        std::snprintf(buf, sizeof(buf), "%-*s  %9.3f  %9.3f  %9.3f  %9.3f\n", static_cast<int>(width), name.c_str(),
                      r.snr_low, r.snr_mid, r.snr_high, r.snr_avg);
        os << buf;
    };
    for (const auto& r : report.rows) row(r.file, r.report);
    os << std::string(width + 44, '-') << '\n';
    row("mean", report.mean);
    return os.str();
}

std::string cmd_inspect_schedule(const PipelineConfig& cfg) {
    const auto sched = cfg.make_schedule();
    char buf[128];
    std::snprintf(buf, sizeof(buf), "# %s: fraction of steps with alpha_bar > 0.99 = %.4f\n",
                  to_string(sched.variant).c_str(), fraction_alpha_bar_above(sched, 0.99));
    return schedule_csv(sched) + buf;
}

}  // namespace mbd
