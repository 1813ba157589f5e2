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

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "mbd/audio.hpp"

namespace mbd {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

[[noreturn]] void malformed(const std::filesystem::path& path, const std::string& what) {
    throw WavError(WavError::Kind::malformed_header, path.string() + ": " + what);
}

}  // namespace

AudioSignal load_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw WavError(WavError::Kind::missing_file, "cannot open " + path.string());
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                           std::istreambuf_iterator<char>());

    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
        malformed(path, "missing RIFF/WAVE signature");
    }

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t sample_rate = 0;
    bool have_fmt = false;
    const unsigned char* data = nullptr;
    std::size_t data_size = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const unsigned char* chunk = bytes.data() + pos;
        const std::uint32_t size = read_u32(chunk + 4);
        const std::size_t body = pos + 8;
        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            if (size < 16 || body + size > bytes.size()) malformed(path, "truncated fmt chunk");
            format = read_u16(bytes.data() + body);
            channels = read_u16(bytes.data() + body + 2);
            sample_rate = read_u32(bytes.data() + body + 4);
            bits = read_u16(bytes.data() + body + 14);
            if (format == kFormatExtensible) {
                if (size < 40) malformed(path, "truncated extensible fmt chunk");
                format = read_u16(bytes.data() + body + 24);
            }
            have_fmt = true;
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            if (!have_fmt) malformed(path, "data chunk before fmt chunk");
            data = bytes.data() + body;
            data_size = std::min<std::size_t>(size, bytes.size() - body);
            break;
        }
        pos = body + size + (size & 1u);
    }
    if (!have_fmt) malformed(path, "no fmt chunk");
    if (data == nullptr) malformed(path, "no data chunk");
    if (sample_rate == 0) malformed(path, "zero sample rate");

    const bool pcm16 = format == kFormatPcm && bits == 16;
    const bool f32 = format == kFormatFloat && bits == 32;
    if (!pcm16 && !f32) {
        throw WavError(WavError::Kind::unsupported_encoding,
                       path.string() + ": format " + std::to_string(format) + " with " +
                           std::to_string(bits) + " bits is not PCM16 or float32");
    }
    if (channels != 1 && channels != 2) {
        throw WavError(WavError::Kind::unsupported_encoding,
                       path.string() + ": " + std::to_string(channels) + " channels");
    }

    const std::size_t width = bits / 8;
    const std::size_t frames = data_size / (width * channels);
    std::vector<double> samples(frames);
    for (std::size_t i = 0; i < frames; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
            const unsigned char* p = data + (i * channels + c) * width;
            if (pcm16) {
                acc += static_cast<std::int16_t>(read_u16(p)) / 32768.0;
            } else {
                const std::uint32_t u = read_u32(p);
                float v;
                std::memcpy(&v, &u, sizeof(v));
                acc += v;
            }
        }
        samples[i] = acc / channels;
    }
    return AudioSignal(std::move(samples), static_cast<int>(sample_rate));
}

std::size_t save_wav(const AudioSignal& signal, const std::filesystem::path& path,
                     WavEncoding encoding) {
    const bool pcm16 = encoding == WavEncoding::pcm16;
    const std::uint16_t bits = pcm16 ? 16 : 32;
    const std::uint32_t data_size = static_cast<std::uint32_t>(signal.size() * (bits / 8));

    std::string out;
    out.reserve(44 + data_size);
    out += "RIFF";
    put_u32(out, 36 + data_size);
    out += "WAVEfmt ";
    put_u32(out, 16);
    put_u16(out, pcm16 ? kFormatPcm : kFormatFloat);
    put_u16(out, 1);
    put_u32(out, static_cast<std::uint32_t>(signal.sample_rate()));
    put_u32(out, static_cast<std::uint32_t>(signal.sample_rate()) * (bits / 8));
    put_u16(out, bits / 8);
    put_u16(out, bits);
    out += "data";
    put_u32(out, data_size);

    std::size_t clipped = 0;
    for (double v : signal.samples()) {
        if (pcm16) {
            if (v > 1.0 || v < -1.0) ++clipped;
            const double c = std::clamp(v, -1.0, 1.0);
            const auto q = static_cast<std::int16_t>(std::clamp<long>(std::lround(c * 32768.0), -32768, 32767));
            put_u16(out, static_cast<std::uint16_t>(q));
        } else {
            const float f = static_cast<float>(v);
            std::uint32_t u;
            std::memcpy(&u, &f, sizeof(u));
            put_u32(out, u);
        }
    }

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw WavError(WavError::Kind::unwritable_path, "cannot write " + path.string());
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!file) throw WavError(WavError::Kind::unwritable_path, "write failed: " + path.string());
    return clipped;
}

}  // namespace mbd
