#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ppo/io.hpp"

namespace ppo {

struct PcmTrack {
  std::uint32_t sample_rate = 0;
  std::uint16_t bits_per_sample = 0;
  /// Samples scaled to [-1, 1).
  std::vector<double> samples;
};

namespace detail {

inline std::uint32_t le32(std::string_view b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + i])) << (8 * i);
  return v;
}

inline std::uint16_t le16(std::string_view b, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) |
                                    (static_cast<unsigned char>(b[at + 1]) << 8));
}

}  // namespace detail

/// Parse a RIFF/WAVE file holding mono 16- or 24-bit integer PCM. Stereo and
/// other encodings are rejected rather than converted.
inline PcmTrack decode_wav(std::string_view bytes) {
  using detail::le16;
  using detail::le32;
  if (bytes.size() < 12 || bytes.substr(0, 4) != "RIFF" || bytes.substr(8, 4) != "WAVE")
    throw FormatError("not a RIFF/WAVE file");

  PcmTrack track;
  std::uint16_t channels = 0;
  bool have_fmt = false;
  std::string_view data;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const auto id = bytes.substr(pos, 4);
    const std::size_t size = le32(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (size > bytes.size() - body) throw FormatError("WAV chunk overruns file");
    if (id == "fmt ") {
      if (size < 16) throw FormatError("WAV fmt chunk too short");
      std::uint16_t format = le16(bytes, body);
      channels = le16(bytes, body + 2);
      track.sample_rate = le32(bytes, body + 4);
      track.bits_per_sample = le16(bytes, body + 14);
      // WAVE_FORMAT_EXTENSIBLE carries the real format in its sub-format GUID.
      if (format == 0xFFFE && size >= 26) format = le16(bytes, body + 24);
      if (format != 1) throw FormatError("WAV: only integer PCM is supported");
      have_fmt = true;
    } else if (id == "data") {
      data = bytes.substr(body, size);
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt) throw FormatError("WAV: missing fmt chunk");
  if (data.data() == nullptr) throw FormatError("WAV: missing data chunk");
  if (channels != 1) throw FormatError("WAV: expected mono, got " + std::to_string(channels) + " channels");

  const std::size_t width = track.bits_per_sample / 8;
  if (track.bits_per_sample != 16 && track.bits_per_sample != 24)
    throw FormatError("WAV: unsupported bit depth " + std::to_string(track.bits_per_sample));
  const std::size_t n = data.size() / width;
  track.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto* p = reinterpret_cast<const unsigned char*>(data.data() + i * width);
    if (width == 2) {
      const auto v = static_cast<std::int16_t>(p[0] | (p[1] << 8));
      track.samples[i] = v / 32768.0;
    } else {
      std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
      if (v & 0x800000) v -= 0x1000000;
      track.samples[i] = v / 8388608.0;
    }
  }
  return track;
}

inline PcmTrack read_wav(const std::filesystem::path& path) { return decode_wav(read_file(path)); }

/// Mono 16-bit PCM encoder; samples are clipped to [-1, 1].
inline std::string encode_wav16(const std::vector<double>& samples, std::uint32_t sample_rate) {
  std::string out;
  auto put32 = [&](std::uint32_t v) { for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff)); };
  auto put16 = [&](std::uint16_t v) { out.push_back(static_cast<char>(v & 0xff)); out.push_back(static_cast<char>(v >> 8)); };
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  out += "RIFF";
  put32(36 + data_bytes);
  out += "WAVEfmt ";
  put32(16);
  put16(1);
  put16(1);
  put32(sample_rate);
  put32(sample_rate * 2);
  put16(2);
  put16(16);
  out += "data";
  put32(data_bytes);
  for (double s : samples) {
    const double c = std::clamp(s, -1.0, 1.0);
    put16(static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(std::min(c * 32768.0, 32767.0)))));
  }
  return out;
}

/// Build a dataset from every per-instrument WAV in a directory: each track is
/// cut into one-second rows downsampled by `factor`. Mixture tracks (URMP
/// names them AuMix_*) are skipped. Files are visited in name order.
inline SignalMatrix dataset_from_wav_dir(const std::filesystem::path& dir,
                                         std::uint32_t required_rate = 48000,
                                         std::size_t factor = 10) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (ext != ".wav") continue;
    if (entry.path().filename().string().starts_with("AuMix")) continue;
    files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("no WAV tracks under " + dir.string());

  std::vector<SignalMatrix> parts;
  Eigen::Index rows = 0;
  for (const auto& f : files) {
    PcmTrack t;
    try {
      t = read_wav(f);
    } catch (const FormatError& e) {
      throw FormatError(f.string() + ": " + e.what());
    }
    if (t.sample_rate != required_rate)
      throw FormatError(f.string() + ": sample rate " + std::to_string(t.sample_rate) +
                        ", expected " + std::to_string(required_rate));
    if (t.samples.size() < required_rate) continue;
    parts.push_back(segment_and_downsample(t.samples, required_rate, factor));
    rows += parts.back().rows();
  }
  if (parts.empty()) throw std::runtime_error("no track under " + dir.string() + " lasts one second");
  SignalMatrix out(rows, parts.front().cols());
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p;
    at += p.rows();
  }
  return out;
}

}  // namespace ppo
