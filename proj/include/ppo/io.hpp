#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ppo/data.hpp"
#include "ppo/matrix.hpp"
#include "ppo/nn.hpp"

namespace ppo {

namespace fs = std::filesystem;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Little-endian byte buffers

class ByteWriter {
 public:
  void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void f64s(const double* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) f64(p[i]);
  }

  const std::string& str() const { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string data) : buf_(std::move(data)) {}

  std::string_view bytes(std::size_t n) {
    need(n);
    std::string_view v(buf_.data() + pos_, n);
    pos_ += n;
    return v;
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf_[pos_++]);
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  void f64s(double* p, std::size_t n) {
    need(n * 8);
    for (std::size_t i = 0; i < n; ++i) p[i] = f64();
  }

  std::size_t remaining() const { return buf_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n) throw FormatError("unexpected end of file");
  }

  std::string buf_;
  std::size_t pos_ = 0;
};

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

/// 64-bit FNV-1a of a byte string, rendered as 16 hex digits.
inline std::string content_hash(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

inline std::string file_hash(const fs::path& path) { return content_hash(read_file(path)); }

// ---------------------------------------------------------------------------
// Dataset file: "SIGMAT01", u64 rows, u64 cols, row-major f64 (all LE)

inline constexpr std::string_view kSignalMagic = "SIGMAT01";

inline std::string encode_signal_matrix(const SignalMatrix& m) {
  ByteWriter w;
  w.bytes(kSignalMagic);
  w.u64(static_cast<std::uint64_t>(m.rows()));
  w.u64(static_cast<std::uint64_t>(m.cols()));
  w.f64s(m.data(), static_cast<std::size_t>(m.size()));
  return w.str();
}

inline SignalMatrix decode_signal_matrix(std::string bytes) {
  ByteReader r(std::move(bytes));
  if (r.bytes(kSignalMagic.size()) != kSignalMagic) throw FormatError("not a SIGMAT01 file");
  const auto rows = r.u64();
  const auto cols = r.u64();
  if (cols != 0 && rows > r.remaining() / 8 / cols) throw FormatError("SIGMAT01: truncated payload");
  SignalMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  r.f64s(m.data(), static_cast<std::size_t>(m.size()));
  if (r.remaining() != 0) throw FormatError("SIGMAT01: trailing bytes");
  if (!m.allFinite()) throw FormatError("SIGMAT01: non-finite entries");
  return m;
}

inline void save_signal_matrix(const fs::path& path, const SignalMatrix& m) {
  write_file(path, encode_signal_matrix(m));
}

inline SignalMatrix load_signal_matrix(const fs::path& path) {
  return decode_signal_matrix(read_file(path));
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void save_csv(const fs::path& path, const Matrix& m) {
  std::string out;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      out += format_double(m(r, c));
    }
    out += '\n';
  }
  write_file(path, out);
}

// ---------------------------------------------------------------------------
// Checkpoint: "PPOCKPT1", u64 layer count, per layer (u64 rows, u64 cols),
// one activation tag byte per layer, then per layer the row-major weight
// followed by the bias, then the scaler block:
//   u8 kind, u64 columns, columns x f64 first statistic, columns x f64 second.

inline constexpr std::string_view kCheckpointMagic = "PPOCKPT1";

struct Checkpoint {
  Mlp model;
  ScalerParams scaler;
};

inline std::string encode_checkpoint(const Mlp& model, const ScalerParams& scaler) {
  model.validate();
  ByteWriter w;
  w.bytes(kCheckpointMagic);
  w.u64(model.layers.size());
  for (const auto& l : model.layers) {
    w.u64(static_cast<std::uint64_t>(l.weight.rows()));
    w.u64(static_cast<std::uint64_t>(l.weight.cols()));
  }
  for (const auto& l : model.layers) w.u8(static_cast<std::uint8_t>(l.activation));
  for (const auto& l : model.layers) {
    w.f64s(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    w.f64s(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
  }
  w.u8(static_cast<std::uint8_t>(scaler.kind));
  const auto cols = static_cast<std::uint64_t>(scaler.first.size());
  w.u64(cols);
  w.f64s(scaler.first.data(), cols);
  w.f64s(scaler.second.data(), cols);
  return w.str();
}

inline Checkpoint decode_checkpoint(std::string bytes) {
  ByteReader r(std::move(bytes));
  if (r.bytes(kCheckpointMagic.size()) != kCheckpointMagic) throw FormatError("not a PPOCKPT1 file");
  const auto count = r.u64();
  if (count == 0 || count > 1024) throw FormatError("PPOCKPT1: bad layer count");
  std::vector<std::pair<std::uint64_t, std::uint64_t>> shapes(count);
  for (auto& s : shapes) {
    s.first = r.u64();
    s.second = r.u64();
    if (s.first == 0 || s.second == 0 || s.first > (1u << 24) || s.second > (1u << 24))
      throw FormatError("PPOCKPT1: bad layer shape");
  }
  Checkpoint ck;
  ck.model.layers.resize(count);
  for (auto& l : ck.model.layers) {
    const auto tag = r.u8();
    if (tag > 2) throw FormatError("PPOCKPT1: unknown activation tag");
    l.activation = static_cast<Activation>(tag);
  }
  for (std::size_t i = 0; i < count; ++i) {
    auto& l = ck.model.layers[i];
    l.weight.resize(static_cast<Eigen::Index>(shapes[i].first),
                    static_cast<Eigen::Index>(shapes[i].second));
    l.bias.resize(static_cast<Eigen::Index>(shapes[i].first));
    r.f64s(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    r.f64s(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
  }
  const auto kind = r.u8();
  if (kind > 2) throw FormatError("PPOCKPT1: unknown scaler kind");
  ck.scaler.kind = static_cast<ScalerKind>(kind);
  const auto cols = r.u64();
  if (cols > r.remaining() / 16) throw FormatError("PPOCKPT1: truncated scaler block");
  ck.scaler.first.resize(static_cast<Eigen::Index>(cols));
  ck.scaler.second.resize(static_cast<Eigen::Index>(cols));
  r.f64s(ck.scaler.first.data(), cols);
  r.f64s(ck.scaler.second.data(), cols);
  if (r.remaining() != 0) throw FormatError("PPOCKPT1: trailing bytes");
  try {
    ck.model.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("PPOCKPT1: ") + e.what());
  }
  return ck;
}

inline void save_checkpoint(const fs::path& path, const Mlp& model, const ScalerParams& scaler) {
  write_file(path, encode_checkpoint(model, scaler));
}

inline Checkpoint load_checkpoint(const fs::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace ppo
