// Copyright 2026 The uniadapt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Embedding containers.
//
// Stream file (little-endian):
//   "UAEB" | u32 version=1 | u32 d | u64 n | n x { i32 label (-1 unknown), d x f32 }
// Class file:
//   "UACL" | u32 version=1 | u32 d | u32 K | K x { u16 name_len, name bytes, d x f32 }
// Cache file: a stream file whose labels are the prototypes' classes, followed by
//   "UACN" | u32 K | u32 capacity | u64 n | n x u64 count
//
// JSONL is accepted on input: one {"label": int|null, "feature": [...]} per line
// for streams, one {"name": str, "embedding": [...]} per line for classes.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "uniadapt/error.hpp"
#include "uniadapt/numerics.hpp"
#include "uniadapt/proto_cache.hpp"

namespace uniadapt {

struct StreamRecord {
  FeatureVec feature;
  std::optional<std::size_t> label;  ///< ground truth, evaluation only

  friend bool operator==(const StreamRecord&, const StreamRecord&) = default;
};

inline constexpr std::array<char, 4> kStreamMagic{'U', 'A', 'E', 'B'};
inline constexpr std::array<char, 4> kClassMagic{'U', 'A', 'C', 'L'};
inline constexpr std::array<char, 4> kCountsMagic{'U', 'A', 'C', 'N'};
inline constexpr std::uint32_t kFormatVersion = 1;

namespace io {

static_assert(std::numeric_limits<float>::is_iec559, "f32 payloads assume IEEE-754 floats");

template <class T>
void put_le(std::ostream& out, T value) {
  std::array<unsigned char, sizeof(T)> bytes{};
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
  U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<unsigned char>(bits & 0xFFu);
    bits = static_cast<U>(bits >> 8);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <class T>
T get_le(std::istream& in, const char* what) {
  std::array<unsigned char, sizeof(T)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(T))) {
    throw Error(Errc::TruncatedFile, std::string("unexpected end of file reading ") + what);
  }
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
  U bits = 0;
  for (std::size_t i = sizeof(T); i-- > 0;) bits = static_cast<U>((bits << 8) | bytes[i]);
  return std::bit_cast<T>(bits);
}

inline void put_magic(std::ostream& out, const std::array<char, 4>& magic) {
  out.write(magic.data(), 4);
}

inline void expect_magic(std::istream& in, const std::array<char, 4>& magic) {
  std::array<char, 4> got{};
  in.read(got.data(), 4);
  if (in.gcount() != 4) throw Error(Errc::TruncatedFile, "file too short for magic");
  if (got != magic) {
    throw Error(Errc::FormatError, "bad magic '" + std::string(got.data(), 4) + "', expected '" +
                                       std::string(magic.data(), 4) + "'");
  }
}

inline void expect_version(std::istream& in) {
  const auto version = get_le<std::uint32_t>(in, "version");
  if (version != kFormatVersion) {
    throw Error(Errc::FormatError, "unsupported version " + std::to_string(version));
  }
}

inline void put_features(std::ostream& out, std::span<const double> v) {
  for (double x : v) put_le<float>(out, static_cast<float>(x));
}

inline FeatureVec get_features(std::istream& in, std::size_t dim) {
  FeatureVec v(dim);
  for (double& x : v) x = static_cast<double>(get_le<float>(in, "feature"));
  return v;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string() + " for reading");
  return in;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
  return out;
}

/// Binary containers start with 'U'; JSONL starts with '{' or whitespace.
/// Peeking keeps this usable on pipes.
inline bool looks_binary(std::istream& in) { return in.peek() == 'U'; }

}  // namespace io

// ---------------------------------------------------------------------------
// Stream records

/// Sequential source of stream records.
class RecordSource {
 public:
  virtual ~RecordSource() = default;
  virtual std::optional<StreamRecord> next() = 0;
  /// Feature dimension; 0 while unknown (JSONL before the first record).
  virtual std::size_t dim() const = 0;
};

class BinaryRecordReader final : public RecordSource {
 public:
  explicit BinaryRecordReader(std::istream& in) : in_(in) {
    io::expect_magic(in_, kStreamMagic);
    io::expect_version(in_);
    dim_ = io::get_le<std::uint32_t>(in_, "dimension");
    count_ = io::get_le<std::uint64_t>(in_, "record count");
  }

  std::optional<StreamRecord> next() override {
    if (read_ == count_) return std::nullopt;
    StreamRecord rec;
    const auto label = io::get_le<std::int32_t>(in_, "label");
    if (label < -1) throw Error(Errc::FormatError, "negative label " + std::to_string(label));
    if (label >= 0) rec.label = static_cast<std::size_t>(label);
    rec.feature = io::get_features(in_, dim_);
    ++read_;
    return rec;
  }

  std::size_t dim() const override { return dim_; }
  std::uint64_t count() const noexcept { return count_; }

 private:
  std::istream& in_;
  std::size_t dim_ = 0;
  std::uint64_t count_ = 0;
  std::uint64_t read_ = 0;
};

class JsonlRecordReader final : public RecordSource {
 public:
  explicit JsonlRecordReader(std::istream& in, std::size_t dim = 0) : in_(in), dim_(dim) {}

  std::optional<StreamRecord> next() override {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      return parse(line);
    }
    return std::nullopt;
  }

  std::size_t dim() const override { return dim_; }

 private:
  StreamRecord parse(const std::string& line) {
    const std::string where = "JSONL line " + std::to_string(line_no_);
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::FormatError, where + ": " + e.what());
    }
    if (!obj.is_object() || !obj.contains("feature") || !obj["feature"].is_array()) {
      throw Error(Errc::FormatError, where + ": expected an object with a \"feature\" array");
    }
    StreamRecord rec;
    try {
      rec.feature = obj["feature"].get<FeatureVec>();
      if (obj.contains("label") && !obj["label"].is_null()) {
        const auto label = obj["label"].get<std::int64_t>();
        if (label < -1) throw Error(Errc::FormatError, where + ": negative label");
        if (label >= 0) rec.label = static_cast<std::size_t>(label);
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::FormatError, where + ": " + e.what());
    }
    if (dim_ == 0) dim_ = rec.feature.size();
    if (rec.feature.size() != dim_) {
      throw Error(Errc::DimMismatch, where + ": feature has " + std::to_string(rec.feature.size()) +
                                         " entries, expected " + std::to_string(dim_));
    }
    return rec;
  }

  std::istream& in_;
  std::size_t dim_;
  std::size_t line_no_ = 0;
};

/// Opens a record source reading from `in`, picking binary or JSONL by magic.
inline std::unique_ptr<RecordSource> open_records(std::istream& in) {
  if (io::looks_binary(in)) return std::make_unique<BinaryRecordReader>(in);
  return std::make_unique<JsonlRecordReader>(in);
}

inline void write_embeddings(std::ostream& out, std::size_t dim,
                             std::span<const StreamRecord> records) {
  io::put_magic(out, kStreamMagic);
  io::put_le<std::uint32_t>(out, kFormatVersion);
  io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
  io::put_le<std::uint64_t>(out, records.size());
  for (const StreamRecord& r : records) {
    require_same_dim(r.feature.size(), dim, "record vs header dim");
    io::put_le<std::int32_t>(out, r.label ? static_cast<std::int32_t>(*r.label) : -1);
    io::put_features(out, r.feature);
  }
}

struct EmbeddingStream {
  std::size_t dim = 0;
  std::vector<StreamRecord> records;
};

inline EmbeddingStream read_embeddings(std::istream& in) {
  auto source = open_records(in);
  EmbeddingStream out;
  while (auto rec = source->next()) out.records.push_back(std::move(*rec));
  out.dim = source->dim();
  return out;
}

inline void write_embeddings_file(const std::filesystem::path& path, std::size_t dim,
                                  std::span<const StreamRecord> records) {
  auto out = io::open_out(path);
  write_embeddings(out, dim, records);
  if (!out) throw Error(Errc::IoError, "write failed: " + path.string());
}

inline EmbeddingStream read_embeddings_file(const std::filesystem::path& path) {
  auto in = io::open_in(path);
  return read_embeddings(in);
}

inline void write_jsonl(std::ostream& out, std::span<const StreamRecord> records) {
  for (const StreamRecord& r : records) {
    nlohmann::json obj;
    obj["label"] = r.label ? nlohmann::json(*r.label) : nlohmann::json(nullptr);
    obj["feature"] = r.feature;
    out << obj.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Class embeddings

inline void write_classes(std::ostream& out, const ClassEmbeddings& classes) {
  io::put_magic(out, kClassMagic);
  io::put_le<std::uint32_t>(out, kFormatVersion);
  io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(classes.dim()));
  io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(classes.classes()));
  for (std::size_t k = 0; k < classes.classes(); ++k) {
    const std::string& name = classes.names()[k];
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw Error(Errc::FormatError, "class name longer than 65535 bytes");
    }
    io::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    io::put_features(out, classes.row(k));
  }
}

inline ClassEmbeddings read_classes_jsonl(std::istream& in) {
  std::vector<std::string> names;
  Matrix rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto obj = nlohmann::json::parse(line);
      names.push_back(obj.at("name").get<std::string>());
      rows.append_row(obj.at("embedding").get<FeatureVec>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::FormatError, "class JSONL line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return ClassEmbeddings(std::move(names), std::move(rows));
}

inline ClassEmbeddings read_classes(std::istream& in) {
  const int first = in.peek();
  if (first == '{' || first == ' ' || first == '\n') return read_classes_jsonl(in);
  io::expect_magic(in, kClassMagic);
  io::expect_version(in);
  const auto dim = io::get_le<std::uint32_t>(in, "dimension");
  const auto k = io::get_le<std::uint32_t>(in, "class count");
  std::vector<std::string> names;
  Matrix rows(0, dim);
  for (std::uint32_t i = 0; i < k; ++i) {
    const auto len = io::get_le<std::uint16_t>(in, "name length");
    std::string name(len, '\0');
    in.read(name.data(), len);
    if (in.gcount() != len) throw Error(Errc::TruncatedFile, "unexpected end of file in class name");
    names.push_back(std::move(name));
    rows.append_row(io::get_features(in, dim));
  }
  return ClassEmbeddings(std::move(names), std::move(rows));
}

inline void write_classes_file(const std::filesystem::path& path, const ClassEmbeddings& classes) {
  auto out = io::open_out(path);
  write_classes(out, classes);
  if (!out) throw Error(Errc::IoError, "write failed: " + path.string());
}

inline ClassEmbeddings read_classes_file(const std::filesystem::path& path) {
  auto in = io::open_in(path);
  return read_classes(in);
}

// ---------------------------------------------------------------------------
// Prototype cache

inline void write_cache(std::ostream& out, const PrototypeCache& cache, std::size_t dim) {
  std::vector<StreamRecord> rows;
  std::vector<std::uint64_t> counts;
  for (std::size_t k = 0; k < cache.classes(); ++k) {
    for (const Prototype& p : cache.prototypes(k)) {
      rows.push_back({p.center, k});
      counts.push_back(p.count);
    }
  }
  write_embeddings(out, dim, rows);
  io::put_magic(out, kCountsMagic);
  io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(cache.classes()));
  io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(cache.capacity()));
  io::put_le<std::uint64_t>(out, counts.size());
  for (std::uint64_t c : counts) io::put_le<std::uint64_t>(out, c);
}

/// Rebuilds a cache from its file. Rows must appear in class-major order.
inline PrototypeCache read_cache(std::istream& in) {
  BinaryRecordReader reader(in);
  std::vector<StreamRecord> rows;
  while (auto rec = reader.next()) rows.push_back(std::move(*rec));
  io::expect_magic(in, kCountsMagic);
  const auto classes = io::get_le<std::uint32_t>(in, "class count");
  const auto capacity = io::get_le<std::uint32_t>(in, "capacity");
  const auto n = io::get_le<std::uint64_t>(in, "count entries");
  if (n != rows.size()) throw Error(Errc::FormatError, "count section does not match rows");
  PrototypeCache cache(classes, capacity);
  std::size_t last_class = 0;
  for (const StreamRecord& r : rows) {
    const auto count = io::get_le<std::uint64_t>(in, "count");
    if (!r.label || *r.label >= classes || *r.label < last_class || count == 0) {
      throw Error(Errc::FormatError, "cache rows must carry ascending class labels and counts >= 1");
    }
    last_class = *r.label;
    cache.insert(*r.label, Prototype{r.feature, static_cast<std::size_t>(count)});
  }
  return cache;
}

}  // namespace uniadapt
