// Copyright 2026 The uniadapt Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "oracles.hpp"
#include "test_util.hpp"
#include "uniadapt/adapter.hpp"
#include "uniadapt/streams.hpp"
#include "uniadapt/synth.hpp"

using namespace uniadapt;

namespace {

std::vector<StreamRecord> float_records(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<StreamRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    FeatureVec f = oracle::random_unit(d, rng);
    for (double& x : f) x = static_cast<double>(static_cast<float>(x));
    std::optional<std::size_t> label;
    if (i % 7 != 3) label = i % 11;
    out.push_back({f, label});
  }
  return out;
}

std::string bytes_of(std::size_t d, const std::vector<StreamRecord>& r) {
  std::ostringstream out(std::ios::binary);
  write_embeddings(out, d, r);
  return out.str();
}

}  // namespace

TEST_CASE("binary stream round-trips bit-identically") {
  const auto records = float_records(1000, 12, 1);
  std::istringstream in(bytes_of(12, records), std::ios::binary);
  const EmbeddingStream s = read_embeddings(in);
  CHECK(s.dim == 12);
  CHECK(s.records == records);
  CHECK(bytes_of(12, s.records) == bytes_of(12, records));
}

TEST_CASE("binary header layout is little-endian") {
  const std::string b = bytes_of(3, {{FeatureVec{1, 0, 0}, 2}});
  REQUIRE(b.size() == 4 + 4 + 4 + 8 + 4 + 12);
  CHECK(b.substr(0, 4) == "UAEB");
  CHECK(static_cast<unsigned char>(b[4]) == 1);
  CHECK(static_cast<unsigned char>(b[8]) == 3);
  CHECK(static_cast<unsigned char>(b[12]) == 1);
  CHECK(static_cast<unsigned char>(b[20]) == 2);
  CHECK(static_cast<unsigned char>(b[27]) == 0x3F);  // 1.0f = 0x3F800000
  CHECK(static_cast<unsigned char>(b[26]) == 0x80);
}

TEST_CASE("malformed streams are rejected") {
  std::istringstream bad_magic("XXXX\x01\0\0\0", std::ios::binary);
  CHECK(throws_code(Errc::FormatError, [&] { BinaryRecordReader r(bad_magic); }));

  std::string full = bytes_of(512, float_records(2, 512, 2));
  std::istringstream cut(full.substr(0, full.size() - 100), std::ios::binary);
  CHECK(throws_code(Errc::TruncatedFile, [&] { read_embeddings(cut); }));

  std::string versioned = full;
  versioned[4] = 9;
  std::istringstream v(versioned, std::ios::binary);
  CHECK(throws_code(Errc::FormatError, [&] { read_embeddings(v); }));

  std::ostringstream sink;
  CHECK(throws_code(Errc::DimMismatch, [&] { write_embeddings(sink, 4, float_records(1, 3, 1)); }));
}

TEST_CASE("JSONL streams parse labels, unknowns and dimensions") {
  std::istringstream in(
      "{\"label\": 2, \"feature\": [1, 0]}\n"
      "\n"
      "{\"label\": null, \"feature\": [0, 1]}\n"
      "{\"feature\": [0.6, 0.8]}\n");
  const EmbeddingStream s = read_embeddings(in);
  REQUIRE(s.records.size() == 3);
  CHECK(s.dim == 2);
  CHECK(s.records[0].label == 2u);
  CHECK_FALSE(s.records[1].label);
  CHECK_FALSE(s.records[2].label);

  std::istringstream mixed("{\"label\": 0, \"feature\": [1, 0]}\n{\"label\": 0, \"feature\": [1, 0, 0]}\n");
  CHECK(throws_code(Errc::DimMismatch, [&] { read_embeddings(mixed); }));
  std::istringstream broken("{\"label\": 0, \"feature\": [1, 0}\n");
  CHECK(throws_code(Errc::FormatError, [&] { read_embeddings(broken); }));
  std::istringstream missing("{\"label\": 0}\n");
  CHECK(throws_code(Errc::FormatError, [&] { read_embeddings(missing); }));
}

TEST_CASE("JSONL output reads back as the same records") {
  const auto records = float_records(50, 5, 3);
  std::stringstream buf;
  write_jsonl(buf, records);
  CHECK(read_embeddings(buf).records == records);
}

TEST_CASE("class files round-trip in both encodings") {
  ClassEmbeddings w = gen_class_embeddings(6, 16, 4);
  std::stringstream bin(std::ios::in | std::ios::out | std::ios::binary);
  write_classes(bin, w);
  const ClassEmbeddings back = read_classes(bin);
  CHECK(back.names() == w.names());
  for (std::size_t k = 0; k < 6; ++k) {
    for (std::size_t i = 0; i < 16; ++i) {
      CHECK(back.rows()(k, i) == static_cast<double>(static_cast<float>(w.rows()(k, i))));
    }
  }
  std::stringstream again(std::ios::in | std::ios::out | std::ios::binary);
  write_classes(again, back);
  std::stringstream first(std::ios::in | std::ios::out | std::ios::binary);
  write_classes(first, w);
  CHECK(again.str() == first.str());

  std::istringstream jsonl("{\"name\": \"cat\", \"embedding\": [1, 0]}\n{\"name\": \"dog\", \"embedding\": [0, 1]}\n");
  const ClassEmbeddings j = read_classes(jsonl);
  CHECK(j.names() == std::vector<std::string>{"cat", "dog"});

  std::istringstream bad("UACX");
  CHECK(throws_code(Errc::FormatError, [&] { read_classes(bad); }));
}

TEST_CASE("prototype cache files round-trip") {
  const ClassEmbeddings w = gen_class_embeddings(4, 8, 5);
  SynthSpec spec;
  spec.n_samples = 300;
  spec.seed = 5;
  Adapter a(w, {});
  for (const auto& r : gen_stream(w, spec)) a.process(r.feature);

  std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
  write_cache(buf, a.cache(), 8);
  const PrototypeCache back = read_cache(buf);
  REQUIRE(back.classes() == 4);
  CHECK(back.capacity() == 30);
  for (std::size_t k = 0; k < 4; ++k) {
    REQUIRE(back.size(k) == a.cache().size(k));
    for (std::size_t n = 0; n < back.size(k); ++n) {
      CHECK(back.at(k, n).count == a.cache().at(k, n).count);
      CHECK(is_unit(back.at(k, n).center));
    }
  }
  std::stringstream again(std::ios::in | std::ios::out | std::ios::binary);
  write_cache(again, back, 8);
  std::stringstream first(std::ios::in | std::ios::out | std::ios::binary);
  write_cache(first, a.cache(), 8);
  CHECK(again.str() == first.str());
}

TEST_CASE("generated streams survive write, read, write byte for byte") {
  const ClassEmbeddings w = gen_class_embeddings(5, 32, 6);
  SynthSpec spec;
  spec.n_samples = 400;
  spec.seed = 6;
  const auto records = gen_stream(w, spec);
  const std::string once = bytes_of(32, records);
  std::istringstream in(once, std::ios::binary);
  CHECK(bytes_of(32, read_embeddings(in).records) == once);
}

TEST_CASE("binary and JSONL are told apart by their first byte") {
  std::istringstream bin(bytes_of(2, {{FeatureVec{1, 0}, 0}}), std::ios::binary);
  CHECK(dynamic_cast<BinaryRecordReader*>(open_records(bin).get()) != nullptr);
  std::istringstream text("{\"feature\": [1, 0]}\n");
  CHECK(dynamic_cast<JsonlRecordReader*>(open_records(text).get()) != nullptr);
}
