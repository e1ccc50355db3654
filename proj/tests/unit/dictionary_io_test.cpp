#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <random>

#include "conceptforge/dictionary_io.hpp"
#include "conceptforge/error.hpp"
#include "fixtures.hpp"

using namespace conceptforge;

namespace {

ConceptDictionary sample_dictionary() {
  ConceptDictionary d;
  d.object_class = "car";
  d.layer = {"pool4", 3, 16, 100, 7.5};
  d.concepts = {{4, {0.5f, -0.25f, 1.0f}, 12}, {9, {0, 0, 1e-30f}, 1}};
  d.provenance = {64, 7, 0.95, 20000};
  d.extra = {{"config.k", "64"}, {"note", "x y"}};
  return d;
}

float random_finite(std::mt19937_64& rng) {
  for (;;) {
    const float f = std::bit_cast<float>(static_cast<uint32_t>(rng()));
    if (std::isfinite(f)) return f;
  }
}

}  // namespace

TEST(DictionaryIo, RoundTrip) {
  const auto d = sample_dictionary();
  EXPECT_EQ(decode_dictionary(encode_dictionary(d)), d);
  fixtures::TempDir dir("dict");
  write_dictionary_file(d, dir / "d.vcdc");
  EXPECT_EQ(read_dictionary_file(dir / "d.vcdc"), d);
}

TEST(DictionaryIo, UnmergedThresholdSurvives) {
  auto d = sample_dictionary();
  d.provenance.merge_threshold = -1.0;
  EXPECT_EQ(decode_dictionary(encode_dictionary(d)).provenance.merge_threshold, -1.0);
}

TEST(DictionaryIo, Errors) {
  const auto bytes = encode_dictionary(sample_dictionary());
  auto bad = bytes;
  bad.replace(0, 4, "XXXX");
  try {
    decode_dictionary(bad);
    FAIL() << "expected a format error";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
  EXPECT_THROW(decode_dictionary(bytes.substr(0, bytes.size() - 1)), FormatError);
  EXPECT_THROW(decode_dictionary(bytes + "z"), FormatError);

  auto mismatched = sample_dictionary();
  mismatched.concepts[0].centroid.push_back(1);
  EXPECT_THROW(encode_dictionary(mismatched), DataError);
  EXPECT_THROW(read_dictionary_file("/nonexistent/d.vcdc"), DataError);
}

TEST(DictionaryIo, RandomInstancesRoundTripBitwise) {
  std::mt19937_64 rng(77);
  for (int t = 0; t < 100; ++t) {
    ConceptDictionary d;
    d.object_class = "cls" + std::to_string(t);
    const uint32_t channels = 1 + static_cast<uint32_t>(rng() % 40);
    d.layer = {"pool" + std::to_string(3 + t % 3), channels, 8u << (t % 3), 44, 3.5};
    d.provenance = {static_cast<uint32_t>(rng() % 1000), rng(), (t % 2) ? 0.9 : -1.0,
                    rng() % 100000};
    const std::size_t n = rng() % 20;
    for (std::size_t i = 0; i < n; ++i) {
      VisualConcept vc{static_cast<uint32_t>(rng()), std::vector<float>(channels),
                       static_cast<uint32_t>(rng())};
      for (auto& v : vc.centroid) v = random_finite(rng);
      d.concepts.push_back(std::move(vc));
    }
    const auto bytes = encode_dictionary(d);
    const auto back = decode_dictionary(bytes);
    EXPECT_EQ(encode_dictionary(back), bytes);
    ASSERT_EQ(back.concepts.size(), n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < channels; ++c) {
        EXPECT_EQ(std::bit_cast<uint32_t>(back.concepts[i].centroid[c]),
                  std::bit_cast<uint32_t>(d.concepts[i].centroid[c]));
      }
    }
  }
}
