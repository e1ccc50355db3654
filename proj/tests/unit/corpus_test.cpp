#include <gtest/gtest.h>

#include "conceptforge/corpus.hpp"
#include "conceptforge/error.hpp"
#include "conceptforge/feature_io.hpp"
#include "conceptforge/synthetic.hpp"
#include "fixtures.hpp"

using namespace conceptforge;

TEST(Corpus, ZeroTensorFileSize) {
  fixtures::TempDir dir;
  const auto t = fixtures::make_tensor("z", 1, 1, 4, {0, 0, 0, 0});
  write_feature_file(t, dir / "z.vcft");
  const auto bytes = fixtures::slurp(dir / "z.vcft");
  const uint32_t meta = static_cast<uint8_t>(bytes[20]) | static_cast<uint8_t>(bytes[21]) << 8;
  EXPECT_EQ(bytes.size(), 8 + 16 + meta + 16);
  EXPECT_EQ(read_feature_file(dir / "z.vcft"), t);
}

TEST(Corpus, WriteLoadRoundTripSortedById) {
  SyntheticSpec spec;
  spec.n_images = 7;
  spec.grid_w = spec.grid_h = 4;
  spec.channels = spec.layer.channels = 16;
  spec.n_planted_concepts = 3;
  spec.placements_per_image = 2;
  auto syn = generate_synthetic_corpus(spec, 1);
  std::reverse(syn.tensors.begin(), syn.tensors.end());
  fixtures::TempDir dir;
  write_corpus(dir.path(), syn.tensors, syn.ground_truth);
  EXPECT_TRUE(std::filesystem::exists(dir / feature_file_name(syn.tensors[0].image_id(), "pool4")));
  const auto corpus = load_corpus(dir.path(), "pool4");
  ASSERT_EQ(corpus.tensors.size(), 7u);
  const auto ids = corpus.image_ids();
  EXPECT_TRUE(std::is_sorted(ids.begin(), ids.end()));
  std::reverse(syn.tensors.begin(), syn.tensors.end());
  EXPECT_EQ(corpus.tensors, syn.tensors);
  EXPECT_EQ(corpus.annotations, syn.ground_truth);
  EXPECT_TRUE(load_corpus(dir.path(), "pool5").tensors.empty());
}

TEST(Corpus, FileNaming) {
  EXPECT_EQ(feature_file_name("img7", "pool3"), "img7.pool3.vcft");
}

TEST(Corpus, RejectsDuplicatesAndMismatches) {
  fixtures::TempDir dir;
  const auto a = fixtures::make_tensor("a", 1, 1, 2, {1, 0});
  write_feature_file(a, dir / "a.pool4.vcft");
  write_feature_file(a, dir / "copy.pool4.vcft");
  EXPECT_THROW(load_corpus(dir.path(), "pool4"), DataError);

  fixtures::TempDir dir2;
  write_feature_file(a, dir2 / "a.pool4.vcft");
  write_feature_file(fixtures::make_tensor("b", 1, 1, 3, {1, 0, 0}), dir2 / "b.pool4.vcft");
  EXPECT_THROW(load_corpus(dir2.path(), "pool4"), DataError);

  fixtures::TempDir dir3;
  write_feature_file(a, dir3 / "a.pool3.vcft");  // name says pool3, file says pool4
  EXPECT_THROW(load_corpus(dir3.path(), "pool3"), DataError);

  EXPECT_THROW(load_corpus(dir.path() / "nope", "pool4"), DataError);
}

TEST(Corpus, MergeMapAppliedOnLoad) {
  fixtures::TempDir dir;
  write_feature_file(fixtures::make_tensor("img7", 1, 1, 2, {1, 0}), dir / "img7.pool4.vcft");
  {
    std::ofstream f(dir / "annotations.txt");
    f << "img7 L-headlight 30 40 front\nimg7 R-headlight 50 40 front\nimg7 tail-rotor 10 10\n";
  }
  const auto map = MergeMap::parse("L-headlight -> headlight\nR-headlight -> headlight\ntail-rotor -> DISCARD\n");
  const auto corpus = load_corpus(dir.path(), "pool4", &map);
  ASSERT_EQ(corpus.annotations.size(), 2u);
  EXPECT_EQ(corpus.annotations[0].part_id, "headlight");
  EXPECT_EQ(corpus.annotations[0].center, (Point{30, 40}));
  EXPECT_EQ(corpus.annotations[0].viewpoint, Viewpoint::front);
  EXPECT_TRUE(parse_annotations("").empty());
}
