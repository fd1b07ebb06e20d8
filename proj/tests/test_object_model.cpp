#include <numeric>
#include <string>

#include <gtest/gtest.h>

#include "fracgi/builtin_masks.hpp"
#include "fracgi/error.hpp"
#include "fracgi/object_model.hpp"
#include "test_helpers.hpp"

using namespace fracgi;

namespace {

std::string pgm8(std::size_t w, std::size_t h, std::initializer_list<int> px, int maxval = 255) {
  std::string s = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n" + std::to_string(maxval) + "\n";
  for (int v : px) s.push_back(static_cast<char>(v));
  return s;
}

} // namespace

TEST(ObjectMask, RejectsInvalidShapesAndValues) {
  EXPECT_THROW(ObjectMask(0, 1, {}), UsageError);
  EXPECT_THROW(ObjectMask(2, 2, {0, 1, 1}), UsageError);
  EXPECT_THROW(ObjectMask(1, 1, {1.5}), UsageError);
  EXPECT_THROW(ObjectMask(1, 1, {-0.1}), UsageError);
  EXPECT_NO_THROW(ObjectMask(1, 2, {0.0, 1.0}));
}

TEST(LoadObject, CsvWithSemicolonRows) {
  const auto mask = load_object_from_bytes("0,1;1,0");
  EXPECT_EQ(mask.width(), 2u);
  EXPECT_EQ(mask.height(), 2u);
  EXPECT_EQ(std::vector<double>(mask.units().begin(), mask.units().end()), (std::vector<double>{0, 1, 1, 0}));
}

TEST(LoadObject, GraymapEndpointsScaleByMaxval) {
  const auto mask = load_object_from_bytes(pgm8(2, 1, {255, 0}));
  EXPECT_EQ(mask[0], 1.0);
  EXPECT_EQ(mask[1], 0.0);
  // Not min-max normalized: a dim image stays dim.
  const auto dim = load_object_from_bytes(pgm8(2, 1, {51, 0}));
  EXPECT_DOUBLE_EQ(dim[0], 0.2);
}

TEST(LoadObject, ThresholdUsesGreaterOrEqual) {
  const auto mask = load_object_from_bytes(pgm8(3, 1, {128, 127, 255}), 0.5);
  EXPECT_EQ(mask[0], 1.0); // 128/255 = 0.502
  EXPECT_EQ(mask[1], 0.0);
  EXPECT_EQ(mask[2], 1.0);
  EXPECT_THROW(load_object_from_bytes(pgm8(1, 1, {1}), 1.0), UsageError);
}

TEST(LoadObject, SixteenBitBigEndianGraymap) {
  std::string s = "P5\n# comment line\n2 1\n65535\n";
  for (int b : {0xff, 0xff, 0x80, 0x00}) s.push_back(static_cast<char>(b));
  const auto mask = load_object_from_bytes(s);
  EXPECT_EQ(mask[0], 1.0);
  EXPECT_DOUBLE_EQ(mask[1], 32768.0 / 65535.0);
}

TEST(LoadObject, Errors) {
  EXPECT_THROW(load_object("/nonexistent/mask.pgm"), IoError);
  EXPECT_THROW(load_object_from_bytes(""), FormatError);
  EXPECT_THROW(load_object_from_bytes("P5\n0 0\n255\n"), FormatError);
  EXPECT_THROW(load_object_from_bytes("P5\n2 2\n255\n\x01"), FormatError);
  EXPECT_THROW(load_object_from_bytes("0,1.5"), FormatError);
  EXPECT_THROW(load_object_from_bytes("0,1\n1"), FormatError);
  EXPECT_THROW(load_object_from_bytes("0,abc"), FormatError);
}

TEST(ClassifyUnits, Examples) {
  auto c = classify_units(ObjectMask(4, 1, {1, 0, 1, 1}));
  EXPECT_EQ(c.m, 3u);
  EXPECT_TRUE(c.fractional_units.empty());
  EXPECT_EQ(c.zero_units, (std::vector<std::size_t>{1}));

  c = classify_units(ObjectMask(2, 1, {0, 0}));
  EXPECT_EQ(c.m, 0u);

  c = classify_units(ObjectMask(2, 1, {0.5, 1.0}));
  EXPECT_FALSE(c.m.has_value());
  EXPECT_EQ(c.fractional_units, (std::vector<std::size_t>{0}));

  c = classify_units(ObjectMask(3, 1, {0.01, 0.5, 0.995}), 0.02);
  EXPECT_EQ(c.zero_units, (std::vector<std::size_t>{0}));
  EXPECT_EQ(c.one_units, (std::vector<std::size_t>{2}));
}

TEST(ClassifyUnits, ClassesPartitionTheMask) {
  const ObjectMask mask(3, 3, {0, 0.2, 1, 1, 0.7, 0, 0, 1, 0.2});
  const auto c = classify_units(mask);
  std::vector<std::size_t> all;
  for (const auto* v : {&c.zero_units, &c.one_units, &c.fractional_units}) all.insert(all.end(), v->begin(), v->end());
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expected(mask.size());
  std::iota(expected.begin(), expected.end(), 0);
  EXPECT_EQ(all, expected);
}

TEST(Histogram, Examples) {
  EXPECT_EQ(histogram(ObjectMask(5, 1, {0, 1, 1, 0.5, 1})),
            (std::vector<HistogramBin>{{0, 1}, {0.5, 1}, {1, 3}}));
  EXPECT_EQ(histogram(ObjectMask(2, 2, {1, 1, 1, 1})), (std::vector<HistogramBin>{{1, 4}}));
  EXPECT_EQ(histogram(ObjectMask(3, 1, {0.2, 0.2, 0.7})), (std::vector<HistogramBin>{{0.2, 2}, {0.7, 1}}));
}

TEST(Histogram, MultiplicitiesSumToUnitCount) {
  for (std::size_t m : {1, 2, 5, 20, 33}) {
    const auto mask = builtin_binary_mask(m);
    std::size_t total = 0;
    for (const auto& b : histogram(mask)) total += b.count;
    EXPECT_EQ(total, mask.size());
  }
}

TEST(LoadObject, ThresholdedLoadsAreAlwaysBinary) {
  for (double thr : {0.1, 0.33, 0.5, 0.9}) {
    const auto mask = load_object_from_bytes(pgm8(4, 2, {0, 10, 60, 128, 129, 200, 254, 255}), thr);
    EXPECT_TRUE(classify_units(mask).fractional_units.empty()) << thr;
  }
}

TEST(LoadObject, CsvRoundTripIsExact) {
  const ObjectMask mask(3, 2, {0.1, 1.0 / 3.0, 0.0, 1.0, 0.7071067811865476, 1e-300});
  const auto path = scratch_dir() / "mask.csv";
  write_mask_csv(mask, path.string());
  EXPECT_EQ(load_object(path.string()), mask);
}

TEST(BuiltinMasks, LetterAHasTwentyUnits) {
  const auto a = letter_a_mask();
  EXPECT_EQ(a.width(), 7u);
  EXPECT_EQ(a.height(), 9u);
  EXPECT_EQ(classify_units(a).m, 20u);
  for (std::size_t m : {2, 5, 7, 30}) {
    const auto c = classify_units(builtin_binary_mask(m));
    EXPECT_EQ(c.m, m);
    EXPECT_GE(c.zero_units.size(), m);
  }
}
