#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "smartedge/dataset.hpp"
#include "smartedge/error.hpp"

using namespace smartedge;
namespace fs = std::filesystem;

namespace {

const fs::path kCsv = fs::path(SMARTEDGE_DATA_DIR) / "pima-indians-diabetes.csv";

const std::string kHeader =
    "Pregnancies,Glucose,BloodPressure,SkinThickness,Insulin,BMI,DiabetesPedigreeFunction,Age,Outcome\n";

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no smartedge::Error thrown";
  return ErrorCode::Io;
}

}  // namespace

TEST(Dataset, LoadsCanonicalFile) {
  const auto ds = load_csv(kCsv);
  EXPECT_EQ(ds.size(), 768u);
  EXPECT_EQ(ds.count_label(1), 268u);
  EXPECT_EQ(ds.source_digest.size(), 64u);
}

TEST(Dataset, DropMissingMatchesPublishedCounts) {
  const auto clean = drop_missing(load_csv(kCsv));
  EXPECT_EQ(clean.size(), 537u);
  EXPECT_EQ(clean.count_label(1), 179u);
  EXPECT_EQ(clean.count_label(0), 358u);
  for (const auto& r : clean.records) {
    EXPECT_NE(r[Feature::Skinfold], 0.0);
    EXPECT_NE(r[Feature::DiastolicBp], 0.0);
    EXPECT_NE(r[Feature::Bmi], 0.0);
  }
}

TEST(Dataset, DropMissingIsIdempotent) {
  const auto once = drop_missing(load_csv(kCsv));
  EXPECT_EQ(drop_missing(once).records, once.records);
}

TEST(Dataset, DropMissingRejectsUnknownColumn) {
  const auto ds = load_csv(kCsv);
  EXPECT_EQ(code_of([&] { drop_missing(ds, {"Cholesterol"}); }), ErrorCode::UnknownColumn);
}

TEST(Dataset, FindFeatureAcceptsAliases) {
  EXPECT_EQ(find_feature("SkinThickness"), 3u);
  EXPECT_EQ(find_feature("skinfold"), 3u);
  EXPECT_FALSE(find_feature("nope").has_value());
}

TEST(Dataset, MissingFile) {
  EXPECT_EQ(code_of([] { load_csv("/nonexistent/pima.csv"); }), ErrorCode::MissingFile);
}

TEST(Dataset, MalformedRowCarriesLineNumber) {
  const std::string text = kHeader + "1,2,3,4,5,6,7,8,1\n1,2,3,x,5,6,7,8,0\n";
  try {
    parse_csv(text);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedRow);
    ASSERT_TRUE(e.line().has_value());
    EXPECT_EQ(*e.line(), 3u);
  }
}

TEST(Dataset, RejectsBadOutcomeAndShortRows) {
  EXPECT_EQ(code_of([&] { parse_csv(kHeader + "1,2,3,4,5,6,7,8,2\n"); }), ErrorCode::MalformedRow);
  EXPECT_EQ(code_of([&] { parse_csv(kHeader + "1,2,3,4,5,6,7,8\n"); }), ErrorCode::MalformedRow);
  EXPECT_EQ(code_of([&] { parse_csv(kHeader); }), ErrorCode::EmptyDataset);
}

TEST(Dataset, CsvRoundTrip) {
  const auto ds = drop_missing(load_csv(kCsv));
  EXPECT_EQ(parse_csv(to_csv(ds)).records, ds.records);
}

TEST(Dataset, FeatureCsvWithAndWithoutLabels) {
  const auto ds = drop_missing(load_csv(kCsv));
  const auto with = parse_feature_csv(to_csv(ds));
  ASSERT_TRUE(with.labels.has_value());
  EXPECT_EQ(*with.labels, ds.labels());
  EXPECT_EQ(with.features, ds.features());

  const auto without = parse_feature_csv(to_feature_csv(ds.features()));
  EXPECT_FALSE(without.labels.has_value());
  EXPECT_EQ(without.features, ds.features());
}

TEST(Dataset, FeatureCsvAllowsZeroRows) {
  const auto t = parse_feature_csv(to_feature_csv(FeatureMatrix(0, kFeatureCount)));
  EXPECT_EQ(t.features.rows(), 0u);
}

TEST(Dataset, FeatureCsvRejectsWrongWidth) {
  EXPECT_EQ(code_of([] { parse_feature_csv("a,b,c\n1,2,3\n"); }), ErrorCode::ArityMismatch);
}

TEST(Dataset, MatrixCsvRoundTripsFullPrecision) {
  FeatureMatrix x(3, 2);
  x(0, 0) = 0.1;
  x(0, 1) = -1e-300;
  x(1, 0) = 1.0 / 3.0;
  x(1, 1) = 123456.789;
  x(2, 0) = std::nextafter(1.0, 2.0);
  x(2, 1) = 0;
  const Labels y = {1, 0, 1};
  const auto labeled = parse_matrix_csv(to_matrix_csv(x, &y));
  EXPECT_EQ(labeled.features, x);
  ASSERT_TRUE(labeled.labels.has_value());
  EXPECT_EQ(*labeled.labels, y);
  const auto bare = parse_matrix_csv(to_matrix_csv(x));
  EXPECT_EQ(bare.features, x);
  EXPECT_FALSE(bare.labels.has_value());
}

TEST(Split, SizesAndDisjointness) {
  const auto s = split(537, SplitRatios{}, 11);
  EXPECT_EQ(s.train_idx.size(), 375u);
  EXPECT_EQ(s.val_idx.size(), 53u);
  EXPECT_EQ(s.test_idx.size(), 109u);
  std::set<std::size_t> all;
  for (const auto* part : {&s.train_idx, &s.val_idx, &s.test_idx}) all.insert(part->begin(), part->end());
  EXPECT_EQ(all.size(), 537u);
  EXPECT_EQ(*all.rbegin(), 536u);
}

TEST(Split, DeterministicPerSeed) {
  const auto a = split(537, SplitRatios{}, 3);
  const auto b = split(537, SplitRatios{}, 3);
  const auto c = split(537, SplitRatios{}, 4);
  EXPECT_EQ(a.train_idx, b.train_idx);
  EXPECT_EQ(a.test_idx, b.test_idx);
  EXPECT_NE(a.train_idx, c.train_idx);
}

TEST(Split, RejectsBadInput) {
  EXPECT_EQ(code_of([] { split(100, SplitRatios{0.5, 0.1, 0.1}, 1); }), ErrorCode::BadRatios);
  EXPECT_EQ(code_of([] { split(100, SplitRatios{1.2, -0.1, -0.1}, 1); }), ErrorCode::BadRatios);
  EXPECT_EQ(code_of([] { split(9, SplitRatios{}, 1); }), ErrorCode::TooFewRecords);
}

TEST(Scaler, FitsTrainingRowsOnly) {
  const auto ds = drop_missing(load_csv(kCsv));
  const auto s = split(ds, SplitRatios{}, 5);
  const auto scaler = fit_scaler(ds, s.train_idx);
  const auto scaled = apply_scaler(scaler, ds.features());
  for (std::size_t c = 0; c < kFeatureCount; ++c) {
    double sum = 0, sq = 0;
    for (auto r : s.train_idx) {
      sum += scaled(r, c);
      sq += scaled(r, c) * scaled(r, c);
    }
    const double n = static_cast<double>(s.train_idx.size());
    EXPECT_NEAR(sum / n, 0.0, 1e-9);
    EXPECT_NEAR(sq / n, 1.0, 1e-6);
  }
}

TEST(Scaler, ConstantColumnMapsToZero) {
  FeatureMatrix x(4, 2);
  for (std::size_t r = 0; r < 4; ++r) {
    x(r, 0) = 7.0;
    x(r, 1) = static_cast<double>(r);
  }
  const std::vector<std::size_t> idx = {0, 1, 2, 3};
  const auto scaled = apply_scaler(fit_scaler(x, idx), x);
  for (std::size_t r = 0; r < 4; ++r) EXPECT_EQ(scaled(r, 0), 0.0);
}

TEST(Scaler, Errors) {
  FeatureMatrix x(2, 2);
  EXPECT_EQ(code_of([&] { fit_scaler(x, std::vector<std::size_t>{}); }), ErrorCode::EmptyIndexSet);
  const std::vector<std::size_t> idx = {0, 1};
  const auto scaler = fit_scaler(x, idx);
  EXPECT_EQ(code_of([&] { apply_scaler(scaler, FeatureMatrix(2, 3)); }), ErrorCode::ArityMismatch);
}

TEST(Rfe, KeepsRequestedCountAndOrder) {
  const auto ds = drop_missing(load_csv(kCsv));
  const auto s = split(ds, SplitRatios{}, 5);
  for (std::size_t k = 1; k <= kFeatureCount; ++k) {
    const auto mask = rfe(ds, s.train_idx, k, 5);
    EXPECT_EQ(mask.selected.size(), k);
    EXPECT_TRUE(std::is_sorted(mask.selected.begin(), mask.selected.end()));
    EXPECT_EQ(mask.elimination_order.size(), kFeatureCount - k);
  }
  // Glucose survives to the last feature on this data.
  EXPECT_EQ(rfe(ds, s.train_idx, 1, 5).selected, std::vector<std::size_t>{1});
}

TEST(Rfe, NestedSelections) {
  const auto ds = drop_missing(load_csv(kCsv));
  const auto s = split(ds, SplitRatios{}, 2);
  const auto full = rfe(ds, s.train_idx, 1, 2);
  for (std::size_t k = 1; k < kFeatureCount; ++k) {
    const auto mask = rfe(ds, s.train_idx, k, 2);
    for (std::size_t i = 0; i < kFeatureCount - k; ++i) {
      EXPECT_EQ(mask.elimination_order[i], full.elimination_order[i]);
    }
  }
}

TEST(Rfe, RejectsBadK) {
  const auto ds = drop_missing(load_csv(kCsv));
  const auto s = split(ds, SplitRatios{}, 5);
  EXPECT_EQ(code_of([&] { rfe(ds, s.train_idx, 0, 5); }), ErrorCode::BadK);
  EXPECT_EQ(code_of([&] { rfe(ds, s.train_idx, 9, 5); }), ErrorCode::BadK);
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(33.6), "33.6");
  const double third = 1.0 / 3.0;
  EXPECT_EQ(std::stod(format_double(third)), third);
}
