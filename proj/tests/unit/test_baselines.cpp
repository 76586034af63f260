#include <gtest/gtest.h>

#include "diffimpute/baselines.hpp"

using namespace diffimpute;

namespace {

Tensor<double> col(std::vector<double> v) {
    const std::size_t n = v.size();
    return Tensor<double>({n, 1}, std::move(v));
}

Mask missing_rows(std::size_t n, std::vector<std::size_t> rows) {
    Mask m(n, 1);
    for (auto r : rows) m.set(r, 0, false);
    return m;
}

} // namespace

TEST(Baselines, MeanFromContext) {
    auto out = baseline_impute(BaselineKind::mean, col({9, 0, 9}), missing_rows(3, {1}), col({1, 2, 3}));
    EXPECT_EQ(out.storage(), (std::vector<double>{9, 2, 9}));
}

TEST(Baselines, MedianAndMode) {
    auto ctx = col({5, 1, 3, 3, 100});
    EXPECT_EQ(baseline_impute(BaselineKind::median, col({0}), missing_rows(1, {0}), ctx)[0], 3.0);
    EXPECT_EQ(baseline_impute(BaselineKind::median, col({0}), missing_rows(1, {0}), col({4, 1, 2, 3}))[0], 2.5);
    EXPECT_EQ(baseline_impute(BaselineKind::mode, col({0}), missing_rows(1, {0}), ctx)[0], 3.0);
    // tie between 2 and 7 goes to the smaller value
    EXPECT_EQ(baseline_impute(BaselineKind::mode, col({0}), missing_rows(1, {0}), col({7, 2, 7, 2}))[0], 2.0);
}

TEST(Baselines, Constants) {
    auto x = col({4, 4, 4});
    auto m = missing_rows(3, {0, 2});
    EXPECT_EQ(baseline_impute(BaselineKind::const0, x, m, x).storage(), (std::vector<double>{0, 4, 0}));
    EXPECT_EQ(baseline_impute(BaselineKind::const1, x, m, x).storage(), (std::vector<double>{1, 4, 1}));
}

TEST(Baselines, LocfCarriesForward) {
    auto out = baseline_impute(BaselineKind::locf, col({5, 0, 0}), missing_rows(3, {1, 2}), col({0}));
    EXPECT_EQ(out.storage(), (std::vector<double>{5, 5, 5}));
    auto lead = baseline_impute(BaselineKind::locf, col({0, 7, 0}), missing_rows(3, {0, 2}), col({1, 3}));
    EXPECT_EQ(lead.storage(), (std::vector<double>{2, 7, 7}));
}

TEST(Baselines, NocbCarriesBackward) {
    auto out = baseline_impute(BaselineKind::nocb, col({0, 0, 5, 0, 8}), missing_rows(5, {0, 1, 3}), col({0}));
    EXPECT_EQ(out.storage(), (std::vector<double>{5, 5, 5, 8, 8}));
}

TEST(Baselines, NocbTrailingGapUsesContextMean) {
    auto out = baseline_impute(BaselineKind::nocb, col({1, 0}), missing_rows(2, {1}), col({2, 4}));
    EXPECT_EQ(out.storage(), (std::vector<double>{1, 3}));
}

TEST(Baselines, NocbOnFullyMissingColumnFails) {
    EXPECT_THROW(baseline_impute(BaselineKind::nocb, col({0, 0}), missing_rows(2, {0, 1}), col({0})), InputError);
    Tensor<double> x({3, 2});
    EXPECT_THROW(baseline_impute(BaselineKind::nocb, x, gen_mar_mask(3, 2, 1, 0), x), InputError);
}

TEST(Baselines, KnownEntriesUntouchedAndColumnsIndependent) {
    Tensor<double> x({2, 2}, std::vector<double>{1, 2, 3, 4});
    Mask m(2, 2);
    m.set(0, 1, false);
    Tensor<double> ctx({2, 2}, std::vector<double>{0, 10, 0, 20});
    for (auto kind : all_baselines()) {
        auto out = baseline_impute(kind, x, m, ctx);
        EXPECT_EQ(out.at(0, 0), 1.0);
        EXPECT_EQ(out.at(1, 0), 3.0);
        EXPECT_EQ(out.at(1, 1), 4.0);
    }
    EXPECT_EQ(baseline_impute(BaselineKind::mean, x, m, ctx).at(0, 1), 15.0);
}

TEST(Baselines, NamesAndShapes) {
    EXPECT_EQ(all_baselines().size(), 7u);
    for (auto k : all_baselines()) EXPECT_EQ(parse_baseline(to_string(k)), k);
    EXPECT_THROW(parse_baseline("knn"), InputError);
    EXPECT_THROW(baseline_impute(BaselineKind::mean, col({1}), Mask(2, 1), col({1})), ShapeError);
    EXPECT_THROW(baseline_impute(BaselineKind::mean, col({1}), Mask(1, 1), Tensor<double>({2, 2})), ShapeError);
}
