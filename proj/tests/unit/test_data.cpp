#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "diffimpute/data.hpp"

using namespace diffimpute;

namespace {

CsvTable parse(const std::string& text, CsvOptions opt = {}) {
    std::istringstream in(text);
    return parse_csv(in, opt, "t.csv");
}

std::string parse_error(const std::string& text, CsvOptions opt = {}) {
    try {
        parse(text, opt);
    } catch (const InputError& e) {
        return e.what();
    }
    return "";
}

} // namespace

TEST(Csv, ParsesShapeAndNames) {
    auto t = parse("a,b\n1,2\n3,4\n5,6\n");
    EXPECT_EQ(t.data.features.shape(), (Shape{3, 2}));
    EXPECT_EQ(t.data.feature_names, (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(t.data.features.at(2, 1), 6.0);
    EXPECT_FALSE(t.data.has_target());
}

TEST(Csv, CommentsBlankLinesAndQuotes) {
    auto t = parse("# header comment\n\"x\", y \n\n1.5, -2e3\n# trailing\n+3,\"4\"\n");
    EXPECT_EQ(t.data.feature_names, (std::vector<std::string>{"x", "y"}));
    EXPECT_EQ(t.data.features.storage(), (std::vector<double>{1.5, -2000.0, 3.0, 4.0}));
}

TEST(Csv, NonNumericCellNamesLocation) {
    const auto msg = parse_error("a,b\n1,2\n3,abc\n");
    EXPECT_NE(msg.find("t.csv:3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("column 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("'b'"), std::string::npos) << msg;
    EXPECT_NE(msg.find("abc"), std::string::npos) << msg;
}

TEST(Csv, RaggedRowsAndEmptyFileRejected) {
    EXPECT_NE(parse_error("a,b\n1,2,3\n"), "");
    EXPECT_NE(parse_error(""), "");
    EXPECT_NE(parse_error("a,b\n"), "");
    EXPECT_NE(parse_error("a,b\n1,inf\n"), "");
}

TEST(Csv, MissingCellsNeedOptIn) {
    EXPECT_NE(parse_error("a,b\n1,\n"), "");
    CsvOptions o;
    o.allow_missing = true;
    auto t = parse("a,b\n1,\nNA,2\nnan,?\n", o);
    EXPECT_EQ(t.present.missing_count(), 4u);
    EXPECT_TRUE(t.present.at(0, 0));
    EXPECT_FALSE(t.present.at(0, 1));
    EXPECT_FALSE(t.present.at(1, 0));
}

TEST(Csv, TargetColumnAndTaskInference) {
    CsvOptions o;
    o.target = "y";
    auto t = parse("a,y,b\n1,0,2\n3,1,4\n5,1,6\n", o);
    EXPECT_EQ(t.data.features.shape(), (Shape{3, 2}));
    EXPECT_EQ(t.data.feature_names, (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(t.data.target, (std::vector<double>{0, 1, 1}));
    EXPECT_EQ(t.data.task, Task::binclass);
    EXPECT_EQ(parse("a,y\n1,0.5\n2,1.5\n", o).data.task, Task::regression);
    EXPECT_EQ(parse("a,y\n1,0\n2,1\n3,2\n", o).data.task, Task::multiclass);
    o.target = "zz";
    EXPECT_NE(parse_error("a,y\n1,0\n", o), "");
}

TEST(Csv, WriteReadRoundTrip) {
    Rng rng(1);
    Tensor<double> x = sample_gaussian<double>(rng, {5, 3});
    x.at(0, 0) = 0.1;
    x.at(1, 1) = 1e-300;
    x.at(2, 2) = -123456789.125;
    std::ostringstream out;
    write_csv(out, x, {"a", "b", "c"}, {"generated"});
    std::istringstream in(out.str());
    auto t = parse_csv(in, {});
    EXPECT_EQ(t.data.features, x);
    EXPECT_EQ(t.data.feature_names, (std::vector<std::string>{"a", "b", "c"}));
}

TEST(Csv, WriteBlanksMaskedCells) {
    Tensor<double> x({2, 2}, std::vector<double>{1, 2, 3, 4});
    Mask m(2, 2);
    m.set(1, 0, false);
    std::ostringstream out;
    write_csv(out, x, {"a", "b"}, {}, &m);
    CsvOptions o;
    o.allow_missing = true;
    std::istringstream in(out.str());
    auto t = parse_csv(in, o);
    EXPECT_EQ(t.present, m);
    EXPECT_EQ(t.data.features.at(1, 1), 4.0);
}

TEST(Csv, FormatRealRoundTrips) {
    for (double v : {0.1, 0.8, 1.0 / 3.0, 1e-17, 123.456, -0.0}) EXPECT_EQ(std::stod(format_real(v)), v);
    EXPECT_EQ(format_real(0.8), "0.8");
}

TEST(Csv, MissingFileNamesPath) {
    try {
        read_csv_table("/nonexistent/data.csv");
        FAIL();
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("/nonexistent/data.csv"), std::string::npos);
    }
}

TEST(Scaler, HandFixture) {
    MinMaxScaler s;
    Tensor<double> x({3, 1}, std::vector<double>{0, 5, 10});
    EXPECT_EQ(s.fit_transform(x).storage(), (std::vector<double>{0, 0.5, 1}));
}

TEST(Scaler, InverseIsIdentity) {
    Rng rng(3);
    Tensor<double> x = sample_gaussian<double>(rng, {50, 4});
    MinMaxScaler s;
    auto back = s.inverse_transform(s.fit_transform(x));
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(back[i], x[i], 1e-12);
}

TEST(Scaler, NoClippingOutsideTrainRange) {
    MinMaxScaler s;
    s.fit(Tensor<double>({2, 1}, std::vector<double>{2, 4}));
    auto y = s.transform(Tensor<double>({2, 1}, std::vector<double>{0, 7}));
    EXPECT_EQ(y[0], -1.0);
    EXPECT_EQ(y[1], 2.5);
}

TEST(Scaler, ConstantColumnAndCustomRange) {
    MinMaxScaler s;
    Tensor<double> x({3, 2}, std::vector<double>{7, 1, 7, 2, 7, 3});
    auto y = s.fit_transform(x);
    EXPECT_EQ(y.at(0, 0), 0.0);
    EXPECT_EQ(y.at(2, 0), 0.0);
    EXPECT_EQ(s.inverse_transform(y).at(1, 0), 7.0);
    MinMaxScaler r(-1, 1);
    EXPECT_EQ(r.fit_transform(Tensor<double>({3, 1}, std::vector<double>{0, 5, 10})).storage(),
              (std::vector<double>{-1, 0, 1}));
    EXPECT_THROW(MinMaxScaler(1, 1), InputError);
    MinMaxScaler unfit;
    EXPECT_ANY_THROW(unfit.transform(x));
}

TEST(Scaler, FitIgnoresMaskedEntries) {
    MinMaxScaler s;
    Tensor<double> x({3, 1}, std::vector<double>{0, 100, 10});
    Mask m(3, 1);
    m.set(1, 0, false);
    s.fit(x, &m);
    EXPECT_EQ(s.data_max()[0], 10.0);
}

TEST(Split, EightTwoAndReproducible) {
    Dataset d;
    d.features = Tensor<double>({10, 1});
    for (std::size_t i = 0; i < 10; ++i) d.features[i] = static_cast<double>(i);
    d.feature_names = {"a"};
    auto [tr, te] = split(d, 0.8, 4);
    EXPECT_EQ(tr.rows(), 8u);
    EXPECT_EQ(te.rows(), 2u);
    auto [tr2, te2] = split(d, 0.8, 4);
    EXPECT_EQ(tr.features, tr2.features);
    std::multiset<double> all(tr.features.storage().begin(), tr.features.storage().end());
    all.insert(te.features.storage().begin(), te.features.storage().end());
    EXPECT_EQ(all, std::multiset<double>(d.features.storage().begin(), d.features.storage().end()));
    auto [tr3, te3] = split(d, 0.8, 5);
    EXPECT_NE(tr.features, tr3.features);
}

TEST(Split, CarriesTarget) {
    Dataset d;
    d.features = Tensor<double>({4, 1}, std::vector<double>{0, 1, 2, 3});
    d.feature_names = {"a"};
    d.target = {10, 11, 12, 13};
    d.target_name = "y";
    auto [tr, te] = split(d, 0.5, 1);
    for (std::size_t i = 0; i < tr.rows(); ++i) EXPECT_EQ(tr.target[i], tr.features[i] + 10);
    for (std::size_t i = 0; i < te.rows(); ++i) EXPECT_EQ(te.target[i], te.features[i] + 10);
}

TEST(McarMask, MissingFraction) {
    auto m = gen_mcar_mask(10000, 10, 0.3, 8);
    EXPECT_NEAR(static_cast<double>(m.missing_count()) / 1e5, 0.3, 0.005);
    EXPECT_EQ(gen_mcar_mask(10000, 10, 0.3, 8), m);
    EXPECT_NE(gen_mcar_mask(10000, 10, 0.3, 9), m);
}

TEST(McarMask, SmallProbabilityLimitAndBounds) {
    EXPECT_EQ(gen_mcar_mask(100, 5, 1e-12, 1).missing_count(), 0u);
    EXPECT_THROW(gen_mcar_mask(10, 2, 0.0, 1), InputError);
    EXPECT_THROW(gen_mcar_mask(10, 2, 1.0, 1), InputError);
}

TEST(MarMask, OneColumnExactly) {
    auto m = gen_mar_mask(50, 4, 1, 3);
    EXPECT_EQ(m.missing_count(), 50u);
    std::size_t missing_cols = 0;
    for (std::size_t j = 0; j < 4; ++j) {
        std::size_t c = 0;
        for (std::size_t i = 0; i < 50; ++i) c += m.at(i, j) ? 0 : 1;
        EXPECT_TRUE(c == 0 || c == 50);
        missing_cols += c == 50;
    }
    EXPECT_EQ(missing_cols, 1u);
}

TEST(MarMask, ColumnsVaryAcrossSeeds) {
    std::set<std::vector<std::uint8_t>> patterns;
    for (std::uint64_t s = 0; s < 100; ++s) {
        auto m = gen_mar_mask(3, 6, 2, s);
        std::vector<std::uint8_t> first_row(m.known.begin(), m.known.begin() + 6);
        EXPECT_EQ(std::count(first_row.begin(), first_row.end(), 0), 2);
        patterns.insert(first_row);
    }
    EXPECT_GT(patterns.size(), 10u);
    EXPECT_THROW(gen_mar_mask(3, 4, 4, 1), InputError);
    EXPECT_THROW(gen_mar_mask(3, 4, 0, 1), InputError);
}

TEST(MaskSpec, LabelsAndGeneration) {
    EXPECT_EQ(MaskSpec::mcar(0.3).label(), "mcar=0.3");
    EXPECT_EQ(MaskSpec::mar(2).label(), "mar=2");
    EXPECT_EQ(MaskSpec::mar(2, 5).generate(4, 5), gen_mar_mask(4, 5, 2, 5));
    EXPECT_EQ(MaskSpec::mcar(0.4, 5).generate(4, 5), gen_mcar_mask(4, 5, 0.4, 5));
}

TEST(MaskCsv, RoundTripAndValidation) {
    auto m = gen_mcar_mask(6, 3, 0.5, 1);
    std::ostringstream out;
    write_mask_csv(out, m, {"a", "b", "c"});
    std::istringstream in(out.str());
    EXPECT_EQ(read_mask_csv(in), m);
    std::istringstream bad("a,b\n1,2\n");
    EXPECT_THROW(read_mask_csv(bad), InputError);
}

TEST(MaskedTable, ShapeValidation) {
    EXPECT_THROW(MaskedTable<double>(Tensor<double>({2, 3}), Mask(3, 2)), ShapeError);
    Mask m(2, 2);
    m.known[0] = 2;
    EXPECT_THROW(MaskedTable<double>(Tensor<double>({2, 2}), m), InputError);
}
