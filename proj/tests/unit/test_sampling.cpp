#include <gtest/gtest.h>

#include <cmath>

#include "diffimpute/sampling.hpp"
#include "diffimpute/training.hpp"
#include "sampler_check.hpp"

using namespace diffimpute;
using samplercheck::random_table;
using samplercheck::small_model;

namespace {

Tensor<double> randn(Shape s, std::uint64_t seed) {
    Rng rng(seed);
    return sample_gaussian<double>(rng, std::move(s));
}

} // namespace

TEST(KnownSample, StepOneIsClean) {
    const auto s = build_cosine_schedule(100);
    auto x0 = randn({3, 2}, 1), eps = randn({3, 2}, 2);
    EXPECT_EQ(known_sample(s, x0, 1, eps), x0);
}

TEST(KnownSample, ZeroNoiseAndFormula) {
    const auto s = build_cosine_schedule(100);
    auto x0 = randn({3, 2}, 1), eps = randn({3, 2}, 2);
    auto z = known_sample(s, x0, 40, Tensor<double>({3, 2}));
    for (std::size_t i = 0; i < z.size(); ++i) EXPECT_EQ(z[i], std::sqrt(s.alpha_bar_at(39)) * x0[i]);
    auto y = known_sample(s, x0, 73, eps);
    const double ab = s.alpha_bar_at(72);
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], std::sqrt(ab) * x0[i] + std::sqrt(1 - ab) * eps[i], 1e-15);
    EXPECT_THROW(known_sample(s, x0, 0, eps), InputError);
    EXPECT_THROW(known_sample(s, x0, 101, eps), InputError);
}

TEST(DdpmStep, NearIdentityLimit) {
    // a schedule with alpha ~ 1 everywhere
    const auto s = detail::finish_schedule(std::vector<double>(10, 1e-14));
    auto x = randn({2, 3}, 3);
    auto out = ddpm_step(s, x, 5, Tensor<double>({2, 3}), Tensor<double>({2, 3}));
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(out[i], x[i], 1e-12);
}

TEST(DdpmStep, NoNoiseAtStepOne) {
    const auto s = build_cosine_schedule(50);
    auto x = randn({2, 3}, 3), eps = randn({2, 3}, 4);
    EXPECT_EQ(ddpm_step(s, x, 1, eps, randn({2, 3}, 5)), ddpm_step(s, x, 1, eps, Tensor<double>({2, 3})));
}

TEST(DdpmStep, MatchesFormula) {
    const auto s = build_cosine_schedule(50);
    auto x = randn({2, 3}, 3), eps = randn({2, 3}, 4), noise = randn({2, 3}, 5);
    const int t = 17;
    auto out = ddpm_step(s, x, t, eps, noise);
    const double a = s.alpha_at(t), ab = s.alpha_bar_at(t);
    const double sigma = std::sqrt((1 - s.alpha_bar_at(t - 1)) / (1 - ab) * s.beta_at(t));
    for (std::size_t i = 0; i < x.size(); ++i)
        EXPECT_NEAR(out[i], (x[i] - (1 - a) / std::sqrt(1 - ab) * eps[i]) / std::sqrt(a) + sigma * noise[i], 1e-13);
    EXPECT_THROW(ddpm_step(s, x, 0, eps, noise), InputError);
}

TEST(Combine, SelectsPerEntry) {
    auto a = randn({2, 2}, 1), b = randn({2, 2}, 2);
    EXPECT_EQ(combine(a, b, Mask(2, 2, true)), a);
    EXPECT_EQ(combine(a, b, Mask(2, 2, false)), b);
    Mask m(2, 2, true);
    m.set(0, 1, false);
    m.set(1, 0, false);
    auto c = combine(a, b, m);
    EXPECT_EQ(c[0], a[0]);
    EXPECT_EQ(c[1], b[1]);
    EXPECT_EQ(c[2], b[2]);
    EXPECT_EQ(c[3], a[3]);
    EXPECT_THROW(combine(a, randn({2, 3}, 3), m), ShapeError);
    EXPECT_THROW(combine(a, b, Mask(3, 2)), ShapeError);
}

TEST(HarmonizeBack, NearIdentityLimit) {
    const auto s = detail::finish_schedule(std::vector<double>(10, 1e-14));
    auto x = randn({2, 3}, 3);
    auto out = harmonize_back(s, x, 4, Tensor<double>({2, 3}));
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(out[i], x[i], 1e-12);
}

TEST(HarmonizeBack, MonteCarloVariance) {
    const auto s = build_cosine_schedule(100);
    const int t = 60;
    const std::size_t n = 100000;
    Tensor<double> x({n, 1}, 0.7);
    auto out = harmonize_back(s, x, t, randn({n, 1}, 8));
    double m = 0, v = 0;
    for (double e : out.storage()) m += e;
    m /= n;
    for (double e : out.storage()) v += (e - m) * (e - m);
    v /= n - 1;
    const double expected = 1 - s.alpha_at(t);
    EXPECT_NEAR(v, expected, 3 * std::sqrt(2.0 / n) * expected);
    EXPECT_NEAR(m, std::sqrt(s.alpha_at(t)) * 0.7, 3 * std::sqrt(expected / n));
}

TEST(HarmonizeBack, SpanOfOneIsSingleStep) {
    const auto s = build_cosine_schedule(100);
    auto x = randn({2, 3}, 1), e = randn({2, 3}, 2);
    EXPECT_EQ(harmonize_back_span(s, x, 9, 10, e), harmonize_back(s, x, 10, e));
    auto w = harmonize_back_span(s, x, 10, 30, e);
    const double a = s.alpha_bar_at(30) / s.alpha_bar_at(10);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(w[i], std::sqrt(a) * x[i] + std::sqrt(1 - a) * e[i], 1e-15);
    EXPECT_THROW(harmonize_back_span(s, x, 5, 5, e), InputError);
}

TEST(ImputeDdimStep, EtaZeroDeterministic) {
    const auto s = build_cosine_schedule(100);
    auto x = randn({2, 3}, 1), eps = randn({2, 3}, 2);
    EXPECT_EQ(impute_ddim_step(s, x, 50, 40, eps, 0.0, randn({2, 3}, 3)),
              impute_ddim_step(s, x, 50, 40, eps, 0.0, randn({2, 3}, 4)));
}

TEST(ImputeDdimStep, EtaOneAdjacentEqualsDdpm) {
    EXPECT_LE(samplercheck::adjacent_step_gap(500, 1), 1e-10);
    EXPECT_LE(samplercheck::adjacent_step_gap(1000, 2), 1e-10);
}

TEST(ImputeDdimStep, ZeroEpsilonScalesByAlphaRatio) {
    const auto s = build_cosine_schedule(100);
    auto x = randn({2, 3}, 1);
    auto out = impute_ddim_step(s, x, 70, 20, Tensor<double>({2, 3}), 0.0, Tensor<double>({2, 3}));
    const double r = std::sqrt(s.alpha_bar_at(20)) / std::sqrt(s.alpha_bar_at(70));
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(out[i], r * x[i], 1e-14);
}

TEST(ImputeDdimStep, RejectsOversizedEta) {
    const auto s = build_cosine_schedule(100);
    auto x = randn({2, 3}, 1);
    EXPECT_THROW(impute_ddim_step(s, x, 90, 10, x, 5.0, x), NumericError);
    EXPECT_THROW(impute_ddim_step(s, x, 10, 10, x, 0.0, x), InputError);
}

TEST(SamplerOptions, Validation) {
    SamplerOptions o;
    o.tau = 0;
    EXPECT_THROW(o.validate(), InputError);
    o.tau = 501;
    EXPECT_THROW(o.validate(), InputError);
    o.tau = 50;
    EXPECT_NO_THROW(o.validate());
    o.eta = -1;
    EXPECT_THROW(o.validate(), InputError);
    o.eta = 0;
    o.n_inferences = 0;
    EXPECT_THROW(o.validate(), InputError);
    EXPECT_THROW(parse_stepper("euler"), InputError);
}

TEST(SamplerOptions, PlanComposition) {
    SamplerOptions o;
    o.T_sampling = 500;
    o.tau = 10;
    o.jump_n_sample = 2;
    EXPECT_EQ(o.plan(), harmonization_plan(skip_seq(500, 10, SkipType::uniform), 1, 2));
    o.tau.reset();
    o.jump_n_sample = 1;
    const auto dense = o.plan();
    ASSERT_EQ(dense.size(), 501u);
    EXPECT_EQ(dense.front(), 499);
    EXPECT_EQ(dense.back(), -1);
}

TEST(Impute, AllKnownReturnsObservations) {
    const auto model = small_model(3, 1);
    Rng rng(1);
    MaskedTable<double> table(sample_gaussian<double>(rng, {5, 3}), Mask(5, 3, true));
    SamplerOptions o;
    o.T_sampling = 10;
    o.n_inferences = 2;
    EXPECT_EQ(impute(model, table, build_cosine_schedule(10), o), table.x_obs);
}

TEST(Impute, DeterministicForFixedSeed) {
    const auto model = small_model(3, 1);
    const auto table = random_table(8, 3, MaskSpec::mcar(0.4, 2), 3);
    SamplerOptions o;
    o.T_sampling = 20;
    o.n_inferences = 2;
    o.seed = 11;
    const auto s = build_cosine_schedule(20);
    EXPECT_EQ(impute(model, table, s, o), impute(model, table, s, o));
    o.seed = 12;
    auto other = impute(model, table, s, o);
    o.seed = 11;
    EXPECT_NE(impute(model, table, s, o), other);
}

TEST(Impute, TrajectoriesAgreeAcrossSteppers) {
    const auto model = small_model(3, 4);
    const auto table = random_table(10, 3, MaskSpec::mcar(0.5, 4), 5);
    EXPECT_LE(samplercheck::trajectory_gap(model, table, 100, 1), 1e-8);
    EXPECT_LE(samplercheck::trajectory_gap(model, table, 60, 4), 1e-8);
}

TEST(Impute, KnownEntriesExactOverRandomCases) {
    EXPECT_EQ(samplercheck::known_mismatches(100, 31), 0);
}

TEST(Impute, ObserverFollowsPlan) {
    const auto model = small_model(3, 1);
    const auto table = random_table(6, 3, MaskSpec::mcar(0.3, 1), 2);
    SamplerOptions o;
    o.T_sampling = 40;
    o.tau = 8;
    o.jump_n_sample = 3;
    o.jump_length = 2;
    const auto plan = o.plan();
    std::vector<std::pair<int, int>> seen;
    std::size_t ascents = 0;
    impute_once<double>(model, table, build_cosine_schedule(40), o, 0, [&](const SamplerEvent<double>& e) {
        seen.emplace_back(e.from, e.to);
        EXPECT_EQ(e.descend, e.to < e.from);
        if (!e.descend) ++ascents;
    });
    ASSERT_EQ(seen.size(), plan.size() - 1);
    for (std::size_t p = 0; p + 1 < plan.size(); ++p) {
        EXPECT_EQ(seen[p].first, plan[p] + 1);
        EXPECT_EQ(seen[p].second, plan[p + 1] + 1);
    }
    EXPECT_GT(ascents, 0u);
    EXPECT_EQ(seen.back().second, 0);
}

TEST(Impute, EnsembleIsMeanOfRuns) {
    const auto model = small_model(3, 2);
    const auto table = random_table(7, 3, MaskSpec::mcar(0.5, 9), 1);
    const auto s = build_cosine_schedule(15);
    SamplerOptions o;
    o.T_sampling = 15;
    o.n_inferences = 4;
    o.seed = 3;
    const auto avg = impute(model, table, s, o);
    Tensor<double> manual({7, 3});
    for (int r = 0; r < 4; ++r) {
        auto run = impute_once(model, table, s, o, static_cast<std::uint64_t>(r));
        for (std::size_t i = 0; i < run.size(); ++i) manual[i] += run[i];
    }
    for (std::size_t i = 0; i < avg.size(); ++i) EXPECT_NEAR(avg[i], manual[i] / 4, 1e-12);
    o.n_inferences = 1;
    EXPECT_EQ(impute(model, table, s, o), impute_once(model, table, s, o, 0));
}

TEST(Impute, ForcedAncestralStepperRejectsSkips) {
    const auto model = small_model(3, 1);
    const auto table = random_table(4, 3, MaskSpec::mcar(0.5, 1), 1);
    SamplerOptions o;
    o.T_sampling = 20;
    o.tau = 5;
    o.stepper = Stepper::ddpm;
    EXPECT_THROW(impute_once(model, table, build_cosine_schedule(20), o, 0), InputError);
}

TEST(Impute, ScheduleAndShapeConsistency) {
    const auto model = small_model(3, 1);
    const auto table = random_table(4, 3, MaskSpec::mcar(0.5, 1), 1);
    SamplerOptions o;
    o.T_sampling = 20;
    EXPECT_THROW(impute_once(model, table, build_cosine_schedule(30), o, 0), InputError);
    const auto wide = random_table(4, 4, MaskSpec::mcar(0.5, 1), 1);
    EXPECT_THROW(impute_once(model, wide, build_cosine_schedule(20), o, 0), ShapeError);
    auto bad = table;
    for (std::size_t i = 0; i < bad.x_obs.size(); ++i)
        if (bad.mask.known[i]) {
            bad.x_obs[i] = NAN;
            break;
        }
    EXPECT_THROW(impute_once(model, bad, build_cosine_schedule(20), o, 0), InputError);
}

TEST(Impute, MissingValuesAreNeverRead) {
    const auto model = small_model(3, 1);
    auto table = random_table(6, 3, MaskSpec::mcar(0.5, 3), 1);
    SamplerOptions o;
    o.T_sampling = 10;
    const auto s = build_cosine_schedule(10);
    const auto ref = impute(model, table, s, o);
    for (std::size_t i = 0; i < table.x_obs.size(); ++i)
        if (!table.mask.known[i]) table.x_obs[i] = NAN;
    EXPECT_EQ(impute(model, table, s, o), ref);
}

class StabilitySmoke : public ::testing::TestWithParam<Architecture> {};

TEST_P(StabilitySmoke, UntrainedModelStaysFinite) {
    const std::size_t k = GetParam() == Architecture::unet ? 6 : 3;
    const auto model = small_model(k, 5, GetParam());
    Rng rng(2);
    MaskedTable<double> table(sample_gaussian<double>(rng, {16, k}), MaskSpec::mcar(0.4, 6).generate(16, k));
    SamplerOptions o;
    o.T_sampling = 100;
    o.n_inferences = 2;
    const auto out = impute(model, table, build_cosine_schedule(100), o);
    for (double v : out.storage()) EXPECT_TRUE(std::isfinite(v));
    o.tau = 10;
    const auto fast = impute(model, table, build_cosine_schedule(100), o);
    for (double v : fast.storage()) EXPECT_TRUE(std::isfinite(v));
}

INSTANTIATE_TEST_SUITE_P(AllArchitectures, StabilitySmoke,
                         ::testing::Values(Architecture::mlp, Architecture::resnet, Architecture::transformer,
                                           Architecture::unet),
                         [](const auto& info) { return to_string(info.param); });

TEST(Impute, ZeroPredictorAmplifiesByInverseAlphaBar) {
    // eps_hat = 0 turns the ancestral chain into x_0 = x_T / sqrt(abar_T) + sum_t sigma_t z_t / sqrt(abar_{t-1}),
    // so a network that does not track the noise cannot keep values near the data range
    DenoiserConfig c;
    c.k = 1;
    c.hidden = 4;
    Denoiser<double> model(c, 1);
    model.params().value("mlp.head.w").fill(0.0);
    model.params().value("mlp.head.b").fill(0.0);
    const int T = 20;
    const auto s = build_cosine_schedule(T);
    const std::size_t n = 20000;
    MaskedTable<double> table(Tensor<double>({n, 1}), Mask(n, 1, false));
    SamplerOptions o;
    o.T_sampling = T;
    o.seed = 4;
    const auto out = impute_once(model, table, s, o, 0);
    double expected = 1.0 / s.alpha_bar_at(T);
    for (int t = 2; t <= T; ++t) expected += s.posterior_sigma_at(t) * s.posterior_sigma_at(t) / s.alpha_bar_at(t - 1);
    double m = 0, v = 0;
    for (double e : out.storage()) m += e;
    m /= n;
    for (double e : out.storage()) v += (e - m) * (e - m);
    v /= n - 1;
    EXPECT_NEAR(v, expected, 3 * std::sqrt(2.0 / n) * expected);
    EXPECT_GT(std::sqrt(expected), 10.0);
}

TEST(Impute, TrainedModelStaysBounded) {
    DenoiserConfig c;
    c.k = 2;
    c.hidden = 32;
    c.blocks = 2;
    Denoiser<double> model(c, 1);
    Rng rng(3);
    Tensor<double> data({1024, 2});
    for (std::size_t i = 0; i < 1024; ++i) {
        const double a = rng.normal();
        data.at(i, 0) = a;
        data.at(i, 1) = 0.8 * a + 0.6 * rng.normal();
    }
    TrainingConfig tc;
    tc.epochs = 20;
    tc.T = 100;
    tc.seed = 2;
    train(model, data, tc);
    MaskedTable<double> table(data, MaskSpec::mcar(0.4, 6).generate(1024, 2));
    SamplerOptions o;
    o.T_sampling = 100;
    o.n_inferences = 1;
    for (std::optional<int> tau : {std::optional<int>{}, std::optional<int>{20}}) {
        o.tau = tau;
        const auto out = impute(model, table, build_cosine_schedule(100), o);
        for (double v : out.storage()) {
            ASSERT_TRUE(std::isfinite(v));
            ASSERT_LE(std::abs(v), 10.0);
        }
    }
}

TEST(Impute, TimeRescalingFeedsModelTime) {
    // a model that ignores time gives the same result regardless of T_training
    DenoiserConfig c;
    c.k = 2;
    c.hidden = 8;
    c.time_embedding = false;
    Denoiser<double> model(c, 1);
    const auto table = random_table(5, 2, MaskSpec::mcar(0.5, 1), 2);
    SamplerOptions o;
    o.T_sampling = 10;
    const auto s = build_cosine_schedule(10);
    auto a = impute(model, table, s, o);
    o.T_training = 1000;
    EXPECT_EQ(impute(model, table, s, o), a);
    auto timed = small_model(2, 1);
    auto b = impute(timed, table, s, o);
    o.T_training = 0;
    EXPECT_NE(impute(timed, table, s, o), b);
}
