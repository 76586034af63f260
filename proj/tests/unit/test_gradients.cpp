#include <gtest/gtest.h>

#include "denoiser_check.hpp"
#include "gradient_cases.hpp"

using namespace diffimpute;

namespace {

constexpr double tol = 1e-4;

} // namespace

class OpGradients : public ::testing::TestWithParam<std::size_t> {};

TEST_P(OpGradients, MatchFiniteDifferences) {
    const auto c = gradcheck::op_cases().at(GetParam());
    EXPECT_LE(c.run(), tol) << c.name;
}

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradients, ::testing::Range<std::size_t>(0, gradcheck::op_cases().size()),
                         [](const auto& info) { return gradcheck::op_cases().at(info.param).name; });

class DenoiserGradients : public ::testing::TestWithParam<Architecture> {};

TEST_P(DenoiserGradients, ParametersAndInput) {
    const auto r = gradcheck::check_denoiser(gradcheck::tiny_config(GetParam()));
    EXPECT_LE(r.input_error, tol);
    EXPECT_LE(r.worst_param_error, tol) << "worst parameter: " << r.worst_param;
    EXPECT_GT(r.params_checked, 0u);
}

INSTANTIATE_TEST_SUITE_P(AllArchitectures, DenoiserGradients,
                         ::testing::Values(Architecture::mlp, Architecture::resnet, Architecture::transformer,
                                           Architecture::unet),
                         [](const auto& info) { return to_string(info.param); });
