#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "benq/metrics.hpp"
#include "benq/synth.hpp"
#include "oracles.hpp"

using namespace benq;

namespace {

QuantConfig cfg(Schedule s, int bits, std::size_t g) { return QuantConfig{bits, g, s, kDefaultEpsilon}; }

double mse_of(const std::vector<DistortionReport>& rows, Schedule s) {
    for (const auto& r : rows) {
        if (r.schedule == s) return r.mse;
    }
    return NAN;
}

}  // namespace

TEST(Distortion, IdenticalTensorsGiveZero) {
    const auto t = synth_tensor("w", SynthSpec::gaussian(1.0, 1000), 1);
    const auto r = distortion(t, t);
    EXPECT_EQ(r.mse, 0.0);
    EXPECT_EQ(r.max_abs_err, 0.0);
    EXPECT_EQ(r.rel_fro_err, 0.0);
}

TEST(Distortion, ShapeMismatch) {
    const auto a = synth_tensor("w", SynthSpec::gaussian(1.0, 10), 1);
    auto b = a;
    b.shape = {2, 5};
    EXPECT_THROW(distortion(a, b), ConfigError);
}

TEST(Distortion, HandValues) {
    const std::vector<float> a = {1.0f, 2.0f, -2.0f, 0.0f};
    const std::vector<float> b = {1.0f, 1.0f, -2.0f, 1.0f};
    const auto r = distortion(std::span<const float>(a), std::span<const float>(b));
    EXPECT_DOUBLE_EQ(r.mse, 0.5);
    EXPECT_DOUBLE_EQ(r.max_abs_err, 1.0);
    EXPECT_DOUBLE_EQ(r.rel_fro_err, std::sqrt(2.0 / 9.0));
}

TEST(Distortion, SignFlipInvariantAndMatchesOracle) {
    const auto a = synth_values(SynthSpec::log_normal(-2, 2, 100'003), 5);
    const auto b = synth_values(SynthSpec::log_normal(-2, 2, 100'003), 6);
    const auto r = distortion(std::span<const float>(a), std::span<const float>(b));
    EXPECT_NEAR(r.mse, oracle::mse(a, b), 1e-12 * oracle::mse(a, b));

    std::vector<float> na(a), nb(b);
    for (auto& x : na) x = -x;
    for (auto& x : nb) x = -x;
    const auto n = distortion(std::span<const float>(na), std::span<const float>(nb));
    EXPECT_EQ(n.mse, r.mse);
    EXPECT_EQ(n.max_abs_err, r.max_abs_err);
    EXPECT_EQ(n.rel_fro_err, r.rel_fro_err);
}

TEST(PairwiseSum, ExactOnIntegersAndOrderIndependentOfSplits) {
    EXPECT_EQ(pairwise_sum(0, 1000, [](std::size_t i) { return static_cast<double>(i); }), 499500.0);
    EXPECT_EQ(pairwise_sum(0, 0, [](std::size_t) { return 1.0; }), 0.0);
}

TEST(Distortion, ConstantTensorThroughEverySchedule) {
    const auto t = synth_tensor("c", SynthSpec::constant(0.375, 1000), 0);
    for (auto s : {Schedule::LogUniform, Schedule::LinearNonUniform}) {
        EXPECT_EQ(distortion(t, dequantize(quantize_tensor(t, cfg(s, 4, 8)))).mse, 0.0);
    }
    // RTN needs qmax * fp16(c / qmax) == c: 0.875 = 7 * 0.125
    const auto t2 = synth_tensor("c", SynthSpec::constant(0.875, 1000), 0);
    EXPECT_EQ(distortion(t2, dequantize(quantize_tensor(t2, cfg(Schedule::UniformRTN, 4, 8)))).mse, 0.0);
}

// Library quantize/dequantize against the brute-force round trip.
TEST(CompareSchedules, MatchesBruteForceRoundTrip) {
    const auto t = synth_tensor("w", SynthSpec::log_uniform(5, 20'000), 0);
    const auto v = t.values();
    const std::vector<QuantConfig> configs = {cfg(Schedule::LogUniform, 4, 8), cfg(Schedule::LinearNonUniform, 4, 8),
                                              cfg(Schedule::UniformRTN, 4, 8), cfg(Schedule::LogUniform, 3, 128)};
    const auto rows = compare_schedules(t, configs);
    ASSERT_EQ(rows.size(), 4u);
    const auto lv = make_codebook(Schedule::LogUniform, 4);
    const auto lin = make_codebook(Schedule::LinearNonUniform, 4);
    const auto lv3 = make_codebook(Schedule::LogUniform, 3);
    const double want[] = {oracle::mse(v, oracle::codebook_roundtrip(v, lv.levels(), 8)),
                           oracle::mse(v, oracle::codebook_roundtrip(v, lin.levels(), 8)),
                           oracle::mse(v, oracle::rtn_roundtrip(v, 4, 8)),
                           oracle::mse(v, oracle::codebook_roundtrip(v, lv3.levels(), 128))};
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_NEAR(rows[i].mse, want[i], 1e-12 * want[i]) << i;
        EXPECT_EQ(rows[i].schedule, configs[i].schedule);
        EXPECT_EQ(rows[i].bits, configs[i].bits);
        EXPECT_EQ(rows[i].group_size, configs[i].group_size);
    }
}

TEST(CompareSchedules, SingleConfigEqualsDistortion) {
    const auto t = synth_tensor("w", SynthSpec::gaussian(0.1, 999), 2);
    const auto c = cfg(Schedule::LinearNonUniform, 3, 16);
    const auto rows = compare_schedules(t, {c});
    ASSERT_EQ(rows.size(), 1u);
    const auto direct = distortion(t, dequantize(quantize_tensor(t, c)));
    EXPECT_EQ(rows[0].mse, direct.mse);
    EXPECT_EQ(rows[0].max_abs_err, direct.max_abs_err);
    EXPECT_EQ(rows[0].rel_fro_err, direct.rel_fro_err);
    EXPECT_THROW(compare_schedules(t, {}), ConfigError);
}

// Regression values produced by an independent numpy oracle (SplitMix64
// generator re-implemented, brute-force argmin, FP16 scales) on
// loguniform(5 decades, 1e5), seed 0. On these weights uniform RTN has the
// lowest MSE; the log-uniform grid only beats the linear one.
TEST(CompareSchedules, LogBroadWeightsPinned) {
    const auto t = synth_tensor("w", SynthSpec::log_uniform(5, 100'000), 0);
    struct Row {
        std::size_t g;
        double log, lin, rtn;
    };
    const Row pinned[] = {
        {8, 0.0024646545117235357, 0.0025020730110610419, 0.00014882450445511202},
        {128, 0.0090264299467455265, 0.0092846443247319894, 0.00053738938721165173},
    };
    for (const auto& p : pinned) {
        const auto rows = compare_schedules(
            t, {cfg(Schedule::LogUniform, 4, p.g), cfg(Schedule::LinearNonUniform, 4, p.g), cfg(Schedule::UniformRTN, 4, p.g)});
        EXPECT_NEAR(mse_of(rows, Schedule::LogUniform), p.log, 1e-9 * p.log);
        EXPECT_NEAR(mse_of(rows, Schedule::LinearNonUniform), p.lin, 1e-9 * p.lin);
        EXPECT_NEAR(mse_of(rows, Schedule::UniformRTN), p.rtn, 1e-9 * p.rtn);
        EXPECT_LT(mse_of(rows, Schedule::LogUniform), mse_of(rows, Schedule::LinearNonUniform));
    }
}

// Narrow, norm-like weights: log spacing wastes levels near zero.
TEST(CompareSchedules, NarrowWeightsFavourUniformGrid) {
    const auto t = synth_tensor("n", SynthSpec::uniform(0.3, 0.4, 100'000), 0);
    const auto rows = compare_schedules(
        t, {cfg(Schedule::LogUniform, 4, 8), cfg(Schedule::LinearNonUniform, 4, 8), cfg(Schedule::UniformRTN, 4, 8)});
    EXPECT_NEAR(mse_of(rows, Schedule::LogUniform), 0.0023416423373896099, 1e-9 * 0.0023416423373896099);
    EXPECT_NEAR(mse_of(rows, Schedule::LinearNonUniform), 0.0001810196700654954, 1e-9 * 0.0001810196700654954);
    EXPECT_NEAR(mse_of(rows, Schedule::UniformRTN), 0.0002404812703201308, 1e-9 * 0.0002404812703201308);
    EXPECT_LT(mse_of(rows, Schedule::UniformRTN), mse_of(rows, Schedule::LogUniform));
}
