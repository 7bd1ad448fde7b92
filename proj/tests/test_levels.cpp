#include <cmath>

#include <gtest/gtest.h>

#include "benq/levels.hpp"
#include "oracles.hpp"

using namespace benq;

TEST(BenfordProbability, ReferenceValues) {
    EXPECT_NEAR(benford_probability(1), 0.3010299957, 1e-10);
    EXPECT_NEAR(benford_probability(9), 0.0457574906, 1e-10);
    EXPECT_DOUBLE_EQ(benford_probability(1), std::log10(2.0));
}

TEST(BenfordProbability, SumsToOne) {
    double s = 0.0;
    for (int d = 1; d <= 9; ++d) s += benford_probability(d);
    EXPECT_NEAR(s, 1.0, 1e-12);

    const auto& ref = BenfordDistribution::reference();
    for (int d = 1; d <= 9; ++d) EXPECT_EQ(ref.probs[static_cast<std::size_t>(d - 1)], benford_probability(d));
}

TEST(BenfordProbability, RejectsOutOfRangeDigits) {
    EXPECT_THROW(benford_probability(0), DomainError);
    EXPECT_THROW(benford_probability(10), DomainError);
    EXPECT_THROW(benford_probability(-3), DomainError);
}

TEST(LogUniformLevels, TwoBit) {
    const auto cb = generate_log_uniform_levels(2, 1e-7);
    ASSERT_EQ(cb.size(), 4u);
    EXPECT_EQ(cb[0], -1.0);
    EXPECT_EQ(cb[1], -1e-7);
    EXPECT_EQ(cb[2], 1e-7);
    EXPECT_EQ(cb[3], 1.0);
}

TEST(LogUniformLevels, ThreeBitHasSevenThirdsDecadeSpacing) {
    const auto cb = generate_log_uniform_levels(3, 1e-7);
    const double expected[] = {1e-7, std::pow(10.0, -14.0 / 3), std::pow(10.0, -7.0 / 3), 1.0};
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(cb[static_cast<std::size_t>(4 + i)] / expected[i], 1.0, 1e-12);
    EXPECT_NEAR(cb[5], 2.1544e-5, 1e-9);
    EXPECT_NEAR(cb[6], 4.6416e-3, 1e-7);
}

TEST(LogUniformLevels, FourBitIsDecadeSpaced) {
    const auto cb = generate_log_uniform_levels(4, 1e-7);
    ASSERT_EQ(cb.size(), 16u);
    for (int i = 0; i < 8; ++i) {
        const double want = std::pow(10.0, -7 + i);
        EXPECT_LT(std::abs(cb[static_cast<std::size_t>(8 + i)] - want) / want, 1e-12) << i;
    }
}

TEST(LinearLevels, SmallWidths) {
    const auto b2 = generate_linear_levels(2);
    EXPECT_EQ(std::vector<double>(b2.levels().begin(), b2.levels().end()),
              (std::vector<double>{-1.0, -0.5, 0.5, 1.0}));
    const auto b3 = generate_linear_levels(3);
    EXPECT_EQ(std::vector<double>(b3.levels().begin(), b3.levels().end()),
              (std::vector<double>{-1.0, -0.75, -0.5, -0.25, 0.25, 0.5, 0.75, 1.0}));
    const auto b4 = generate_linear_levels(4);
    ASSERT_EQ(b4.size(), 16u);
    for (int k = 1; k <= 8; ++k) EXPECT_EQ(b4[static_cast<std::size_t>(7 + k)], 0.125 * k);
}

TEST(Levels, ConfigErrors) {
    EXPECT_THROW(generate_log_uniform_levels(1, 1e-7), ConfigError);
    EXPECT_THROW(generate_log_uniform_levels(9, 1e-7), ConfigError);
    EXPECT_THROW(generate_log_uniform_levels(4, 0.0), ConfigError);
    EXPECT_THROW(generate_log_uniform_levels(4, -1e-3), ConfigError);
    EXPECT_THROW(generate_log_uniform_levels(4, 1.0), ConfigError);
    EXPECT_THROW(generate_linear_levels(1), ConfigError);
    EXPECT_THROW(generate_linear_levels(9), ConfigError);
    EXPECT_THROW(make_codebook(Schedule::UniformRTN, 4), ConfigError);
}

// Structural invariants for every width and both schedules.
TEST(Levels, InvariantsAcrossWidths) {
    for (int bits = 2; bits <= 8; ++bits) {
        for (double eps : {1e-7, 1e-3, 0.25}) {
            const auto log_cb = generate_log_uniform_levels(bits, eps);
            const auto lin_cb = generate_linear_levels(bits);
            for (const Codebook* cb : {&log_cb, &lin_cb}) {
                const std::size_t n = cb->size();
                ASSERT_EQ(n, std::size_t{1} << bits);
                EXPECT_EQ((*cb)[0], -1.0);
                EXPECT_EQ((*cb)[n - 1], 1.0);
                for (std::size_t i = 0; i < n; ++i) {
                    EXPECT_EQ((*cb)[i], -(*cb)[n - 1 - i]);
                    EXPECT_NE((*cb)[i], 0.0);
                    if (i > 0) { EXPECT_LT((*cb)[i - 1], (*cb)[i]); }
                }
            }

            const std::size_t half = log_cb.size() / 2;
            const double step = -std::log10(eps) / static_cast<double>(half - 1);
            for (std::size_t i = half + 1; i < log_cb.size(); ++i) {
                const double diff = std::log10(log_cb[i]) - std::log10(log_cb[i - 1]);
                EXPECT_NEAR(diff, step, 1e-12 * std::max(1.0, step)) << "bits=" << bits << " eps=" << eps;
            }
            const double lin_step = 1.0 / static_cast<double>(half);
            for (std::size_t i = half + 1; i < lin_cb.size(); ++i) {
                EXPECT_NEAR(lin_cb[i] - lin_cb[i - 1], lin_step, 1e-12);
            }
        }
    }
}

TEST(Levels, MatchesClosedFormOracle) {
    for (int bits = 2; bits <= 8; ++bits) {
        const auto cb = generate_log_uniform_levels(bits, 1e-7);
        const auto want = oracle::log_levels(bits, 1e-7);
        for (std::size_t i = 0; i < want.size(); ++i) {
            EXPECT_NEAR(cb[i] / want[i], 1.0, 1e-12);
        }
        const auto lin = generate_linear_levels(bits);
        const auto lin_want = oracle::linear_levels(bits);
        for (std::size_t i = 0; i < lin_want.size(); ++i) EXPECT_EQ(lin[i], lin_want[i]);
    }
}

TEST(Codebook, NearestAgreesWithFullScan) {
    const auto cb = generate_log_uniform_levels(5, 1e-7);
    // include exact levels, midpoints and out-of-range values
    std::vector<double> probes = {-2.0, -1.0, -0.0, 0.0, 1.0, 3.0};
    for (std::size_t i = 0; i + 1 < cb.size(); ++i) {
        probes.push_back(cb[i]);
        probes.push_back(0.5 * (cb[i] + cb[i + 1]));
    }
    for (double y : probes) EXPECT_EQ(cb.nearest(y), oracle::argmin_level(y, cb.levels())) << y;
}

TEST(Codebook, ZeroTiesToLowerIndex) {
    const auto cb = generate_log_uniform_levels(2, 1e-7);
    EXPECT_EQ(cb.nearest(0.0), 1u);
    EXPECT_EQ(cb.nearest(-0.0), 1u);
}

TEST(Schedule, NamesRoundTrip) {
    for (auto s : {Schedule::LogUniform, Schedule::LinearNonUniform, Schedule::UniformRTN}) {
        EXPECT_EQ(parse_schedule(schedule_name(s)), s);
    }
    EXPECT_THROW(parse_schedule("cubic"), ConfigError);
}
