#include "gesturekit/kernels.hpp"

#include "oracles.hpp"

#include "Eigen/Eigenvalues"
#include "gtest/gtest.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

using namespace gesturekit;

namespace {

fixed_sequence seq1d(std::vector<double> v) {
    return fixed_sequence{ 1, std::move(v) };
}

double median_seconds(const std::function<void()> &fn, int reps) {
    std::vector<double> t;
    for (int r = 0; r < reps; ++r) {
        const auto start = std::chrono::steady_clock::now();
        fn();
        t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    }
    std::sort(t.begin(), t.end());
    return t[t.size() / 2];
}

}  // namespace

TEST(EuclidSq, IdentityAndPythagoras) {
    const fixed_sequence a{ 3, { 0, 0, 0, 1, 1, 1 } };
    EXPECT_EQ(d_euclid_sq(a, a), 0.0);
    const fixed_sequence p{ 3, { 0, 0, 0 } };
    const fixed_sequence q{ 3, { 3, 4, 0 } };
    EXPECT_EQ(d_euclid_sq(p, q), 25.0);
}

TEST(EuclidSq, AdditiveOverPoses) {
    const fixed_sequence a{ 3, { 0, 0, 0, 0, 0, 0 } };
    const fixed_sequence b{ 3, { 3, 4, 0, 0, 0, 2 } };
    EXPECT_EQ(d_euclid_sq(a, b), 29.0);
}

TEST(EuclidSq, RejectsShapeMismatch) {
    const fixed_sequence a{ 3, { 0, 0, 0, 0, 0, 0 } };
    const fixed_sequence b{ 3, { 0, 0, 0 } };
    const fixed_sequence c{ 2, { 0, 0, 0, 0 } };
    EXPECT_THROW((void) d_euclid_sq(a, b), dimension_error);
    EXPECT_THROW((void) d_euclid_sq(a, c), dimension_error);
}

TEST(Dtw, HandComputedTable) {
    // D = [[0, 4], [1, 1], [5, 1]] for X = [0, 1, 2], Y = [0, 2]
    EXPECT_DOUBLE_EQ(d_dtw(seq1d({ 0, 1, 2 }), seq1d({ 0, 2 })), 1.0);
}

TEST(Dtw, SelfDistanceIsZero) {
    std::mt19937_64 rng{ 1 };
    for (int i = 0; i < 20; ++i) {
        const auto x = oracle::random_sequence(rng, 7, 3);
        EXPECT_EQ(d_dtw(x, x), 0.0);
    }
}

TEST(Dtw, SinglePoseEqualsEuclid) {
    const fixed_sequence p{ 3, { 1, 2, 3 } };
    const fixed_sequence q{ 3, { -1, 0, 5 } };
    EXPECT_EQ(d_dtw(p, q), d_euclid_sq(p, q));
}

TEST(Dtw, MatchesExhaustivePathEnumeration) {
    std::mt19937_64 rng{ 7 };
    std::uniform_int_distribution<std::size_t> len{ 1, 6 };
    std::uniform_int_distribution<std::size_t> dim{ 1, 3 };
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t k = dim(rng);
        const auto a = oracle::random_sequence(rng, len(rng), k);
        const auto b = oracle::random_sequence(rng, len(rng), k);
        EXPECT_EQ(d_dtw(a, b), oracle::exhaustive_dtw(a, b));
    }
}

TEST(Dtw, BoundedByEuclidAtEqualLength) {
    std::mt19937_64 rng{ 11 };
    for (int trial = 0; trial < 200; ++trial) {
        const auto a = oracle::random_sequence(rng, 8, 4);
        const auto b = oracle::random_sequence(rng, 8, 4);
        EXPECT_LE(d_dtw(a, b), d_euclid_sq(a, b));
    }
}

TEST(Kdtw, IdenticalSinglePoseGivesTwoThirds) {
    const fixed_sequence p{ 3, { 0.5, -1, 2 } };
    for (const double nu : { 0.01, 1.0, 100.0 }) {
        EXPECT_NEAR(kdtw_raw(p, p, nu), 2.0 / 3.0, 1e-15);
    }
}

TEST(Kdtw, MatchesNaiveTables) {
    std::mt19937_64 rng{ 3 };
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t L = 1 + trial % 12;
        const double nu = std::array{ 0.1, 1.0, 10.0 }[trial % 3];
        const auto a = oracle::random_sequence(rng, L, 3, 0.5);
        const auto b = oracle::random_sequence(rng, L, 3, 0.5);
        const double naive = oracle::naive_kdtw(a, b, nu);
        ASSERT_GT(naive, 0.0);
        EXPECT_NEAR(kdtw_log_raw(a, b, nu), std::log(naive), 1e-10) << "L=" << L << " nu=" << nu;
        EXPECT_NEAR(kdtw_raw(a, b, nu) / naive, 1.0, 1e-10);
    }
}

TEST(Kdtw, CorridorMatchesNaiveTables) {
    std::mt19937_64 rng{ 5 };
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t L = 2 + trial % 9;
        const std::size_t w = trial % 3;
        const auto a = oracle::random_sequence(rng, L, 2, 0.5);
        const auto b = oracle::random_sequence(rng, L, 2, 0.5);
        EXPECT_NEAR(kdtw_log_raw(a, b, 1.0, w), std::log(oracle::naive_kdtw(a, b, 1.0, w)), 1e-10);
    }
}

TEST(Kdtw, Symmetric) {
    std::mt19937_64 rng{ 9 };
    for (int trial = 0; trial < 200; ++trial) {
        const auto a = oracle::random_sequence(rng, 10, 4);
        const auto b = oracle::random_sequence(rng, 10, 4);
        const double ab = kdtw_raw(a, b, 0.5);
        const double ba = kdtw_raw(b, a, 0.5);
        EXPECT_NEAR(ab, ba, 1e-12 * std::abs(ab));
    }
}

TEST(Kdtw, LongSequencesStayFiniteAndPositive) {
    std::mt19937_64 rng{ 13 };
    const auto a = oracle::random_sequence(rng, 400, 6, 2.0);
    const auto b = oracle::random_sequence(rng, 400, 6, 2.0);
    const double lg = kdtw_log_raw(a, b, 10.0);
    EXPECT_TRUE(std::isfinite(lg));
    EXPECT_LT(lg, -700.0);  // far below the smallest double, only representable as a log
}

TEST(Kdtw, LocalUnderflowFallsBackToLogDomain) {
    // nu * d^2 > 745 makes every off-diagonal local kernel exactly zero in double precision
    const fixed_sequence a{ 1, { 0, 100, 0, 100 } };
    const fixed_sequence b{ 1, { 100, 0, 100, 0 } };
    const double lg = kdtw_log_raw(a, b, 1.0);
    EXPECT_TRUE(std::isfinite(lg));
    // reference value from a 50-digit evaluation of the plain recursion
    EXPECT_NEAR(lg, -20004.799914262780603, 1e-9);
}

TEST(Kdtw, RejectsBadParameters) {
    const fixed_sequence a{ 1, { 0, 1 } };
    EXPECT_THROW((void) kdtw_raw(a, a, 0.0), param_error);
    EXPECT_THROW((void) kdtw_raw(a, a, -1.0), param_error);
    EXPECT_THROW((void) kdtw_raw(a, fixed_sequence{ 2, { 0, 1 } }, 1.0), dimension_error);
}

TEST(Kdtw, GramIsPositiveSemidefinite) {
    std::mt19937_64 rng{ 17 };
    for (const double nu : { 0.1, 1.0, 10.0 }) {
        for (int set = 0; set < 10; ++set) {
            const std::size_t n = 5 + set;
            const std::size_t L = 2 + set % 8;
            std::vector<fixed_sequence> seqs;
            for (std::size_t i = 0; i < n; ++i) {
                seqs.push_back(oracle::random_sequence(rng, L, 3, 0.5));
            }
            Eigen::MatrixXd G(n, n);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    G(i, j) = kdtw_raw(seqs[i], seqs[j], nu);
                }
            }
            const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(G, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
            EXPECT_GE(min_eig, -1e-8 * G.trace()) << "nu=" << nu << " n=" << n << " L=" << L;
        }
    }
}

// The unnormalized sum need not peak on identical inputs, so no self-similarity maximum is asserted.

TEST(Kdtw, QuadraticScaling) {
    std::mt19937_64 rng{ 19 };
    for (const std::size_t L : { 50, 100, 200 }) {
        const auto a = oracle::random_sequence(rng, L, 3);
        const auto b = oracle::random_sequence(rng, L, 3);
        const auto a2 = oracle::random_sequence(rng, 2 * L, 3);
        const auto b2 = oracle::random_sequence(rng, 2 * L, 3);
        volatile double sink = 0.0;
        const int reps = L == 200 ? 9 : 25;
        const double t1 = median_seconds([&] { sink = sink + kdtw_log_raw(a, b, 1.0); }, reps);
        const double t2 = median_seconds([&] { sink = sink + kdtw_log_raw(a2, b2, 1.0); }, reps);
        const double ratio = t2 / t1;
        EXPECT_GE(ratio, 2.5) << "L=" << L;
        EXPECT_LE(ratio, 6.0) << "L=" << L;
    }
}

TEST(Normalization, ClosedFormExample) {
    const std::vector<double> v{ 2.0, 2.0 * std::numbers::e, 3.0 };
    const auto n = fit_normalization(v);
    EXPECT_NEAR(n.alpha, 1.0, 1e-14);
    EXPECT_NEAR(n.beta, 0.5, 1e-14);
    EXPECT_NEAR(n.beta * std::pow(2.0, n.alpha), 1.0, 1e-14);
    EXPECT_NEAR(n.beta * std::pow(2.0 * std::numbers::e, n.alpha), std::numbers::e, 1e-14);
}

TEST(Normalization, IdentityOnRandomSets) {
    std::mt19937_64 rng{ 23 };
    std::uniform_real_distribution<double> exponent{ -30.0, 5.0 };
    for (int set = 0; set < 100; ++set) {
        std::vector<double> v(2 + set % 40);
        for (double &x : v) {
            x = std::pow(10.0, exponent(rng));
        }
        const auto n = fit_normalization(v);
        const double m = *std::min_element(v.begin(), v.end());
        const double M = *std::max_element(v.begin(), v.end());
        EXPECT_NEAR(n.beta * std::pow(m, n.alpha), 1.0, 1e-10);
        EXPECT_NEAR(n.beta * std::pow(M, n.alpha), std::numbers::e, 1e-10);
    }
}

TEST(Normalization, DegenerateSpreadFallsBack) {
    std::vector<std::string> warnings;
    const auto previous = set_warning_handler([&](const std::string &w) { warnings.push_back(w); });
    const std::vector<double> v(5, 0.25);
    const auto n = fit_normalization(v);
    set_warning_handler(previous);
    EXPECT_TRUE(n.degenerate);
    EXPECT_EQ(n.alpha, 1.0);
    EXPECT_DOUBLE_EQ(n.beta, 4.0);
    EXPECT_EQ(warnings.size(), 1U);
    for (const double x : v) {
        EXPECT_DOUBLE_EQ(normalized_rdtw(n, std::log(x)), 1.0);
    }
}

TEST(Normalization, RejectsNonPositive) {
    EXPECT_THROW((void) fit_normalization(std::vector<double>{ 1.0, 0.0 }), domain_error);
    EXPECT_THROW((void) fit_normalization(std::vector<double>{ 1.0, -2.0 }), domain_error);
    EXPECT_THROW((void) fit_normalization(std::vector<double>{}), param_error);
}

TEST(KernelEval, Wrappers) {
    const fixed_sequence a{ 1, { 0.0, 1.0 } };
    const fixed_sequence b{ 1, { 1.0, 1.0 } };
    kernel_spec euclid{ kernel_family::euclid };
    euclid.sigma = 2.0;
    EXPECT_EQ(kernel_eval(euclid, a, a), 1.0);

    kernel_spec dtw{ kernel_family::dtw };
    dtw.sigma = d_dtw(a, b);
    EXPECT_DOUBLE_EQ(kernel_eval(dtw, a, b), std::exp(-1.0));

    kernel_spec rdtw{ kernel_family::rdtw };
    rdtw.nu = 1.0;
    rdtw.sigma = 0.5;
    EXPECT_THROW((void) kernel_eval(rdtw, a, b), state_error);
    const std::vector<double> raw{ kdtw_raw(a, a, 1.0), kdtw_raw(a, b, 1.0), kdtw_raw(b, b, 1.0) };
    rdtw.normalization = fit_normalization(raw);
    const std::size_t arg_max = static_cast<std::size_t>(std::max_element(raw.begin(), raw.end()) - raw.begin());
    const fixed_sequence &x = arg_max == 2 ? b : a;
    const fixed_sequence &y = arg_max == 0 ? a : b;
    EXPECT_NEAR(kernel_eval(rdtw, x, y), std::exp(std::numbers::e / 0.5), 1e-9);
}

TEST(KernelSpec, JsonRoundTrip) {
    kernel_spec s{ kernel_family::rdtw, 0.3, 7.0, 2, rdtw_normalization{ 0.25, 3.5, -5.0, false } };
    const kernel_spec back = nlohmann::json(s).get<kernel_spec>();
    EXPECT_EQ(back.family, s.family);
    EXPECT_EQ(back.nu, s.nu);
    EXPECT_EQ(back.sigma, s.sigma);
    EXPECT_EQ(back.corridor, s.corridor);
    ASSERT_TRUE(back.normalization);
    EXPECT_EQ(back.normalization->alpha, 0.25);
    EXPECT_EQ(back.normalization->log_min, -5.0);
}
