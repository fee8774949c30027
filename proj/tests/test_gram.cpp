#include "gesturekit/gram.hpp"

#include "oracles.hpp"

#include "gtest/gtest.h"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <thread>
#include <vector>

using namespace gesturekit;

namespace {

std::vector<fixed_sequence> random_set(std::uint64_t seed, std::size_t n, std::size_t L, std::size_t k, double scale = 0.5) {
    std::mt19937_64 rng{ seed };
    std::vector<fixed_sequence> out;
    for (std::size_t i = 0; i < n; ++i) {
        auto s = oracle::random_sequence(rng, L, k, scale);
        s.id = "seq" + std::to_string(i);
        s.label = "c" + std::to_string(i % 3);
        out.push_back(std::move(s));
    }
    return out;
}

kernel_spec spec_of(kernel_family f, double sigma = 1.0, double nu = 1.0) {
    kernel_spec s;
    s.family = f;
    s.sigma = sigma;
    s.nu = nu;
    return s;
}

struct temp_dir {
    std::filesystem::path path;
    temp_dir() :
        path{ std::filesystem::temp_directory_path() / ("gesturekit_gram_" + std::to_string(std::random_device{}())) } {
        std::filesystem::create_directories(path);
    }
    ~temp_dir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST(GramTrain, SingleSequenceEuclid) {
    const auto train = random_set(1, 1, 5, 3);
    const auto [g, fitted] = gram_train(train, spec_of(kernel_family::euclid));
    ASSERT_EQ(g.rows(), 1U);
    EXPECT_EQ(g(0, 0), 1.0);
}

TEST(GramTrain, SymmetricForEveryFamily) {
    const auto train = random_set(2, 3, 6, 2);
    for (const auto f : { kernel_family::euclid, kernel_family::dtw, kernel_family::rdtw }) {
        const auto [g, fitted] = gram_train(train, spec_of(f));
        EXPECT_TRUE(g.symmetric);
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t j = 0; j < 3; ++j) {
                EXPECT_EQ(g(i, j), g(j, i));
            }
        }
        EXPECT_EQ(fitted.normalization.has_value(), f == kernel_family::rdtw);
    }
}

TEST(GramTrain, RdtwMaximumMapsToE) {
    const auto train = random_set(3, 5, 8, 3);
    const auto stats = compute_statistics(train, spec_of(kernel_family::rdtw));
    const auto fitted = fit_spec(spec_of(kernel_family::rdtw), stats);
    double max_norm = 0.0;
    double min_norm = std::numeric_limits<double>::infinity();
    for (const double v : stats.values.values()) {
        max_norm = std::max(max_norm, normalized_rdtw(*fitted.normalization, v));
        min_norm = std::min(min_norm, normalized_rdtw(*fitted.normalization, v));
    }
    EXPECT_NEAR(max_norm, std::numbers::e, 1e-10);
    EXPECT_NEAR(min_norm, 1.0, 1e-10);
    // the same constants computed from raw values directly
    std::vector<double> raw;
    for (std::size_t i = 0; i < train.size(); ++i) {
        for (std::size_t j = i; j < train.size(); ++j) {
            raw.push_back(kdtw_raw(train[i], train[j], 1.0));
        }
    }
    const auto direct = fit_normalization(raw);
    EXPECT_NEAR(direct.alpha, fitted.normalization->alpha, 1e-9 * direct.alpha);
}

TEST(GramTrain, HeterogeneousLengthRejected) {
    auto train = random_set(4, 3, 6, 2);
    train.push_back(random_set(5, 1, 7, 2).front());
    EXPECT_THROW((void) gram_train(train, spec_of(kernel_family::euclid)), dimension_error);
}

TEST(GramCross, EqualsTrainOnSameSet) {
    const auto train = random_set(6, 6, 7, 3);
    for (const auto f : { kernel_family::euclid, kernel_family::dtw, kernel_family::rdtw }) {
        const auto [g, fitted] = gram_train(train, spec_of(f, 2.0));
        const auto cross = gram_cross(train, train, fitted);
        EXPECT_FALSE(cross.symmetric);
        for (std::size_t i = 0; i < train.size(); ++i) {
            for (std::size_t j = 0; j < train.size(); ++j) {
                EXPECT_NEAR(cross(i, j), g(i, j), 1e-12 * std::abs(g(i, j)));
            }
        }
    }
}

TEST(GramCross, IdenticalTestRowReproducesTrainingRow) {
    const auto train = random_set(7, 5, 6, 2);
    const auto [g, fitted] = gram_train(train, spec_of(kernel_family::rdtw, 0.7));
    const std::vector<fixed_sequence> test{ train[3] };
    const auto cross = gram_cross(test, train, fitted);
    for (std::size_t j = 0; j < train.size(); ++j) {
        EXPECT_EQ(cross(0, j), g(3, j));
    }
}

TEST(GramCross, UnfittedSpecRejected) {
    const auto train = random_set(8, 3, 4, 2);
    EXPECT_THROW((void) gram_cross(train, train, spec_of(kernel_family::rdtw)), state_error);
}

TEST(GramCross, OutOfRangeValuesAreNotClipped) {
    // a constant sequence at the mean of a noisy training sequence aligns with it more
    // cheaply than the sequence aligns with itself; search seeds until that happens
    const double sigma = 0.5;
    bool found = false;
    for (std::uint64_t seed = 0; seed < 50 && !found; ++seed) {
        const auto train = random_set(100 + seed, 4, 10, 1, 1.0);
        const auto [g, fitted] = gram_train(train, spec_of(kernel_family::rdtw, sigma, 0.5));
        std::vector<fixed_sequence> test;
        for (const auto &t : train) {
            const double mean = std::accumulate(t.data().begin(), t.data().end(), 0.0) / 10.0;
            test.emplace_back(1, std::vector<double>(10, mean));
        }
        const auto stats = compute_statistics(test, train, fitted);
        const auto cross = wrap(stats, fitted);
        for (std::size_t i = 0; i < test.size(); ++i) {
            for (std::size_t j = 0; j < train.size(); ++j) {
                if (normalized_rdtw(*fitted.normalization, stats.values(i, j)) > std::numbers::e) {
                    found = true;
                    EXPECT_GT(cross(i, j), std::exp(std::numbers::e / sigma));
                    EXPECT_TRUE(std::isfinite(cross(i, j)));
                }
            }
        }
    }
    EXPECT_TRUE(found) << "no out-of-range pair was produced";
}

TEST(GramEngine, DeterministicAcrossWorkerCounts) {
    const auto train = random_set(10, 24, 9, 3);
    const auto reference = compute_statistics(train, spec_of(kernel_family::rdtw), 1);
    for (const std::size_t workers : { 2, 3, 8 }) {
        const auto other = compute_statistics(train, spec_of(kernel_family::rdtw), workers);
        EXPECT_TRUE(other.values == reference.values) << workers << " workers";
    }
}

TEST(GramEngine, ParallelSpeedup) {
    if (std::thread::hardware_concurrency() < 2) {
        GTEST_SKIP() << "needs at least two hardware threads";
    }
    const auto train = random_set(11, 64, 30, 6);
    const auto time = [&](std::size_t workers) {
        const auto start = std::chrono::steady_clock::now();
        (void) compute_statistics(train, spec_of(kernel_family::rdtw), workers);
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };
    (void) time(1);
    const double single = time(1);
    const double multi = time(std::min<std::size_t>(4, std::thread::hardware_concurrency()));
    EXPECT_LE(multi, 0.8 * single);
}

TEST(GramEngine, FitRequiresSymmetricTrainingMatrix) {
    const auto a = random_set(12, 3, 4, 2);
    const auto cross = compute_statistics(a, a, spec_of(kernel_family::rdtw));
    EXPECT_THROW((void) fit_spec(spec_of(kernel_family::rdtw), cross), state_error);
}

TEST(GramEngine, SliceMatchesDirectComputation) {
    const auto all = random_set(13, 8, 6, 2);
    const auto full = compute_statistics(all, spec_of(kernel_family::dtw));
    const std::vector<std::size_t> idx{ 1, 4, 6 };
    std::vector<fixed_sequence> sub;
    for (const auto i : idx) {
        sub.push_back(all[i]);
    }
    const auto direct = compute_statistics(sub, spec_of(kernel_family::dtw));
    const auto sliced = slice(full, idx);
    EXPECT_TRUE(sliced.values == direct.values);
    EXPECT_EQ(sliced.row_ids, direct.row_ids);
}

TEST(MatrixFile, RoundTripAndChecksum) {
    temp_dir dir;
    const auto train = random_set(14, 5, 6, 2);
    const auto [g, fitted] = gram_train(train, spec_of(kernel_family::rdtw, 3.0, 0.25));
    const auto path = dir.path / "g.gkm";
    save_gram(path, g);
    const auto back = load_gram(path);
    EXPECT_TRUE(back.values == g.values);
    EXPECT_EQ(back.row_ids, g.row_ids);
    EXPECT_EQ(back.symmetric, g.symmetric);
    ASSERT_TRUE(back.spec.normalization);
    EXPECT_EQ(back.spec.normalization->alpha, fitted.normalization->alpha);
    EXPECT_THROW((void) load_statistics(path), malformed_file);

    // flip one payload byte
    {
        std::fstream f{ path, std::ios::in | std::ios::out | std::ios::binary };
        f.seekp(-3, std::ios::end);
        f.put('\x7f');
    }
    EXPECT_THROW((void) load_gram(path), malformed_file);
}

TEST(GramCache, ComputesOnceThenHits) {
    temp_dir dir;
    const auto seqs = random_set(15, 6, 5, 2);
    gram_cache cache{ dir.path };
    const auto first = cache.get_or_compute(seqs, spec_of(kernel_family::rdtw, 1.0, 0.5));
    const auto second = cache.get_or_compute(seqs, spec_of(kernel_family::rdtw, 99.0, 0.5));
    EXPECT_EQ(cache.misses(), 1U);
    EXPECT_EQ(cache.hits(), 1U);
    EXPECT_TRUE(first.values == second.values);
    (void) cache.get_or_compute(seqs, spec_of(kernel_family::rdtw, 1.0, 0.7));
    EXPECT_EQ(cache.misses(), 2U);
}
