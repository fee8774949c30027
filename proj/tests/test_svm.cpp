#include "gesturekit/svm.hpp"

#include "oracles.hpp"

#include "gtest/gtest.h"

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

using namespace gesturekit;

namespace {

dense_matrix to_dense(const std::vector<std::vector<double>> &k) {
    dense_matrix m{ k.size(), k.size() };
    for (std::size_t i = 0; i < k.size(); ++i) {
        for (std::size_t j = 0; j < k.size(); ++j) {
            m(i, j) = k[i][j];
        }
    }
    return m;
}

std::vector<std::vector<double>> rbf(const std::vector<std::array<double, 2>> &pts, double gamma) {
    std::vector<std::vector<double>> k(pts.size(), std::vector<double>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = 0; j < pts.size(); ++j) {
            const double dx = pts[i][0] - pts[j][0];
            const double dy = pts[i][1] - pts[j][1];
            k[i][j] = std::exp(-gamma * (dx * dx + dy * dy));
        }
    }
    return k;
}

double equality_residual(const binary_model &m) {
    return std::abs(std::accumulate(m.dual_coefs.begin(), m.dual_coefs.end(), 0.0));
}

gram_matrix as_gram(dense_matrix values, std::vector<std::string> ids) {
    gram_matrix g;
    g.values = std::move(values);
    g.row_ids = ids;
    g.col_ids = std::move(ids);
    g.symmetric = true;
    return g;
}

// well-separated labelled points on a line, one cluster per class
struct clustered {
    gram_matrix gram;
    std::vector<std::string> labels;
    std::vector<double> positions;
};

clustered clusters(std::size_t n_classes, std::size_t per_class, std::uint64_t seed) {
    std::mt19937_64 rng{ seed };
    std::normal_distribution<double> jitter{ 0.0, 0.05 };
    clustered c;
    std::vector<std::string> ids;
    for (std::size_t k = 0; k < n_classes; ++k) {
        for (std::size_t r = 0; r < per_class; ++r) {
            c.positions.push_back(static_cast<double>(k) * 3.0 + jitter(rng));
            c.labels.push_back("class" + std::string(1, static_cast<char>('A' + k)));
            ids.push_back("s" + std::to_string(ids.size()));
        }
    }
    const std::size_t n = c.positions.size();
    dense_matrix m{ n, n };
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double d = c.positions[i] - c.positions[j];
            m(i, j) = std::exp(-d * d);
        }
    }
    c.gram = as_gram(std::move(m), std::move(ids));
    return c;
}

}  // namespace

TEST(SolveBinary, TwoPointAnalytic) {
    const std::vector<int> y{ -1, 1 };
    const auto sol = solve_binary(to_dense({ { 1, -1 }, { -1, 1 } }), y, 10.0);
    EXPECT_NEAR(sol.alpha[0], 0.5, 1e-9);
    EXPECT_NEAR(sol.alpha[1], 0.5, 1e-9);
    EXPECT_NEAR(sol.model.bias, 0.0, 1e-12);
    EXPECT_TRUE(sol.model.converged);
}

TEST(SolveBinary, MatchesBruteForceOnThreePoints) {
    std::mt19937_64 rng{ 42 };
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> c_dist{ 0.1, 5.0 };
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<std::array<double, 2>> pts(3);
        for (auto &p : pts) {
            p = { normal(rng), normal(rng) };
        }
        std::vector<int> y{ 1, -1, trial % 2 == 0 ? 1 : -1 };
        const double C = c_dist(rng);
        const auto k = rbf(pts, 0.5);
        smo_options opts;
        opts.tol = 1e-9;
        const auto sol = solve_binary(to_dense(k), y, C, opts);
        const double solver = oracle::dual_objective(k, y, sol.alpha);
        const double grid = oracle::brute_force_dual3(k, y, C, 1e-3 * C);
        // the grid can only undershoot the optimum
        EXPECT_GE(solver, grid - 1e-9 * std::abs(grid)) << "trial " << trial;
        EXPECT_NEAR(solver, grid, 1e-4 * std::abs(grid)) << "trial " << trial;
        EXPECT_NEAR(sol.model.objective, solver, 1e-9 * std::abs(solver));
    }
}

TEST(SolveBinary, SeparableSetSatisfiesKkt) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng{ seed };
        std::normal_distribution<double> normal{ 0.0, 0.6 };
        std::vector<std::array<double, 2>> pts;
        std::vector<int> y;
        for (int i = 0; i < 20; ++i) {
            const int label = i < 10 ? 1 : -1;
            pts.push_back({ 2.0 * label + normal(rng), normal(rng) });
            y.push_back(label);
        }
        const auto k = rbf(pts, 1.0);
        const double C = 100.0;
        const auto sol = solve_binary(to_dense(k), y, C);
        ASSERT_TRUE(sol.model.converged);
        EXPECT_LE(oracle::kkt_violation(k, y, sol.alpha, sol.model.bias, C), 1e-3);
        EXPECT_LE(equality_residual(sol.model), 1e-8 * C * 20);
        for (std::size_t i = 0; i < 20; ++i) {
            EXPECT_GE(sol.alpha[i], 0.0);
            EXPECT_LE(sol.alpha[i], C);
            double f = sol.model.bias;
            for (std::size_t s = 0; s < sol.model.support_indices.size(); ++s) {
                f += sol.model.dual_coefs[s] * k[i][sol.model.support_indices[s]];
            }
            EXPECT_GT(y[i] * f, 0.0) << "seed " << seed << " point " << i;
        }
    }
}

TEST(SolveBinary, ConflictingDuplicatesSitAtBound) {
    const std::vector<std::vector<double>> k{ { 1, 1 }, { 1, 1 } };
    const std::vector<int> y{ 1, -1 };
    const double C = 0.1;
    const auto sol = solve_binary(to_dense(k), y, C);
    EXPECT_TRUE(sol.model.converged);
    EXPECT_EQ(sol.alpha[0], C);
    EXPECT_EQ(sol.alpha[1], C);
    // brute force over the two-variable dual: a1 = a2 = a, objective 2a
    double best = 0.0;
    double best_a = 0.0;
    for (int s = 0; s <= 1000; ++s) {
        const double a = C * s / 1000.0;
        const double obj = oracle::dual_objective(k, y, { a, a });
        if (obj > best) {
            best = obj;
            best_a = a;
        }
    }
    EXPECT_EQ(best_a, C);
    EXPECT_NEAR(sol.model.objective, best, 1e-12);
}

TEST(SolveBinary, Errors) {
    const std::vector<int> same{ 1, 1 };
    EXPECT_THROW((void) solve_binary(to_dense({ { 1, 0 }, { 0, 1 } }), same, 1.0), label_error);
    const std::vector<int> y{ 1, -1 };
    EXPECT_THROW((void) solve_binary(to_dense({ { 1, NAN }, { NAN, 1 } }), y, 1.0), numeric_error);
    EXPECT_THROW((void) solve_binary(to_dense({ { 1, 0 }, { 0, 1 } }), y, 0.0), param_error);
    EXPECT_THROW((void) solve_binary(to_dense({ { 1 } }), y, 1.0), dimension_error);
}

TEST(SolveBinary, ObjectiveNeverDecreases) {
    std::mt19937_64 rng{ 7 };
    std::normal_distribution<double> normal;
    std::vector<std::array<double, 2>> pts;
    std::vector<int> y;
    for (int i = 0; i < 40; ++i) {
        pts.push_back({ normal(rng), normal(rng) });
        y.push_back(normal(rng) > 0 ? 1 : -1);
    }
    std::vector<double> trace;
    smo_options opts;
    opts.objective_trace = &trace;
    opts.tol = 1e-6;
    (void) solve_binary(to_dense(rbf(pts, 2.0)), y, 5.0, opts);
    ASSERT_GT(trace.size(), 5U);
    for (std::size_t t = 1; t < trace.size(); ++t) {
        EXPECT_GE(trace[t], trace[t - 1] - 1e-12 * std::abs(trace[t - 1])) << "update " << t;
    }
}

TEST(SolveBinary, IndefiniteDtwGramTerminates) {
    std::mt19937_64 rng{ 11 };
    std::vector<fixed_sequence> seqs;
    std::vector<int> y;
    for (int i = 0; i < 30; ++i) {
        seqs.push_back(oracle::random_sequence(rng, 8, 2, 1.0));
        y.push_back(i % 2 == 0 ? 1 : -1);
    }
    kernel_spec spec;
    spec.family = kernel_family::dtw;
    spec.sigma = 0.2;
    dense_matrix k{ seqs.size(), seqs.size() };
    for (std::size_t i = 0; i < seqs.size(); ++i) {
        for (std::size_t j = 0; j < seqs.size(); ++j) {
            k(i, j) = kernel_eval(spec, seqs[i], seqs[j]);
        }
    }
    smo_options opts;
    opts.max_iter = 20000;
    binary_solution sol;
    EXPECT_NO_THROW(sol = solve_binary(k, y, 10.0, opts));
    EXPECT_LE(sol.model.iterations, 20000U);
    for (const double a : sol.alpha) {
        EXPECT_GE(a, 0.0);
        EXPECT_LE(a, 10.0);
    }
}

TEST(SolveBinary, IterationCapReportsNotConverged) {
    std::mt19937_64 rng{ 3 };
    std::normal_distribution<double> normal;
    std::vector<std::array<double, 2>> pts;
    std::vector<int> y;
    for (int i = 0; i < 30; ++i) {
        pts.push_back({ normal(rng), normal(rng) });
        y.push_back(i % 2 == 0 ? 1 : -1);
    }
    smo_options opts;
    opts.max_iter = 2;
    const auto sol = solve_binary(to_dense(rbf(pts, 1.0)), y, 10.0, opts);
    EXPECT_FALSE(sol.model.converged);
    EXPECT_EQ(sol.model.iterations, 2U);
}

TEST(TrainMulticlass, BinaryCount) {
    for (const auto &[classes, expected] : { std::pair{ 2, 1 }, std::pair{ 11, 55 }, std::pair{ 20, 190 } }) {
        const auto c = clusters(static_cast<std::size_t>(classes), 2, 1);
        const auto model = train_multiclass(c.gram, c.labels, 1.0);
        EXPECT_EQ(model.binaries.size(), static_cast<std::size_t>(expected));
        EXPECT_EQ(model.class_set.size(), static_cast<std::size_t>(classes));
        EXPECT_TRUE(model.all_converged());
        for (const auto &b : model.binaries) {
            EXPECT_LE(equality_residual(b), 1e-8 * b.C * 4);
            for (const double d : b.dual_coefs) {
                EXPECT_LE(std::abs(d), b.C);
            }
        }
    }
}

TEST(TrainMulticlass, SingleClassRejected) {
    auto c = clusters(1, 4, 1);
    EXPECT_THROW((void) train_multiclass(c.gram, c.labels, 1.0), label_error);
}

TEST(TrainMulticlass, SameModelForAnyWorkerCount) {
    const auto c = clusters(5, 4, 9);
    const auto a = train_multiclass(c.gram, c.labels, 10.0, {}, 1);
    const auto b = train_multiclass(c.gram, c.labels, 10.0, {}, 4);
    EXPECT_EQ(model_to_json(a).dump(), model_to_json(b).dump());
}

TEST(Predict, SupportVectorKeepsItsClass) {
    const auto c = clusters(4, 5, 2);
    const auto model = train_multiclass(c.gram, c.labels, 10.0);
    const auto predicted = predict(model, c.gram);
    for (const std::size_t s : model.support_union()) {
        EXPECT_EQ(predicted[s], c.labels[s]);
    }
    EXPECT_EQ(predicted, c.labels);
}

TEST(Predict, TwoClassFollowsDecisionSign) {
    const auto c = clusters(2, 6, 3);
    const auto model = train_multiclass(c.gram, c.labels, 1.0);
    ASSERT_EQ(model.binaries.size(), 1U);
    const auto predicted = predict(model, c.gram);
    for (std::size_t r = 0; r < c.labels.size(); ++r) {
        const double d = decision_value(model.binaries[0], [&](std::size_t j) { return c.gram(r, j); });
        EXPECT_EQ(predicted[r], d > 0.0 ? model.binaries[0].class_pair.first : model.binaries[0].class_pair.second);
    }
}

TEST(Predict, AllZeroRowIsDeterministic) {
    const auto c = clusters(3, 4, 4);
    const auto model = train_multiclass(c.gram, c.labels, 1.0);
    gram_matrix zero;
    zero.values = dense_matrix{ 2, c.labels.size() };
    zero.col_ids = c.gram.col_ids;
    const auto first = predict(model, zero);
    const auto second = predict(model, zero);
    EXPECT_EQ(first, second);
    EXPECT_EQ(first[0], first[1]);
}

TEST(Predict, MisalignedColumnsRejected) {
    const auto c = clusters(2, 3, 5);
    const auto model = train_multiclass(c.gram, c.labels, 1.0);
    gram_matrix cross;
    cross.values = dense_matrix{ 1, c.labels.size() - 1 };
    EXPECT_THROW((void) predict(model, cross), alignment_error);
    cross.values = dense_matrix{ 1, c.labels.size() };
    cross.col_ids = c.gram.col_ids;
    std::swap(cross.col_ids[0], cross.col_ids[1]);
    EXPECT_THROW((void) predict(model, cross), alignment_error);
}

TEST(Classify, MatchesPredictThroughSupportSet) {
    std::mt19937_64 rng{ 21 };
    std::vector<fixed_sequence> train;
    std::vector<std::string> labels;
    for (int i = 0; i < 12; ++i) {
        auto s = oracle::random_sequence(rng, 6, 2, 0.2);
        const double offset = (i % 3) * 2.0;
        std::vector<double> v(s.data().begin(), s.data().end());
        for (auto &x : v) {
            x += offset;
        }
        fixed_sequence f{ 2, v };
        f.id = "t" + std::to_string(i);
        f.label = "g" + std::to_string(i % 3);
        labels.push_back(f.label);
        train.push_back(std::move(f));
    }
    kernel_spec spec;
    spec.family = kernel_family::rdtw;
    spec.sigma = 1.0;
    spec.nu = 0.5;
    const auto [g, fitted] = gram_train(train, spec);
    auto model = train_multiclass(g, labels, 10.0);
    model.spec = fitted;
    attach_support(model, train);
    const auto batch = predict(model, gram_cross(train, train, fitted));
    for (std::size_t i = 0; i < train.size(); ++i) {
        EXPECT_EQ(classify(model, train[i]), batch[i]);
    }

    // the JSON round trip keeps everything prediction needs
    std::stringstream buffer;
    buffer << model_to_json(model).dump();
    const auto back = model_from_json(nlohmann::json::parse(buffer.str()));
    EXPECT_EQ(model_to_json(back), model_to_json(model));
    for (std::size_t i = 0; i < train.size(); ++i) {
        EXPECT_EQ(classify(back, train[i]), batch[i]);
    }
}

TEST(ModelFile, RejectsInconsistentContent) {
    const auto c = clusters(3, 2, 6);
    auto j = model_to_json(train_multiclass(c.gram, c.labels, 1.0));
    auto bad = j;
    bad["binaries"].erase(0);
    EXPECT_THROW((void) model_from_json(bad), malformed_file);
    bad = j;
    bad["format"] = "something";
    EXPECT_THROW((void) model_from_json(bad), malformed_file);
    bad = j;
    bad["binaries"][0]["support_indices"] = { 99 };
    bad["binaries"][0]["dual_coefs"] = { 1.0 };
    EXPECT_THROW((void) model_from_json(bad), malformed_file);
}
