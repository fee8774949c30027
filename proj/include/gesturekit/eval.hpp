/**
 * @file eval.hpp
 * @brief Evaluation protocols: subject-wise and k-fold splits, per-split SVM pipelines,
 *        hyperparameter grids, latency measurement and report writers.
 */
#pragma once

#include "gesturekit/detail/parallel.hpp"
#include "gesturekit/error.hpp"
#include "gesturekit/gram.hpp"
#include "gesturekit/mocap.hpp"
#include "gesturekit/resample.hpp"
#include "gesturekit/svm.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace gesturekit {

// ---------------------------------------------------------------------------------------------
// splits
// ---------------------------------------------------------------------------------------------

struct split_plan {
    std::string name;
    /// empty for k-fold plans
    std::vector<std::string> train_subjects;
    std::vector<std::string> test_subjects;
    std::vector<std::size_t> train_index;
    std::vector<std::size_t> test_index;
};

namespace detail {

inline std::string join(const std::vector<std::string> &items, char sep) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i > 0) {
            out += sep;
        }
        out += items[i];
    }
    return out;
}

inline split_plan plan_from_subjects(const dataset &data, std::vector<std::string> train, std::vector<std::string> test) {
    split_plan p;
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    const std::set<std::string> tr(train.begin(), train.end());
    const std::set<std::string> te(test.begin(), test.end());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto &subject = data.sequences()[i].subject;
        if (tr.contains(subject)) {
            p.train_index.push_back(i);
        } else if (te.contains(subject)) {
            p.test_index.push_back(i);
        }
    }
    p.name = "train=" + join(train, '+');
    p.train_subjects = std::move(train);
    p.test_subjects = std::move(test);
    return p;
}

/// Uniform draw in [0, n) by rejection, identical on every standard library.
inline std::uint64_t uniform_below(std::mt19937_64 &rng, std::uint64_t n) {
    const std::uint64_t limit = std::mt19937_64::max() - std::mt19937_64::max() % n;
    std::uint64_t v = rng();
    while (v >= limit) {
        v = rng();
    }
    return v % n;
}

}  // namespace detail

/**
 * @brief Every way of choosing @p n_train training subjects; the rest form the test side.
 * @details Plans follow the lexicographic order of the chosen subject combinations.
 * @throws param_error unless 0 < n_train < number of subjects
 */
inline std::vector<split_plan> subject_splits(const dataset &data, std::size_t n_train) {
    const auto &subjects = data.subject_set();
    const std::size_t n = subjects.size();
    if (n_train == 0 || n_train >= n) {
        throw param_error{ "n_train must be between 1 and the subject count minus one (" + std::to_string(n) + " subjects)" };
    }
    std::vector<split_plan> plans;
    std::vector<std::size_t> pick(n_train);
    std::iota(pick.begin(), pick.end(), 0);
    while (true) {
        std::vector<std::string> train;
        std::vector<std::string> test;
        std::size_t next = 0;
        for (std::size_t s = 0; s < n; ++s) {
            if (next < n_train && pick[next] == s) {
                train.push_back(subjects[s]);
                ++next;
            } else {
                test.push_back(subjects[s]);
            }
        }
        plans.push_back(detail::plan_from_subjects(data, std::move(train), std::move(test)));

        std::size_t i = n_train;
        while (i > 0 && pick[i - 1] == n - n_train + i - 1) {
            --i;
        }
        if (i == 0) {
            break;
        }
        ++pick[i - 1];
        for (std::size_t j = i; j < n_train; ++j) {
            pick[j] = pick[j - 1] + 1;
        }
    }
    return plans;
}

/**
 * @brief A single plan with explicitly named training and test subjects.
 * @throws param_error if either side is empty, the sides overlap or a subject is unknown
 */
inline split_plan fixed_split(const dataset &data, const std::vector<std::string> &train, const std::vector<std::string> &test) {
    if (train.empty() || test.empty()) {
        throw param_error{ "a fixed split needs training and test subjects" };
    }
    const auto &known = data.subject_set();
    for (const auto *side : { &train, &test }) {
        for (const auto &s : *side) {
            if (!std::binary_search(known.begin(), known.end(), s)) {
                throw param_error{ "unknown subject '" + s + "'" };
            }
        }
    }
    for (const auto &s : train) {
        if (std::find(test.begin(), test.end(), s) != test.end()) {
            throw param_error{ "subject '" + s + "' is on both sides of the split" };
        }
    }
    return detail::plan_from_subjects(data, train, test);
}

/**
 * @brief Stratified k-fold plans over the sequences listed in @p subset.
 * @details Each class's members are shuffled with a seeded Fisher-Yates pass, the classes are
 *          concatenated in class order and dealt round-robin to the folds, so fold sizes differ by
 *          at most one and every class is spread evenly.
 * @throws param_error if k < 2 or k exceeds the subset size
 */
inline std::vector<split_plan> kfold(const dataset &data, std::span<const std::size_t> subset, std::size_t k, std::uint64_t seed) {
    if (k < 2) {
        throw param_error{ "k-fold needs k >= 2" };
    }
    if (k > subset.size()) {
        throw param_error{ "k = " + std::to_string(k) + " exceeds the " + std::to_string(subset.size()) + " available sequences" };
    }
    std::map<std::string, std::vector<std::size_t>> by_class;
    for (const std::size_t i : subset) {
        by_class[data.sequences().at(i).label].push_back(i);
    }
    std::mt19937_64 rng{ seed };
    std::vector<std::vector<std::size_t>> folds(k);
    std::size_t position = 0;
    for (auto &[label, members] : by_class) {
        for (std::size_t i = members.size(); i > 1; --i) {
            std::swap(members[i - 1], members[detail::uniform_below(rng, i)]);
        }
        for (const std::size_t m : members) {
            folds[position++ % k].push_back(m);
        }
    }
    std::vector<split_plan> plans;
    for (std::size_t f = 0; f < k; ++f) {
        split_plan p;
        p.name = "fold" + std::to_string(f + 1);
        p.test_index = folds[f];
        std::sort(p.test_index.begin(), p.test_index.end());
        for (std::size_t g = 0; g < k; ++g) {
            if (g != f) {
                p.train_index.insert(p.train_index.end(), folds[g].begin(), folds[g].end());
            }
        }
        std::sort(p.train_index.begin(), p.train_index.end());
        plans.push_back(std::move(p));
    }
    return plans;
}

inline std::vector<split_plan> kfold(const dataset &data, std::size_t k, std::uint64_t seed) {
    std::vector<std::size_t> all(data.size());
    std::iota(all.begin(), all.end(), 0);
    return kfold(data, all, k, seed);
}

// ---------------------------------------------------------------------------------------------
// experiments
// ---------------------------------------------------------------------------------------------

struct experiment_config {
    std::size_t poses{ 15 };
    kernel_spec spec{};
    /// spec.sigma multiplies the median training pre-exponential value instead of being used as is
    bool relative_sigma{ false };
    double C{ 1.0 };
    resample_mode mode{ resample_mode::nearest };
};

struct eval_options {
    /// 0 selects the hardware concurrency
    std::size_t workers{ 0 };
    std::optional<std::filesystem::path> cache_dir{};
    smo_options smo{};
};

struct split_result {
    std::string name;
    std::vector<std::string> train_subjects;
    std::vector<std::string> test_subjects;
    std::size_t n_train{ 0 };
    std::size_t n_test{ 0 };
    /// percentages in [0, 100]
    double train_accuracy{ 0.0 };
    double test_accuracy{ 0.0 };
    /// bandwidth actually used after resolving a relative sigma
    double sigma{ 0.0 };
    bool converged{ true };
    /// confusion[true][predicted], indexed by the report's class_set
    std::vector<std::vector<std::size_t>> confusion;
    double seconds{ 0.0 };
};

struct eval_report {
    experiment_config config;
    std::vector<std::string> class_set;
    std::vector<split_result> splits;
    double mean_test{ 0.0 };
    double std_test{ 0.0 };
    double mean_train{ 0.0 };
    double std_train{ 0.0 };
    double statistics_seconds{ 0.0 };
    double total_seconds{ 0.0 };
};

namespace detail {

using clock = std::chrono::steady_clock;

inline double seconds_since(clock::time_point start) {
    return std::chrono::duration<double>(clock::now() - start).count();
}

/// Mean and sample standard deviation (n - 1 denominator, 0 for a single value).
inline std::pair<double, double> mean_std(const std::vector<double> &v) {
    if (v.empty()) {
        return { 0.0, 0.0 };
    }
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() == 1) {
        return { mean, 0.0 };
    }
    double ss = 0.0;
    for (const double x : v) {
        ss += (x - mean) * (x - mean);
    }
    return { mean, std::sqrt(ss / static_cast<double>(v.size() - 1)) };
}

inline double accuracy(const std::vector<std::string> &predicted, const std::vector<std::string> &truth) {
    if (truth.empty()) {
        return 0.0;
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        hits += predicted[i] == truth[i] ? 1 : 0;
    }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(truth.size());
}

/// Statistics over the whole resampled set, computed once per (L, family, nu, corridor).
inline statistic_matrix full_statistics(std::span<const fixed_sequence> seqs, const kernel_spec &spec, const eval_options &opts) {
    if (opts.cache_dir) {
        gram_cache cache{ *opts.cache_dir };
        return cache.get_or_compute(seqs, spec, opts.workers);
    }
    return compute_statistics(seqs, spec, opts.workers);
}

/// Fit the normalization and, for a relative sigma, scale it by the median training pre-exponential.
inline kernel_spec fit_config(const experiment_config &config, const statistic_matrix &train_stats) {
    kernel_spec fitted = fit_spec(config.spec, train_stats);
    if (config.relative_sigma) {
        const double med = median_pre_exponential(fitted, train_stats);
        // all training pairs identical: fall back to the multiplier itself
        fitted.sigma = med > 0.0 && std::isfinite(med) ? config.spec.sigma * med : config.spec.sigma;
    }
    return fitted;
}

inline split_result evaluate_split(const statistic_matrix &full, const std::vector<std::string> &labels, const std::vector<std::string> &class_set,
                                   const split_plan &plan, const experiment_config &config, const smo_options &smo) {
    const auto start = clock::now();
    if (plan.train_index.empty() || plan.test_index.empty()) {
        throw param_error{ "split '" + plan.name + "' has an empty side" };
    }
    split_result r;
    r.name = plan.name;
    r.train_subjects = plan.train_subjects;
    r.test_subjects = plan.test_subjects;
    r.n_train = plan.train_index.size();
    r.n_test = plan.test_index.size();

    const statistic_matrix train_stats = slice(full, plan.train_index);
    const kernel_spec fitted = fit_config(config, train_stats);
    r.sigma = fitted.sigma;

    std::vector<std::string> train_labels;
    std::vector<std::string> test_labels;
    for (const std::size_t i : plan.train_index) {
        train_labels.push_back(labels[i]);
    }
    for (const std::size_t i : plan.test_index) {
        test_labels.push_back(labels[i]);
    }

    const gram_matrix train_gram = wrap(train_stats, fitted);
    svm_model model = train_multiclass(train_gram, train_labels, config.C, smo, 1);
    model.spec = fitted;
    r.converged = model.all_converged();
    r.train_accuracy = accuracy(predict(model, train_gram), train_labels);

    const gram_matrix cross = wrap(slice(full, plan.test_index, plan.train_index), fitted);
    const auto predicted = predict(model, cross);
    r.test_accuracy = accuracy(predicted, test_labels);

    std::map<std::string, std::size_t, std::less<>> position;
    for (std::size_t c = 0; c < class_set.size(); ++c) {
        position.emplace(class_set[c], c);
    }
    r.confusion.assign(class_set.size(), std::vector<std::size_t>(class_set.size(), 0));
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        ++r.confusion[position.at(test_labels[i])][position.at(predicted[i])];
    }
    r.seconds = seconds_since(start);
    return r;
}

inline eval_report evaluate_plans(const statistic_matrix &full, const std::vector<std::string> &labels, const std::vector<std::string> &class_set,
                                  std::span<const split_plan> plans, const experiment_config &config, const eval_options &opts) {
    const auto start = clock::now();
    eval_report report;
    report.config = config;
    report.class_set = class_set;
    report.splits.resize(plans.size());
    // splits are independent; each writes its own slot
    parallel_for(plans.size(), opts.workers, [&](std::size_t p) {
        report.splits[p] = evaluate_split(full, labels, class_set, plans[p], config, opts.smo);
    });
    std::vector<double> test;
    std::vector<double> train;
    for (const auto &s : report.splits) {
        test.push_back(s.test_accuracy);
        train.push_back(s.train_accuracy);
    }
    std::tie(report.mean_test, report.std_test) = mean_std(test);
    std::tie(report.mean_train, report.std_train) = mean_std(train);
    report.total_seconds = seconds_since(start);
    return report;
}

}  // namespace detail

/**
 * @brief Resample once, compute statistics once, then run every plan's
 *        fit / train / cross / predict pipeline. Plans run concurrently.
 */
inline eval_report run_experiment(const dataset &data, std::span<const split_plan> plans, const experiment_config &config, const eval_options &opts = {}) {
    if (plans.empty()) {
        throw param_error{ "no split plans to evaluate" };
    }
    if (!(config.C > 0.0)) {
        throw param_error{ "C must be strictly positive" };
    }
    const auto start = detail::clock::now();
    const auto seqs = resample_all(data, config.poses, config.mode);
    const statistic_matrix full = detail::full_statistics(seqs, config.spec, opts);
    const double stats_seconds = detail::seconds_since(start);
    eval_report report = detail::evaluate_plans(full, data.labels(), data.class_set(), plans, config, opts);
    report.statistics_seconds = stats_seconds;
    report.total_seconds = detail::seconds_since(start);
    return report;
}

// ---------------------------------------------------------------------------------------------
// grid search
// ---------------------------------------------------------------------------------------------

struct grid_axes {
    std::vector<kernel_family> families{ kernel_family::rdtw };
    std::vector<double> nus{ 0.01, 0.1, 1.0, 10.0 };
    /// interpreted relative to the median training pre-exponential value when relative_sigma is set
    std::vector<double> sigmas{ 0.1, 1.0, 10.0, 100.0 };
    std::vector<double> Cs{ 0.1, 1.0, 10.0, 100.0 };
    std::vector<std::size_t> poses{ 15 };
};

struct grid_result {
    std::vector<eval_report> reports;
    std::size_t best{ 0 };

    [[nodiscard]] const experiment_config &best_config() const { return reports.at(best).config; }
};

namespace detail {

inline std::size_t family_rank(kernel_family f) { return static_cast<std::size_t>(f); }

/// Ordering key used both for enumeration and for breaking accuracy ties: (nu, sigma, C, L, family).
inline auto config_key(const experiment_config &c) {
    return std::make_tuple(c.spec.nu, c.spec.sigma, c.C, c.poses, family_rank(c.spec.family));
}

}  // namespace detail

/**
 * @brief Expand the axes into distinct configurations.
 * @details nu only matters for rdtw; other families get the spec default, which collapses
 *          their nu axis. The order is by family, then L, nu, sigma and C.
 */
inline std::vector<experiment_config> expand_grid(const grid_axes &axes, const experiment_config &base) {
    if (axes.families.empty() || axes.nus.empty() || axes.sigmas.empty() || axes.Cs.empty() || axes.poses.empty()) {
        throw param_error{ "every grid axis needs at least one value" };
    }
    std::set<std::tuple<std::size_t, std::size_t, double, double, double>> seen;
    std::vector<experiment_config> out;
    for (const auto family : axes.families) {
        for (const std::size_t L : axes.poses) {
            for (const double nu : axes.nus) {
                for (const double sigma : axes.sigmas) {
                    for (const double C : axes.Cs) {
                        experiment_config c = base;
                        c.poses = L;
                        c.spec.family = family;
                        c.spec.nu = family == kernel_family::rdtw ? nu : kernel_spec{}.nu;
                        c.spec.sigma = sigma;
                        c.spec.normalization.reset();
                        c.C = C;
                        if (seen.emplace(detail::family_rank(family), L, c.spec.nu, sigma, C).second) {
                            out.push_back(c);
                        }
                    }
                }
            }
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const experiment_config &a, const experiment_config &b) {
        return std::make_tuple(detail::family_rank(a.spec.family), a.poses, a.spec.nu, a.spec.sigma, a.C) <
               std::make_tuple(detail::family_rank(b.spec.family), b.poses, b.spec.nu, b.spec.sigma, b.C);
    });
    return out;
}

/**
 * @brief Evaluate every distinct configuration on @p plans and pick the best mean test accuracy.
 * @details Statistics are shared by all configurations with the same (family, L, nu). Ties go to
 *          the smallest (nu, sigma, C, L), then to the family listed first.
 */
inline grid_result grid_search(const dataset &data, std::span<const split_plan> plans, const grid_axes &axes, const experiment_config &base = {},
                               const eval_options &opts = {}) {
    if (plans.empty()) {
        throw param_error{ "no split plans to evaluate" };
    }
    const auto configs = expand_grid(axes, base);
    grid_result result;
    std::map<std::size_t, std::vector<fixed_sequence>> resampled;
    std::optional<std::tuple<std::size_t, std::size_t, double>> current;
    statistic_matrix full;
    double stats_seconds = 0.0;
    for (const auto &c : configs) {
        const auto group = std::make_tuple(detail::family_rank(c.spec.family), c.poses, c.spec.nu);
        if (current != group) {
            const auto start = detail::clock::now();
            auto it = resampled.find(c.poses);
            if (it == resampled.end()) {
                it = resampled.emplace(c.poses, resample_all(data, c.poses, c.mode)).first;
            }
            full = detail::full_statistics(it->second, c.spec, opts);
            stats_seconds = detail::seconds_since(start);
            current = group;
        }
        eval_report r = detail::evaluate_plans(full, data.labels(), data.class_set(), plans, c, opts);
        r.statistics_seconds = stats_seconds;
        result.reports.push_back(std::move(r));
    }
    for (std::size_t i = 1; i < result.reports.size(); ++i) {
        const auto &cand = result.reports[i];
        const auto &best = result.reports[result.best];
        if (cand.mean_test > best.mean_test ||
            (cand.mean_test == best.mean_test && detail::config_key(cand.config) < detail::config_key(best.config))) {
            result.best = i;
        }
    }
    return result;
}

// ---------------------------------------------------------------------------------------------
// latency
// ---------------------------------------------------------------------------------------------

struct latency_stats {
    double median_ms{ 0.0 };
    double p95_ms{ 0.0 };
    std::size_t samples{ 0 };
};

/**
 * @brief Wall time of single-sequence classification (resample, kernel row, vote).
 * @details The first @p warmup calls are discarded; @p samples are cycled until @p runs timed
 *          calls were made. p95 uses the nearest-rank definition.
 */
inline latency_stats benchmark_latency(const svm_model &model, std::span<const pose_sequence> samples, std::size_t runs = 50, std::size_t warmup = 5,
                                       resample_mode mode = resample_mode::nearest) {
    if (samples.empty() || runs == 0) {
        throw param_error{ "latency benchmark needs samples and at least one run" };
    }
    std::size_t sink = 0;
    for (std::size_t w = 0; w < warmup; ++w) {
        sink += classify(model, samples[w % samples.size()], mode).size();
    }
    std::vector<double> ms;
    ms.reserve(runs);
    for (std::size_t r = 0; r < runs; ++r) {
        const auto start = detail::clock::now();
        sink += classify(model, samples[r % samples.size()], mode).size();
        ms.push_back(1e3 * detail::seconds_since(start));
    }
    std::sort(ms.begin(), ms.end());
    latency_stats s;
    s.samples = runs;
    s.median_ms = runs % 2 == 1 ? ms[runs / 2] : 0.5 * (ms[runs / 2 - 1] + ms[runs / 2]);
    const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(runs)));
    s.p95_ms = ms[std::max<std::size_t>(rank, 1) - 1];
    // keep the classification results observable so the calls cannot be elided
    if (sink == static_cast<std::size_t>(-1)) {
        s.samples = 0;
    }
    return s;
}

struct trained_model {
    svm_model model;
    /// percentage of training sequences the model labels correctly
    double train_accuracy{ 0.0 };
};

/**
 * @brief Train on every sequence of @p train at L poses and return a self-contained model.
 */
inline trained_model train_model(const dataset &train, const experiment_config &config, const eval_options &opts = {}) {
    if (!(config.C > 0.0)) {
        throw param_error{ "C must be strictly positive" };
    }
    const auto seqs = resample_all(train, config.poses, config.mode);
    const statistic_matrix stats = detail::full_statistics(seqs, config.spec, opts);
    const kernel_spec fitted = detail::fit_config(config, stats);
    const gram_matrix gram = wrap(stats, fitted);
    const auto labels = train.labels();
    trained_model out;
    out.model = train_multiclass(gram, labels, config.C, opts.smo, opts.workers);
    out.model.spec = fitted;
    out.train_accuracy = detail::accuracy(predict(out.model, gram), labels);
    attach_support(out.model, seqs);
    return out;
}

// ---------------------------------------------------------------------------------------------
// report writers
// ---------------------------------------------------------------------------------------------

namespace detail {

inline std::string number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string percent(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

inline std::string csv_field(const std::string &s) {
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (const char c : s) {
        out += c == '"' ? std::string{ "\"\"" } : std::string(1, c);
    }
    return out + "\"";
}

inline nlohmann::json config_json(const experiment_config &c) {
    nlohmann::json j{
        { "poses", c.poses },
        { "family", to_string(c.spec.family) },
        { "sigma", c.spec.sigma },
        { "relative_sigma", c.relative_sigma },
        { "C", c.C },
        { "resample", c.mode == resample_mode::nearest ? "nearest" : "linear" },
    };
    j["nu"] = c.spec.family == kernel_family::rdtw ? nlohmann::json(c.spec.nu) : nlohmann::json(nullptr);
    j["corridor"] = c.spec.corridor ? nlohmann::json(*c.spec.corridor) : nlohmann::json(nullptr);
    return j;
}

}  // namespace detail

/// Column names of the per-split CSV, in order.
inline const std::vector<std::string> &report_csv_columns() {
    static const std::vector<std::string> cols{ "family",    "poses",         "nu",          "sigma_param", "sigma_mode", "sigma",
                                                "C",         "split",         "train_subjects", "test_subjects", "n_train", "n_test",
                                                "train_accuracy", "test_accuracy", "converged" };
    return cols;
}

/// One row per split per configuration; no timing columns, so output is reproducible.
inline void write_report_csv(std::ostream &out, std::span<const eval_report> reports) {
    const auto &cols = report_csv_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) {
        out << (i ? "," : "") << cols[i];
    }
    out << '\n';
    for (const auto &r : reports) {
        const auto &c = r.config;
        const std::string nu = c.spec.family == kernel_family::rdtw ? detail::number(c.spec.nu) : "";
        for (const auto &s : r.splits) {
            out << to_string(c.spec.family) << ',' << c.poses << ',' << nu << ',' << detail::number(c.spec.sigma) << ','
                << (c.relative_sigma ? "relative" : "absolute") << ',' << detail::number(s.sigma) << ',' << detail::number(c.C) << ','
                << detail::csv_field(s.name) << ',' << detail::csv_field(detail::join(s.train_subjects, ';')) << ','
                << detail::csv_field(detail::join(s.test_subjects, ';')) << ',' << s.n_train << ',' << s.n_test << ','
                << detail::percent(s.train_accuracy) << ',' << detail::percent(s.test_accuracy) << ',' << (s.converged ? 1 : 0) << '\n';
        }
    }
}

/// JSON summary per configuration: config, aggregate accuracies, confusion matrices and timings.
inline nlohmann::json report_summary(std::span<const eval_report> reports, std::optional<std::size_t> best = std::nullopt) {
    nlohmann::json configs = nlohmann::json::array();
    for (const auto &r : reports) {
        nlohmann::json splits = nlohmann::json::array();
        for (const auto &s : r.splits) {
            splits.push_back({ { "name", s.name },
                               { "train_accuracy", s.train_accuracy },
                               { "test_accuracy", s.test_accuracy },
                               { "sigma", s.sigma },
                               { "converged", s.converged },
                               { "confusion", s.confusion },
                               { "seconds", s.seconds } });
        }
        configs.push_back({ { "config", detail::config_json(r.config) },
                            { "class_set", r.class_set },
                            { "mean_test_accuracy", r.mean_test },
                            { "std_test_accuracy", r.std_test },
                            { "mean_train_accuracy", r.mean_train },
                            { "std_train_accuracy", r.std_train },
                            { "statistics_seconds", r.statistics_seconds },
                            { "total_seconds", r.total_seconds },
                            { "splits", std::move(splits) } });
    }
    nlohmann::json j{ { "format", "gesturekit-report" }, { "version", 1 }, { "configs", std::move(configs) } };
    if (best) {
        j["best"] = *best;
    }
    return j;
}

struct curve_point {
    std::size_t poses{ 0 };
    kernel_family family{ kernel_family::rdtw };
    double mean_accuracy{ 0.0 };
    std::optional<double> latency_ms{};
};

/// Best mean test accuracy per (family, L) over a grid.
inline std::vector<curve_point> accuracy_curve(const grid_result &grid) {
    std::map<std::pair<std::size_t, std::size_t>, curve_point> best;
    for (const auto &r : grid.reports) {
        const auto key = std::make_pair(detail::family_rank(r.config.spec.family), r.config.poses);
        auto it = best.find(key);
        if (it == best.end() || r.mean_test > it->second.mean_accuracy) {
            best[key] = curve_point{ r.config.poses, r.config.spec.family, r.mean_test, std::nullopt };
        }
    }
    std::vector<curve_point> out;
    for (const auto &[key, p] : best) {
        out.push_back(p);
    }
    return out;
}

/// CSV with columns poses, family, mean_accuracy and, when any point has one, latency_ms.
inline void write_curve_csv(std::ostream &out, std::span<const curve_point> points) {
    const bool latency = std::any_of(points.begin(), points.end(), [](const curve_point &p) { return p.latency_ms.has_value(); });
    out << "poses,family,mean_accuracy" << (latency ? ",latency_ms" : "") << '\n';
    for (const auto &p : points) {
        out << p.poses << ',' << to_string(p.family) << ',' << detail::percent(p.mean_accuracy);
        if (latency) {
            out << ',' << (p.latency_ms ? detail::number(*p.latency_ms) : "");
        }
        out << '\n';
    }
}

}  // namespace gesturekit
