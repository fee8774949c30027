#pragma once

/// @file
/// @brief C-SVM on precomputed kernel matrices: SMO for the binary dual, one-vs-one voting
///        for the multiclass case, and the JSON model container.

#include "gesturekit/detail/parallel.hpp"
#include "gesturekit/error.hpp"
#include "gesturekit/gram.hpp"
#include "gesturekit/kernels.hpp"
#include "gesturekit/resample.hpp"

#include "nlohmann/json.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace gesturekit {

struct smo_options {
    /// stop once the maximal KKT violation m(alpha) - M(alpha) is at most tol
    double tol{ 1e-3 };
    /// pair updates before giving up; unset means 10 * n * 1000
    std::optional<std::size_t> max_iter;
    /// when set, receives the dual objective after every pair update
    std::vector<double> *objective_trace{ nullptr };
};

/**
 * @brief Solution of one binary dual problem.
 * @details Decision value for a point x: sum_i dual_coefs[i] K(x, sv_i) + bias, where sv_i is
 *          the training point support_indices[i] and dual_coefs[i] = alpha_i y_i.
 */
struct binary_model {
    std::pair<std::string, std::string> class_pair;
    std::vector<std::size_t> support_indices;
    std::vector<double> dual_coefs;
    double bias{ 0.0 };
    double C{ 1.0 };
    bool converged{ false };
    std::size_t iterations{ 0 };
    /// dual objective sum(alpha) - 1/2 alpha' Q alpha at the solution
    double objective{ 0.0 };
};

/// Full dual solution of a binary problem, kept for diagnostics.
struct binary_solution {
    std::vector<double> alpha;
    binary_model model;
};

namespace detail {

inline double dual_objective(std::span<const double> alpha, std::span<const double> grad) {
    // f = 1/2 a'Qa - e'a = 1/2 a'(G - e); the dual objective is -f
    double f = 0.0;
    for (std::size_t k = 0; k < alpha.size(); ++k) {
        f += alpha[k] * (grad[k] - 1.0);
    }
    return -0.5 * f;
}

}  // namespace detail

/**
 * @brief Solve min 1/2 a'Qa - e'a subject to 0 <= a <= C and y'a = 0, with Q_ij = y_i y_j K_ij.
 * @details Working pairs are chosen by maximal violation. When the pair curvature
 *          K_ii + K_jj - 2 K_ij is not positive (indefinite kernels) the step runs to the box
 *          boundary. Hitting max_iter is not an error; the model reports converged = false.
 * @param kernel symmetric n x n kernel matrix over the training points
 * @param labels +1 / -1 per row
 */
inline binary_solution solve_binary(const dense_matrix &kernel, std::span<const int> labels, double C, const smo_options &opts = {}) {
    const std::size_t n = labels.size();
    if (kernel.rows() != n || kernel.cols() != n) {
        throw dimension_error{ "kernel matrix shape does not match the label count" };
    }
    if (!(C > 0.0) || !std::isfinite(C)) {
        throw param_error{ "C must be strictly positive" };
    }
    bool has_pos = false;
    bool has_neg = false;
    for (const int y : labels) {
        if (y == 1) {
            has_pos = true;
        } else if (y == -1) {
            has_neg = true;
        } else {
            throw label_error{ "binary labels must be +1 or -1" };
        }
    }
    if (!has_pos || !has_neg) {
        throw label_error{ "binary training needs examples of both classes" };
    }
    for (const double v : kernel.values()) {
        if (!std::isfinite(v)) {
            throw numeric_error{ "kernel matrix contains a non-finite entry" };
        }
    }

    constexpr double tau = 1e-12;
    const std::size_t max_iter = opts.max_iter.value_or(10 * n * 1000);
    std::vector<double> alpha(n, 0.0);
    std::vector<double> grad(n, -1.0);
    const auto y = [&](std::size_t t) { return static_cast<double>(labels[t]); };
    const auto in_up = [&](std::size_t t) { return labels[t] == 1 ? alpha[t] < C : alpha[t] > 0.0; };
    const auto in_low = [&](std::size_t t) { return labels[t] == 1 ? alpha[t] > 0.0 : alpha[t] < C; };

    bool converged = false;
    std::size_t iter = 0;
    for (; iter < max_iter; ++iter) {
        double g_max = -std::numeric_limits<double>::infinity();
        double g_min = std::numeric_limits<double>::infinity();
        std::size_t i = n;
        std::size_t j = n;
        for (std::size_t t = 0; t < n; ++t) {
            const double v = -y(t) * grad[t];
            if (in_up(t) && v > g_max) {
                g_max = v;
                i = t;
            }
            if (in_low(t) && v < g_min) {
                g_min = v;
                j = t;
            }
        }
        if (i == n || j == n || g_max - g_min <= opts.tol) {
            converged = true;
            break;
        }

        // move alpha_i by +y_i t and alpha_j by -y_j t, which keeps y'a fixed
        const double slope = -(g_max - g_min);
        const double curvature = kernel(i, i) + kernel(j, j) - 2.0 * kernel(i, j);
        const double room_i = labels[i] == 1 ? C - alpha[i] : alpha[i];
        const double room_j = labels[j] == 1 ? alpha[j] : C - alpha[j];
        const double t_max = std::min(room_i, room_j);
        double step = t_max;
        if (curvature > tau) {
            step = std::min(-slope / curvature, t_max);
        }
        if (!(step > 0.0)) {
            // no progress possible on this pair; treat as converged to avoid spinning
            converged = true;
            break;
        }

        alpha[i] += y(i) * step;
        alpha[j] -= y(j) * step;
        if (step == t_max) {
            if (room_i == t_max) {
                alpha[i] = labels[i] == 1 ? C : 0.0;
            }
            if (room_j == t_max) {
                alpha[j] = labels[j] == 1 ? 0.0 : C;
            }
        }
        alpha[i] = std::clamp(alpha[i], 0.0, C);
        alpha[j] = std::clamp(alpha[j], 0.0, C);
        for (std::size_t k = 0; k < n; ++k) {
            grad[k] += step * y(k) * (kernel(k, i) - kernel(k, j));
        }
        if (opts.objective_trace) {
            opts.objective_trace->push_back(detail::dual_objective(alpha, grad));
        }
    }

    // bias from free vectors, else the midpoint of the feasible interval
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    std::size_t n_free = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double yg = y(t) * grad[t];
        if (alpha[t] >= C) {
            if (labels[t] == -1) {
                ub = std::min(ub, yg);
            } else {
                lb = std::max(lb, yg);
            }
        } else if (alpha[t] <= 0.0) {
            if (labels[t] == 1) {
                ub = std::min(ub, yg);
            } else {
                lb = std::max(lb, yg);
            }
        } else {
            sum_free += yg;
            ++n_free;
        }
    }
    double rho = 0.0;
    if (n_free > 0) {
        rho = sum_free / static_cast<double>(n_free);
    } else if (std::isfinite(ub) && std::isfinite(lb)) {
        rho = 0.5 * (ub + lb);
    } else if (std::isfinite(ub)) {
        rho = ub;
    } else if (std::isfinite(lb)) {
        rho = lb;
    }

    binary_solution sol;
    sol.model.C = C;
    sol.model.bias = rho == 0.0 ? 0.0 : -rho;
    sol.model.converged = converged;
    sol.model.iterations = iter;
    sol.model.objective = detail::dual_objective(alpha, grad);
    for (std::size_t t = 0; t < n; ++t) {
        if (alpha[t] > 0.0) {
            sol.model.support_indices.push_back(t);
            sol.model.dual_coefs.push_back(alpha[t] * y(t));
        }
    }
    sol.alpha = std::move(alpha);
    return sol;
}

/// Binary model over a symmetric Gram matrix (indices in the model refer to gram rows).
inline binary_model train_binary(const gram_matrix &gram, std::span<const int> labels, double C, const smo_options &opts = {}) {
    if (!gram.symmetric) {
        throw state_error{ "binary training needs a symmetric training Gram matrix" };
    }
    return solve_binary(gram.values, labels, C, opts).model;
}

/// Decision value sum_i coef_i K(x, sv_i) + bias; @p kernel_row is indexed by training position.
template <typename KernelRow>
double decision_value(const binary_model &m, KernelRow &&kernel_row) {
    double sum = 0.0;
    for (std::size_t s = 0; s < m.support_indices.size(); ++s) {
        sum += m.dual_coefs[s] * kernel_row(m.support_indices[s]);
    }
    return sum + m.bias;
}

/**
 * @brief One-vs-one multiclass model.
 * @details binaries[b] separates class_pair.first (positive) from class_pair.second, with pairs
 *          enumerated in class_set order. support_set optionally holds the resampled training
 *          sequences referenced by any binary so the model can classify on its own.
 */
struct svm_model {
    kernel_spec spec;
    std::vector<std::string> class_set;
    std::vector<std::string> train_ids;
    std::vector<binary_model> binaries;
    std::size_t poses{ 0 };
    std::map<std::size_t, fixed_sequence> support_set;

    [[nodiscard]] std::vector<std::size_t> support_union() const {
        std::vector<std::size_t> all;
        for (const auto &b : binaries) {
            all.insert(all.end(), b.support_indices.begin(), b.support_indices.end());
        }
        std::sort(all.begin(), all.end());
        all.erase(std::unique(all.begin(), all.end()), all.end());
        return all;
    }

    [[nodiscard]] bool all_converged() const noexcept {
        return std::all_of(binaries.begin(), binaries.end(), [](const binary_model &b) { return b.converged; });
    }
};

/**
 * @brief Train one binary model per unordered class pair on the matching sub-matrix.
 * @param labels class label of every gram row
 * @param workers pairs trained concurrently, 0 selects the hardware concurrency
 */
inline svm_model train_multiclass(const gram_matrix &gram, std::span<const std::string> labels, double C, const smo_options &opts = {}, std::size_t workers = 0) {
    if (!gram.symmetric) {
        throw state_error{ "multiclass training needs a symmetric training Gram matrix" };
    }
    if (labels.size() != gram.rows()) {
        throw dimension_error{ "label count does not match the Gram matrix" };
    }
    std::vector<std::string> classes(labels.begin(), labels.end());
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    if (classes.size() < 2) {
        throw label_error{ "multiclass training needs at least two classes" };
    }
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t a = 0; a < classes.size(); ++a) {
        for (std::size_t b = a + 1; b < classes.size(); ++b) {
            pairs.emplace_back(a, b);
        }
    }
    smo_options pair_opts = opts;
    pair_opts.objective_trace = nullptr;

    svm_model model;
    model.spec = gram.spec;
    model.class_set = classes;
    model.train_ids = gram.row_ids;
    model.binaries.resize(pairs.size());
    detail::parallel_for(pairs.size(), workers, [&](std::size_t p) {
        const std::string &pos = classes[pairs[p].first];
        const std::string &neg = classes[pairs[p].second];
        std::vector<std::size_t> index;
        std::vector<int> y;
        for (std::size_t r = 0; r < labels.size(); ++r) {
            if (labels[r] == pos || labels[r] == neg) {
                index.push_back(r);
                y.push_back(labels[r] == pos ? 1 : -1);
            }
        }
        dense_matrix sub{ index.size(), index.size() };
        for (std::size_t a = 0; a < index.size(); ++a) {
            for (std::size_t b = 0; b < index.size(); ++b) {
                sub(a, b) = gram.values(index[a], index[b]);
            }
        }
        binary_model m = solve_binary(sub, y, C, pair_opts).model;
        for (std::size_t &s : m.support_indices) {
            s = index[s];
        }
        m.class_pair = { pos, neg };
        model.binaries[p] = std::move(m);
    });
    return model;
}

/**
 * @brief Majority vote over the binaries for one kernel row.
 * @details Ties go to the class with the largest summed absolute decision value among the
 *          binaries it won, then to the class listed first.
 */
template <typename KernelRow>
std::string vote(const svm_model &model, KernelRow &&kernel_row) {
    const std::size_t n_classes = model.class_set.size();
    std::vector<std::size_t> votes(n_classes, 0);
    std::vector<double> strength(n_classes, 0.0);
    std::map<std::string, std::size_t, std::less<>> position;
    for (std::size_t c = 0; c < n_classes; ++c) {
        position.emplace(model.class_set[c], c);
    }
    for (const binary_model &b : model.binaries) {
        const double d = decision_value(b, kernel_row);
        const std::size_t winner = position.at(d > 0.0 ? b.class_pair.first : b.class_pair.second);
        ++votes[winner];
        strength[winner] += std::abs(d);
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < n_classes; ++c) {
        if (votes[c] > votes[best] || (votes[c] == votes[best] && strength[c] > strength[best])) {
            best = c;
        }
    }
    return model.class_set[best];
}

/**
 * @brief Predict a label for every row of a test x train kernel matrix.
 * @throws alignment_error if the columns are not the model's training sequences in order
 */
inline std::vector<std::string> predict(const svm_model &model, const gram_matrix &cross) {
    if (cross.cols() != model.train_ids.size() || (!cross.col_ids.empty() && cross.col_ids != model.train_ids)) {
        throw alignment_error{ "kernel matrix columns are not aligned with the model's training sequences" };
    }
    std::vector<std::string> out;
    out.reserve(cross.rows());
    for (std::size_t r = 0; r < cross.rows(); ++r) {
        out.push_back(vote(model, [&](std::size_t j) { return cross(r, j); }));
    }
    return out;
}

/// Copy the support sequences of @p model out of its training set.
inline void attach_support(svm_model &model, std::span<const fixed_sequence> train) {
    if (train.size() != model.train_ids.size()) {
        throw alignment_error{ "training set does not match the model" };
    }
    model.support_set.clear();
    for (const std::size_t s : model.support_union()) {
        if (train[s].id != model.train_ids[s]) {
            throw alignment_error{ "training sequence order does not match the model" };
        }
        model.support_set.emplace(s, train[s]);
    }
    if (!train.empty()) {
        model.poses = train.front().length();
    }
}

/**
 * @brief Classify one resampled sequence, evaluating the kernel against support vectors only.
 */
inline std::string classify(const svm_model &model, const fixed_sequence &seq) {
    std::map<std::size_t, double> row;
    for (const auto &[index, sv] : model.support_set) {
        row.emplace(index, kernel_eval(model.spec, seq, sv));
    }
    for (const auto &b : model.binaries) {
        for (const std::size_t s : b.support_indices) {
            if (!row.contains(s)) {
                throw state_error{ "model has no stored support sequence for training index " + std::to_string(s) };
            }
        }
    }
    return vote(model, [&](std::size_t j) { return row.at(j); });
}

/// Resample and classify a raw sequence.
inline std::string classify(const svm_model &model, const pose_sequence &seq, resample_mode mode = resample_mode::nearest) {
    return classify(model, resample_uniform(seq, model.poses, mode));
}

// ---------------------------------------------------------------------------------------------
// model file (JSON)
// ---------------------------------------------------------------------------------------------

inline nlohmann::json model_to_json(const svm_model &model) {
    nlohmann::json binaries = nlohmann::json::array();
    for (const auto &b : model.binaries) {
        binaries.push_back({
            { "class_pair", { b.class_pair.first, b.class_pair.second } },
            { "support_indices", b.support_indices },
            { "dual_coefs", b.dual_coefs },
            { "bias", b.bias },
            { "C", b.C },
            { "converged", b.converged },
        });
    }
    nlohmann::json support = nlohmann::json::array();
    for (const auto &[index, seq] : model.support_set) {
        support.push_back({
            { "index", index },
            { "id", seq.id },
            { "label", seq.label },
            { "dim", seq.dim() },
            { "poses", std::vector<double>(seq.data().begin(), seq.data().end()) },
        });
    }
    return {
        { "format", "gesturekit-model" },
        { "version", 1 },
        { "spec", model.spec },
        { "poses", model.poses },
        { "class_set", model.class_set },
        { "train_ids", model.train_ids },
        { "binaries", std::move(binaries) },
        { "support_set", std::move(support) },
    };
}

inline svm_model model_from_json(const nlohmann::json &j) {
    try {
        if (j.at("format") != "gesturekit-model") {
            throw malformed_file{ "not a gesturekit model" };
        }
        svm_model model;
        model.spec = j.at("spec").get<kernel_spec>();
        model.poses = j.value("poses", std::size_t{ 0 });
        model.class_set = j.at("class_set").get<std::vector<std::string>>();
        model.train_ids = j.at("train_ids").get<std::vector<std::string>>();
        for (const auto &jb : j.at("binaries")) {
            binary_model b;
            const auto pair = jb.at("class_pair").get<std::vector<std::string>>();
            if (pair.size() != 2) {
                throw malformed_file{ "class_pair must have two entries" };
            }
            b.class_pair = { pair[0], pair[1] };
            b.support_indices = jb.at("support_indices").get<std::vector<std::size_t>>();
            b.dual_coefs = jb.at("dual_coefs").get<std::vector<double>>();
            b.bias = jb.at("bias").get<double>();
            b.C = jb.at("C").get<double>();
            b.converged = jb.value("converged", true);
            if (b.support_indices.size() != b.dual_coefs.size()) {
                throw malformed_file{ "support_indices and dual_coefs differ in length" };
            }
            for (const std::size_t s : b.support_indices) {
                if (s >= model.train_ids.size()) {
                    throw malformed_file{ "support index out of range" };
                }
            }
            model.binaries.push_back(std::move(b));
        }
        if (const auto it = j.find("support_set"); it != j.end()) {
            for (const auto &js : *it) {
                fixed_sequence seq{ js.at("dim").get<std::size_t>(), js.at("poses").get<std::vector<double>>() };
                seq.id = js.at("id").get<std::string>();
                seq.label = js.value("label", "");
                model.support_set.emplace(js.at("index").get<std::size_t>(), std::move(seq));
            }
        }
        const std::size_t k = model.class_set.size();
        if (model.binaries.size() != k * (k - 1) / 2) {
            throw malformed_file{ "binary model count does not match the class count" };
        }
        return model;
    } catch (const nlohmann::json::exception &e) {
        throw malformed_file{ std::string{ "bad model file: " } + e.what() };
    }
}

inline void save_model(const std::filesystem::path &path, const svm_model &model) {
    std::ofstream out{ path };
    if (!out) {
        throw malformed_file{ "cannot write '" + path.string() + "'" };
    }
    out << model_to_json(model).dump(1) << '\n';
}

inline svm_model load_model(const std::filesystem::path &path) {
    std::ifstream in{ path };
    if (!in) {
        throw malformed_file{ "cannot open '" + path.string() + "'" };
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception &e) {
        throw malformed_file{ std::string{ "bad model file: " } + e.what() };
    }
    return model_from_json(j);
}

}  // namespace gesturekit
