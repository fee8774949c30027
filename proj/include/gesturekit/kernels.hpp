#pragma once

/// @file
/// @brief Euclidean, DTW and regularized DTW similarity measures and their exponential kernels.
///
/// The regularized measure sums over every monotone alignment path instead of keeping only
/// the best one. Its value shrinks geometrically with sequence length, so the dynamic program
/// rescales every row by a power of two and reports the logarithm of the result; the engine
/// only ever works with log values.

#include "gesturekit/detail/warnings.hpp"
#include "gesturekit/error.hpp"
#include "gesturekit/resample.hpp"

#include "nlohmann/json.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gesturekit {

enum class kernel_family { euclid, dtw, rdtw };

[[nodiscard]] inline std::string_view to_string(kernel_family f) {
    switch (f) {
        case kernel_family::euclid: return "euclid";
        case kernel_family::dtw: return "dtw";
        case kernel_family::rdtw: return "rdtw";
    }
    return "unknown";
}

[[nodiscard]] inline kernel_family kernel_family_from_string(std::string_view name) {
    if (name == "euclid") {
        return kernel_family::euclid;
    }
    if (name == "dtw") {
        return kernel_family::dtw;
    }
    if (name == "rdtw") {
        return kernel_family::rdtw;
    }
    throw param_error{ "unknown kernel family '" + std::string{ name } + "'" };
}

/**
 * @brief Constants mapping raw regularized values onto [1, e] over the training pairs.
 * @details beta * K^alpha == exp(alpha * (ln K - log_min)); log_min is kept so the wrapper can be
 *          evaluated without forming beta when it would overflow.
 */
struct rdtw_normalization {
    double alpha{ 1.0 };
    double beta{ 1.0 };
    double log_min{ 0.0 };
    bool degenerate{ false };
};

struct kernel_spec {
    kernel_family family{ kernel_family::rdtw };
    /// stiffness of the regularized measure
    double nu{ 1.0 };
    /// exponential bandwidth
    double sigma{ 1.0 };
    /// half-width of the alignment corridor; unset means every cell is admissible
    std::optional<std::size_t> corridor{};
    /// fitted on training pairs, rdtw only
    std::optional<rdtw_normalization> normalization{};

    [[nodiscard]] bool fitted() const noexcept { return family != kernel_family::rdtw || normalization.has_value(); }

    void validate() const {
        if (!(nu > 0.0) || !std::isfinite(nu)) {
            throw param_error{ "nu must be strictly positive" };
        }
        if (!(sigma > 0.0) || !std::isfinite(sigma)) {
            throw param_error{ "sigma must be strictly positive" };
        }
        if (normalization && family != kernel_family::rdtw) {
            throw state_error{ "normalization constants are only defined for the rdtw family" };
        }
    }
};

inline void to_json(nlohmann::json &j, const kernel_spec &spec) {
    j = nlohmann::json{ { "family", to_string(spec.family) }, { "nu", spec.nu }, { "sigma", spec.sigma } };
    j["corridor"] = spec.corridor ? nlohmann::json(*spec.corridor) : nlohmann::json(nullptr);
    if (spec.normalization) {
        j["alpha"] = spec.normalization->alpha;
        j["beta"] = spec.normalization->beta;
        j["log_min"] = spec.normalization->log_min;
        j["degenerate"] = spec.normalization->degenerate;
    }
}

inline void from_json(const nlohmann::json &j, kernel_spec &spec) {
    spec.family = kernel_family_from_string(j.at("family").get<std::string>());
    spec.nu = j.at("nu").get<double>();
    spec.sigma = j.at("sigma").get<double>();
    spec.corridor.reset();
    if (const auto it = j.find("corridor"); it != j.end() && !it->is_null()) {
        spec.corridor = it->get<std::size_t>();
    }
    spec.normalization.reset();
    if (j.contains("alpha")) {
        rdtw_normalization n;
        n.alpha = j.at("alpha").get<double>();
        n.beta = j.at("beta").get<double>();
        n.log_min = j.contains("log_min") ? j.at("log_min").get<double>() : -std::log(n.beta) / n.alpha;
        n.degenerate = j.value("degenerate", false);
        spec.normalization = n;
    }
    spec.validate();
}

namespace detail {

inline double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return sum;
}

inline void require_same_dim(const fixed_sequence &a, const fixed_sequence &b) {
    if (a.dim() != b.dim()) {
        throw dimension_error{ "pose dimensions differ (" + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()) + ")" };
    }
}

inline void require_same_shape(const fixed_sequence &a, const fixed_sequence &b) {
    require_same_dim(a, b);
    if (a.length() != b.length()) {
        throw dimension_error{ "sequence lengths differ (" + std::to_string(a.length()) + " vs " + std::to_string(b.length()) + ")" };
    }
}

/// ln(exp(a) + exp(b)) with -inf as the neutral element
inline double log_add(double a, double b) noexcept {
    if (a == -std::numeric_limits<double>::infinity()) {
        return b;
    }
    if (b == -std::numeric_limits<double>::infinity()) {
        return a;
    }
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

}  // namespace detail

/// Sum over aligned poses of the squared Euclidean distance; both sequences must share L and k.
inline double d_euclid_sq(const fixed_sequence &a, const fixed_sequence &b) {
    detail::require_same_shape(a, b);
    // per-pose accumulation in the order the DTW diagonal path uses
    double sum = 0.0;
    for (std::size_t i = 0; i < a.length(); ++i) {
        sum = detail::squared_distance(a.pose(i), b.pose(i)) + sum;
    }
    return sum;
}

/**
 * @brief Dynamic time warping with a squared Euclidean local cost.
 * @details D(p, q) = c(p, q) + min(D(p-1, q), D(p-1, q-1), D(p, q-1)) on the full lattice,
 *          D(0, 0) = 0 and the remaining borders are unreachable.
 */
inline double d_dtw(const fixed_sequence &a, const fixed_sequence &b) {
    detail::require_same_dim(a, b);
    const std::size_t n = a.length();
    const std::size_t m = b.length();
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> prev(m + 1, inf);
    std::vector<double> cur(m + 1, inf);
    prev[0] = 0.0;
    for (std::size_t p = 1; p <= n; ++p) {
        cur[0] = inf;
        const auto x = a.pose(p - 1);
        for (std::size_t q = 1; q <= m; ++q) {
            const double best = std::min({ prev[q], prev[q - 1], cur[q - 1] });
            cur[q] = detail::squared_distance(x, b.pose(q - 1)) + best;
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

namespace detail {

/// Log-domain evaluation of the regularized recursion, used when the scaled path underflows.
inline double kdtw_log_raw_logspace(const fixed_sequence &a, const fixed_sequence &b, double nu, std::optional<std::size_t> corridor) {
    const std::size_t n = a.length();
    constexpr double neg_inf = -std::numeric_limits<double>::infinity();
    const double log_third = -std::log(3.0);
    const auto h = [&](std::size_t p, std::size_t q) {
        return !corridor || (p > q ? p - q : q - p) <= *corridor;
    };
    std::vector<double> log_diag(n + 1, 0.0);
    for (std::size_t p = 1; p <= n; ++p) {
        log_diag[p] = -nu * squared_distance(a.pose(p - 1), b.pose(p - 1));
    }
    std::vector<double> prev_xy(n + 1, neg_inf), prev_xx(n + 1, neg_inf);
    std::vector<double> cur_xy(n + 1, neg_inf), cur_xx(n + 1, neg_inf);
    prev_xy[0] = 0.0;
    prev_xx[0] = 0.0;
    for (std::size_t p = 1; p <= n; ++p) {
        cur_xy[0] = neg_inf;
        cur_xx[0] = neg_inf;
        const auto x = a.pose(p - 1);
        for (std::size_t q = 1; q <= n; ++q) {
            const double log_local = -nu * squared_distance(x, b.pose(q - 1));
            double xy = neg_inf;
            double xx = neg_inf;
            if (h(p - 1, q)) {
                xy = log_add(xy, prev_xy[q]);
                xx = log_add(xx, prev_xx[q] + log_diag[p]);
            }
            if (h(p - 1, q - 1)) {
                xy = log_add(xy, prev_xy[q - 1]);
            }
            if (p == q && h(p, q)) {
                xx = log_add(xx, prev_xx[q - 1] + log_local);
            }
            if (h(p, q - 1)) {
                xy = log_add(xy, cur_xy[q - 1]);
                xx = log_add(xx, cur_xx[q - 1] + log_diag[q]);
            }
            cur_xy[q] = log_third + log_local + xy;
            cur_xx[q] = log_third + xx;
        }
        std::swap(prev_xy, cur_xy);
        std::swap(prev_xx, cur_xx);
    }
    return log_add(prev_xy[n], prev_xx[n]);
}

}  // namespace detail

/**
 * @brief Natural logarithm of the regularized DTW measure (sum of the K^xy and K^xx recursions).
 * @details Both tables start at 1 in cell (0, 0) and are 0 on the remaining borders. The
 *          K^xx recursion weighs its vertical and horizontal predecessors with the local
 *          kernel of the aligned pairs (x_p, y_p) and (x_q, y_q) and only uses its diagonal
 *          predecessor on the main diagonal. With a corridor w, h(p, q) is 1 iff |p - q| <= w.
 *          Both sequences must have the same length.
 */
inline double kdtw_log_raw(const fixed_sequence &a, const fixed_sequence &b, double nu, std::optional<std::size_t> corridor = std::nullopt) {
    if (!(nu > 0.0) || !std::isfinite(nu)) {
        throw param_error{ "nu must be strictly positive" };
    }
    detail::require_same_shape(a, b);
    const std::size_t n = a.length();
    constexpr double third = 1.0 / 3.0;
    const bool banded = corridor.has_value();
    const std::size_t w = corridor.value_or(0);
    const auto h = [banded, w](std::size_t p, std::size_t q) -> double {
        return !banded || (p > q ? p - q : q - p) <= w ? 1.0 : 0.0;
    };

    std::vector<double> diag(n + 1, 1.0);
    for (std::size_t p = 1; p <= n; ++p) {
        diag[p] = std::exp(-nu * detail::squared_distance(a.pose(p - 1), b.pose(p - 1)));
    }
    std::vector<double> prev_xy(n + 1, 0.0), prev_xx(n + 1, 0.0);
    std::vector<double> cur_xy(n + 1, 0.0), cur_xx(n + 1, 0.0);
    prev_xy[0] = 1.0;
    prev_xx[0] = 1.0;
    // accumulated binary exponent removed by row rescaling
    long long scale_exp = 0;

    for (std::size_t p = 1; p <= n; ++p) {
        const auto x = a.pose(p - 1);
        cur_xy[0] = 0.0;
        cur_xx[0] = 0.0;
        double row_max = 0.0;
        for (std::size_t q = 1; q <= n; ++q) {
            const double local = p == q ? diag[p] : std::exp(-nu * detail::squared_distance(x, b.pose(q - 1)));
            const double h_up = h(p - 1, q);
            const double h_diag = h(p - 1, q - 1);
            const double h_left = h(p, q - 1);
            cur_xy[q] = third * local * (h_up * prev_xy[q] + h_diag * prev_xy[q - 1] + h_left * cur_xy[q - 1]);
            double xx = h_up * prev_xx[q] * diag[p] + h_left * cur_xx[q - 1] * diag[q];
            if (p == q) {
                xx += h(p, q) * prev_xx[q - 1] * local;
            }
            cur_xx[q] = third * xx;
            // rows are rescaled to a maximum in [1, 2); subnormal cells are far below double
            // precision of that maximum and only slow the arithmetic down
            if (cur_xy[q] < std::numeric_limits<double>::min()) {
                cur_xy[q] = 0.0;
            }
            if (cur_xx[q] < std::numeric_limits<double>::min()) {
                cur_xx[q] = 0.0;
            }
            row_max = std::max({ row_max, cur_xy[q], cur_xx[q] });
        }
        if (!(row_max > 0.0) || !std::isfinite(row_max)) {
            return detail::kdtw_log_raw_logspace(a, b, nu, corridor);
        }
        const int e = std::ilogb(row_max);
        if (e != 0) {
            for (std::size_t q = 1; q <= n; ++q) {
                cur_xy[q] = std::ldexp(cur_xy[q], -e);
                cur_xx[q] = std::ldexp(cur_xx[q], -e);
            }
            scale_exp += e;
        }
        std::swap(prev_xy, cur_xy);
        std::swap(prev_xx, cur_xx);
    }
    const double total = prev_xy[n] + prev_xx[n];
    if (!(total > 0.0)) {
        return detail::kdtw_log_raw_logspace(a, b, nu, corridor);
    }
    return std::log(total) + static_cast<double>(scale_exp) * std::numbers::ln2;
}

/// Regularized DTW measure itself; may underflow to zero where kdtw_log_raw() does not.
inline double kdtw_raw(const fixed_sequence &a, const fixed_sequence &b, double nu, std::optional<std::size_t> corridor = std::nullopt) {
    return std::exp(kdtw_log_raw(a, b, nu, corridor));
}

namespace detail {

inline rdtw_normalization fit_from_log_extremes(double log_min, double log_max) {
    rdtw_normalization n;
    n.log_min = log_min;
    const double log_spread = log_max - log_min;
    if (log_spread <= std::log1p(1e-12)) {
        warn("degenerate spread of regularized kernel values; using alpha = 1, beta = 1/min");
        n.alpha = 1.0;
        n.beta = std::exp(-log_min);
        n.degenerate = true;
        return n;
    }
    n.alpha = 1.0 / log_spread;
    n.beta = std::exp(-n.alpha * log_min);
    return n;
}

}  // namespace detail

/**
 * @brief Fit alpha = 1 / ln(M / m) and beta = exp(-alpha ln m) from raw training values.
 * @details Afterwards beta m^alpha = 1 and beta M^alpha = e. If M / m <= 1 + 1e-12 the fit
 *          falls back to alpha = 1, beta = 1 / m and a warning is emitted.
 */
inline rdtw_normalization fit_normalization(std::span<const double> raw_values) {
    if (raw_values.empty()) {
        throw param_error{ "normalization needs at least one value" };
    }
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (const double v : raw_values) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw domain_error{ "regularized kernel values must be finite and strictly positive" };
        }
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return detail::fit_from_log_extremes(std::log(lo), std::log(hi));
}

/// Same fit as fit_normalization() from natural logarithms of the raw values.
inline rdtw_normalization fit_normalization_log(std::span<const double> log_values) {
    if (log_values.empty()) {
        throw param_error{ "normalization needs at least one value" };
    }
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const double v : log_values) {
        if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
            throw domain_error{ "regularized kernel log-values must be finite" };
        }
        if (v == -std::numeric_limits<double>::infinity()) {
            throw domain_error{ "regularized kernel values must be strictly positive" };
        }
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return detail::fit_from_log_extremes(lo, hi);
}

/**
 * @brief The value a kernel family feeds into its exponential wrapper.
 * @details euclid: summed squared distance; dtw: DTW distance; rdtw: ln of the raw regularized measure.
 */
inline double raw_statistic(const kernel_spec &spec, const fixed_sequence &a, const fixed_sequence &b) {
    switch (spec.family) {
        case kernel_family::euclid: return d_euclid_sq(a, b);
        case kernel_family::dtw: return d_dtw(a, b);
        case kernel_family::rdtw: return kdtw_log_raw(a, b, spec.nu, spec.corridor);
    }
    throw param_error{ "unknown kernel family" };
}

/// beta K^alpha for a raw log value under @p n.
inline double normalized_rdtw(const rdtw_normalization &n, double log_raw) noexcept {
    return std::exp(n.alpha * (log_raw - n.log_min));
}

/**
 * @brief Apply the exponential wrapper to a raw statistic.
 * @details euclid / dtw: exp(-d / sigma); rdtw: exp(beta K^alpha / sigma). Values outside the
 *          training range are wrapped as is, without clipping.
 */
inline double wrap_statistic(const kernel_spec &spec, double statistic) {
    switch (spec.family) {
        case kernel_family::euclid:
        case kernel_family::dtw:
            return std::exp(-statistic / spec.sigma);
        case kernel_family::rdtw:
            if (!spec.normalization) {
                throw state_error{ "rdtw kernel used before its normalization was fitted on training pairs" };
            }
            return std::exp(normalized_rdtw(*spec.normalization, statistic) / spec.sigma);
    }
    throw param_error{ "unknown kernel family" };
}

inline double kernel_eval(const kernel_spec &spec, const fixed_sequence &a, const fixed_sequence &b) {
    if (!spec.fitted()) {
        throw state_error{ "rdtw kernel used before its normalization was fitted on training pairs" };
    }
    spec.validate();
    return wrap_statistic(spec, raw_statistic(spec, a, b));
}

/// The quantity inside the exponential, used to scale sigma relative to the data.
inline double pre_exponential(const kernel_spec &spec, double statistic) {
    if (spec.family == kernel_family::rdtw) {
        if (!spec.normalization) {
            throw state_error{ "rdtw normalization not fitted" };
        }
        return normalized_rdtw(*spec.normalization, statistic);
    }
    return statistic;
}

}  // namespace gesturekit
