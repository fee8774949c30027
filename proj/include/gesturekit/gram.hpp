#pragma once

/// @file
/// @brief Batch kernel evaluation: symmetric training Gram matrices, test x train matrices,
///        rdtw normalization fitted on training pairs only, and an on-disk cache.
///
/// Computation is split in two stages. A statistic_matrix holds the quantity each family
/// feeds into its exponential (distance or log regularized value) and does not depend on
/// sigma or on any split. A gram_matrix is obtained by wrapping a statistic matrix with a
/// (fitted) kernel_spec. Since statistics are split independent, the evaluation harness
/// computes them once per dataset and slices them per split.

#include "gesturekit/detail/hash.hpp"
#include "gesturekit/detail/parallel.hpp"
#include "gesturekit/error.hpp"
#include "gesturekit/kernels.hpp"
#include "gesturekit/resample.hpp"

#include "nlohmann/json.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace gesturekit {

/// Row-major dense matrix of doubles.
class dense_matrix {
  public:
    dense_matrix() = default;
    dense_matrix(std::size_t rows, std::size_t cols, double fill = 0.0) :
        rows_{ rows },
        cols_{ cols },
        values_(rows * cols, fill) {}
    dense_matrix(std::size_t rows, std::size_t cols, std::vector<double> values) :
        rows_{ rows },
        cols_{ cols },
        values_{ std::move(values) } {
        if (values_.size() != rows_ * cols_) {
            throw dimension_error{ "matrix buffer size does not match its shape" };
        }
    }

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] double &operator()(std::size_t i, std::size_t j) noexcept { return values_[i * cols_ + j]; }
    [[nodiscard]] double operator()(std::size_t i, std::size_t j) const noexcept { return values_[i * cols_ + j]; }
    [[nodiscard]] std::span<const double> row(std::size_t i) const noexcept { return std::span<const double>{ values_ }.subspan(i * cols_, cols_); }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }

    friend bool operator==(const dense_matrix &, const dense_matrix &) = default;

  private:
    std::size_t rows_{ 0 };
    std::size_t cols_{ 0 };
    std::vector<double> values_;
};

/// Matrix of raw statistics (see raw_statistic()) with the ids of its rows and columns.
struct statistic_matrix {
    dense_matrix values;
    std::vector<std::string> row_ids;
    std::vector<std::string> col_ids;
    kernel_spec spec;
    bool symmetric{ false };
};

/// Matrix of kernel values; for rdtw the spec carries the normalization used to wrap it.
struct gram_matrix {
    dense_matrix values;
    std::vector<std::string> row_ids;
    std::vector<std::string> col_ids;
    kernel_spec spec;
    bool symmetric{ false };

    [[nodiscard]] std::size_t rows() const noexcept { return values.rows(); }
    [[nodiscard]] std::size_t cols() const noexcept { return values.cols(); }
    [[nodiscard]] double operator()(std::size_t i, std::size_t j) const noexcept { return values(i, j); }
};

namespace detail {

inline void require_homogeneous(std::span<const fixed_sequence> seqs, std::size_t length, std::size_t dim) {
    for (const auto &s : seqs) {
        if (s.length() != length || s.dim() != dim) {
            throw dimension_error{ "sequence '" + s.id + "' has shape " + std::to_string(s.length()) + "x" + std::to_string(s.dim()) + ", expected " + std::to_string(length) + "x" + std::to_string(dim) };
        }
    }
}

inline std::vector<std::string> ids_of(std::span<const fixed_sequence> seqs) {
    std::vector<std::string> ids;
    ids.reserve(seqs.size());
    for (const auto &s : seqs) {
        ids.push_back(s.id);
    }
    return ids;
}

inline void require_finite(const dense_matrix &m) {
    for (const double v : m.values()) {
        if (!std::isfinite(v)) {
            throw numeric_error{ "kernel matrix contains a non-finite entry" };
        }
    }
}

}  // namespace detail

/**
 * @brief Raw statistics over all pairs of @p seqs; each unordered pair is computed once and mirrored.
 * @param workers thread count, 0 selects the hardware concurrency
 */
inline statistic_matrix compute_statistics(std::span<const fixed_sequence> seqs, const kernel_spec &spec, std::size_t workers = 0) {
    spec.validate();
    if (seqs.empty()) {
        throw param_error{ "cannot build a Gram matrix over an empty set" };
    }
    detail::require_homogeneous(seqs, seqs.front().length(), seqs.front().dim());
    const std::size_t n = seqs.size();
    dense_matrix values{ n, n };
    // row i owns cells (i, j) and (j, i) for j >= i, so writes never overlap
    detail::parallel_for(n, workers, [&](std::size_t i) {
        for (std::size_t j = i; j < n; ++j) {
            const double v = raw_statistic(spec, seqs[i], seqs[j]);
            values(i, j) = v;
            values(j, i) = v;
        }
    });
    detail::require_finite(values);
    kernel_spec stored = spec;
    stored.normalization.reset();
    const auto ids = detail::ids_of(seqs);
    return statistic_matrix{ std::move(values), ids, ids, stored, true };
}

/// Raw statistics between every row sequence and every column sequence.
inline statistic_matrix compute_statistics(std::span<const fixed_sequence> rows, std::span<const fixed_sequence> cols, const kernel_spec &spec, std::size_t workers = 0) {
    spec.validate();
    if (rows.empty() || cols.empty()) {
        throw param_error{ "cannot build a kernel matrix with an empty side" };
    }
    detail::require_homogeneous(cols, cols.front().length(), cols.front().dim());
    detail::require_homogeneous(rows, cols.front().length(), cols.front().dim());
    dense_matrix values{ rows.size(), cols.size() };
    detail::parallel_for(rows.size(), workers, [&](std::size_t i) {
        for (std::size_t j = 0; j < cols.size(); ++j) {
            values(i, j) = raw_statistic(spec, rows[i], cols[j]);
        }
    });
    detail::require_finite(values);
    kernel_spec stored = spec;
    stored.normalization.reset();
    return statistic_matrix{ std::move(values), detail::ids_of(rows), detail::ids_of(cols), stored, false };
}

/// Principal sub-matrix over @p index (symmetric input).
inline statistic_matrix slice(const statistic_matrix &full, std::span<const std::size_t> index) {
    statistic_matrix out;
    out.values = dense_matrix{ index.size(), index.size() };
    for (std::size_t a = 0; a < index.size(); ++a) {
        for (std::size_t b = 0; b < index.size(); ++b) {
            out.values(a, b) = full.values(index[a], index[b]);
        }
        out.row_ids.push_back(full.row_ids[index[a]]);
    }
    out.col_ids = out.row_ids;
    out.spec = full.spec;
    out.symmetric = full.symmetric;
    return out;
}

/// Rectangular sub-matrix with rows @p row_index and columns @p col_index.
inline statistic_matrix slice(const statistic_matrix &full, std::span<const std::size_t> row_index, std::span<const std::size_t> col_index) {
    statistic_matrix out;
    out.values = dense_matrix{ row_index.size(), col_index.size() };
    for (std::size_t a = 0; a < row_index.size(); ++a) {
        for (std::size_t b = 0; b < col_index.size(); ++b) {
            out.values(a, b) = full.values(row_index[a], col_index[b]);
        }
        out.row_ids.push_back(full.row_ids[row_index[a]]);
    }
    for (const std::size_t b : col_index) {
        out.col_ids.push_back(full.col_ids[b]);
    }
    out.spec = full.spec;
    out.symmetric = false;
    return out;
}

/**
 * @brief Fit the rdtw normalization on the upper triangle (diagonal included) of a training matrix.
 * @details Other families are returned unchanged. Only a symmetric training matrix is accepted,
 *          so test pairs can never take part in the fit.
 */
inline kernel_spec fit_spec(const kernel_spec &spec, const statistic_matrix &train) {
    if (!train.symmetric) {
        throw state_error{ "normalization must be fitted on a symmetric training matrix" };
    }
    kernel_spec fitted = spec;
    fitted.normalization.reset();
    if (spec.family != kernel_family::rdtw) {
        return fitted;
    }
    std::vector<double> upper;
    const std::size_t n = train.values.rows();
    upper.reserve(n * (n + 1) / 2);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            upper.push_back(train.values(i, j));
        }
    }
    fitted.normalization = fit_normalization_log(upper);
    return fitted;
}

/// Median of the pre-exponential quantity over distinct training pairs (i < j), or the diagonal if n = 1.
inline double median_pre_exponential(const kernel_spec &fitted, const statistic_matrix &train) {
    std::vector<double> v;
    const std::size_t n = train.values.rows();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            v.push_back(pre_exponential(fitted, train.values(i, j)));
        }
    }
    if (v.empty()) {
        v.push_back(pre_exponential(fitted, train.values(0, 0)));
    }
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    double med = *mid;
    if (v.size() % 2 == 0) {
        med = 0.5 * (med + *std::max_element(v.begin(), mid));
    }
    return med;
}

/// Apply the exponential wrapper of @p spec to every statistic.
inline gram_matrix wrap(const statistic_matrix &stats, const kernel_spec &spec) {
    if (!spec.fitted()) {
        throw state_error{ "rdtw kernel used before its normalization was fitted on training pairs" };
    }
    if (spec.family != stats.spec.family) {
        throw param_error{ "kernel family does not match the statistics" };
    }
    gram_matrix g;
    g.values = dense_matrix{ stats.values.rows(), stats.values.cols() };
    for (std::size_t i = 0; i < g.values.rows(); ++i) {
        for (std::size_t j = 0; j < g.values.cols(); ++j) {
            g.values(i, j) = wrap_statistic(spec, stats.values(i, j));
        }
    }
    detail::require_finite(g.values);
    g.row_ids = stats.row_ids;
    g.col_ids = stats.col_ids;
    g.spec = spec;
    g.symmetric = stats.symmetric;
    return g;
}

/**
 * @brief Symmetric training Gram matrix and the spec fitted on its pairs.
 */
inline std::pair<gram_matrix, kernel_spec> gram_train(std::span<const fixed_sequence> train, const kernel_spec &spec, std::size_t workers = 0) {
    const statistic_matrix stats = compute_statistics(train, spec, workers);
    kernel_spec fitted = fit_spec(spec, stats);
    return { wrap(stats, fitted), fitted };
}

/**
 * @brief |test| x |train| kernel matrix using constants fitted on the training set; no refit, no clipping.
 */
inline gram_matrix gram_cross(std::span<const fixed_sequence> test, std::span<const fixed_sequence> train, const kernel_spec &spec, std::size_t workers = 0) {
    if (!spec.fitted()) {
        throw state_error{ "gram_cross needs a spec fitted by gram_train" };
    }
    return wrap(compute_statistics(test, train, spec, workers), spec);
}

/// Content hash of a resampled dataset (ids, labels, subjects and pose values).
inline std::string sequences_hash(std::span<const fixed_sequence> seqs) {
    detail::fnv1a64 h;
    h.add(static_cast<std::uint64_t>(seqs.size()));
    for (const auto &s : seqs) {
        h.add(s.id).add(s.label).add(s.subject);
        h.add(static_cast<std::uint64_t>(s.dim()));
        h.add(s.data());
    }
    return h.hex();
}

/// Hash of the parts of a spec that statistics depend on (family, nu, corridor).
inline std::string statistic_spec_hash(const kernel_spec &spec) {
    detail::fnv1a64 h;
    h.add(to_string(spec.family));
    if (spec.family == kernel_family::rdtw) {
        h.add(spec.nu);
        h.add(static_cast<std::uint64_t>(spec.corridor ? *spec.corridor + 1 : 0));
    }
    return h.hex();
}

// ---------------------------------------------------------------------------------------------
// Matrix container file
//
//   bytes 0..7   magic "GKMATRIX"
//   bytes 8..15  header length H, unsigned 64 bit little endian
//   next H bytes header JSON (UTF-8):
//                {"format": "gesturekit-matrix", "version": 1, "kind": "statistic"|"kernel",
//                 "rows": R, "cols": C, "symmetric": bool, "spec": {...},
//                 "row_ids": [...], "col_ids": [...], "dataset_hash": str, "checksum": str}
//   payload      R*C IEEE-754 binary64 values, little endian, row-major
//
// checksum is the FNV-1a 64 hex digest of the payload bytes.
// ---------------------------------------------------------------------------------------------

namespace detail {

inline constexpr char matrix_magic[8] = { 'G', 'K', 'M', 'A', 'T', 'R', 'I', 'X' };

inline void write_u64(std::ostream &out, std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) {
        buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    }
    out.write(buf, 8);
}

inline std::uint64_t read_u64(std::istream &in) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char *>(buf), 8);
    if (!in) {
        throw malformed_file{ "truncated matrix file" };
    }
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    }
    return v;
}

inline std::string payload_checksum(const dense_matrix &m) {
    fnv1a64 h;
    for (const double v : m.values()) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        unsigned char buf[8];
        for (int i = 0; i < 8; ++i) {
            buf[i] = static_cast<unsigned char>(bits >> (8 * i));
        }
        h.bytes(buf, 8);
    }
    return h.hex();
}

struct matrix_file {
    std::string kind;
    dense_matrix values;
    std::vector<std::string> row_ids;
    std::vector<std::string> col_ids;
    kernel_spec spec;
    bool symmetric{ false };
    std::string dataset_hash;
};

inline void write_matrix(std::ostream &out, const matrix_file &m) {
    nlohmann::json header{
        { "format", "gesturekit-matrix" },
        { "version", 1 },
        { "kind", m.kind },
        { "rows", m.values.rows() },
        { "cols", m.values.cols() },
        { "symmetric", m.symmetric },
        { "spec", m.spec },
        { "row_ids", m.row_ids },
        { "col_ids", m.col_ids },
        { "dataset_hash", m.dataset_hash },
        { "checksum", payload_checksum(m.values) },
    };
    const std::string text = header.dump();
    out.write(matrix_magic, 8);
    write_u64(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const double v : m.values.values()) {
        write_u64(out, std::bit_cast<std::uint64_t>(v));
    }
    if (!out) {
        throw malformed_file{ "failed to write matrix file" };
    }
}

inline matrix_file read_matrix(std::istream &in) {
    char magic[8];
    in.read(magic, 8);
    if (!in || !std::equal(magic, magic + 8, matrix_magic)) {
        throw malformed_file{ "not a gesturekit matrix file" };
    }
    const std::uint64_t header_size = read_u64(in);
    if (header_size > (std::uint64_t{ 1 } << 32)) {
        throw malformed_file{ "implausible header size" };
    }
    std::string text(header_size, '\0');
    in.read(text.data(), static_cast<std::streamsize>(header_size));
    if (!in) {
        throw malformed_file{ "truncated matrix header" };
    }
    matrix_file m;
    std::string checksum;
    try {
        const auto header = nlohmann::json::parse(text);
        if (header.at("format") != "gesturekit-matrix" || header.at("version") != 1) {
            throw malformed_file{ "unsupported matrix format or version" };
        }
        m.kind = header.at("kind").get<std::string>();
        m.symmetric = header.at("symmetric").get<bool>();
        m.spec = header.at("spec").get<kernel_spec>();
        m.row_ids = header.at("row_ids").get<std::vector<std::string>>();
        m.col_ids = header.at("col_ids").get<std::vector<std::string>>();
        m.dataset_hash = header.value("dataset_hash", "");
        checksum = header.at("checksum").get<std::string>();
        const auto rows = header.at("rows").get<std::size_t>();
        const auto cols = header.at("cols").get<std::size_t>();
        if (rows != m.row_ids.size() || cols != m.col_ids.size()) {
            throw malformed_file{ "id lists do not match the matrix shape" };
        }
        std::vector<double> values(rows * cols);
        for (double &v : values) {
            v = std::bit_cast<double>(read_u64(in));
        }
        m.values = dense_matrix{ rows, cols, std::move(values) };
    } catch (const nlohmann::json::exception &e) {
        throw malformed_file{ std::string{ "bad matrix header: " } + e.what() };
    }
    if (payload_checksum(m.values) != checksum) {
        throw malformed_file{ "matrix payload checksum mismatch" };
    }
    return m;
}

}  // namespace detail

inline void save_statistics(const std::filesystem::path &path, const statistic_matrix &m, const std::string &dataset_hash = {}) {
    std::ofstream out{ path, std::ios::binary };
    if (!out) {
        throw malformed_file{ "cannot write '" + path.string() + "'" };
    }
    detail::write_matrix(out, { "statistic", m.values, m.row_ids, m.col_ids, m.spec, m.symmetric, dataset_hash });
}

inline statistic_matrix load_statistics(const std::filesystem::path &path) {
    std::ifstream in{ path, std::ios::binary };
    if (!in) {
        throw malformed_file{ "cannot open '" + path.string() + "'" };
    }
    auto m = detail::read_matrix(in);
    if (m.kind != "statistic") {
        throw malformed_file{ "'" + path.string() + "' does not hold raw statistics" };
    }
    return { std::move(m.values), std::move(m.row_ids), std::move(m.col_ids), m.spec, m.symmetric };
}

inline void save_gram(const std::filesystem::path &path, const gram_matrix &g) {
    std::ofstream out{ path, std::ios::binary };
    if (!out) {
        throw malformed_file{ "cannot write '" + path.string() + "'" };
    }
    detail::write_matrix(out, { "kernel", g.values, g.row_ids, g.col_ids, g.spec, g.symmetric, {} });
}

inline gram_matrix load_gram(const std::filesystem::path &path) {
    std::ifstream in{ path, std::ios::binary };
    if (!in) {
        throw malformed_file{ "cannot open '" + path.string() + "'" };
    }
    auto m = detail::read_matrix(in);
    if (m.kind != "kernel") {
        throw malformed_file{ "'" + path.string() + "' does not hold kernel values" };
    }
    return { std::move(m.values), std::move(m.row_ids), std::move(m.col_ids), m.spec, m.symmetric };
}

/**
 * @brief Directory of statistic matrices keyed by (dataset hash, statistic spec hash).
 */
class gram_cache {
  public:
    explicit gram_cache(std::filesystem::path dir) :
        dir_{ std::move(dir) } {
        std::filesystem::create_directories(dir_);
    }

    [[nodiscard]] std::filesystem::path path_for(const std::string &dataset_hash, const kernel_spec &spec) const {
        return dir_ / ("stat-" + dataset_hash + "-" + statistic_spec_hash(spec) + ".gkm");
    }

    /// Load the statistics for @p seqs from the cache or compute and store them.
    statistic_matrix get_or_compute(std::span<const fixed_sequence> seqs, const kernel_spec &spec, std::size_t workers = 0) {
        const std::string dh = sequences_hash(seqs);
        const auto path = path_for(dh, spec);
        if (std::filesystem::exists(path)) {
            try {
                statistic_matrix m = load_statistics(path);
                if (m.row_ids == detail::ids_of(seqs) && m.symmetric) {
                    ++hits_;
                    return m;
                }
            } catch (const malformed_file &) {
                // unreadable entries are recomputed and overwritten
            }
        }
        ++misses_;
        statistic_matrix m = compute_statistics(seqs, spec, workers);
        const auto tmp = path.string() + ".tmp";
        save_statistics(tmp, m, dh);
        std::filesystem::rename(tmp, path);
        return m;
    }

    [[nodiscard]] std::size_t hits() const noexcept { return hits_; }
    [[nodiscard]] std::size_t misses() const noexcept { return misses_; }

  private:
    std::filesystem::path dir_;
    std::size_t hits_{ 0 };
    std::size_t misses_{ 0 };
};

}  // namespace gesturekit
