#pragma once

/// @file
/// @brief Uniform temporal down-sampling (and over-sampling) to a fixed pose count.

#include "gesturekit/error.hpp"
#include "gesturekit/mocap.hpp"

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace gesturekit {

/**
 * @brief A sequence of exactly L poses of dimension k; the unit every kernel operates on.
 */
class fixed_sequence {
  public:
    fixed_sequence() = default;

    fixed_sequence(std::size_t dim, std::vector<double> poses, std::size_t origin_length = 0) :
        dim_{ dim },
        poses_{ std::move(poses) },
        origin_length_{ origin_length } {
        if (dim_ == 0 || poses_.empty() || poses_.size() % dim_ != 0) {
            throw dimension_error{ "pose buffer does not hold a whole number of poses" };
        }
        if (origin_length_ == 0) {
            origin_length_ = poses_.size() / dim_;
        }
    }

    [[nodiscard]] std::size_t length() const noexcept { return poses_.size() / dim_; }
    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] std::size_t origin_length() const noexcept { return origin_length_; }
    [[nodiscard]] std::span<const double> data() const noexcept { return poses_; }

    [[nodiscard]] std::span<const double> pose(std::size_t i) const noexcept {
        return std::span<const double>{ poses_ }.subspan(i * dim_, dim_);
    }

    std::string id;
    std::string label;
    std::string subject;

  private:
    std::size_t dim_{ 0 };
    std::vector<double> poses_;
    std::size_t origin_length_{ 0 };
};

enum class resample_mode {
    /// pick the nearest source frame (default)
    nearest,
    /// linear interpolation between the two neighbouring frames
    linear,
};

/**
 * @brief Source frame indices selected for @p target poses out of @p source frames.
 * @details Index i is round(i (T - 1) / (L - 1)) with ties rounded away from zero,
 *          evaluated in integer arithmetic so that ties are exact.
 */
inline std::vector<std::size_t> resample_indices(std::size_t source, std::size_t target) {
    if (target < 2) {
        throw param_error{ "pose count L must be at least 2, got " + std::to_string(target) };
    }
    if (source == 0) {
        throw empty_sequence{ "cannot resample an empty sequence" };
    }
    std::vector<std::size_t> idx(target);
    const std::size_t num = source - 1;
    const std::size_t den = target - 1;
    for (std::size_t i = 0; i < target; ++i) {
        idx[i] = (2 * i * num + den) / (2 * den);
    }
    return idx;
}

namespace detail {

inline fixed_sequence resample_frames(std::span<const double> data, std::size_t dim, std::size_t target, resample_mode mode) {
    const std::size_t source = dim == 0 ? 0 : data.size() / dim;
    std::vector<double> out;
    if (mode == resample_mode::nearest) {
        const auto idx = resample_indices(source, target);
        out.reserve(target * dim);
        for (const std::size_t t : idx) {
            const auto frame = data.subspan(t * dim, dim);
            out.insert(out.end(), frame.begin(), frame.end());
        }
    } else {
        if (target < 2) {
            throw param_error{ "pose count L must be at least 2, got " + std::to_string(target) };
        }
        if (source == 0) {
            throw empty_sequence{ "cannot resample an empty sequence" };
        }
        out.reserve(target * dim);
        for (std::size_t i = 0; i < target; ++i) {
            const double pos = static_cast<double>(i * (source - 1)) / static_cast<double>(target - 1);
            const auto lo = static_cast<std::size_t>(pos);
            const std::size_t hi = std::min(lo + 1, source - 1);
            const double w = pos - static_cast<double>(lo);
            for (std::size_t c = 0; c < dim; ++c) {
                out.push_back((1.0 - w) * data[lo * dim + c] + w * data[hi * dim + c]);
            }
        }
    }
    return fixed_sequence{ dim, std::move(out), source };
}

}  // namespace detail

/**
 * @brief Resample @p seq to exactly @p poses poses evenly spread along its time axis.
 * @details The first and last poses are always the first and last source frames. When the
 *          source is shorter than the target, frames are repeated.
 */
inline fixed_sequence resample_uniform(const pose_sequence &seq, std::size_t poses, resample_mode mode = resample_mode::nearest) {
    fixed_sequence out = detail::resample_frames(seq.data(), seq.dim(), poses, mode);
    out.id = seq.id;
    out.label = seq.label;
    out.subject = seq.subject;
    return out;
}

/// Resampling an already fixed sequence; at equal length this is the identity.
inline fixed_sequence resample_uniform(const fixed_sequence &seq, std::size_t poses, resample_mode mode = resample_mode::nearest) {
    fixed_sequence out = detail::resample_frames(seq.data(), seq.dim(), poses, mode);
    out.id = seq.id;
    out.label = seq.label;
    out.subject = seq.subject;
    return out;
}

inline std::vector<fixed_sequence> resample_all(const dataset &data, std::size_t poses, resample_mode mode = resample_mode::nearest) {
    std::vector<fixed_sequence> out;
    out.reserve(data.size());
    for (const auto &seq : data.sequences()) {
        out.push_back(resample_uniform(seq, poses, mode));
    }
    return out;
}

}  // namespace gesturekit
