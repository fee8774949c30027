/**
 * @file synthetic.hpp
 * @brief Seeded generator of labelled skeleton-like gesture sequences.
 *
 * Each class owns a template: a smooth random trajectory per coordinate built from a few
 * low-frequency sinusoids, added to a trajectory shared by all classes. An instance replays
 * its class template through a random monotone time warp, at a random length, with a
 * per-subject amplitude and offset perturbation and additive frame noise.
 */
#pragma once

#include "gesturekit/error.hpp"
#include "gesturekit/mocap.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace gesturekit {

struct synthetic_options {
    std::size_t n_classes{ 10 };
    std::size_t n_subjects{ 10 };
    std::size_t repetitions{ 3 };
    std::size_t n_joints{ 5 };
    std::size_t min_length{ 40 };
    std::size_t max_length{ 120 };
    /// sinusoid components per template coordinate
    std::size_t harmonics{ 3 };
    /// weight of the class-specific part of each template against the shared part
    double class_separation{ 0.2 };
    /// 0 keeps the identity time axis, 1 allows fully random piecewise-linear warps
    double warp{ 0.8 };
    /// interior knots of the piecewise-linear warp
    std::size_t warp_knots{ 4 };
    /// standard deviation of i.i.d. frame noise
    double noise{ 0.1 };
    /// relative amplitude change per subject
    double subject_scale{ 0.1 };
    /// per-coordinate offset per subject
    double subject_offset{ 0.1 };
    std::uint64_t seed{ 1 };

    static synthetic_options easy(std::uint64_t seed = 1) {
        synthetic_options o;
        o.seed = seed;
        return o;
    }

    static synthetic_options hard(std::uint64_t seed = 1) {
        synthetic_options o;
        o.seed = seed;
        o.warp = 0.9;
        o.noise = 0.2;
        o.subject_scale = 0.2;
        o.subject_offset = 0.2;
        return o;
    }

    void validate() const {
        if (n_classes == 0 || n_subjects == 0 || repetitions == 0 || n_joints == 0) {
            throw param_error{ "synthetic generator needs at least one class, subject, repetition and joint" };
        }
        if (min_length == 0 || max_length < min_length) {
            throw param_error{ "synthetic lengths must satisfy 0 < min_length <= max_length" };
        }
        if (warp < 0.0 || warp > 1.0) {
            throw param_error{ "warp must lie in [0, 1]" };
        }
        if (!(class_separation > 0.0)) {
            throw param_error{ "class_separation must be strictly positive" };
        }
        if (noise < 0.0 || subject_scale < 0.0 || subject_offset < 0.0) {
            throw param_error{ "noise parameters must be non-negative" };
        }
    }
};

namespace detail {

struct harmonic {
    double amplitude;
    double frequency;
    double phase;
};

/// Monotone map of [0, 1] onto itself through random knots, blended with the identity.
class time_warp {
  public:
    time_warp(std::mt19937_64 &rng, std::size_t knots, double strength) {
        std::exponential_distribution<double> step{ 1.0 };
        std::vector<double> cum{ 0.0 };
        for (std::size_t i = 0; i <= knots; ++i) {
            cum.push_back(cum.back() + step(rng));
        }
        for (std::size_t i = 0; i < cum.size(); ++i) {
            const double identity = static_cast<double>(i) / static_cast<double>(cum.size() - 1);
            ys_.push_back((1.0 - strength) * identity + strength * cum[i] / cum.back());
        }
    }

    [[nodiscard]] double operator()(double t) const noexcept {
        const double pos = t * static_cast<double>(ys_.size() - 1);
        const auto seg = std::min(static_cast<std::size_t>(pos), ys_.size() - 2);
        const double frac = pos - static_cast<double>(seg);
        return ys_[seg] + frac * (ys_[seg + 1] - ys_[seg]);
    }

  private:
    std::vector<double> ys_;
};

inline std::string two_digits(const char *prefix, std::size_t n) {
    std::string s = std::to_string(n);
    return prefix + (s.size() < 2 ? "0" + s : s);
}

}  // namespace detail

/**
 * @brief Generate a labelled dataset; identical options give identical output.
 * @details Labels are a01.., subjects s01.., ids aXX_sYY_eZZ. Every sequence has
 *          3 * n_joints coordinates per frame.
 */
inline dataset make_synthetic(const synthetic_options &opts) {
    opts.validate();
    const std::size_t dim = 3 * opts.n_joints;
    std::mt19937_64 rng{ opts.seed };
    std::normal_distribution<double> normal{ 0.0, 1.0 };
    std::uniform_real_distribution<double> unit{ 0.0, 1.0 };

    const auto random_trajectory = [&](double weight) {
        std::vector<std::vector<detail::harmonic>> tpl(dim);
        for (auto &coord : tpl) {
            for (std::size_t h = 0; h < opts.harmonics; ++h) {
                coord.push_back({ weight * normal(rng) / static_cast<double>(h + 1), 0.5 + 2.0 * unit(rng),
                                  2.0 * std::numbers::pi * unit(rng) });
            }
        }
        return tpl;
    };
    const auto shared = random_trajectory(1.0);
    std::vector<std::vector<std::vector<detail::harmonic>>> templates(opts.n_classes);
    for (auto &tpl : templates) {
        tpl = random_trajectory(opts.class_separation);
        for (std::size_t k = 0; k < dim; ++k) {
            tpl[k].insert(tpl[k].end(), shared[k].begin(), shared[k].end());
        }
    }

    struct subject_style {
        std::vector<double> scale;
        std::vector<double> offset;
    };
    std::vector<subject_style> styles(opts.n_subjects);
    for (auto &s : styles) {
        for (std::size_t c = 0; c < dim; ++c) {
            s.scale.push_back(1.0 + opts.subject_scale * normal(rng));
            s.offset.push_back(opts.subject_offset * normal(rng));
        }
    }

    std::uniform_int_distribution<std::size_t> length{ opts.min_length, opts.max_length };
    std::vector<pose_sequence> out;
    for (std::size_t c = 0; c < opts.n_classes; ++c) {
        for (std::size_t s = 0; s < opts.n_subjects; ++s) {
            for (std::size_t e = 0; e < opts.repetitions; ++e) {
                const std::size_t frames = length(rng);
                const detail::time_warp warp{ rng, opts.warp_knots, opts.warp };
                std::vector<double> data;
                data.reserve(frames * dim);
                for (std::size_t t = 0; t < frames; ++t) {
                    const double u = frames == 1 ? 0.0 : static_cast<double>(t) / static_cast<double>(frames - 1);
                    const double w = warp(u);
                    for (std::size_t k = 0; k < dim; ++k) {
                        double v = 0.0;
                        for (const auto &h : templates[c][k]) {
                            v += h.amplitude * std::sin(2.0 * std::numbers::pi * h.frequency * w + h.phase);
                        }
                        data.push_back(styles[s].scale[k] * v + styles[s].offset[k] + opts.noise * normal(rng));
                    }
                }
                pose_sequence seq{ opts.n_joints, dim, std::move(data) };
                seq.label = detail::two_digits("a", c + 1);
                seq.subject = detail::two_digits("s", s + 1);
                seq.id = seq.label + "_" + seq.subject + "_" + detail::two_digits("e", e + 1);
                out.push_back(std::move(seq));
            }
        }
    }
    return dataset{ std::move(out) };
}

}  // namespace gesturekit
