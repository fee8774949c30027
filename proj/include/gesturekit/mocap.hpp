#pragma once

/// @file
/// @brief Skeletal motion sequences: data model, loaders and root-relative normalization.
///
/// A pose is the concatenation of the (x, y, z) coordinates of every joint of one frame.
/// Raw sequences therefore have dimension k = 3 N; after root_relativize() the root joint
/// is removed and k = 3 (N - 1).

#include "gesturekit/error.hpp"

#include "nlohmann/json.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <iterator>
#include <optional>
#include <ostream>
#include <regex>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

namespace gesturekit {

/// Default root joint for MSR-Action3D style skeletons (hip center in the 20 joint layout).
inline constexpr std::size_t msr_default_root_joint = 6;
/// Default root joint for the generic format; by convention the first joint is the root.
inline constexpr std::size_t generic_default_root_joint = 0;

struct joint {
    double x{};
    double y{};
    double z{};
};

/**
 * @brief One recorded gesture: T frames of k coordinates plus label and subject metadata.
 * @details Frames are stored contiguously (row-major T x k).
 */
class pose_sequence {
  public:
    pose_sequence() = default;

    pose_sequence(std::size_t n_joints, std::size_t dim, std::vector<double> data, bool relativized = false) :
        n_joints_{ n_joints },
        dim_{ dim },
        data_{ std::move(data) },
        relativized_{ relativized } {
        if (n_joints_ == 0) {
            throw param_error{ "n_joints must be positive" };
        }
        if (dim_ != 3 * n_joints_ - (relativized_ ? 3 : 0)) {
            throw dimension_error{ "pose dimension " + std::to_string(dim_) + " does not match " + std::to_string(n_joints_) + " joints" };
        }
        if (data_.empty() || dim_ == 0) {
            throw empty_sequence{ "sequence has no frames" };
        }
        if (data_.size() % dim_ != 0) {
            throw dimension_error{ "coordinate count is not a multiple of the pose dimension" };
        }
        if (!std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); })) {
            throw domain_error{ "sequence contains non-finite coordinates" };
        }
    }

    [[nodiscard]] std::size_t length() const noexcept { return dim_ == 0 ? 0 : data_.size() / dim_; }
    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] std::size_t n_joints() const noexcept { return n_joints_; }
    [[nodiscard]] bool relativized() const noexcept { return relativized_; }
    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }

    [[nodiscard]] std::span<const double> frame(std::size_t t) const noexcept {
        return std::span<const double>{ data_ }.subspan(t * dim_, dim_);
    }

    [[nodiscard]] joint joint_at(std::size_t t, std::size_t j) const noexcept {
        const auto f = frame(t);
        return { f[3 * j], f[3 * j + 1], f[3 * j + 2] };
    }

    std::string id;
    std::string label;
    std::string subject;
    std::optional<double> rate_hz;

  private:
    std::size_t n_joints_{ 0 };
    std::size_t dim_{ 0 };
    std::vector<double> data_;
    bool relativized_{ false };
};

/**
 * @brief A labelled collection of sequences sharing one pose dimension.
 * @details class_set and subject_set are sorted and duplicate free.
 */
class dataset {
  public:
    dataset() = default;

    explicit dataset(std::vector<pose_sequence> sequences) :
        sequences_{ std::move(sequences) } {
        std::set<std::tuple<std::string, std::string, std::string>> seen;
        std::set<std::string> classes;
        std::set<std::string> subjects;
        for (const pose_sequence &seq : sequences_) {
            if (seq.dim() != sequences_.front().dim()) {
                throw dimension_error{ "sequence '" + seq.id + "' has dimension " + std::to_string(seq.dim()) + ", expected " + std::to_string(sequences_.front().dim()) };
            }
            if (!seen.emplace(seq.label, seq.subject, seq.id).second) {
                throw label_error{ "duplicate sequence (label=" + seq.label + ", subject=" + seq.subject + ", id=" + seq.id + ")" };
            }
            classes.insert(seq.label);
            subjects.insert(seq.subject);
        }
        class_set_.assign(classes.begin(), classes.end());
        subject_set_.assign(subjects.begin(), subjects.end());
    }

    [[nodiscard]] const std::vector<pose_sequence> &sequences() const noexcept { return sequences_; }
    [[nodiscard]] const std::vector<std::string> &class_set() const noexcept { return class_set_; }
    [[nodiscard]] const std::vector<std::string> &subject_set() const noexcept { return subject_set_; }
    [[nodiscard]] std::size_t size() const noexcept { return sequences_.size(); }
    [[nodiscard]] bool empty() const noexcept { return sequences_.empty(); }
    [[nodiscard]] std::size_t dim() const noexcept { return sequences_.empty() ? 0 : sequences_.front().dim(); }

    [[nodiscard]] std::vector<std::string> labels() const {
        std::vector<std::string> out;
        out.reserve(sequences_.size());
        for (const auto &s : sequences_) {
            out.push_back(s.label);
        }
        return out;
    }

  private:
    std::vector<pose_sequence> sequences_;
    std::vector<std::string> class_set_;
    std::vector<std::string> subject_set_;
};

namespace detail {

inline double parse_real(std::string_view token, std::size_t position) {
    double value{};
    const char *first = token.data();
    const char *last = token.data() + token.size();
    if (first != last && *first == '+') {
        ++first;
    }
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) {
        throw parse_error{ position, "non-numeric token '" + std::string{ token } + "'" };
    }
    if (!std::isfinite(value)) {
        throw parse_error{ position, "non-finite value '" + std::string{ token } + "'" };
    }
    return value;
}

}  // namespace detail

/**
 * @brief Parse an MSR-Action3D style skeleton stream.
 * @details The stream is a flat list of whitespace separated reals with four values
 *          (x, y, z, confidence) per joint and @p n_joints joints per frame. The confidence
 *          column is discarded. With @p has_header every frame is preceded by one integer
 *          token which is skipped.
 */
inline pose_sequence parse_msr_skeleton(std::istream &in, std::size_t n_joints, bool has_header = false) {
    if (n_joints == 0) {
        throw param_error{ "n_joints must be positive" };
    }
    std::vector<std::string> tokens;
    for (std::string token; in >> token;) {
        tokens.push_back(std::move(token));
    }
    if (tokens.empty()) {
        throw empty_sequence{ "skeleton stream contains no values" };
    }
    const std::size_t per_frame = 4 * n_joints + (has_header ? 1 : 0);
    if (tokens.size() % per_frame != 0) {
        throw malformed_file{ std::to_string(tokens.size()) + " values is not a multiple of " + std::to_string(per_frame) + " per frame" };
    }
    const std::size_t frames = tokens.size() / per_frame;
    std::vector<double> data;
    data.reserve(frames * 3 * n_joints);
    std::size_t pos = 0;
    for (std::size_t t = 0; t < frames; ++t) {
        if (has_header) {
            const double header = detail::parse_real(tokens[pos], pos);
            if (header != std::floor(header)) {
                throw parse_error{ pos, "frame header is not an integer" };
            }
            ++pos;
        }
        for (std::size_t j = 0; j < n_joints; ++j) {
            for (std::size_t c = 0; c < 4; ++c, ++pos) {
                const double v = detail::parse_real(tokens[pos], pos);
                if (c < 3) {
                    data.push_back(v);
                }
            }
        }
    }
    return pose_sequence{ n_joints, 3 * n_joints, std::move(data) };
}

inline pose_sequence parse_msr_skeleton(std::string_view text, std::size_t n_joints, bool has_header = false) {
    std::istringstream in{ std::string{ text } };
    return parse_msr_skeleton(in, n_joints, has_header);
}

/// Fields encoded in an MSR file name such as @c a01_s02_e03_skeleton.txt.
struct msr_file_name {
    std::string action;
    std::string subject;
    std::string episode;
};

inline std::optional<msr_file_name> parse_msr_file_name(const std::string &file_name) {
    static const std::regex pattern{ R"((a\d+)_(s\d+)_(e\d+)_skeleton\d*\.txt)" };
    std::smatch m;
    if (!std::regex_match(file_name, m, pattern)) {
        return std::nullopt;
    }
    return msr_file_name{ m[1].str(), m[2].str(), m[3].str() };
}

/**
 * @brief Subtract the root joint from every joint of every frame and drop the root.
 * @throws index_error if @p root_joint is not a joint of @p seq
 * @throws state_error if @p seq was already relativized
 */
inline pose_sequence root_relativize(const pose_sequence &seq, std::size_t root_joint) {
    if (seq.relativized()) {
        throw state_error{ "sequence '" + seq.id + "' is already root-relative" };
    }
    const std::size_t n = seq.n_joints();
    if (root_joint >= n) {
        throw index_error{ "root joint " + std::to_string(root_joint) + " out of range for " + std::to_string(n) + " joints" };
    }
    if (n < 2) {
        throw dimension_error{ "root-relativization needs at least two joints" };
    }
    std::vector<double> out;
    out.reserve(seq.length() * 3 * (n - 1));
    for (std::size_t t = 0; t < seq.length(); ++t) {
        const joint root = seq.joint_at(t, root_joint);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == root_joint) {
                continue;
            }
            const joint p = seq.joint_at(t, j);
            out.push_back(p.x - root.x);
            out.push_back(p.y - root.y);
            out.push_back(p.z - root.z);
        }
    }
    pose_sequence result{ n, 3 * (n - 1), std::move(out), true };
    result.id = seq.id;
    result.label = seq.label;
    result.subject = seq.subject;
    result.rate_hz = seq.rate_hz;
    return result;
}

/**
 * @brief Parse the JSON-lines interchange format, one sequence object per line.
 * @details Blank lines are ignored. A record whose pose dimension equals 3 (n_joints - 1)
 *          is treated as already root-relative.
 */
inline dataset parse_generic(std::istream &in) {
    using nlohmann::json;
    std::vector<pose_sequence> sequences;
    std::size_t line_no = 0;
    std::optional<std::size_t> shared_dim;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        json record;
        try {
            record = json::parse(line);
        } catch (const json::parse_error &e) {
            throw schema_error{ line_no, std::string{ "invalid JSON: " } + e.what() };
        }
        if (!record.is_object()) {
            throw schema_error{ line_no, "record is not an object" };
        }
        const auto require = [&](const char *key, auto predicate, const char *what) -> const json & {
            const auto it = record.find(key);
            if (it == record.end() || !predicate(*it)) {
                throw schema_error{ line_no, std::string{ "field '" } + key + "' must be " + what };
            }
            return *it;
        };
        const auto is_string = [](const json &j) { return j.is_string(); };
        const std::string id = require("id", is_string, "a string").get<std::string>();
        const std::string label = require("label", is_string, "a string").get<std::string>();
        const std::string subject = require("subject", is_string, "a string").get<std::string>();
        const json &n_joints_j = require("n_joints", [](const json &j) { return j.is_number_integer() && j.get<long long>() > 0; }, "a positive integer");
        const json &frames = require("frames", [](const json &j) { return j.is_array() && !j.empty(); }, "a non-empty array");
        std::optional<double> rate;
        if (const auto it = record.find("rate_hz"); it != record.end() && !it->is_null()) {
            if (!it->is_number() || it->get<double>() <= 0.0) {
                throw schema_error{ line_no, "field 'rate_hz' must be a positive number or null" };
            }
            rate = it->get<double>();
        }
        const auto n_joints = n_joints_j.get<std::size_t>();
        std::size_t dim = 0;
        std::vector<double> data;
        for (const json &frame : frames) {
            if (!frame.is_array()) {
                throw schema_error{ line_no, "every frame must be an array" };
            }
            if (dim == 0) {
                dim = frame.size();
            } else if (frame.size() != dim) {
                throw dimension_error{ "line " + std::to_string(line_no) + ": frame of length " + std::to_string(frame.size()) + " in a sequence of dimension " + std::to_string(dim) };
            }
            for (const json &v : frame) {
                if (!v.is_number()) {
                    throw schema_error{ line_no, "frame values must be numbers" };
                }
                data.push_back(v.get<double>());
            }
        }
        if (shared_dim && *shared_dim != dim) {
            throw dimension_error{ "line " + std::to_string(line_no) + ": dimension " + std::to_string(dim) + " differs from " + std::to_string(*shared_dim) };
        }
        shared_dim = dim;
        bool relativized = false;
        if (dim == 3 * n_joints) {
            relativized = false;
        } else if (n_joints > 1 && dim == 3 * (n_joints - 1)) {
            relativized = true;
        } else {
            throw dimension_error{ "line " + std::to_string(line_no) + ": dimension " + std::to_string(dim) + " inconsistent with " + std::to_string(n_joints) + " joints" };
        }
        pose_sequence seq{ n_joints, dim, std::move(data), relativized };
        seq.id = id;
        seq.label = label;
        seq.subject = subject;
        seq.rate_hz = rate;
        sequences.push_back(std::move(seq));
    }
    return dataset{ std::move(sequences) };
}

inline dataset parse_generic(std::string_view text) {
    std::istringstream in{ std::string{ text } };
    return parse_generic(in);
}

inline void serialize_generic(const dataset &data, std::ostream &out) {
    using nlohmann::json;
    for (const pose_sequence &seq : data.sequences()) {
        json frames = json::array();
        for (std::size_t t = 0; t < seq.length(); ++t) {
            const auto f = seq.frame(t);
            frames.push_back(json(std::vector<double>(f.begin(), f.end())));
        }
        json record{
            { "id", seq.id },
            { "label", seq.label },
            { "subject", seq.subject },
            { "rate_hz", seq.rate_hz ? json(*seq.rate_hz) : json(nullptr) },
            { "n_joints", seq.n_joints() },
            { "frames", std::move(frames) },
        };
        out << record.dump() << '\n';
    }
}

inline dataset load_generic_file(const std::filesystem::path &path) {
    std::ifstream in{ path };
    if (!in) {
        throw malformed_file{ "cannot open '" + path.string() + "'" };
    }
    return parse_generic(in);
}

/// Options for loading a directory of MSR skeleton files.
struct msr_load_options {
    std::size_t n_joints{ 20 };
    std::optional<std::size_t> root_joint{ msr_default_root_joint };
    bool has_header{ false };
};

/**
 * @brief Load every @c aXX_sYY_eZZ_skeleton.txt file in @p dir (or a single file).
 * @details Label and subject are taken from the file name. Files are visited in sorted
 *          order so the resulting dataset is deterministic.
 */
inline dataset load_msr(const std::filesystem::path &input, const msr_load_options &opts = {}) {
    namespace fs = std::filesystem;
    std::vector<fs::path> files;
    if (fs::is_directory(input)) {
        for (const auto &entry : fs::directory_iterator{ input }) {
            if (entry.is_regular_file() && parse_msr_file_name(entry.path().filename().string())) {
                files.push_back(entry.path());
            }
        }
    } else if (fs::is_regular_file(input)) {
        files.push_back(input);
    } else {
        throw malformed_file{ "cannot read '" + input.string() + "'" };
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
        throw empty_sequence{ "no sequences found in '" + input.string() + "'" };
    }

    std::vector<pose_sequence> sequences;
    for (const fs::path &file : files) {
        std::ifstream in{ file };
        if (!in) {
            throw malformed_file{ "cannot open '" + file.string() + "'" };
        }
        const std::string text{ std::istreambuf_iterator<char>{ in }, std::istreambuf_iterator<char>{} };
        try {
            pose_sequence seq = parse_msr_skeleton(text, opts.n_joints, opts.has_header);
            const auto name = parse_msr_file_name(file.filename().string());
            if (name) {
                seq.id = name->action + "_" + name->subject + "_" + name->episode;
                seq.label = name->action;
                seq.subject = name->subject;
            } else {
                seq.id = file.stem().string();
                seq.label = "unknown";
                seq.subject = "unknown";
            }
            if (opts.root_joint) {
                seq = root_relativize(seq, *opts.root_joint);
            }
            if (!sequences.empty() && seq.dim() != sequences.front().dim()) {
                throw dimension_error{ "dimension " + std::to_string(seq.dim()) + " differs from " + std::to_string(sequences.front().dim()) };
            }
            sequences.push_back(std::move(seq));
        } catch (const parse_error &e) {
            throw parse_error{ e.position(), std::string{ "in '" } + file.string() + "': " + e.what() };
        } catch (const dimension_error &e) {
            throw dimension_error{ "in '" + file.string() + "': " + e.what() };
        } catch (const malformed_file &e) {
            // whole joints but not whole frames: the file uses another joint count
            std::istringstream count_in{ text };
            std::size_t count = 0;
            for (std::string token; count_in >> token;) {
                ++count;
            }
            if (!opts.has_header && count % 4 == 0) {
                throw dimension_error{ "in '" + file.string() + "': " + std::to_string(count / 4) + " joints is not a whole number of " + std::to_string(opts.n_joints) + "-joint frames" };
            }
            throw malformed_file{ "in '" + file.string() + "': " + e.what() };
        } catch (const empty_sequence &e) {
            throw empty_sequence{ "in '" + file.string() + "': " + e.what() };
        }
    }
    return dataset{ std::move(sequences) };
}

/// Root-relativize every sequence of @p data that is not already relative.
inline dataset relativize_all(const dataset &data, std::size_t root_joint) {
    std::vector<pose_sequence> out;
    out.reserve(data.size());
    for (const auto &seq : data.sequences()) {
        out.push_back(seq.relativized() ? seq : root_relativize(seq, root_joint));
    }
    return dataset{ std::move(out) };
}

}  // namespace gesturekit
