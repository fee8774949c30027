#pragma once

/// @file
/// @brief Exception hierarchy shared by all gesturekit modules.
///
/// Every error derives from gesturekit::error and carries a category that the
/// command line tool maps onto its exit code (usage, data, numeric).

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gesturekit {

enum class error_category { usage, data, numeric };

class error : public std::runtime_error {
  public:
    error(error_category category, const std::string &what) :
        std::runtime_error{ what },
        category_{ category } {}

    [[nodiscard]] error_category category() const noexcept { return category_; }

  private:
    error_category category_;
};

#define GESTUREKIT_DEFINE_ERROR(name, cat)                                                     \
    class name : public error {                                                               \
      public:                                                                                 \
        explicit name(const std::string &what) : error{ error_category::cat, #name ": " + what } {} \
    }

// loader / data errors
GESTUREKIT_DEFINE_ERROR(malformed_file, data);
GESTUREKIT_DEFINE_ERROR(empty_sequence, data);
GESTUREKIT_DEFINE_ERROR(dimension_error, data);
GESTUREKIT_DEFINE_ERROR(index_error, data);
GESTUREKIT_DEFINE_ERROR(label_error, data);
GESTUREKIT_DEFINE_ERROR(alignment_error, data);
GESTUREKIT_DEFINE_ERROR(state_error, data);
// caller supplied an invalid parameter value
GESTUREKIT_DEFINE_ERROR(param_error, usage);
// numeric domain violations
GESTUREKIT_DEFINE_ERROR(domain_error, numeric);
GESTUREKIT_DEFINE_ERROR(numeric_error, numeric);

#undef GESTUREKIT_DEFINE_ERROR

/// Token-level parse failure; @p position is the zero-based token index.
class parse_error : public error {
  public:
    parse_error(std::size_t position, const std::string &what) :
        error{ error_category::data, "parse_error at token " + std::to_string(position) + ": " + what },
        position_{ position } {}

    [[nodiscard]] std::size_t position() const noexcept { return position_; }

  private:
    std::size_t position_;
};

/// Schema violation in a JSON-lines document; @p line is one-based.
class schema_error : public error {
  public:
    schema_error(std::size_t line, const std::string &what) :
        error{ error_category::data, "schema_error at line " + std::to_string(line) + ": " + what },
        line_{ line } {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

}  // namespace gesturekit
