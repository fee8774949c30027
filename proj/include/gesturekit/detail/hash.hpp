#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <iomanip>
#include <span>
#include <sstream>
#include <string>
#include <string_view>

namespace gesturekit::detail {

/// 64 bit FNV-1a, used for cache keys and payload checksums (not cryptographic).
class fnv1a64 {
  public:
    fnv1a64 &bytes(const void *data, std::size_t size) noexcept {
        const auto *p = static_cast<const unsigned char *>(data);
        for (std::size_t i = 0; i < size; ++i) {
            state_ ^= p[i];
            state_ *= 0x100000001b3ULL;
        }
        return *this;
    }

    fnv1a64 &add(std::string_view s) noexcept {
        add(static_cast<std::uint64_t>(s.size()));
        return bytes(s.data(), s.size());
    }

    fnv1a64 &add(std::uint64_t v) noexcept {
        unsigned char buf[8];
        for (int i = 0; i < 8; ++i) {
            buf[i] = static_cast<unsigned char>(v >> (8 * i));
        }
        return bytes(buf, 8);
    }

    fnv1a64 &add(double v) noexcept { return add(std::bit_cast<std::uint64_t>(v)); }

    fnv1a64 &add(std::span<const double> values) noexcept {
        add(static_cast<std::uint64_t>(values.size()));
        for (const double v : values) {
            add(v);
        }
        return *this;
    }

    [[nodiscard]] std::uint64_t value() const noexcept { return state_; }

    [[nodiscard]] std::string hex() const {
        std::ostringstream out;
        out << std::hex << std::setw(16) << std::setfill('0') << state_;
        return out.str();
    }

  private:
    std::uint64_t state_{ 0xcbf29ce484222325ULL };
};

}  // namespace gesturekit::detail
