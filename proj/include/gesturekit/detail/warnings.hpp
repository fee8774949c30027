#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <utility>

namespace gesturekit {

using warning_handler = std::function<void(const std::string &)>;

namespace detail {

struct warning_state {
    std::mutex mutex;
    warning_handler handler = [](const std::string &msg) { std::cerr << "gesturekit warning: " << msg << '\n'; };
};

inline warning_state &warnings() {
    static warning_state state;
    return state;
}

inline void warn(const std::string &msg) {
    warning_state &state = warnings();
    const std::lock_guard lock{ state.mutex };
    if (state.handler) {
        state.handler(msg);
    }
}

}  // namespace detail

/// Replace the sink for library warnings; returns the previous handler. An empty handler silences them.
inline warning_handler set_warning_handler(warning_handler handler) {
    detail::warning_state &state = detail::warnings();
    const std::lock_guard lock{ state.mutex };
    return std::exchange(state.handler, std::move(handler));
}

}  // namespace gesturekit
