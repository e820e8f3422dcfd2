#pragma once

#include "dsac/status_list.hpp"

#include <atomic>
#include <chrono>

namespace dsac {

inline Timestamp system_now() {
    return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

/// Settable clock for tests: starts at a fixed instant and moves only when told.
class ManualClock {
public:
    explicit ManualClock(Timestamp start = 1'700'000'000) : now_(start) {}

    Timestamp operator()() const noexcept { return now_.load(); }
    void advance(Timestamp seconds) noexcept { now_ += seconds; }
    void set(Timestamp t) noexcept { now_ = t; }

private:
    std::atomic<Timestamp> now_;
};

} // namespace dsac
