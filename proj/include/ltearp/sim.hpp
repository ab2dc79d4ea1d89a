#pragma once

#include "ltearp/config.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

namespace ltearp {

enum class TxnState {
    AwaitingRao,
    AwaitingRar,
    AwaitingMsg3Tx,
    AwaitingMsg4,
    PostArpStep,
    DataTransfer,
    Done,
    Dropped
};

struct ChannelStats {
    std::int64_t served_units = 0;
    std::int64_t expired_requests = 0;
    double mean_utilization = 0.0;  // served / offered capacity; 0 for unbounded channels
    bool bounded = true;

    bool operator==(const ChannelStats&) const = default;
};

struct SimResult {
    std::int64_t successes = 0;
    std::int64_t drops = 0;
    double outage_fraction = 0.0;

    // indexed by Channel; the PRACH entry counts preamble transmissions
    std::array<ChannelStats, 4> channels{};

    double latency_mean = 0.0;
    std::int64_t latency_p50 = 0;
    std::int64_t latency_p90 = 0;
    std::int64_t latency_p99 = 0;

    // msg1_histogram[n] = counted transactions that finished after n MSG1s
    std::vector<std::int64_t> msg1_histogram;

    // RAO contention inside the measurement window
    std::int64_t preamble_transmissions = 0;
    std::int64_t collided_transmissions = 0;

    // whole-run bookkeeping, including warmup and unfinished transactions
    std::int64_t created = 0;
    std::int64_t finished_done = 0;
    std::int64_t finished_dropped = 0;
    std::int64_t in_flight = 0;

    std::uint64_t rng_seed = 0;
    std::int64_t duration_subframes = 0;
    std::int64_t warmup_subframes = 0;

    bool operator==(const SimResult&) const = default;
};

/// Subframe-stepped simulation of random access, post-access signaling and
/// data delivery. Counts transactions that arrive at or after `warmup` and
/// finish before `duration`. Deterministic in (spec, seed, duration, warmup).
/// When `trace` is set, one "subframe event transaction" line is written per
/// protocol event.
SimResult run(const ScenarioSpec& spec, std::uint64_t seed, std::int64_t duration, std::int64_t warmup,
              std::ostream* trace = nullptr);

/// Warmup used when none is given: 10% of the duration.
inline std::int64_t default_warmup(std::int64_t duration) { return duration / 10; }

}  // namespace ltearp
