#pragma once

// Exhaustive reference allocator for tiny instances. Shares no code with the
// production allocator: it enumerates admitted sets, width vectors and block
// orders directly.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "allocator/allocator.hpp"

namespace oracle {

struct Demand {
    std::string id;
    int priority = 0;
    int min = 0;
    int pref = 0;
    std::int64_t registered_at = 0;
};

struct Pinned {
    std::string id;
    int start = 0;
    int width = 0;
};

struct Instance {
    int lo = 0;
    int hi = 0;
    int grid = 1;
    int guard = 0;
    std::vector<Demand> demands;
    std::vector<Pinned> pinned;
};

struct Block {
    std::string id;
    int start = 0;
    int width = 0;
};

struct Result {
    std::vector<std::string> admitted; // admission order
    std::vector<std::string> rejected; // sorted
    std::vector<Block> blocks;         // admission order
    std::int64_t objective = 0;
};

constexpr int max_demands = 4;
constexpr int max_channels = 12;

Instance from_input(const nds::alloc::AllocatorInput &in);

/// Demands sorted by (priority, registered_at, id).
std::vector<Demand> order(std::vector<Demand> demands);

/// 4^(2 - priority).
std::int64_t weight(int priority);

/// Smallest start vector (admission order) placing the given widths, or nullopt.
/// `widths[i]` belongs to `ordered[i]`; pinned demands keep their start.
std::optional<std::vector<int>> place(const Instance &inst, const std::vector<Demand> &ordered,
                                      const std::vector<int> &widths);

/// Admission re-run directly: pinned demands are kept, then walk the order and
/// keep a demand when all kept minimums (pinned blocks at their pinned width)
/// can still be placed.
std::vector<std::string> greedy_admission(const Instance &inst);

/// Optimum by (1) admission set, (2) weighted width sum, (2b) lexicographically
/// larger widths, (3) lexicographically smaller starts. nullopt when the instance is too large.
std::optional<Result> oracle_plan(const Instance &inst);

} // namespace oracle
