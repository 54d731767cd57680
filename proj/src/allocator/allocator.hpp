#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "spectrum/model.hpp"

namespace nds::alloc {

using spectrum::AllocationPlan;
using spectrum::Band;
using spectrum::DemandProfile;
using spectrum::SpectrumAllocation;

struct AllocatorInput {
    Band band;
    int guard_mhz = 1;
    std::vector<DemandProfile> demands;
    /// Previously committed priority-0 blocks. Their start never moves.
    std::vector<SpectrumAllocation> pinned;
    std::uint64_t prev_epoch = 0;
};

/// Throws ValidationError when the input breaks any AllocatorInput invariant.
void validate_input(const AllocatorInput &input);

/// Sorted by (priority level, registered_at, sn_id). Throws on duplicate sn_id.
std::vector<DemandProfile> admission_order(std::span<const DemandProfile> demands);

/// Deterministic plan for the given demands.
///
/// Pinned demands are admitted first at their committed blocks; the remaining
/// demands are admitted greedily in admission order whenever their minimum
/// widths can still be laid out next to everything already admitted. Leftover
/// spectrum is water-filled in admission order (pinned blocks may only grow to
/// the right). Blocks are laid out left to right in admission order.
AllocationPlan compute_plan(const AllocatorInput &input);

/// Sum over allocations of weight(priority) * width, weight = 4^(2 - level).
std::int64_t weighted_objective(const AllocationPlan &plan);

} // namespace nds::alloc
