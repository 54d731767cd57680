#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "common/error.hpp"
#include "common/json.hpp"

namespace nds::spectrum {

using SimTime = std::int64_t; // simulation milliseconds

/// Shared band the sub-networks are packed into. Integer MHz on a fixed grid.
class Band {
public:
    /// The 3700-3800 MHz overlayer band on a 1 MHz grid.
    Band() = default;
    Band(int lo_mhz, int hi_mhz, int grid_mhz);

    int lo_mhz() const noexcept { return _lo; }
    int hi_mhz() const noexcept { return _hi; }
    int grid_mhz() const noexcept { return _grid; }
    int width_mhz() const noexcept { return _hi - _lo; }

    bool on_grid(int mhz) const noexcept { return mhz % _grid == 0; }

    bool operator==(const Band &) const = default;

private:
    int _lo = 3700;
    int _hi = 3800;
    int _grid = 1;
};

/// 0 = mission-critical control, 1 = nomadic logistics, 2 = sensing. Smaller is more important.
class QosPriority {
public:
    constexpr QosPriority() = default;
    explicit QosPriority(int level);

    int level() const noexcept { return _level; }
    bool sticky() const noexcept { return _level == 0; }

    /// Objective weight 4^(2 - level).
    int weight() const noexcept { return 1 << (2 * (2 - _level)); }

    auto operator<=>(const QosPriority &) const = default;

private:
    int _level = 0;
};

/// Registered frequency requirements of one sub-network.
class DemandProfile {
public:
    DemandProfile(std::string sn_id, QosPriority priority, int min_bw_mhz, int pref_bw_mhz,
                  SimTime registered_at = 0);

    const std::string &sn_id() const noexcept { return _sn_id; }
    QosPriority priority() const noexcept { return _priority; }
    int min_bw_mhz() const noexcept { return _min; }
    int pref_bw_mhz() const noexcept { return _pref; }
    SimTime registered_at() const noexcept { return _registered_at; }

    DemandProfile with_registered_at(SimTime t) const;

    /// Band-dependent invariants: pref fits the band, both widths on the grid.
    void validate_for(const Band &band) const;

    /// Same requirements, ignoring registration time.
    bool same_requirements(const DemandProfile &o) const noexcept {
        return _sn_id == o._sn_id && _priority == o._priority && _min == o._min && _pref == o._pref;
    }

    bool operator==(const DemandProfile &) const = default;

private:
    std::string _sn_id;
    QosPriority _priority;
    int _min;
    int _pref;
    SimTime _registered_at;
};

/// A granted contiguous block [start, start + width).
class SpectrumAllocation {
public:
    SpectrumAllocation(std::string sn_id, int start_mhz, int width_mhz, QosPriority priority,
                       bool pinned = false, std::uint64_t epoch = 0);

    const std::string &sn_id() const noexcept { return _sn_id; }
    int start_mhz() const noexcept { return _start; }
    int width_mhz() const noexcept { return _width; }
    int end_mhz() const noexcept { return _start + _width; }
    QosPriority priority() const noexcept { return _priority; }
    bool pinned() const noexcept { return _pinned; }
    std::uint64_t epoch() const noexcept { return _epoch; }

    SpectrumAllocation with_epoch(std::uint64_t epoch) const;

    bool inside(const Band &band) const noexcept {
        return _start >= band.lo_mhz() && end_mhz() <= band.hi_mhz();
    }

    /// Same block for the same SN, ignoring epoch and pinned metadata.
    bool same_block(const SpectrumAllocation &o) const noexcept {
        return _sn_id == o._sn_id && _start == o._start && _width == o._width;
    }

    bool operator==(const SpectrumAllocation &) const = default;

private:
    std::string _sn_id;
    int _start;
    int _width;
    QosPriority _priority;
    bool _pinned;
    std::uint64_t _epoch;
};

struct AllocationPlan {
    std::uint64_t epoch = 0;
    std::vector<SpectrumAllocation> allocations; // sorted by start_mhz
    std::vector<std::string> rejected;           // sorted by sn_id

    const SpectrumAllocation *find(const std::string &sn_id) const;

    /// Sorts both collections into canonical order.
    void canonicalize();

    /// True when both plans grant the same blocks and reject the same SNs (epochs ignored).
    bool same_layout(const AllocationPlan &o) const;

    bool operator==(const AllocationPlan &) const = default;
};

/// Distance between two half-open blocks is smaller than the guard (or they intersect).
bool overlaps(const SpectrumAllocation &a, const SpectrumAllocation &b, int guard_mhz);

/// Sum of granted widths over the band width, in [0, 1].
double plan_utilization(const AllocationPlan &plan, const Band &band);

/// Every broken AllocationPlan invariant, human readable. Empty when valid.
std::vector<std::string> plan_violations(const AllocationPlan &plan, const Band &band, int guard_mhz);

/// Throws InvariantViolation listing the first violation.
void check_plan(const AllocationPlan &plan, const Band &band, int guard_mhz);

void to_json(json &j, const Band &b);
void from_json(const json &j, Band &b);
void to_json(json &j, const QosPriority &p);
void to_json(json &j, const DemandProfile &d);
void to_json(json &j, const SpectrumAllocation &a);
void to_json(json &j, const AllocationPlan &p);
void from_json(const json &j, AllocationPlan &p);

Band band_from_json(const json &j);
DemandProfile demand_from_json(const json &j);
SpectrumAllocation allocation_from_json(const json &j);

} // namespace nds::spectrum
