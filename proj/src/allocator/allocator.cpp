#include "allocator/allocator.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <tuple>

namespace nds::alloc {

namespace {

// Upper bound on evaluated segment assignments; only reachable with many pinned
// blocks and many demands, far beyond the desk-scale scenarios.
constexpr std::size_t max_assignments = 1u << 18;

/// A free stretch of the band between pinned blocks (or a band edge). Every block
/// placed inside consumes width + guard of `capacity`.
struct Segment {
    int capacity = 0;
    int left_pinned = -1; // index into the sorted pinned list, -1 for the left band edge
};

struct Candidate {
    std::int64_t objective = -1;
    std::vector<int> widths; // admission order
    std::vector<int> starts; // admission order

    bool better_than(const Candidate &o) const {
        if (objective != o.objective)
            return objective > o.objective;
        if (widths != o.widths)
            return widths > o.widths;
        return starts < o.starts;
    }
};

class Planner {
public:
    explicit Planner(const AllocatorInput &in) : _in{in}, _guard{in.guard_mhz} {
        _pinned = in.pinned;
        std::sort(_pinned.begin(), _pinned.end(),
                  [](const auto &a, const auto &b) { return a.start_mhz() < b.start_mhz(); });
        build_segments();
    }

    AllocationPlan run() {
        const auto order = admission_order(_in.demands);
        std::map<std::string, int> pinned_index;
        for (int i = 0; i < static_cast<int>(_pinned.size()); ++i)
            pinned_index[_pinned[i].sn_id()] = i;

        AllocationPlan plan;
        plan.epoch = _in.prev_epoch + 1;

        // Admission: pinned owners unconditionally, then greedy in admission order.
        std::vector<int> unpinned_mins;
        for (const auto &d : order) {
            if (pinned_index.contains(d.sn_id())) {
                _admitted.push_back({&d, pinned_index.at(d.sn_id())});
                continue;
            }
            unpinned_mins.push_back(d.min_bw_mhz());
            if (packable(unpinned_mins)) {
                _admitted.push_back({&d, -1});
            } else {
                unpinned_mins.pop_back();
                plan.rejected.push_back(d.sn_id());
            }
        }

        // Sizing and layout: best segment assignment for the unpinned blocks.
        for (std::size_t i = 0; i < _admitted.size(); ++i)
            if (_admitted[i].pinned < 0)
                _free_positions.push_back(i);
        _assignment.assign(_admitted.size(), -1);
        _remaining.resize(_segments.size());
        for (std::size_t s = 0; s < _segments.size(); ++s)
            _remaining[s] = _segments[s].capacity;
        search(0);

        for (std::size_t i = 0; i < _admitted.size(); ++i) {
            const auto &d = *_admitted[i].demand;
            plan.allocations.emplace_back(d.sn_id(), _best.starts[i], _best.widths[i], d.priority(),
                                          d.priority().sticky(), plan.epoch);
        }
        plan.canonicalize();
        return plan;
    }

private:
    struct Admitted {
        const DemandProfile *demand;
        int pinned; // index into _pinned or -1
    };

    void build_segments() {
        const auto &band = _in.band;
        if (_pinned.empty()) {
            _segments.push_back({band.width_mhz() + _guard, -1});
            return;
        }
        _segments.push_back({_pinned.front().start_mhz() - band.lo_mhz(), -1});
        for (std::size_t j = 1; j < _pinned.size(); ++j)
            _segments.push_back(
                {_pinned[j].start_mhz() - _pinned[j - 1].end_mhz() - _guard, static_cast<int>(j - 1)});
        _segments.push_back({band.hi_mhz() - _pinned.back().end_mhz(), static_cast<int>(_pinned.size() - 1)});
    }

    /// Can blocks of the given minimum widths be placed in the free segments?
    bool packable(std::vector<int> mins) const {
        std::sort(mins.begin(), mins.end(), std::greater<>{});
        std::vector<int> rem;
        for (const auto &s : _segments)
            rem.push_back(s.capacity);
        return pack(mins, 0, rem);
    }

    bool pack(const std::vector<int> &items, std::size_t i, std::vector<int> &rem) const {
        if (i == items.size())
            return true;
        const int need = items[i] + _guard;
        std::set<int> tried;
        for (auto &r : rem) {
            if (r < need || !tried.insert(r).second)
                continue;
            r -= need;
            const bool ok = pack(items, i + 1, rem);
            r += need;
            if (ok)
                return true;
        }
        return false;
    }

    void search(std::size_t k) {
        if (_evaluated >= max_assignments)
            return;
        if (k == _free_positions.size()) {
            ++_evaluated;
            evaluate();
            return;
        }
        const auto pos = _free_positions[k];
        const int need = _admitted[pos].demand->min_bw_mhz() + _guard;
        for (std::size_t s = 0; s < _segments.size(); ++s) {
            if (_remaining[s] < need)
                continue;
            _remaining[s] -= need;
            _assignment[pos] = static_cast<int>(s);
            search(k + 1);
            _remaining[s] += need;
        }
        _assignment[pos] = -1;
    }

    void evaluate() {
        auto rem = _remaining;
        Candidate c;
        c.widths.resize(_admitted.size());
        c.starts.resize(_admitted.size());
        c.objective = 0;

        // Water-filling in admission order; each block draws from one segment.
        for (std::size_t i = 0; i < _admitted.size(); ++i) {
            const auto &a = _admitted[i];
            const int base = a.pinned >= 0 ? _pinned[a.pinned].width_mhz() : a.demand->min_bw_mhz();
            const int seg = a.pinned >= 0 ? a.pinned + 1 : _assignment[i];
            const int extra = std::min(a.demand->pref_bw_mhz() - base, rem[seg]);
            rem[seg] -= extra;
            c.widths[i] = base + extra;
            c.objective += static_cast<std::int64_t>(a.demand->priority().weight()) * c.widths[i];
        }

        // Left-to-right layout inside each segment, in admission order.
        std::vector<int> cursor(_segments.size());
        for (std::size_t s = 0; s < _segments.size(); ++s) {
            const int lp = _segments[s].left_pinned;
            cursor[s] = _in.band.lo_mhz();
            if (lp >= 0) {
                const auto owner = std::find_if(_admitted.begin(), _admitted.end(),
                                                 [lp](const Admitted &a) { return a.pinned == lp; });
                const int width = c.widths[static_cast<std::size_t>(owner - _admitted.begin())];
                cursor[s] = _pinned[lp].start_mhz() + width + _guard;
            }
        }
        for (std::size_t i = 0; i < _admitted.size(); ++i) {
            const auto &a = _admitted[i];
            if (a.pinned >= 0) {
                c.starts[i] = _pinned[a.pinned].start_mhz();
                continue;
            }
            const int seg = _assignment[i];
            c.starts[i] = cursor[seg];
            cursor[seg] += c.widths[i] + _guard;
        }

        if (_best.objective < 0 || c.better_than(_best))
            _best = std::move(c);
    }

    const AllocatorInput &_in;
    const int _guard;
    std::vector<SpectrumAllocation> _pinned;
    std::vector<Segment> _segments;
    std::vector<Admitted> _admitted;
    std::vector<std::size_t> _free_positions;
    std::vector<int> _assignment;
    std::vector<int> _remaining;
    std::size_t _evaluated = 0;
    Candidate _best;
};

} // namespace

void validate_input(const AllocatorInput &input) {
    const auto &band = input.band;
    if (input.guard_mhz < 0 || !band.on_grid(input.guard_mhz))
        throw ValidationError("guard_mhz must be a non-negative multiple of the grid");

    std::map<std::string, const DemandProfile *> by_id;
    for (const auto &d : input.demands) {
        d.validate_for(band);
        if (!by_id.emplace(d.sn_id(), &d).second)
            throw ValidationError("duplicate sn_id " + d.sn_id());
    }

    std::set<std::string> pinned_ids;
    for (const auto &p : input.pinned) {
        if (!pinned_ids.insert(p.sn_id()).second)
            throw ValidationError("sn_id " + p.sn_id() + " pinned twice");
        const auto it = by_id.find(p.sn_id());
        if (it == by_id.end())
            throw ValidationError("pinned block " + p.sn_id() + " has no demand");
        const auto &d = *it->second;
        if (d.priority().level() != 0)
            throw ValidationError("pinned block " + p.sn_id() + " is not priority 0");
        if (!p.inside(band))
            throw ValidationError("pinned block " + p.sn_id() + " lies outside the band");
        if (!band.on_grid(p.start_mhz() - band.lo_mhz()) || !band.on_grid(p.width_mhz()))
            throw ValidationError("pinned block " + p.sn_id() + " is off the grid");
        if (p.width_mhz() < d.min_bw_mhz() || p.width_mhz() > d.pref_bw_mhz())
            throw ValidationError("pinned block " + p.sn_id() + " width outside [min, pref]");
    }
    for (std::size_t i = 0; i < input.pinned.size(); ++i)
        for (std::size_t k = i + 1; k < input.pinned.size(); ++k)
            if (spectrum::overlaps(input.pinned[i], input.pinned[k], input.guard_mhz))
                throw ValidationError("pinned blocks " + input.pinned[i].sn_id() + " and " +
                                      input.pinned[k].sn_id() + " violate the guard");
}

std::vector<DemandProfile> admission_order(std::span<const DemandProfile> demands) {
    std::vector<DemandProfile> out{demands.begin(), demands.end()};
    std::sort(out.begin(), out.end(), [](const DemandProfile &a, const DemandProfile &b) {
        return std::tuple{a.priority().level(), a.registered_at(), a.sn_id()} <
               std::tuple{b.priority().level(), b.registered_at(), b.sn_id()};
    });
    std::set<std::string> ids;
    for (const auto &d : out)
        if (!ids.insert(d.sn_id()).second)
            throw ValidationError("duplicate sn_id " + d.sn_id());
    return out;
}

AllocationPlan compute_plan(const AllocatorInput &input) {
    validate_input(input);
    return Planner{input}.run();
}

std::int64_t weighted_objective(const AllocationPlan &plan) {
    std::int64_t total = 0;
    for (const auto &a : plan.allocations)
        total += static_cast<std::int64_t>(a.priority().weight()) * a.width_mhz();
    return total;
}

} // namespace nds::alloc
