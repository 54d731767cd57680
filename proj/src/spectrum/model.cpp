#include "spectrum/model.hpp"

#include <algorithm>
#include <set>

namespace nds::spectrum {

namespace {

std::string block_str(const SpectrumAllocation &a) {
    return a.sn_id() + "[" + std::to_string(a.start_mhz()) + "," + std::to_string(a.end_mhz()) + ")";
}

template<typename T>
T required(const json &j, const char *field) {
    if (!j.is_object() || !j.contains(field))
        throw ValidationError(std::string{"missing field '"} + field + "'");
    try {
        return j.at(field).get<T>();
    } catch (const nlohmann::json::exception &) {
        throw ValidationError(std::string{"field '"} + field + "' has the wrong type");
    }
}

} // namespace

Band::Band(int lo_mhz, int hi_mhz, int grid_mhz) : _lo{lo_mhz}, _hi{hi_mhz}, _grid{grid_mhz} {
    if (grid_mhz <= 0)
        throw ValidationError("band grid must be positive");
    if (lo_mhz >= hi_mhz)
        throw ValidationError("band lo_mhz must be below hi_mhz");
    if ((hi_mhz - lo_mhz) % grid_mhz != 0)
        throw ValidationError("band width must be a multiple of the grid");
}

QosPriority::QosPriority(int level) : _level{level} {
    if (level < 0 || level > 2)
        throw ValidationError("priority level must be 0, 1 or 2");
}

DemandProfile::DemandProfile(std::string sn_id, QosPriority priority, int min_bw_mhz, int pref_bw_mhz,
                             SimTime registered_at)
    : _sn_id{std::move(sn_id)}, _priority{priority}, _min{min_bw_mhz}, _pref{pref_bw_mhz},
      _registered_at{registered_at} {
    if (_sn_id.empty())
        throw ValidationError("sn_id must not be empty");
    if (min_bw_mhz <= 0)
        throw ValidationError("min_bw_mhz must be positive");
    if (pref_bw_mhz < min_bw_mhz)
        throw ValidationError("pref_bw_mhz must be at least min_bw_mhz");
}

DemandProfile DemandProfile::with_registered_at(SimTime t) const {
    auto copy = *this;
    copy._registered_at = t;
    return copy;
}

void DemandProfile::validate_for(const Band &band) const {
    if (_pref > band.width_mhz())
        throw ValidationError("demand " + _sn_id + ": pref_bw_mhz exceeds the band");
    if (!band.on_grid(_min) || !band.on_grid(_pref))
        throw ValidationError("demand " + _sn_id + ": bandwidths must be multiples of the grid");
}

SpectrumAllocation::SpectrumAllocation(std::string sn_id, int start_mhz, int width_mhz, QosPriority priority,
                                       bool pinned, std::uint64_t epoch)
    : _sn_id{std::move(sn_id)}, _start{start_mhz}, _width{width_mhz}, _priority{priority}, _pinned{pinned},
      _epoch{epoch} {
    if (_sn_id.empty())
        throw ValidationError("sn_id must not be empty");
    if (width_mhz <= 0)
        throw ValidationError("allocation width must be positive");
}

SpectrumAllocation SpectrumAllocation::with_epoch(std::uint64_t epoch) const {
    auto copy = *this;
    copy._epoch = epoch;
    return copy;
}

const SpectrumAllocation *AllocationPlan::find(const std::string &sn_id) const {
    for (const auto &a : allocations)
        if (a.sn_id() == sn_id)
            return &a;
    return nullptr;
}

void AllocationPlan::canonicalize() {
    std::sort(allocations.begin(), allocations.end(), [](const auto &a, const auto &b) {
        return std::pair{a.start_mhz(), a.sn_id()} < std::pair{b.start_mhz(), b.sn_id()};
    });
    std::sort(rejected.begin(), rejected.end());
}

bool AllocationPlan::same_layout(const AllocationPlan &o) const {
    if (allocations.size() != o.allocations.size() || rejected != o.rejected)
        return false;
    for (std::size_t i = 0; i < allocations.size(); ++i)
        if (!allocations[i].same_block(o.allocations[i]))
            return false;
    return true;
}

bool overlaps(const SpectrumAllocation &a, const SpectrumAllocation &b, int guard_mhz) {
    // Negative gap means the blocks intersect.
    const int gap = std::max(b.start_mhz() - a.end_mhz(), a.start_mhz() - b.end_mhz());
    return gap < guard_mhz;
}

double plan_utilization(const AllocationPlan &plan, const Band &band) {
    long used = 0;
    for (const auto &a : plan.allocations)
        used += a.width_mhz();
    return static_cast<double>(used) / static_cast<double>(band.width_mhz());
}

std::vector<std::string> plan_violations(const AllocationPlan &plan, const Band &band, int guard_mhz) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto &a : plan.allocations) {
        if (!a.inside(band))
            out.push_back("allocation " + block_str(a) + " outside band");
        if (!seen.insert(a.sn_id()).second)
            out.push_back("sn_id " + a.sn_id() + " appears more than once");
    }
    for (const auto &r : plan.rejected)
        if (!seen.insert(r).second)
            out.push_back("sn_id " + r + " appears more than once");
    for (std::size_t i = 0; i < plan.allocations.size(); ++i)
        for (std::size_t k = i + 1; k < plan.allocations.size(); ++k)
            if (overlaps(plan.allocations[i], plan.allocations[k], guard_mhz))
                out.push_back("guard violated between " + block_str(plan.allocations[i]) + " and " +
                              block_str(plan.allocations[k]));
    return out;
}

void check_plan(const AllocationPlan &plan, const Band &band, int guard_mhz) {
    const auto v = plan_violations(plan, band, guard_mhz);
    if (!v.empty())
        throw InvariantViolation("plan epoch " + std::to_string(plan.epoch) + ": " + v.front());
}

void to_json(json &j, const Band &b) {
    j = json{{"lo_mhz", b.lo_mhz()}, {"hi_mhz", b.hi_mhz()}, {"grid_mhz", b.grid_mhz()}};
}

void from_json(const json &j, Band &b) { b = band_from_json(j); }

void to_json(json &j, const QosPriority &p) { j = p.level(); }

void to_json(json &j, const DemandProfile &d) {
    j = json{{"sn_id", d.sn_id()},
             {"priority", d.priority().level()},
             {"min_bw_mhz", d.min_bw_mhz()},
             {"pref_bw_mhz", d.pref_bw_mhz()},
             {"registered_at", d.registered_at()}};
}

void to_json(json &j, const SpectrumAllocation &a) {
    j = json{{"sn_id", a.sn_id()},         {"start_mhz", a.start_mhz()}, {"width_mhz", a.width_mhz()},
             {"priority", a.priority().level()}, {"pinned", a.pinned()},       {"epoch", a.epoch()}};
}

void to_json(json &j, const AllocationPlan &p) {
    j = json{{"epoch", p.epoch}, {"allocations", p.allocations}, {"rejected", p.rejected}};
}

void from_json(const json &j, AllocationPlan &p) {
    p.epoch = required<std::uint64_t>(j, "epoch");
    p.allocations.clear();
    for (const auto &a : required<json>(j, "allocations"))
        p.allocations.push_back(allocation_from_json(a));
    p.rejected = required<std::vector<std::string>>(j, "rejected");
    p.canonicalize();
}

Band band_from_json(const json &j) {
    return Band{required<int>(j, "lo_mhz"), required<int>(j, "hi_mhz"),
                j.contains("grid_mhz") ? required<int>(j, "grid_mhz") : 1};
}

DemandProfile demand_from_json(const json &j) {
    return DemandProfile{required<std::string>(j, "sn_id"), QosPriority{required<int>(j, "priority")},
                         required<int>(j, "min_bw_mhz"), required<int>(j, "pref_bw_mhz"),
                         j.contains("registered_at") ? required<SimTime>(j, "registered_at") : 0};
}

SpectrumAllocation allocation_from_json(const json &j) {
    return SpectrumAllocation{required<std::string>(j, "sn_id"),
                              required<int>(j, "start_mhz"),
                              required<int>(j, "width_mhz"),
                              QosPriority{required<int>(j, "priority")},
                              j.contains("pinned") ? required<bool>(j, "pinned") : false,
                              j.contains("epoch") ? required<std::uint64_t>(j, "epoch") : 0};
}

} // namespace nds::spectrum
