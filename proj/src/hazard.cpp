#include "pothole/hazard.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "json.hpp"

namespace pothole {

namespace {

using nlohmann::ordered_json;

constexpr double kDegToRad = std::numbers::pi / 180.0;

void validate_coordinates(double latitude, double longitude) {
    if (!(std::fabs(latitude) <= 90.0) || !(std::fabs(longitude) < 180.0)) {
        throw std::invalid_argument("coordinates out of range");
    }
}

std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12f", v);
    return buf;
}

}  // namespace

std::optional<HazardEvent> geolocate(std::span<const ScoredBox> frame_detections,
                                     const VehiclePose& pose, const HazardConfig& config) {
    validate_coordinates(pose.latitude, pose.longitude);
    if (!(config.min_score >= 0.0 && config.min_score <= 1.0)) {
        throw std::invalid_argument("geolocate: min_score must lie in [0, 1]");
    }
    // High speed blurs the frames; the detector's validity ends there.
    if (pose.speed_kmh > config.speed_limit_kmh) return std::nullopt;

    double best = -1.0;
    int qualifying = 0;
    for (const ScoredBox& d : frame_detections) {
        if (d.score >= config.min_score) {
            ++qualifying;
            best = std::max(best, d.score);
        }
    }
    if (qualifying == 0) return std::nullopt;
    return HazardEvent{pose.device_id, pose.timestamp_ms, pose.latitude,
                       pose.longitude, best, qualifying};
}

CellId cell_of(double latitude, double longitude, double cell_size_m) {
    validate_coordinates(latitude, longitude);
    if (!(cell_size_m > 0.0)) throw std::invalid_argument("cell_of: cell size must be positive");

    const std::int64_t lat_index =
        static_cast<std::int64_t>(std::floor(latitude * kMetersPerDegree / cell_size_m));
    // longitude scale at the band center keeps cells of one band congruent
    const double band_center_deg =
        (static_cast<double>(lat_index) + 0.5) * cell_size_m / kMetersPerDegree;
    const double lon_scale = kMetersPerDegree * std::cos(band_center_deg * kDegToRad);
    const std::int64_t lon_index =
        static_cast<std::int64_t>(std::floor(longitude * lon_scale / cell_size_m));
    return {lat_index, lon_index};
}

std::pair<double, double> cell_center(const CellId& cell, double cell_size_m) {
    const double lat =
        (static_cast<double>(cell.lat_index) + 0.5) * cell_size_m / kMetersPerDegree;
    const double lon_scale = kMetersPerDegree * std::cos(lat * kDegToRad);
    const double lon = (static_cast<double>(cell.lon_index) + 0.5) * cell_size_m / lon_scale;
    return {lat, lon};
}

const CellState* HazardGrid::find(const CellId& cell) const noexcept {
    const auto it = cells_.find(cell);
    return it == cells_.end() ? nullptr : &it->second;
}

std::vector<const CellState*> HazardGrid::sorted_cells() const {
    std::vector<const CellState*> out;
    out.reserve(cells_.size());
    for (const auto& [id, state] : cells_) out.push_back(&state);
    std::sort(out.begin(), out.end(),
              [](const CellState* a, const CellState* b) { return a->id < b->id; });
    return out;
}

std::optional<WarningMessage> HazardGrid::ingest(const HazardEvent& event) {
    validate_coordinates(event.latitude, event.longitude);
    if (!(event.score >= 0.0 && event.score <= 1.0) || event.box_count < 1) {
        throw std::invalid_argument("ingest: invalid event payload");
    }

    const CellId cell = cell_of(event.latitude, event.longitude, config_.cell_size_m);
    CellState& state = cells_.try_emplace(cell, CellState{.id = cell}).first->second;

    const auto last_it = state.last_report_by_device.find(event.device_id);
    if (last_it != state.last_report_by_device.end() && event.timestamp_ms < last_it->second) {
        throw OutOfOrderEventError("event older than previous report from device " +
                                   event.device_id);
    }

    // decay, then accumulate; events arriving out of order across devices do
    // not decay backwards
    if (state.distinct_reports > 0 || state.confidence > 0.0) {
        const double dt_ms = static_cast<double>(event.timestamp_ms - state.last_update_ms);
        if (dt_ms > 0.0) {
            const double half_life_ms = config_.half_life_hours * 3600.0 * 1000.0;
            state.confidence *= std::exp2(-dt_ms / half_life_ms);
        }
    }
    state.confidence += event.score;

    const bool debounced =
        last_it != state.last_report_by_device.end() &&
        static_cast<double>(event.timestamp_ms - last_it->second) <=
            config_.debounce_seconds * 1000.0;
    state.last_report_by_device[event.device_id] = event.timestamp_ms;
    state.last_update_ms = std::max(state.last_update_ms, event.timestamp_ms);
    if (!debounced) ++state.distinct_reports;

    if (!state.warned && state.distinct_reports >= config_.report_threshold) {
        state.warned = true;
        const auto [lat, lon] = cell_center(cell, config_.cell_size_m);
        return WarningMessage{cell, lat, lon, state.confidence, state.distinct_reports,
                              event.timestamp_ms};
    }
    return std::nullopt;
}

ReplayResult replay(const std::filesystem::path& events_path, const HazardConfig& config) {
    std::ifstream in(events_path);
    if (!in) throw std::runtime_error("cannot open " + events_path.string());

    HazardGrid grid(config);
    ReplayResult result;
    std::string line;
    int line_no = 0;
    std::int64_t previous_ts = std::numeric_limits<std::int64_t>::min();
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

        const ordered_json rec = ordered_json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object()) {
            result.issues.push_back({line_no, "", "malformed JSON object"});
            continue;
        }

        HazardEvent event;
        const auto dev = rec.find("device_id");
        const auto ts = rec.find("timestamp");
        const auto lat = rec.find("lat");
        const auto lon = rec.find("lon");
        const auto score = rec.find("score");
        const auto count = rec.find("box_count");
        if (dev == rec.end() || !dev->is_string() || ts == rec.end() ||
            !ts->is_number_integer() || lat == rec.end() || !lat->is_number() ||
            lon == rec.end() || !lon->is_number() || score == rec.end() ||
            !score->is_number() || count == rec.end() || !count->is_number_integer()) {
            result.issues.push_back({line_no, "", "missing or mistyped event field"});
            continue;
        }
        event.device_id = dev->get<std::string>();
        event.timestamp_ms = ts->get<std::int64_t>();
        event.latitude = lat->get<double>();
        event.longitude = lon->get<double>();
        event.score = score->get<double>();
        event.box_count = count->get<int>();

        if (event.timestamp_ms < previous_ts) {
            throw UnsortedLogError("event log not sorted by timestamp at line " +
                                   std::to_string(line_no));
        }
        previous_ts = event.timestamp_ms;

        if (!(std::fabs(event.latitude) <= 90.0) || !(std::fabs(event.longitude) < 180.0) ||
            !(event.score >= 0.0 && event.score <= 1.0) || event.box_count < 1) {
            result.issues.push_back({line_no, event.device_id, "event fails validity bounds"});
            continue;
        }

        if (auto warning = grid.ingest(event)) {
            result.warnings.push_back(std::move(*warning));
        }
        ++result.summary.events_ingested;
    }

    result.summary.malformed_lines = result.issues.size();
    result.summary.cells_touched = grid.cell_count();
    result.summary.warnings_emitted = result.warnings.size();
    for (const CellState* cell : grid.sorted_cells()) result.cells.push_back(*cell);
    return result;
}

void save_events(std::span<const HazardEvent> events, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    for (const HazardEvent& e : events) {
        ordered_json rec;
        rec["device_id"] = e.device_id;
        rec["timestamp"] = e.timestamp_ms;
        rec["lat"] = e.latitude;
        rec["lon"] = e.longitude;
        rec["score"] = e.score;
        rec["box_count"] = e.box_count;
        out << rec.dump() << '\n';
    }
}

std::string warning_to_json(const WarningMessage& w) {
    std::string s = "{\"cell\":[" + std::to_string(w.cell.lat_index) + "," +
                    std::to_string(w.cell.lon_index) + "],\"lat\":" + format_real(w.latitude) +
                    ",\"lon\":" + format_real(w.longitude) +
                    ",\"confidence\":" + format_real(w.confidence) +
                    ",\"distinct_reports\":" + std::to_string(w.distinct_reports) +
                    ",\"issued_at\":" + std::to_string(w.issued_at_ms) + "}";
    return s;
}

void save_warnings(std::span<const WarningMessage> warnings, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    for (const WarningMessage& w : warnings) out << warning_to_json(w) << '\n';
}

}  // namespace pothole
