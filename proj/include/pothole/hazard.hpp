#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "pothole/dataset.hpp"
#include "pothole/nms.hpp"

namespace pothole {

// Meters per degree of latitude (and of longitude at the equator).
inline constexpr double kMetersPerDegree = 111320.0;

struct VehiclePose {
    std::string device_id;
    std::int64_t timestamp_ms = 0;  // milliseconds since epoch; strictly increasing per device
    double latitude = 0;            // degrees, |lat| <= 90
    double longitude = 0;           // degrees, |lon| < 180
    double speed_kmh = 0;
};

// One geolocated pothole observation: the detector fired on a frame and the
// vehicle's own position stands in for the pothole position.
struct HazardEvent {
    std::string device_id;
    std::int64_t timestamp_ms = 0;
    double latitude = 0;
    double longitude = 0;
    double score = 0;    // max qualifying detection score in the frame
    int box_count = 0;   // number of qualifying detections, >= 1

    friend bool operator==(const HazardEvent&, const HazardEvent&) = default;
};

struct HazardConfig {
    double cell_size_m = 10.0;
    int report_threshold = 3;        // distinct reports required for a warning
    double half_life_hours = 24.0;   // confidence decay half-life
    double debounce_seconds = 5.0;   // per-device window in which repeats count once
    double min_score = 0.5;          // geolocate: minimum detection score
    double speed_limit_kmh = 60.0;   // frames above this speed are discarded
};

// Builds the event for one camera frame, or nothing when no detection clears
// min_score or the vehicle is moving faster than the detector tolerates.
// Throws std::invalid_argument on invalid pose coordinates or min_score.
std::optional<HazardEvent> geolocate(std::span<const ScoredBox> frame_detections,
                                     const VehiclePose& pose, const HazardConfig& config);

struct CellId {
    std::int64_t lat_index = 0;
    std::int64_t lon_index = 0;

    friend bool operator==(const CellId&, const CellId&) = default;
    friend auto operator<=>(const CellId&, const CellId&) = default;
};

struct CellIdHash {
    std::size_t operator()(const CellId& c) const noexcept {
        return std::hash<std::int64_t>()(c.lat_index) * 1000003u ^
               std::hash<std::int64_t>()(c.lon_index);
    }
};

// Equirectangular grid, half-open cells: the latitude band is fixed first and
// the longitude scale uses the cosine at that band's center, so every
// coordinate maps to exactly one cell and boundary points land in the
// higher-index cell. Throws on out-of-range coordinates.
CellId cell_of(double latitude, double longitude, double cell_size_m);

// Center coordinates (degrees) of a cell.
std::pair<double, double> cell_center(const CellId& cell, double cell_size_m);

struct CellState {
    CellId id;
    double confidence = 0;       // decayed sum of event scores
    int distinct_reports = 0;    // debounced count of device reports
    std::int64_t last_update_ms = 0;
    bool warned = false;
    // last report timestamp per device; drives both debouncing and the
    // per-device ordering check
    std::unordered_map<std::string, std::int64_t> last_report_by_device;
};

struct WarningMessage {
    CellId cell;
    double latitude = 0;   // cell center
    double longitude = 0;
    double confidence = 0;
    int distinct_reports = 0;
    std::int64_t issued_at_ms = 0;
};

class OutOfOrderEventError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnsortedLogError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Per-cell accumulation state. Ingest decays the cell's confidence from its
// last update, adds the event score, counts the report unless the same device
// already reported this cell within the debounce window, and emits a warning
// the first time the distinct-report threshold is reached. A cell warns at
// most once; distinct_reports never decreases, so the threshold crossing
// cannot recur.
class HazardGrid {
public:
    explicit HazardGrid(HazardConfig config) : config_(config) {}

    // Throws OutOfOrderEventError when the event is older than the same
    // device's previous report in the target cell.
    std::optional<WarningMessage> ingest(const HazardEvent& event);

    const HazardConfig& config() const noexcept { return config_; }
    const CellState* find(const CellId& cell) const noexcept;
    std::size_t cell_count() const noexcept { return cells_.size(); }
    // cells sorted by id, for deterministic reporting
    std::vector<const CellState*> sorted_cells() const;

private:
    HazardConfig config_;
    std::unordered_map<CellId, CellState, CellIdHash> cells_;
};

struct ReplaySummary {
    std::size_t events_ingested = 0;
    std::size_t malformed_lines = 0;
    std::size_t cells_touched = 0;
    std::size_t warnings_emitted = 0;
};

struct ReplayResult {
    std::vector<WarningMessage> warnings;
    std::vector<CellState> cells;  // sorted by cell id
    ReplaySummary summary;
    std::vector<LoadIssue> issues;  // malformed lines, with line numbers
};

// Event logs are JSON Lines:
//   {"device_id": "v1", "timestamp": 1000, "lat": 45.0, "lon": 8.0,
//    "score": 0.9, "box_count": 1}
// The log must be sorted by timestamp (non-decreasing); replay throws
// std::runtime_error naming the first offending line otherwise. Malformed
// lines are skipped and reported. Identical inputs and config produce
// identical results.
ReplayResult replay(const std::filesystem::path& events_path, const HazardConfig& config);

void save_events(std::span<const HazardEvent> events, const std::filesystem::path& path);

// Warnings as JSON Lines with fixed 12-decimal reals; byte-stable for a given
// input.
std::string warning_to_json(const WarningMessage& w);
void save_warnings(std::span<const WarningMessage> warnings, const std::filesystem::path& path);

}  // namespace pothole
