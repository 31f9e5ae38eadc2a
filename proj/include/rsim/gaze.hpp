#pragma once

#include <algorithm>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "rsim/csv.hpp"

namespace rsim::gaze {

/// Labeled gaze-target regions.
enum class Aoi { AggressiveVehicle, SpeedInfo, WarningInfo, RoadAhead };

inline const char* aoi_name(Aoi a) {
    switch (a) {
        case Aoi::AggressiveVehicle: return "AggressiveVehicle";
        case Aoi::SpeedInfo: return "SpeedInfo";
        case Aoi::WarningInfo: return "WarningInfo";
        case Aoi::RoadAhead: return "RoadAhead";
    }
    return "?";
}

inline Aoi parse_aoi(const std::string& s) {
    if (s == "AggressiveVehicle") return Aoi::AggressiveVehicle;
    if (s == "SpeedInfo") return Aoi::SpeedInfo;
    if (s == "WarningInfo") return Aoi::WarningInfo;
    if (s == "RoadAhead") return Aoi::RoadAhead;
    throw ParseError("unknown AOI '" + s + "'");
}

/// One fixation: a dwell interval on a single AOI with per-eye pupil
/// diameters (pixels, as exported by the tracker).
struct FixationRecord {
    double t_start = 0.0;  // s
    double t_end = 0.0;    // s, > t_start
    Aoi aoi = Aoi::RoadAhead;
    double pupil_left = 0.0;   // px, > 0
    double pupil_right = 0.0;  // px, > 0
};

/// Ordered, non-overlapping fixations of one trial.
struct GazeLog {
    std::string trial_id;
    std::vector<FixationRecord> records;
};

inline void validate_gaze_log(const GazeLog& log) {
    for (std::size_t k = 0; k < log.records.size(); ++k) {
        const auto& r = log.records[k];
        if (!(r.t_end > r.t_start))
            throw DataError("gaze log: record " + std::to_string(k) + " has t_end <= t_start");
        if (!(r.pupil_left > 0.0) || !(r.pupil_right > 0.0))
            throw DataError("gaze log: record " + std::to_string(k) + " has non-positive pupil diameter");
        if (k > 0 && r.t_start < log.records[k - 1].t_end - 1e-9)
            throw DataError("gaze log: record " + std::to_string(k) + " overlaps its predecessor");
    }
}

/// Mean of the per-eye minimum pupil diameters over records intersecting
/// [t0, t1]: (min left + min right) / 2.
inline double mean_pupil_diameter(const GazeLog& log, double t0, double t1) {
    if (!(t0 < t1)) throw DataError("mean_pupil_diameter: window start must precede end");
    double min_left = std::numeric_limits<double>::infinity();
    double min_right = std::numeric_limits<double>::infinity();
    bool any = false;
    for (const auto& r : log.records) {
        if (r.t_end <= t0 || r.t_start >= t1) continue;
        any = true;
        min_left = std::min(min_left, r.pupil_left);
        min_right = std::min(min_right, r.pupil_right);
    }
    if (!any) throw DataError("mean_pupil_diameter: no fixation intersects the window");
    return 0.5 * (min_left + min_right);
}

struct FixationFeatures {
    double total_duration = 0.0;  // s, durations clipped to the window
    int count = 0;                // fixations intersecting the window
    double mean_duration = 0.0;   // s, total / count
    bool any = false;             // false when no matching fixation
};

/// Per-AOI dwell features over [t0, t1]. Fixations straddling the window
/// edges contribute only their in-window portion but still count once.
inline FixationFeatures fixation_features(const GazeLog& log, double t0, double t1, Aoi aoi) {
    if (!(t0 < t1)) throw DataError("fixation_features: window start must precede end");
    FixationFeatures out;
    for (const auto& r : log.records) {
        if (r.aoi != aoi) continue;
        const double clipped = std::min(r.t_end, t1) - std::max(r.t_start, t0);
        if (clipped <= 0.0) continue;
        out.total_duration += clipped;
        out.count += 1;
    }
    if (out.count > 0) {
        out.any = true;
        out.mean_duration = out.total_duration / out.count;
    }
    return out;
}

/// Reads `t_start,t_end,aoi,pupil_left,pupil_right` rows.
inline GazeLog ingest_gaze_csv(const std::string& path) {
    const csv::Table table = csv::read_file(path);
    csv::require_columns(table, {"t_start", "t_end", "aoi", "pupil_left", "pupil_right"}, "gaze CSV");
    GazeLog log;
    log.trial_id = path;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        const std::size_t lineno = table.line_numbers[i];
        if (row.size() != 5)
            throw ParseError("line " + std::to_string(lineno) + ": expected 5 fields, got " +
                             std::to_string(row.size()));
        FixationRecord r;
        r.t_start = csv::parse_double(row[0], lineno, "t_start");
        r.t_end = csv::parse_double(row[1], lineno, "t_end");
        try {
            r.aoi = parse_aoi(row[2]);
        } catch (const ParseError& e) {
            throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
        }
        r.pupil_left = csv::parse_double(row[3], lineno, "pupil_left");
        r.pupil_right = csv::parse_double(row[4], lineno, "pupil_right");
        log.records.push_back(r);
    }
    validate_gaze_log(log);
    return log;
}

inline std::string gaze_log_to_csv(const GazeLog& log) {
    std::ostringstream out;
    out << "t_start,t_end,aoi,pupil_left,pupil_right\n";
    for (const auto& r : log.records) {
        out << format_double(r.t_start) << ',' << format_double(r.t_end) << ',' << aoi_name(r.aoi) << ','
            << format_double(r.pupil_left) << ',' << format_double(r.pupil_right) << '\n';
    }
    return out.str();
}

}  // namespace rsim::gaze
