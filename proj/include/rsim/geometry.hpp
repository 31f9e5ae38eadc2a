#pragma once

// Planar path geometry for the conflict generator: polyline paths with
// arclength lookup, plus the default roundabout layout used by the
// simulator (circulating ego path crossed by an entering vehicle).

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "rsim/common.hpp"

namespace rsim::geom {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double k, Vec2 v) { return {k * v.x, k * v.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }

// Piecewise-linear path with cumulative arclength. Arcs are appended as
// fine chord sequences; with the default chord length the sagitta error
// on a 20 m radius is below 0.1 mm, far inside every tolerance used by
// the simulator and its tests.
class Path {
  public:
    void move_to(Vec2 p) {
        if (!points_.empty()) {
            throw DataError("Path::move_to: path already started");
        }
        points_.push_back(p);
        arclen_.push_back(0.0);
    }

    void line_to(Vec2 p) {
        require_started();
        append(p);
    }

    // Circular arc around `center` from the current endpoint, sweeping
    // `sweep_rad` (positive = counterclockwise). The current endpoint must
    // lie on the circle; the arc is tessellated into chords of at most
    // `max_chord` length.
    void arc_to(Vec2 center, double sweep_rad, double max_chord = 0.25) {
        require_started();
        const Vec2 start = points_.back();
        const Vec2 radial = start - center;
        const double radius = norm(radial);
        if (radius <= 0.0) {
            throw DataError("Path::arc_to: zero radius");
        }
        const double arc_len = std::abs(sweep_rad) * radius;
        const int n = std::max(1, static_cast<int>(std::ceil(arc_len / max_chord)));
        const double a0 = std::atan2(radial.y, radial.x);
        for (int k = 1; k <= n; ++k) {
            const double a = a0 + sweep_rad * static_cast<double>(k) / n;
            append(center + Vec2{radius * std::cos(a), radius * std::sin(a)});
        }
    }

    double length() const { return arclen_.empty() ? 0.0 : arclen_.back(); }
    bool empty() const { return points_.size() < 2; }

    // Position at arclength s, clamped to [0, length].
    Vec2 position(double s) const {
        const std::size_t i = segment_index(s);
        const double s0 = arclen_[i];
        const double seg = arclen_[i + 1] - s0;
        const double f = seg > 0.0 ? clamp01((clamp_s(s) - s0) / seg) : 0.0;
        return points_[i] + f * (points_[i + 1] - points_[i]);
    }

    // Tangent heading (radians, wrapped to [0, 2*pi)) at arclength s.
    double heading(double s) const {
        const std::size_t i = segment_index(s);
        const Vec2 d = points_[i + 1] - points_[i];
        double h = std::atan2(d.y, d.x);
        if (h < 0.0) {
            h += 2.0 * kPi;
        }
        return h;
    }

    // Arclength of the point on the path nearest to q. Linear scan over
    // segments; exact for the polyline.
    double project(Vec2 q) const {
        if (empty()) {
            throw DataError("Path::project: path has no segments");
        }
        double best_d2 = std::numeric_limits<double>::infinity();
        double best_s = 0.0;
        for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
            const Vec2 a = points_[i];
            const Vec2 ab = points_[i + 1] - a;
            const double len2 = dot(ab, ab);
            double f = len2 > 0.0 ? clamp01(dot(q - a, ab) / len2) : 0.0;
            const Vec2 p = a + f * ab;
            const double d2 = dot(q - p, q - p);
            if (d2 < best_d2) {
                best_d2 = d2;
                best_s = arclen_[i] + f * (arclen_[i + 1] - arclen_[i]);
            }
        }
        return best_s;
    }

  private:
    static constexpr double kPi = 3.14159265358979323846;

    static double clamp01(double f) { return f < 0.0 ? 0.0 : (f > 1.0 ? 1.0 : f); }

    double clamp_s(double s) const {
        if (s < 0.0) {
            return 0.0;
        }
        const double L = length();
        return s > L ? L : s;
    }

    void require_started() const {
        if (points_.empty()) {
            throw DataError("Path: call move_to before adding segments");
        }
    }

    void append(Vec2 p) {
        const double step = norm(p - points_.back());
        points_.push_back(p);
        arclen_.push_back(arclen_.back() + step);
    }

    std::size_t segment_index(double s) const {
        if (empty()) {
            throw DataError("Path: no segments");
        }
        const double sc = clamp_s(s);
        // Binary search for the segment containing sc.
        std::size_t lo = 0;
        std::size_t hi = arclen_.size() - 1;
        while (lo + 1 < hi) {
            const std::size_t mid = (lo + hi) / 2;
            if (arclen_[mid] <= sc) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        return lo;
    }

    std::vector<Vec2> points_;
    std::vector<double> arclen_;
};

// The two fixed travel paths of a trial plus the arclengths of the
// locations that matter to the conflict logic.
struct PathGeometry {
    Path ego_path;
    Path aggressive_path;
    double conflict_s_ego = 0.0;        // ego arclength of the conflict point
    double conflict_s_agg = 0.0;        // aggressive arclength of the conflict point
    double roundabout_entry_s_ego = 0.0;  // where the ego's circulating segment begins
    double yield_line_s_agg = 0.0;      // aggressive arclength of its yield line
};

// Default layout: a 20 m circulating radius. The ego approaches from the
// west (140 m straight), sweeps a counterclockwise quarter arc, and exits
// north. The entering vehicle's path is the straight line through the
// conflict point aimed at the circle's center, so it crosses the
// circulating lane exactly once, at right angles to the ego's tangent.
// The conflict point sits 65% of the way around the ego's arc; the yield
// line is 9 m before the conflict point on the entering path.
struct RoundaboutLayout {
    double circulating_radius = 20.0;
    double approach_length = 140.0;
    double exit_length = 50.0;
    double conflict_arc_fraction = 0.65;
    double aggressive_spawn_distance = 75.0;  // path length before the conflict point
    double aggressive_overrun = 30.0;         // path length past the conflict point
    double yield_line_setback = 9.0;          // metres before the conflict point

    void validate() const {
        if (circulating_radius <= 0.0 || approach_length <= 0.0 || exit_length <= 0.0) {
            throw DataError("RoundaboutLayout: lengths must be positive");
        }
        if (conflict_arc_fraction <= 0.0 || conflict_arc_fraction >= 1.0) {
            throw DataError("RoundaboutLayout: conflict_arc_fraction must be in (0,1)");
        }
        if (aggressive_spawn_distance <= yield_line_setback || yield_line_setback <= 0.0) {
            throw DataError("RoundaboutLayout: spawn must precede the yield line");
        }
        if (aggressive_overrun <= 0.0) {
            throw DataError("RoundaboutLayout: aggressive_overrun must be positive");
        }
    }
};

inline PathGeometry make_roundabout_geometry(const RoundaboutLayout& layout = {}) {
    layout.validate();
    const double R = layout.circulating_radius;
    constexpr double kPi = 3.14159265358979323846;

    PathGeometry g;
    // Ego: west approach tangent to the circle's south point, quarter arc
    // to the east point, then straight north.
    g.ego_path.move_to({-layout.approach_length, -R});
    g.ego_path.line_to({0.0, -R});
    g.ego_path.arc_to({0.0, 0.0}, kPi / 2.0);
    g.ego_path.line_to({R, layout.exit_length});
    g.roundabout_entry_s_ego = layout.approach_length;
    const double arc_len = kPi * R / 2.0;
    g.conflict_s_ego = layout.approach_length + layout.conflict_arc_fraction * arc_len;

    // Conflict point and inward radial direction.
    const double angle = -kPi / 2.0 + layout.conflict_arc_fraction * (kPi / 2.0);
    const Vec2 m{R * std::cos(angle), R * std::sin(angle)};
    const Vec2 inward = (-1.0 / R) * m;

    g.aggressive_path.move_to(m - layout.aggressive_spawn_distance * inward);
    g.aggressive_path.line_to(m + layout.aggressive_overrun * inward);
    g.conflict_s_agg = layout.aggressive_spawn_distance;
    g.yield_line_s_agg = layout.aggressive_spawn_distance - layout.yield_line_setback;
    return g;
}

}  // namespace rsim::geom
