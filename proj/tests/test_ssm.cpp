#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <vector>

#include "rsim/common.hpp"
#include "rsim/ssm.hpp"

using namespace rsim;
using ssm::VehicleSpec;

namespace {

// Composite-Simpson integral of the truncated-normal density: the quadrature
// oracle for CDF-based probabilities (absolute error well below 1e-10 at this
// resolution).
double truncnorm_cdf_quadrature(double x, const VehicleSpec& spec) {
    if (x <= spec.madr_lower) return 0.0;
    if (x >= spec.madr_upper) return 1.0;
    auto density = [&spec](double u) {
        const double z = (u - spec.madr_mean) / spec.madr_std;
        return std::exp(-0.5 * z * z);
    };
    auto simpson = [&density](double a, double b) {
        const int n = 20000;  // even
        const double h = (b - a) / n;
        double acc = density(a) + density(b);
        for (int k = 1; k < n; ++k) acc += density(a + k * h) * (k % 2 ? 4.0 : 2.0);
        return acc * h / 3.0;
    };
    const double whole = simpson(spec.madr_lower, spec.madr_upper);
    return simpson(spec.madr_lower, x) / whole;
}

Trajectory straight_track(double x0, double y0, double heading, double v, std::size_t n, double dt = 0.1) {
    Trajectory traj;
    traj.dt = dt;
    for (std::size_t k = 0; k < n; ++k) {
        TrajectoryPoint p;
        p.t = dt * static_cast<double>(k);
        p.x = x0 + v * std::cos(heading) * p.t;
        p.y = y0 + v * std::sin(heading) * p.t;
        p.v = v;
        p.heading = wrap_angle(heading);
        traj.points.push_back(p);
    }
    return traj;
}

}  // namespace

TEST_CASE("ttc substitutes directly") {
    // gross distance 24 m reduced by both 2 m radii, closing 5 + 5
    const auto v = ssm::ttc(24.0 - 2.0 - 2.0, 5.0, 5.0);
    REQUIRE(v.has_value());
    CHECK(*v == Catch::Approx(2.0).margin(1e-12));

    CHECK_FALSE(ssm::ttc(10.0, 0.0, 0.0).has_value());
    CHECK_THROWS_AS(ssm::ttc(-1.0, 1.0, 1.0), DataError);
    CHECK_THROWS_AS(ssm::ttc(1.0, -1.0, 1.0), DataError);
}

TEST_CASE("ttc is invariant under joint distance/speed scaling") {
    for (double k : {0.1, 2.0, 37.5}) {
        const auto base = ssm::ttc(20.0, 4.0, 6.0);
        const auto scaled = ssm::ttc(20.0 * k, 4.0 * k, 6.0 * k);
        REQUIRE(base.has_value());
        REQUIRE(scaled.has_value());
        CHECK(*scaled == Catch::Approx(*base).epsilon(1e-12));
    }
}

TEST_CASE("ttc_series matches the geometric closest-approach oracle on a right-angle conflict") {
    // i heads east, j heads north, both 10 m/s, both the same distance from
    // the origin, so the line of sight bisects the right angle.
    const double r = 2.0;
    const double net = 20.0;
    const double x0 = (net + 2.0 * r) / std::sqrt(2.0);  // center distance = net + r_i + r_j
    const Trajectory ti = straight_track(-x0, 0.0, 0.0, 10.0, 40);
    const Trajectory tj = straight_track(0.0, -x0, 1.5707963267948966, 10.0, 40);
    VehicleSpec spec;
    spec.radius = r;

    const auto series = ssm::ttc_series(ti, tj, spec, spec);
    REQUIRE(series.size() == 40);
    REQUIRE(series[0].defined);
    CHECK(series[0].ttc == Catch::Approx(20.0 / (2.0 * 10.0 * std::cos(0.7853981633974483))).epsilon(1e-12));
    CHECK(series[0].ttc == Catch::Approx(1.4142135623730951).epsilon(1e-9));

    // oracle: first time the center distance falls to r_i + r_j, found by
    // bisection on the closed-form positions
    auto center_dist = [&](double t) {
        const double ix = -x0 + 10.0 * t, jy = -x0 + 10.0 * t;
        return std::hypot(0.0 - ix, jy - 0.0) - 2.0 * r;  // j.x = 0, i.y = 0
    };
    double lo = 0.0, hi = x0 / 10.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (center_dist(mid) > 0.0 ? lo : hi) = mid;
    }
    CHECK(series[0].ttc == Catch::Approx(0.5 * (lo + hi)).margin(1e-9));
}

TEST_CASE("ttc_series flags stationary and diverging pairs undefined") {
    Trajectory a = straight_track(0.0, 0.0, 0.0, 0.0, 10);
    Trajectory b = straight_track(15.0, 0.0, 0.0, 0.0, 10);
    VehicleSpec spec;
    for (const auto& s : ssm::ttc_series(a, b, spec, spec)) CHECK_FALSE(s.defined);

    // moving apart
    Trajectory c = straight_track(0.0, 0.0, 3.14159265358979, 5.0, 10);
    Trajectory d = straight_track(15.0, 0.0, 0.0, 5.0, 10);
    for (const auto& s : ssm::ttc_series(c, d, spec, spec)) CHECK_FALSE(s.defined);

    // disjoint clocks
    Trajectory late = straight_track(0.0, 0.0, 0.0, 5.0, 10);
    for (auto& p : late.points) p.t += 100.0;
    CHECK_THROWS_AS(ssm::ttc_series(a, late, spec, spec), DataError);
}

TEST_CASE("ttc_series is scale-invariant when radii scale too") {
    const double k = 3.7;
    Trajectory ti = straight_track(-30.0, 4.0, 0.1, 8.0, 25);
    Trajectory tj = straight_track(5.0, -28.0, 1.4, 9.5, 25);
    Trajectory si = straight_track(-30.0 * k, 4.0 * k, 0.1, 8.0 * k, 25);
    Trajectory sj = straight_track(5.0 * k, -28.0 * k, 1.4, 9.5 * k, 25);
    VehicleSpec spec, scaled;
    scaled.radius = spec.radius * k;
    const auto base = ssm::ttc_series(ti, tj, spec, spec);
    const auto big = ssm::ttc_series(si, sj, scaled, scaled);
    REQUIRE(base.size() == big.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
        CHECK(base[i].defined == big[i].defined);
        if (base[i].defined) CHECK(big[i].ttc == Catch::Approx(base[i].ttc).epsilon(1e-9));
    }
}

TEST_CASE("time_headway signs and degenerate speeds") {
    auto h = ssm::time_headway(10.0, 5.0, 30.0, 10.0);
    REQUIRE(h.has_value());
    CHECK(*h == Catch::Approx(1.0).margin(1e-12));  // 30/10 - 10/5

    h = ssm::time_headway(12.0, 4.0, 12.0, 4.0);
    REQUIRE(h.has_value());
    CHECK(*h == 0.0);

    CHECK_FALSE(ssm::time_headway(10.0, 0.0, 30.0, 10.0).has_value());
    CHECK_FALSE(ssm::time_headway(10.0, 5.0, 30.0, 0.0).has_value());
}

TEST_CASE("drac substitutes directly and applies the indicator convention") {
    CHECK(ssm::drac(15.0, 5.0, 10.0) == Catch::Approx(5.0).margin(1e-12));
    CHECK(ssm::drac(8.0, 8.0, 10.0) == 0.0);
    CHECK(ssm::drac(5.0, 15.0, 10.0) == 0.0);
    CHECK_THROWS_AS(ssm::drac(15.0, 5.0, 0.0), DataError);
    CHECK_THROWS_AS(ssm::drac(15.0, 5.0, -2.0), DataError);
}

TEST_CASE("madr_exceedance_prob matches the quadrature oracle") {
    VehicleSpec spec;  // defaults: mean 8.45, std 1.40, bounds [4.23, 12.68]
    CHECK(ssm::madr_exceedance_prob(spec.madr_lower, spec) == 0.0);
    CHECK(ssm::madr_exceedance_prob(spec.madr_lower - 1.0, spec) == 0.0);
    CHECK(ssm::madr_exceedance_prob(spec.madr_upper, spec) == 1.0);
    CHECK(ssm::madr_exceedance_prob(spec.madr_upper + 3.0, spec) == 1.0);

    // symmetric truncation around the mean puts exactly half the mass below it
    VehicleSpec sym;
    sym.madr_mean = 8.0;
    sym.madr_std = 1.5;
    sym.madr_lower = 5.0;
    sym.madr_upper = 11.0;
    CHECK(ssm::madr_exceedance_prob(8.0, sym) == Catch::Approx(0.5).margin(1e-12));

    for (double x : {4.5, 6.0, 7.25, 8.45, 9.0, 10.5, 12.0})
        CHECK(ssm::madr_exceedance_prob(x, spec) == Catch::Approx(truncnorm_cdf_quadrature(x, spec)).margin(1e-8));

    // monotone with range exactly [0, 1]
    double prev = -1.0;
    for (double x = 3.0; x <= 14.0; x += 0.05) {
        const double p = ssm::madr_exceedance_prob(x, spec);
        CHECK(p >= prev);
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
        prev = p;
    }
    CHECK_THROWS_AS(ssm::madr_exceedance_prob(-0.1, spec), DataError);
}

TEST_CASE("cpi matches the stated examples and the quadrature oracle") {
    VehicleSpec spec;
    std::vector<ssm::DracSample> zeros, saturated, piecewise;
    for (int k = 0; k < 10; ++k) zeros.push_back({0.1 * k, 0.0});
    for (int k = 0; k < 10; ++k) saturated.push_back({0.1 * k, spec.madr_upper + 1.0});
    piecewise = {{0.0, 0.0}, {0.1, 6.0}, {0.2, 10.0}};

    CHECK(ssm::cpi(zeros, spec, 0.0, 0.9, 0.1) == 0.0);
    CHECK(ssm::cpi(saturated, spec, 0.0, 0.9, 0.1) == Catch::Approx(1.0).margin(1e-12));

    const double expected =
        (truncnorm_cdf_quadrature(6.0, spec) * 0.1 + truncnorm_cdf_quadrature(10.0, spec) * 0.1) / 0.3;
    CHECK(ssm::cpi(piecewise, spec, 0.0, 0.2, 0.1) == Catch::Approx(expected).margin(1e-8));

    CHECK_THROWS_AS(ssm::cpi(piecewise, spec, 0.2, 0.2, 0.1), DataError);   // empty window extent
    CHECK_THROWS_AS(ssm::cpi(piecewise, spec, 5.0, 6.0, 0.1), DataError);   // no samples inside
}

TEST_CASE("cpi stays in [0,1] and grows with pointwise DRAC increases") {
    VehicleSpec spec;
    Rng rng(20240817);
    for (int rep = 0; rep < 10000; ++rep) {
        const int n = 3 + static_cast<int>(rng.uniform() * 47);
        std::vector<ssm::DracSample> series(n), bumped(n);
        for (int k = 0; k < n; ++k) {
            const double v = rng.uniform() < 0.25 ? 0.0 : rng.uniform() * 16.0;
            series[k] = {0.1 * k, v};
            bumped[k] = {0.1 * k, v + rng.uniform() * 2.0};
        }
        const double t_f = 0.1 * (n - 1);
        const double c = ssm::cpi(series, spec, 0.0, t_f, 0.1);
        const double cb = ssm::cpi(bumped, spec, 0.0, t_f, 0.1);
        REQUIRE(c >= 0.0);
        REQUIRE(c <= 1.0 + 1e-12);
        REQUIRE(cb >= c - 1e-15);
    }
}

TEST_CASE("acceleration_noise matches direct summation") {
    std::vector<ssm::AccelSample> constant, alternating, ramp;
    for (int k = 0; k < 10; ++k) constant.push_back({0.1 * k, 1.7});
    for (int k = 0; k < 10; ++k) alternating.push_back({0.1 * k, k % 2 ? 1.0 : -1.0});
    for (int k = 0; k < 10; ++k) ramp.push_back({0.1 * k, 2.0 * k / 9.0});

    CHECK(ssm::acceleration_noise(constant, 0.0, 0.9, 0.1) == 0.0);
    CHECK(ssm::acceleration_noise(alternating, 0.0, 0.9, 0.1) == Catch::Approx(1.0).margin(1e-12));

    // spreadsheet-style oracle: explicit mean, explicit squared deviations
    double mean = 0.0;
    for (const auto& s : ramp) mean += s.a;
    mean /= 10.0;
    double acc = 0.0;
    for (const auto& s : ramp) acc += (s.a - mean) * (s.a - mean) * 0.1;
    const double oracle = std::sqrt(acc / (10.0 * 0.1));
    CHECK(ssm::acceleration_noise(ramp, 0.0, 0.9, 0.1) == Catch::Approx(oracle).margin(1e-12));

    // invariant under constant shifts
    std::vector<ssm::AccelSample> shifted = ramp;
    for (auto& s : shifted) s.a += 4.25;
    CHECK(ssm::acceleration_noise(shifted, 0.0, 0.9, 0.1) ==
          Catch::Approx(ssm::acceleration_noise(ramp, 0.0, 0.9, 0.1)).margin(1e-12));

    CHECK_THROWS_AS(ssm::acceleration_noise({{0.0, 1.0}}, 0.0, 0.5, 0.1), DataError);
}

TEST_CASE("braking_stats extracts the deceleration episode") {
    Trajectory traj;
    traj.dt = 0.1;
    for (int k = 0; k < 40; ++k) {
        TrajectoryPoint p;
        p.t = 0.1 * k;
        p.v = 10.0;
        p.a = (k >= 20 && k < 35) ? -5.0 : 0.0;
        traj.points.push_back(p);
    }
    const auto bs = ssm::braking_stats(traj, 2.0);  // window [0, min(4, 3.9)]
    CHECK(bs.braking);
    CHECK(bs.avg_decel == Catch::Approx(-5.0).margin(1e-12));
    CHECK(bs.max_decel == Catch::Approx(-5.0).margin(1e-12));
    CHECK(bs.duration == Catch::Approx(1.5).margin(1e-12));
    CHECK(bs.window_end == Catch::Approx(3.9).margin(1e-12));

    // constant braking through the whole window
    for (auto& p : traj.points) p.a = -6.11;
    const auto cb = ssm::braking_stats(traj, 2.0);
    CHECK(cb.avg_decel == Catch::Approx(-6.11).margin(1e-12));
    CHECK(cb.max_decel == Catch::Approx(-6.11).margin(1e-12));

    for (auto& p : traj.points) p.a = 0.5;
    const auto nb = ssm::braking_stats(traj, 2.0);
    CHECK_FALSE(nb.braking);
    CHECK(nb.avg_decel == 0.0);
    CHECK(nb.max_decel == 0.0);
    CHECK(nb.duration == 0.0);
}

TEST_CASE("braking_stats orders max below avg on mixed profiles") {
    Rng rng(5150);
    for (int rep = 0; rep < 200; ++rep) {
        Trajectory traj;
        traj.dt = 0.1;
        for (int k = 0; k < 50; ++k) {
            TrajectoryPoint p;
            p.t = 0.1 * k;
            p.a = (rng.uniform() - 0.6) * 8.0;
            traj.points.push_back(p);
        }
        const auto bs = ssm::braking_stats(traj, 2.5);
        if (!bs.braking) continue;
        CHECK(bs.max_decel <= bs.avg_decel);
        CHECK(bs.avg_decel <= 0.0);
    }
}

TEST_CASE("safety_report composes the metric suite on a head-on closing pair") {
    // i at the origin heading east at 10 m/s; j 100 m ahead heading west at
    // 10 m/s; 3.5 s horizon so they stay 26 m apart (net) at the end.
    const Trajectory ti = straight_track(0.0, 0.0, 0.0, 10.0, 36);
    const Trajectory tj = straight_track(100.0, 0.0, 3.14159265358979324, 10.0, 36);
    VehicleSpec spec;
    ssm::ConflictGeometry geom;
    geom.conflict_x = 50.0;

    const auto rep = ssm::safety_report(ti, tj, spec, spec, geom, 0.5);
    REQUIRE(rep.has_min_ttc);
    CHECK_FALSE(rep.collision);
    // last sample: gap = 100 - 20*3.5 - 4 = 26 m, closing 20 m/s
    CHECK(rep.t_min_ttc == Catch::Approx(3.5).margin(1e-9));
    CHECK(rep.min_ttc == Catch::Approx(26.0 / 20.0).epsilon(1e-9));
    REQUIRE(rep.has_window);
    CHECK(rep.cpi > 0.0);
    CHECK(rep.cpi <= 1.0);
    // max DRAC at the smallest in-window gap: closing^2 / (2 * 26)
    CHECK(rep.max_drac == Catch::Approx(400.0 / 52.0).epsilon(1e-9));
    CHECK(rep.an == 0.0);  // constant (zero) acceleration everywhere
    CHECK_FALSE(rep.braking);

    // quadrature oracle for the report's CPI over [0.5, 3.5]
    double acc = 0.0;
    int n = 0;
    for (int k = 5; k <= 35; ++k) {
        const double gap = 100.0 - 20.0 * (0.1 * k) - 4.0;
        acc += truncnorm_cdf_quadrature(400.0 / (2.0 * gap), spec) * 0.1;
        ++n;
    }
    CHECK(rep.cpi == Catch::Approx(acc / (n * 0.1)).margin(1e-8));
}

TEST_CASE("safety_report flags contact and never-approaching pairs") {
    VehicleSpec spec;
    ssm::ConflictGeometry geom;

    // head-on long enough to touch: contact when the 100 m gap closes to 4 m
    const Trajectory ti = straight_track(0.0, 0.0, 0.0, 10.0, 60);
    const Trajectory tj = straight_track(100.0, 0.0, 3.14159265358979324, 10.0, 60);
    const auto crash = ssm::safety_report(ti, tj, spec, spec, geom, 0.5);
    CHECK(crash.collision);
    CHECK(crash.min_ttc == 0.0);
    CHECK(crash.t_min_ttc == Catch::Approx(4.8).margin(0.1 + 1e-9));

    // diverging pair: no defined TTC at all
    const Trajectory di = straight_track(0.0, 0.0, 3.14159265358979324, 5.0, 30);
    const Trajectory dj = straight_track(20.0, 0.0, 0.0, 5.0, 30);
    const auto never = ssm::safety_report(di, dj, spec, spec, geom, 0.5);
    CHECK_FALSE(never.has_min_ttc);
    CHECK(never.cpi == 0.0);
    CHECK_FALSE(never.has_window);
}

TEST_CASE("safety_report serializes to CSV and JSON") {
    const Trajectory ti = straight_track(0.0, 0.0, 0.0, 10.0, 36);
    const Trajectory tj = straight_track(100.0, 0.0, 3.14159265358979324, 10.0, 36);
    VehicleSpec spec;
    const auto rep = ssm::safety_report(ti, tj, spec, spec, {}, 0.5);

    const std::string header = ssm::safety_report_csv_header();
    const std::string row = ssm::safety_report_csv_row(rep);
    CHECK(std::count(header.begin(), header.end(), ',') == std::count(row.begin(), row.end(), ','));
    CHECK(header.find("min_ttc") == header.find("has_min_ttc") + 4);

    const auto j = ssm::safety_report_json(rep);
    CHECK(j.at("has_min_ttc").get<bool>());
    CHECK(j.at("min_ttc").get<double>() == Catch::Approx(1.3).epsilon(1e-9));
    CHECK(j.at("cpi").get<double>() == rep.cpi);
    CHECK(j.at("braking_window").size() == 2);
}
