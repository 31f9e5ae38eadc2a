#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "rsim/common.hpp"
#include "rsim/trajectory.hpp"

using namespace rsim;

namespace {

std::string temp_path(const std::string& name) {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "rsim_traj_test";
    fs::create_directories(dir);
    return (dir / name).string();
}

/// Constant-velocity ground truth: start at (x0, y0), speed v, heading h.
Trajectory cv_truth(std::size_t n, double v, double heading, double x0 = 0.0, double y0 = 0.0) {
    Trajectory traj;
    traj.vehicle_id = "cv";
    traj.dt = 0.1;
    for (std::size_t k = 0; k < n; ++k) {
        TrajectoryPoint p;
        p.t = 0.1 * static_cast<double>(k);
        p.x = x0 + v * std::cos(heading) * p.t;
        p.y = y0 + v * std::sin(heading) * p.t;
        p.v = v;
        p.a = 0.0;
        p.heading = heading;
        traj.points.push_back(p);
    }
    return traj;
}

}  // namespace

TEST_CASE("ingest_trajectory_csv parses a well-formed file") {
    const std::string path = temp_path("ok.csv");
    csv::write_file(path,
                    "t,x,y,v,a,heading\n"
                    "0.0,1.0,2.0,5.0,0.0,0.0\n"
                    "0.1,1.5,2.0,5.0,0.0,0.0\n"
                    "0.2,2.0,2.0,5.0,0.1,6.30318530717959\n");
    const Trajectory traj = ingest_trajectory_csv(path);
    REQUIRE(traj.points.size() == 3);
    CHECK(traj.dt == Catch::Approx(0.1).margin(1e-12));
    CHECK(traj.points[0].x == 1.0);
    CHECK(traj.points[1].y == 2.0);
    CHECK(traj.points[2].a == 0.1);
    // heading just over 2*pi wraps back into [0, 2*pi)
    CHECK(traj.points[2].heading == Catch::Approx(6.30318530717959 - kTwoPi).margin(1e-12));
}

TEST_CASE("ingest_trajectory_csv rejects malformed input") {
    const std::string dup = temp_path("dup.csv");
    csv::write_file(dup, "t,x,y,v,a,heading\n0.0,0,0,1,0,0\n0.0,1,0,1,0,0\n");
    CHECK_THROWS_AS(ingest_trajectory_csv(dup), DataError);

    const std::string schema = temp_path("schema.csv");
    csv::write_file(schema, "t,x,y,v,a\n0.0,0,0,1,0\n");
    CHECK_THROWS_AS(ingest_trajectory_csv(schema), ParseError);

    const std::string bad = temp_path("bad.csv");
    csv::write_file(bad, "t,x,y,v,a,heading\n0.0,0,0,1,0,0\n0.1,zzz,0,1,0,0\n");
    try {
        ingest_trajectory_csv(bad);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }

    const std::string negv = temp_path("negv.csv");
    csv::write_file(negv, "t,x,y,v,a,heading\n0.0,0,0,-1,0,0\n");
    CHECK_THROWS_AS(ingest_trajectory_csv(negv), DataError);

    const std::string gap = temp_path("gap.csv");
    csv::write_file(gap, "t,x,y,v,a,heading\n0.0,0,0,1,0,0\n0.1,0,0,1,0,0\n0.3,0,0,1,0,0\n");
    CHECK_THROWS_AS(ingest_trajectory_csv(gap), DataError);

    CHECK_THROWS_AS(ingest_trajectory_csv(temp_path("nope.csv")), IoError);
    const std::string empty = temp_path("empty.csv");
    csv::write_file(empty, "");
    CHECK_THROWS_AS(ingest_trajectory_csv(empty), EmptyInputError);
}

TEST_CASE("trajectory CSV round-trips through the writer") {
    const Trajectory traj = cv_truth(20, 8.25, 0.75, 3.0, -2.0);
    const std::string path = temp_path("round.csv");
    csv::write_file(path, trajectory_to_csv(traj));
    const Trajectory back = ingest_trajectory_csv(path);
    REQUIRE(back.points.size() == traj.points.size());
    for (std::size_t k = 0; k < traj.points.size(); ++k) {
        CHECK(back.points[k].t == Catch::Approx(traj.points[k].t).margin(1e-9));
        CHECK(back.points[k].x == Catch::Approx(traj.points[k].x).epsilon(1e-9));
        CHECK(back.points[k].y == Catch::Approx(traj.points[k].y).epsilon(1e-9));
        CHECK(back.points[k].v == Catch::Approx(traj.points[k].v).epsilon(1e-9));
    }
}

TEST_CASE("kalman_smooth preserves timestamps and rejects short input") {
    const Trajectory traj = cv_truth(50, 10.0, 0.3);
    const Trajectory sm = kalman_smooth(traj);
    REQUIRE(sm.points.size() == traj.points.size());
    for (std::size_t k = 0; k < sm.points.size(); ++k) CHECK(sm.points[k].t == traj.points[k].t);

    Trajectory one = cv_truth(1, 10.0, 0.0);
    CHECK_THROWS_AS(kalman_smooth(one), DataError);

    KalmanConfig bad;
    bad.process_noise_std = 0.0;
    CHECK_THROWS_AS(kalman_smooth(traj, bad), DataError);
}

TEST_CASE("kalman_smooth is exact on noiseless constant-velocity motion") {
    const Trajectory traj = cv_truth(200, 10.0, 0.6, 5.0, -8.0);
    const Trajectory sm = kalman_smooth(traj);
    double sup = 0.0;
    for (std::size_t k = 5; k < sm.points.size(); ++k) {
        sup = std::max(sup, std::hypot(sm.points[k].x - traj.points[k].x, sm.points[k].y - traj.points[k].y));
        CHECK(std::fabs(sm.points[k].x - traj.points[k].x) < 1e-6);
        CHECK(std::fabs(sm.points[k].v - traj.points[k].v) < 1e-6);
        CHECK(std::fabs(sm.points[k].a) < 1e-5);
    }
    CHECK(sup < 1e-4);
}

TEST_CASE("kalman_smooth is deterministic") {
    Trajectory noisy = cv_truth(100, 10.0, 0.0);
    Rng rng(1234);
    for (auto& p : noisy.points) {
        p.x += 0.5 * rng.normal();
        p.y += 0.5 * rng.normal();
    }
    const Trajectory a = kalman_smooth(noisy);
    const Trajectory b = kalman_smooth(noisy);
    REQUIRE(a.points.size() == b.points.size());
    for (std::size_t k = 0; k < a.points.size(); ++k) {
        CHECK(a.points[k].x == b.points[k].x);
        CHECK(a.points[k].y == b.points[k].y);
        CHECK(a.points[k].v == b.points[k].v);
        CHECK(a.points[k].a == b.points[k].a);
    }
}

TEST_CASE("kalman_smooth cuts position RMSE on noisy constant-velocity motion") {
    // 100 Monte-Carlo seeds, sigma = 0.5 m i.i.d. position noise on 10 m/s
    // CV motion: smoothed RMSE must average < 0.7x the raw RMSE.
    const Trajectory truth = cv_truth(200, 10.0, 0.35);
    double raw_sum = 0.0, smooth_sum = 0.0;
    int smooth_wins = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        Rng rng(derive_seed(909, seed));
        Trajectory noisy = truth;
        for (auto& p : noisy.points) {
            p.x += 0.5 * rng.normal();
            p.y += 0.5 * rng.normal();
        }
        const Trajectory sm = kalman_smooth(noisy);
        double raw_se = 0.0, smooth_se = 0.0;
        for (std::size_t k = 0; k < truth.points.size(); ++k) {
            const auto& tp = truth.points[k];
            raw_se += std::pow(noisy.points[k].x - tp.x, 2) + std::pow(noisy.points[k].y - tp.y, 2);
            smooth_se += std::pow(sm.points[k].x - tp.x, 2) + std::pow(sm.points[k].y - tp.y, 2);
        }
        const double raw_rmse = std::sqrt(raw_se / truth.points.size());
        const double smooth_rmse = std::sqrt(smooth_se / truth.points.size());
        raw_sum += raw_rmse;
        smooth_sum += smooth_rmse;
        if (smooth_rmse < raw_rmse) ++smooth_wins;
    }
    CHECK(smooth_sum / 100.0 < 0.7 * (raw_sum / 100.0));
    CHECK(smooth_wins == 100);  // never worse than the raw measurements
}
