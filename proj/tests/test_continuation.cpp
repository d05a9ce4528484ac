#include <doctest.h>

#include "barflex/analysis.hpp"
#include "barflex/continuation.hpp"
#include "barflex/fixtures.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

using namespace barflex;

namespace {

// Realizable direction of the flat four-bar whose v_Cy / v_Dy ratio is
// closest to the requested value (1 for the parallelogram branch, 3 for the
// contra-rotating one).
Vector four_bar_direction(const Framework& fw, double ratio) {
    const SingularityCertificate cert = certify(fw);
    REQUIRE(cert.realizable_directions_ambient.size() == 2);
    const Vector* best = nullptr;
    double best_err = std::numeric_limits<double>::infinity();
    for (const Vector& v : cert.realizable_directions_ambient) {
        const double err = std::abs(v[5] / v[7] - ratio);
        if (err < best_err) {
            best_err = err;
            best = &v;
        }
    }
    REQUIRE(best_err < 1e-6);
    return *best;
}

Vector mirror_y(const Vector& x) {
    Vector out = x;
    for (int i = 1; i < out.size(); i += 2) out[i] = -out[i];
    return out;
}

}  // namespace

TEST_CASE("follow traces the parallelogram branch of the flat four-bar") {
    const Framework fw = fixtures::four_bar(0.0, 0.0);
    const Vector u = four_bar_direction(fw, 1.0);
    const ContinuationOptions opt;
    const FlexPath path = follow_branch(fw, u, 50, opt);

    CHECK_FALSE(path.truncated);
    CHECK(path.n_steps() == 50);
    REQUIRE(path.steps.size() == 51);
    REQUIRE(path.residuals.size() == 51);
    CHECK((path.steps[0] - fw.config.coords).norm() == 0.0);

    for (std::size_t i = 0; i < path.steps.size(); ++i) {
        const Vector& x = path.steps[i];
        CHECK(path.residuals[i] < 1e-8);
        // Pins are enforced exactly.
        CHECK(x[0] == 0.0);
        CHECK(x[1] == 0.0);
        CHECK(x[3] == 0.0);
        if (i > 0) {
            const double dist = (x - path.steps[i - 1]).norm();
            CHECK(dist < 2.0 * opt.arc_step);
            CHECK(dist > 1e-4);
        }
        // On this branch C - D stays equal to B.
        CHECK(std::abs(x[4] - x[6] - 1.0) < 1e-6);
        CHECK(std::abs(x[5] - x[7]) < 1e-6);
    }
}

TEST_CASE("follow rejects invalid input") {
    const Framework fw = fixtures::four_bar(0.0, 0.0);
    const Vector u = four_bar_direction(fw, 1.0);

    CHECK_THROWS_AS((void)follow_branch(fw, Vector::Zero(3), 5), std::invalid_argument);
    CHECK_THROWS_AS((void)follow_branch(fw, u, -1), std::invalid_argument);
    ContinuationOptions bad;
    bad.arc_step = 0.0;
    CHECK_THROWS_AS((void)follow_branch(fw, u, 5, bad), std::invalid_argument);

    // A direction with no tangent component cannot seed a branch.
    CHECK_THROWS_AS((void)follow_branch(fw, Vector::Unit(8, 4), 5), std::invalid_argument);
}

TEST_CASE("follow truncates on a flex that no branch realizes") {
    const Framework fw = fixtures::four_bar(0.0, 0.0);
    // First-order flex, but too far from both branch tangents for the
    // corrector to recover.
    Vector u = Vector::Zero(8);
    u[5] = 1.0;
    u[7] = -1.0;
    const FlexPath path = follow_branch(fw, u, 10);
    CHECK(path.truncated);
    CHECK(path.n_steps() == 0);
    CHECK(path.failure_reason.find("step 1") != std::string::npos);
}

TEST_CASE("zero steps yields the start configuration alone") {
    const Framework fw = fixtures::four_bar(0.0, 0.0);
    const Vector u = four_bar_direction(fw, 1.0);
    const FlexPath path = follow_branch(fw, u, 0);
    CHECK_FALSE(path.truncated);
    REQUIRE(path.steps.size() == 1);
    CHECK(path.residuals[0] < 1e-14);

    const auto profile = reparameterize_free_edge(fw, path);
    REQUIRE(profile.size() == 1);
    CHECK(profile[0].first == 0.0);
    CHECK(profile[0].second == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("the two sign choices trace mirror images") {
    const Framework fw = fixtures::four_bar(0.0, 0.0);
    const Vector u = four_bar_direction(fw, 1.0);

    const FlexPath plus = follow_branch(fw, u, 10);
    ContinuationOptions opt;
    opt.direction_sign = -1;
    const FlexPath minus = follow_branch(fw, u, 10, opt);

    REQUIRE_FALSE(plus.truncated);
    REQUIRE_FALSE(minus.truncated);
    CHECK(minus.direction_sign == -1);
    // The flat four-bar is symmetric across the x axis, so the two branches
    // leaving the saddle in opposite directions are exact mirror images.
    for (std::size_t i = 0; i < plus.steps.size(); ++i)
        CHECK((mirror_y(plus.steps[i]) - minus.steps[i]).norm() < 1e-6);
}

TEST_CASE("branches pass near observed deformed states") {
    const Framework fw = testutil::bent_heptagon();
    const SingularityCertificate cert = certify(fw);
    REQUIRE(cert.realizable_directions_ambient.size() == 2);

    // Trace both realizable directions in both signs.
    struct Traced {
        int dir;
        FlexPath path;
    };
    std::vector<Traced> traced;
    for (int dir = 0; dir < 2; ++dir) {
        for (int sign : {1, -1}) {
            ContinuationOptions opt;
            opt.direction_sign = sign;
            traced.push_back(
                {dir, follow_branch(fw, cert.realizable_directions_ambient[dir], 150, opt)});
            CHECK_FALSE(traced.back().path.truncated);
        }
    }

    // Each recorded deformed state sits on one branch, and they are not on
    // the same one.
    const Vector targets[2] = {testutil::bent_heptagon_deformed_1(),
                               testutil::bent_heptagon_deformed_2()};
    int matched_dir[2] = {-1, -1};
    for (int k = 0; k < 2; ++k) {
        double best = std::numeric_limits<double>::infinity();
        for (const Traced& t : traced) {
            for (const Vector& x : t.path.steps) {
                const double dist = (x - targets[k]).norm();
                if (dist < best) {
                    best = dist;
                    matched_dir[k] = t.dir;
                }
            }
        }
        CHECK(best < 0.01);
    }
    CHECK(matched_dir[0] != matched_dir[1]);
}

TEST_CASE("free edge reparameterization") {
    const Framework fw = fixtures::four_bar(0.0, 0.0);
    const Vector u = four_bar_direction(fw, 1.0);
    const FlexPath path = follow_branch(fw, u, 30);
    REQUIRE_FALSE(path.truncated);

    const auto profile = reparameterize_free_edge(fw, path);
    REQUIRE(profile.size() == path.steps.size());
    CHECK(profile[0].first == 0.0);
    double arc = 0.0;
    for (std::size_t i = 0; i < profile.size(); ++i) {
        if (i > 0) {
            arc += (path.steps[i] - path.steps[i - 1]).norm();
            CHECK(profile[i].first > profile[i - 1].first);
        }
        CHECK(profile[i].first == doctest::Approx(arc).epsilon(1e-12));
        // The branch lives on the level set, so the free edge length is
        // pinned at its starting value.
        CHECK(std::abs(profile[i].second - 1.0) < 1e-7);
    }

    CHECK_THROWS_AS((void)reparameterize_free_edge(fw, FlexPath{}), std::invalid_argument);
}

TEST_CASE("reparameterization reports a descending free edge") {
    // Synthetic path: swing the coupler-side crank while the other stays
    // put. Every non-free edge keeps its length and the free edge shortens
    // monotonically on this range.
    const Framework fw = fixtures::four_bar(0.8, 0.8);
    FlexPath path;
    for (int k = 0; k <= 8; ++k)
        path.steps.push_back(fixtures::four_bar(0.8, 0.8 + 0.05 * k).config.coords);
    path.residuals.assign(path.steps.size(), 0.0);

    const auto profile = reparameterize_free_edge(fw, path);
    REQUIRE(profile.size() == 9);
    CHECK(profile[0].second == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t i = 1; i < profile.size(); ++i)
        CHECK(profile[i].second < profile[i - 1].second - 1e-3);
}
