// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. argv[1] is the CLI binary, used by the determinism criterion.

#include "barflex/analysis.hpp"
#include "barflex/continuation.hpp"
#include "barflex/fixtures.hpp"
#include "barflex/io.hpp"
#include "barflex/search.hpp"
#include "test_util.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace barflex;

namespace {

struct Checker {
    bool ok = true;
    std::string why;

    void require(bool cond, const std::string& what) {
        if (ok && !cond) {
            ok = false;
            why = what;
        }
    }
};

std::string fmt(double v) {
    std::ostringstream ss;
    ss << v;
    return ss.str();
}

Vector flat_four_bar(double cx, double dx) {
    Vector x(8);
    x << 0, 0, 1, 0, cx, 0, dx, 0;
    return x;
}

// sin of the angle between two rays in the plane.
double ray_angle_2d(double ax, double ay, double bx, double by) {
    const double na = std::hypot(ax, ay), nb = std::hypot(bx, by);
    return std::abs(ax * by - ay * bx) / (na * nb);
}

// Crank rates (theta1', theta2') of an ambient flex of the flat four-bar.
std::pair<double, double> crank_rates(const Vector& v) { return {v[7], v[5]}; }

// ---------------------------------------------------------------------------
// 1. Index-1 search from 16 random starts finds both collinear saddles with
//    clean certificates.

Checker four_bar_saddle_reproduction() {
    Checker c;
    SearchConfig cfg;
    cfg.record_history = false;
    const std::vector<SearchResult> results = multi_start(fixtures::four_bar(), cfg, 16);
    c.require(results.size() == 16, "expected 16 search results");

    const Vector target0 = flat_four_bar(3.0, 2.0);   // theta1 = theta2 = 0
    const Vector target_pi = flat_four_bar(-1.0, -2.0);  // theta1 = theta2 = pi
    int hits0 = 0, hits_pi = 0;
    for (const SearchResult& res : results) {
        c.require(res.converged, "start " + std::to_string(res.start_index) + " did not converge");
        if (!res.converged) continue;
        const bool at0 = (res.x - target0).norm() < 1e-6;
        const bool at_pi = (res.x - target_pi).norm() < 1e-6;
        hits0 += at0 ? 1 : 0;
        hits_pi += at_pi ? 1 : 0;
        if (!at0 && !at_pi) continue;

        const SingularityCertificate cert = certify(framework_at(fixtures::four_bar(), res.x));
        c.require(cert.kkt_residual < 1e-8,
                  "KKT residual " + fmt(cert.kkt_residual) + " at a collinear saddle");
        c.require(cert.licq_ok && cert.licq_margin > 1e-6,
                  "LICQ margin " + fmt(cert.licq_margin) + " too small");
        c.require(cert.eigenvalues.size() == 2, "tangent spectrum is not two-dimensional");
        if (cert.eigenvalues.size() == 2) {
            c.require(cert.eigenvalues[0] < -1e-6 && cert.eigenvalues[1] > 1e-6,
                      "eigen-signature is not (1 negative, 1 positive): {" +
                          fmt(cert.eigenvalues[0]) + ", " + fmt(cert.eigenvalues[1]) + "}");
        }
    }
    c.require(hits0 >= 1, "no start reached the theta = 0 saddle");
    c.require(hits_pi >= 1, "no start reached the theta = pi saddle");
    return c;
}

// ---------------------------------------------------------------------------
// 2. Realizable directions at the flat saddle match the analytic branch
//    tangents; directions orthogonal to them fail the stress test.

Checker four_bar_stress_test() {
    Checker c;
    const Framework fw = fixtures::four_bar(0.0, 0.0);
    const SingularityCertificate cert = certify(fw);
    c.require(cert.realizable_directions_ambient.size() == 2,
              "expected exactly 2 realizable directions, got " +
                  std::to_string(cert.realizable_directions_ambient.size()));
    if (!c.ok) return c;

    // Analytic level-set tangents in (theta1', theta2'): (1, 1) and (1, 3).
    const double analytic[2][2] = {{1.0, 1.0}, {1.0, 3.0}};
    for (const auto& ray : analytic) {
        double best = 1.0;
        for (const Vector& v : cert.realizable_directions_ambient) {
            const auto [t1, t2] = crank_rates(v);
            best = std::min(best, ray_angle_2d(t1, t2, ray[0], ray[1]));
        }
        c.require(best < 1e-6, "no realizable direction matches (" + fmt(ray[0]) + ", " +
                                   fmt(ray[1]) + "): best angle " + fmt(best));
    }

    // The orthogonal rays carry a nonvanishing stress form.
    const SelfStressBasis stresses = self_stresses(fw);
    c.require(stresses.count() == 1, "expected one self-stress");
    if (!c.ok) return c;
    const Vector omega = stresses.stresses.row(0).transpose();
    const double rejected[2][2] = {{1.0, -1.0}, {3.0, -1.0}};
    for (const auto& ray : rejected) {
        Vector v = Vector::Zero(8);
        v[7] = 2.0 * ray[0];  // D
        v[5] = 2.0 * ray[1];  // C
        double q = 0.0;
        for (int i = 0; i < fw.n_edges(); ++i) {
            const auto [a, b] = fw.topology.edges[static_cast<std::size_t>(i)];
            q += omega[i] * 2.0 * (v.segment(2 * a, 2) - v.segment(2 * b, 2)).squaredNorm();
        }
        c.require(std::abs(q) > 1e-3, "orthogonal direction (" + fmt(ray[0]) + ", " +
                                          fmt(ray[1]) + ") passes the stress test: Q = " +
                                          fmt(q));
    }
    return c;
}

// ---------------------------------------------------------------------------
// 3. Brute-force bisection of the raw edge equations near both saddles
//    reproduces the stress-test rays.

// |C - D|^2 - 1 with D = 2 e(base + t1), C = B + 2 e(base + t2), B = (1, 0).
double coupler_gap(double base, double t1, double t2) {
    const double dx = 1.0 + 2.0 * std::cos(base + t2) - 2.0 * std::cos(base + t1);
    const double dy = 2.0 * std::sin(base + t2) - 2.0 * std::sin(base + t1);
    return dx * dx + dy * dy - 1.0;
}

double bisect_t2(double base, double t1, double lo, double hi) {
    double flo = coupler_gap(base, t1, lo);
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fmid = coupler_gap(base, t1, mid);
        if ((flo < 0.0) == (fmid < 0.0)) {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

Checker brute_force_branch_oracle() {
    Checker c;
    const double r = 1e-5;

    struct SaddleCase {
        double base;
        Framework fw;
        double brackets[2][2];  // t2 bracket per branch, in units of t1
    };
    const SaddleCase cases[2] = {
        // Branch tangents (1, 1) and (1, 3): roots near t2 = t1 and 3 t1.
        {0.0, fixtures::four_bar(0.0, 0.0), {{0.2, 1.8}, {2.2, 3.8}}},
        // Branch tangents (1, 1) and (3, 1): roots near t2 = t1 and t1 / 3.
        {M_PI, fixtures::four_bar(M_PI, M_PI), {{0.5, 1.5}, {0.05, 0.6}}},
    };

    for (const SaddleCase& sc : cases) {
        const SingularityCertificate cert = certify(sc.fw);
        c.require(cert.realizable_directions_ambient.size() == 2,
                  "expected 2 realizable directions at base " + fmt(sc.base));
        if (!c.ok) return c;

        for (const auto& bracket : sc.brackets) {
            // Verify the bracket and solve on both sides of the saddle.
            for (double t1 : {r, -r}) {
                const double lo = bracket[0] * t1, hi = bracket[1] * t1;
                c.require(coupler_gap(sc.base, t1, lo) * coupler_gap(sc.base, t1, hi) < 0.0,
                          "bisection bracket does not straddle a root");
                if (!c.ok) return c;
                const double t2 = bisect_t2(sc.base, t1, lo, hi);

                double best = 1.0;
                for (const Vector& v : cert.realizable_directions_ambient) {
                    const auto [c1, c2] = crank_rates(v);
                    best = std::min(best, ray_angle_2d(c1, c2, t1, t2));
                }
                c.require(best < 1e-4, "oracle tangent (" + fmt(t1) + ", " + fmt(t2) +
                                           ") at base " + fmt(sc.base) +
                                           " is off by angle " + fmt(best));
            }
        }
    }
    return c;
}

// ---------------------------------------------------------------------------
// 4. Full heptagon pipeline: search, certificate, both branches.

Checker heptagon_pipeline() {
    Checker c;
    SearchConfig cfg;
    cfg.record_history = false;
    const SearchResult res = run_search(fixtures::heptagon_1(), cfg);
    c.require(res.converged, "search did not converge: " + res.failure_reason);
    if (!c.ok) return c;

    const Framework at = framework_at(fixtures::heptagon_1(), res.x);
    const SingularityCertificate cert = certify(at);
    c.require(cert.rigidity_rank == 9,
              "rigidity rank " + std::to_string(cert.rigidity_rank) + ", expected 9");
    c.require(cert.nontrivial_flex_dim == 2,
              "flex dimension " + std::to_string(cert.nontrivial_flex_dim) + ", expected 2");
    c.require(cert.self_stress_dim == 1,
              "self-stress dimension " + std::to_string(cert.self_stress_dim) + ", expected 1");
    c.require(cert.realizable_directions.size() == 2,
              "expected exactly 2 realizable directions, got " +
                  std::to_string(cert.realizable_directions.size()));
    c.require(cert.certified_singular_flexible, "certificate flag not set");
    if (!c.ok) return c;

    for (const Vector& u : cert.realizable_directions_ambient) {
        const FlexPath path = follow_branch(at, u, 50);
        c.require(!path.truncated, "branch truncated: " + path.failure_reason);
        c.require(path.n_steps() == 50,
                  "branch stopped after " + std::to_string(path.n_steps()) + " steps");
        for (double res_i : path.residuals)
            c.require(res_i < 1e-8, "fixed-edge residual " + fmt(res_i) + " on a branch");
    }
    return c;
}

// ---------------------------------------------------------------------------
// 5. Derivatives against central finite differences on random frameworks.

Checker derivative_correctness() {
    Checker c;
    RandomStream rs(1234);
    const double h = 1e-5;

    for (int rep = 0; rep < 50; ++rep) {
        const int d = 2 + rep % 2;
        const int n = 3 + static_cast<int>(rs.uniform() * 6.0);  // 3..8
        const Framework fw = testutil::random_framework(rs, n, d);
        const int dof = fw.dof();

        const auto central = [&](const std::function<double(const Vector&)>& f) {
            Vector g(dof);
            for (int i = 0; i < dof; ++i) {
                Vector xp = fw.config.coords, xm = fw.config.coords;
                xp[i] += h;
                xm[i] -= h;
                g[i] = (f(xp) - f(xm)) / (2.0 * h);
            }
            return g;
        };
        const auto rel_err = [](const Vector& got, const Vector& want) {
            return (got - want).cwiseAbs().maxCoeff() /
                   std::max(1.0, want.cwiseAbs().maxCoeff());
        };

        // Edge gradients and Hessians.
        for (int e = 0; e < fw.n_edges(); ++e) {
            const Vector fd = central(
                [&](const Vector& x) { return edge_residual(framework_at(fw, x), e); });
            c.require(rel_err(edge_gradient(fw, e), fd) < 1e-6,
                      "edge gradient mismatch on framework " + std::to_string(rep));

            const Matrix hess = edge_hessian(fw.topology, d, e);
            for (int i = 0; i < dof; ++i) {
                Vector xp = fw.config.coords, xm = fw.config.coords;
                xp[i] += h;
                xm[i] -= h;
                const Vector col = (edge_gradient(framework_at(fw, xp), e) -
                                    edge_gradient(framework_at(fw, xm), e)) /
                                   (2.0 * h);
                c.require(rel_err(hess.col(i), col) < 1e-6,
                          "edge Hessian mismatch on framework " + std::to_string(rep));
            }
        }

        // Energy gradient.
        const Vector fd_energy =
            central([&](const Vector& x) { return free_edge_energy(framework_at(fw, x)); });
        c.require(rel_err(free_edge_energy_gradient(fw), fd_energy) < 1e-6,
                  "energy gradient mismatch on framework " + std::to_string(rep));

        // Constraint Jacobian, free edge included every other repetition.
        const ConstraintSet cs(fw, rep % 2 == 0);
        const Matrix jac = cs.constraint_jacobian(fw.config.coords);
        for (int row = 0; row < cs.n_constraints(); ++row) {
            const Vector fd_row = central([&](const Vector& x) {
                return cs.constraint_values(x)[row];
            });
            c.require(rel_err(jac.row(row).transpose(), fd_row) < 1e-6,
                      "constraint Jacobian mismatch on framework " + std::to_string(rep));
        }
        if (!c.ok) return c;
    }
    return c;
}

// ---------------------------------------------------------------------------
// 6. Tangent projector identities and Newton projection on the heptagon.

Checker projector_and_projection() {
    Checker c;
    const Framework fw = fixtures::heptagon_1();
    const ConstraintSet cs(fw);
    const Vector x0 = fw.config.coords;

    const TangentFrame frame = tangent_frame(cs, x0);
    const Matrix p = tangent_projector(frame);
    c.require((p * p - p).cwiseAbs().maxCoeff() < 1e-8, "projector is not idempotent");
    c.require((p - p.transpose()).cwiseAbs().maxCoeff() < 1e-8, "projector is not symmetric");
    const Matrix jt = cs.constraint_jacobian(x0).transpose();
    c.require((p * jt).cwiseAbs().maxCoeff() < 1e-8,
              "projector does not annihilate constraint gradients");
    c.require(std::abs(p.trace() - frame.tangent_dim()) < 1e-8,
              "projector trace " + fmt(p.trace()) + " != tangent dimension " +
                  std::to_string(frame.tangent_dim()));

    RandomStream rs(5);
    for (double mag : {0.02, 0.05, 0.1}) {
        for (int rep = 0; rep < 3; ++rep) {
            Vector draw(cs.ambient_dim());
            for (int i = 0; i < draw.size(); ++i) draw[i] = rs.normal();
            Vector t = frame.tangent * (frame.tangent.transpose() * draw);
            t *= mag / t.norm();
            const ProjectionResult proj = newton_project(cs, x0 + t, x0, 1e-12, 50);
            c.require(proj.success, "projection failed from magnitude " + fmt(mag));
            if (!proj.success) continue;
            const double res = cs.constraint_values(proj.x).lpNorm<Eigen::Infinity>();
            c.require(res < 1e-12, "projected residual " + fmt(res) + " from magnitude " +
                                       fmt(mag));
        }
    }
    return c;
}

// ---------------------------------------------------------------------------
// 7. Index-1 search on the constrained quadratic model.

Checker quadratic_model_convergence() {
    Checker c;
    const testutil::QuadraticProblem problem = testutil::tilted_saddle_model();
    const Matrix a = problem.constraint_jacobian(Vector::Zero(3));

    SearchConfig cfg;
    cfg.step_size = 0.1;
    cfg.max_iters = 500;
    cfg.record_history = false;

    RandomStream rs(17);
    int tried = 0;
    while (tried < 20) {
        Vector z(3);
        for (int i = 0; i < 3; ++i) z[i] = rs.normal();
        z *= std::cbrt(rs.uniform()) / z.norm();   // uniform in the unit ball
        Vector x0 = z - a.transpose() * (a * z);  // onto the constraint plane
        if (x0.norm() < 0.05) continue;
        ++tried;

        const SearchResult res = run_search(problem, x0, cfg);
        c.require(res.converged, "start " + std::to_string(tried) + " did not converge");
        c.require(res.iterations <= 500,
                  "start " + std::to_string(tried) + " took " +
                      std::to_string(res.iterations) + " iterations");
        c.require(res.x.norm() < 1e-6, "start " + std::to_string(tried) +
                                           " ended at |x| = " + fmt(res.x.norm()));
        if (!c.ok) return c;
    }
    return c;
}

// ---------------------------------------------------------------------------
// 8. Byte-identical result JSON across two CLI runs on both fixtures.

Checker determinism(const std::string& cli) {
    Checker c;
    c.require(!cli.empty(), "CLI binary path not provided (argv[1])");
    if (!c.ok) return c;

    namespace fs = std::filesystem;
    const fs::path root = fs::temp_directory_path() / "barflex_acceptance";
    std::error_code ec;
    fs::remove_all(root, ec);

    for (const std::string fixture : {"four-bar", "heptagon-1"}) {
        std::string contents[2];
        for (int run = 0; run < 2; ++run) {
            const fs::path dir = root / fixture / ("run" + std::to_string(run));
            fs::create_directories(dir);
            const std::string cmd = "'" + cli + "' search --fixture " + fixture +
                                    " --seed 11 --out-dir '" + dir.string() +
                                    "' > /dev/null 2>&1";
            const int status = std::system(cmd.c_str());
            c.require(status == 0, fixture + " run " + std::to_string(run) +
                                       " exited with status " + std::to_string(status));
            if (!c.ok) return c;
            contents[run] = io::read_text_file((dir / "result.json").string());
        }
        c.require(!contents[0].empty(), fixture + ": empty result.json");
        c.require(contents[0] == contents[1],
                  fixture + ": result.json differs between identical runs");
    }
    fs::remove_all(root, ec);
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    const std::string cli = argc > 1 ? argv[1] : "";

    struct Criterion {
        const char* name;
        std::function<Checker()> run;
    };
    const Criterion criteria[] = {
        {"four-bar saddle reproduction", four_bar_saddle_reproduction},
        {"four-bar stress test", four_bar_stress_test},
        {"brute-force branch oracle", brute_force_branch_oracle},
        {"heptagon pipeline", heptagon_pipeline},
        {"derivative correctness", derivative_correctness},
        {"projector and manifold properties", projector_and_projection},
        {"quadratic-model convergence", quadratic_model_convergence},
        {"determinism", [&cli] { return determinism(cli); }},
    };

    int failures = 0;
    int number = 0;
    for (const Criterion& criterion : criteria) {
        ++number;
        Checker result;
        try {
            result = criterion.run();
        } catch (const std::exception& e) {
            result.ok = false;
            result.why = std::string("exception: ") + e.what();
        }
        if (result.ok) {
            std::cout << "PASS  criterion " << number << ": " << criterion.name << "\n";
        } else {
            ++failures;
            std::cout << "FAIL  criterion " << number << ": " << criterion.name << ": "
                      << result.why << "\n";
        }
    }
    std::cout << "acceptance: " << (8 - failures) << "/8 criteria passed" << std::endl;
    return failures == 0 ? 0 : 1;
}
