#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "barflex/analysis.hpp"
#include "barflex/continuation.hpp"
#include "barflex/fixtures.hpp"
#include "barflex/framework.hpp"
#include "barflex/io.hpp"
#include "barflex/search.hpp"
#include "barflex/svg.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNoConvergence = 3;
constexpr int kExitContinuation = 4;

using barflex::Framework;
using barflex::Vector;
using barflex::io::InputError;

struct CommonArgs {
    std::string input;
    std::string fixture;
    std::string config_path;
    std::string out_dir = ".";
    bool json = false;
    std::optional<std::uint64_t> seed;
};

void add_common_options(CLI::App* cmd, CommonArgs& args, bool with_input = true) {
    if (with_input) {
        auto* pos = cmd->add_option("input", args.input, "Framework JSON file");
        auto* fix = cmd->add_option("--fixture", args.fixture,
                                    "Built-in fixture: four-bar, heptagon-1, heptagon-2");
        pos->excludes(fix);
    }
    cmd->add_option("--config", args.config_path, "Search config file (JSON or flat TOML)");
    cmd->add_option("--seed", args.seed, "Random seed (overrides the config file)");
    cmd->add_option("--out-dir", args.out_dir, "Directory for output files");
    cmd->add_flag("--json", args.json, "Machine-readable stdout");
}

std::pair<Framework, std::string> resolve_input(const CommonArgs& args) {
    if (!args.fixture.empty()) {
        return {barflex::fixtures::by_name(args.fixture), "fixture:" + args.fixture};
    }
    if (args.input.empty()) {
        throw InputError("no input given; pass a framework JSON file or --fixture");
    }
    return {barflex::io::load_framework_file(args.input), args.input};
}

barflex::SearchConfig resolve_config(const CommonArgs& args) {
    barflex::SearchConfig cfg;
    if (!args.config_path.empty()) cfg = barflex::io::load_search_config_file(args.config_path);
    if (args.seed) cfg.seed = *args.seed;
    return cfg;
}

std::string out_path(const CommonArgs& args, const std::string& name) {
    std::filesystem::create_directories(args.out_dir);
    return (std::filesystem::path(args.out_dir) / name).string();
}

double constraint_licq_margin(const Framework& fw) {
    const barflex::ConstraintSet cs(fw, false);
    return barflex::tangent_frame(cs, fw.config.coords).sigma_min;
}

std::string int_list_json(const std::vector<int>& xs) {
    std::string out = "[";
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i > 0) out += ",";
        out += std::to_string(xs[i]);
    }
    return out + "]";
}

std::string vector_json(const Vector& v) {
    std::string out = "[";
    for (int i = 0; i < v.size(); ++i) {
        if (i > 0) out += ",";
        out += barflex::io::format_real(v[i]);
    }
    return out + "]";
}

std::string matrix_json(const barflex::Matrix& m) {
    std::string out = "[";
    for (int r = 0; r < m.rows(); ++r) {
        if (r > 0) out += ",";
        out += vector_json(m.row(r).transpose());
    }
    return out + "]";
}

// ---------------------------------------------------------------------------
// analyze

int cmd_analyze(const CommonArgs& args) {
    auto [fw, label] = resolve_input(args);
    const int trivial = barflex::rigid_motion_count(fw.dim());
    const int rank = barflex::svd_rank(barflex::rigidity_matrix(fw));
    const int flex_dim = static_cast<int>(barflex::nontrivial_flex_basis(fw).cols());
    const int stress_dim = barflex::self_stresses(fw).count();
    const double licq = constraint_licq_margin(fw);
    const std::vector<int> degenerate = fw.degenerate_edges();

    if (args.json) {
        std::cout << "{\"input\":" << barflex::io::json_quote(label)
                  << ",\"n_vertices\":" << fw.n_vertices() << ",\"dim\":" << fw.dim()
                  << ",\"n_edges\":" << fw.n_edges()
                  << ",\"free_edge\":" << fw.topology.free_edge
                  << ",\"under_constrained\":" << (fw.under_constrained() ? "true" : "false")
                  << ",\"rigidity_rank\":" << rank << ",\"nontrivial_flex_dim\":" << flex_dim
                  << ",\"self_stress_dim\":" << stress_dim
                  << ",\"licq_margin\":" << barflex::io::format_real(licq)
                  << ",\"degenerate_edges\":" << int_list_json(degenerate) << "}\n";
        return kExitOk;
    }

    std::cout << "input: " << label << "\n"
              << "vertices: " << fw.n_vertices() << "  dim: " << fw.dim()
              << "  edges: " << fw.n_edges() << " (free edge " << fw.topology.free_edge
              << ")\n"
              << "maxwell count (needs m + d(d+1)/2 < n*d): " << fw.n_edges() << " + "
              << trivial << " " << (fw.under_constrained() ? "<" : ">=") << " " << fw.dof()
              << " -> "
              << (fw.under_constrained() ? "under-constrained, flexibility possible"
                                         : "not under-constrained")
              << "\n"
              << "rigidity rank: " << rank << "\n"
              << "nontrivial flex dim: " << flex_dim << "\n"
              << "self stress dim: " << stress_dim << "\n"
              << "licq margin (fixed edges + pins): " << barflex::io::format_real(licq) << "\n";
    if (!degenerate.empty()) {
        std::cout << "degenerate edges:";
        for (int e : degenerate) std::cout << ' ' << e;
        std::cout << "\n";
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// search

struct SearchArgs {
    CommonArgs common;
    std::optional<int> k;
    std::optional<double> step_size;
    std::optional<double> tol;
    std::optional<int> max_iters;
    std::optional<double> perturb_scale;
    int starts = 1;
    bool parallel = false;
};

int cmd_search(const SearchArgs& sa) {
    auto [fw, label] = resolve_input(sa.common);
    barflex::SearchConfig cfg = resolve_config(sa.common);
    if (sa.k) cfg.k = *sa.k;
    if (sa.step_size) cfg.step_size = *sa.step_size;
    if (sa.tol) cfg.tol = *sa.tol;
    if (sa.max_iters) cfg.max_iters = *sa.max_iters;
    if (sa.perturb_scale) cfg.perturb_scale = *sa.perturb_scale;
    cfg.validate();
    barflex::validate_index_range(fw, cfg.k);

    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<barflex::SearchResult> results =
        barflex::multi_start(fw, cfg, sa.starts, sa.parallel);
    const barflex::SearchResult& best = results.front();
    const Framework final_fw = barflex::framework_at(fw, best.x);

    barflex::SingularityCertificate cert;
    bool have_cert = false;
    if (best.converged) {
        cert = barflex::certify(final_fw);
        have_cert = true;
    }

    const std::string result_json =
        barflex::io::search_result_to_json(best, final_fw, have_cert ? &cert : nullptr);
    const std::string result_path = out_path(sa.common, "result.json");
    const std::string history_path = out_path(sa.common, "history.csv");
    const std::string manifest_path = out_path(sa.common, "manifest.json");
    barflex::io::write_text_file(result_path, result_json);
    barflex::io::write_text_file(history_path, barflex::io::history_to_csv(best.history));

    const auto t1 = std::chrono::steady_clock::now();
    barflex::io::RunManifest manifest;
    manifest.input = label;
    manifest.command = "search";
    manifest.config_json = "{\"search\":" + barflex::io::search_config_to_json(cfg) +
                           ",\"n_starts\":" + std::to_string(sa.starts) + "}";
    manifest.tool_version = kVersion;
    manifest.wall_time_seconds = std::chrono::duration<double>(t1 - t0).count();
    manifest.outputs = {result_path, history_path, manifest_path};
    barflex::io::write_text_file(manifest_path, barflex::io::manifest_to_json(manifest));

    if (sa.common.json) {
        std::cout << result_json;
    } else {
        int n_converged = 0;
        for (const auto& r : results) n_converged += r.converged ? 1 : 0;
        std::cout << "starts: " << sa.starts << " (" << n_converged << " converged)\n"
                  << "best start: " << best.start_index << "  converged: "
                  << (best.converged ? "yes" : "no") << "  iterations: " << best.iterations
                  << "\n"
                  << "energy: " << barflex::io::format_real(best.energy)
                  << "  kkt residual: " << barflex::io::format_real(best.kkt_residual) << "\n";
        if (have_cert) {
            std::cout << "certificate: index " << cert.index << ", rigidity rank "
                      << cert.rigidity_rank << ", flex dim " << cert.nontrivial_flex_dim
                      << ", stress dim " << cert.self_stress_dim << ", "
                      << (cert.certified_singular_flexible
                              ? "certified singular and flexible"
                              : "not certified")
                      << "\n";
        }
        if (!best.converged) std::cout << "failure: " << best.failure_reason << "\n";
        std::cout << "wrote " << result_path << ", " << history_path << ", " << manifest_path
                  << "\n";
    }
    return best.converged ? kExitOk : kExitNoConvergence;
}

// ---------------------------------------------------------------------------
// certify / stress-test

int cmd_certify(const CommonArgs& args) {
    auto [fw, label] = resolve_input(args);
    const barflex::SingularityCertificate cert = barflex::certify(fw);
    const std::string cert_json = barflex::io::certificate_to_json(cert, 2) + "\n";
    const std::string cert_path = out_path(args, "certificate.json");
    barflex::io::write_text_file(cert_path, cert_json);

    if (args.json) {
        std::cout << cert_json;
    } else {
        std::cout << "input: " << label << "\n"
                  << "kkt residual: " << barflex::io::format_real(cert.kkt_residual) << "\n"
                  << "licq margin: " << barflex::io::format_real(cert.licq_margin)
                  << (cert.licq_ok ? " (ok)" : " (FAILED)") << "\n"
                  << "tangent dim: " << cert.tangent_dim << "  index: " << cert.index
                  << "  degenerate: " << (cert.degenerate ? "yes" : "no") << "\n"
                  << "eigenvalues:";
        for (double ev : cert.eigenvalues) std::cout << ' ' << barflex::io::format_real(ev);
        std::cout << "\n"
                  << "rigidity rank: " << cert.rigidity_rank << "  flex dim: "
                  << cert.nontrivial_flex_dim << "  stress dim: " << cert.self_stress_dim
                  << "\n"
                  << "realizable directions: " << cert.realizable_directions.size() << "\n"
                  << (cert.certified_singular_flexible ? "certified singular and flexible"
                                                       : "not certified singular")
                  << "\n"
                  << "wrote " << cert_path << "\n";
    }
    return kExitOk;
}

int cmd_stress_test(const CommonArgs& args) {
    auto [fw, label] = resolve_input(args);
    const barflex::Matrix flexes = barflex::nontrivial_flex_basis(fw);
    const barflex::SelfStressBasis stresses = barflex::self_stresses(fw);
    if (flexes.cols() == 0) {
        throw InputError(label + ": no nontrivial infinitesimal flexes; nothing to test");
    }
    const barflex::StressTestResult st =
        barflex::stress_test(fw, flexes, stresses.stresses);

    if (args.json) {
        std::cout << "{\"input\":" << barflex::io::json_quote(label)
                  << ",\"nontrivial_flex_dim\":" << flexes.cols()
                  << ",\"self_stress_dim\":" << stresses.count() << ",\"quadratic_forms\":[";
        for (std::size_t i = 0; i < st.quadratic_forms.size(); ++i) {
            if (i > 0) std::cout << ",";
            std::cout << matrix_json(st.quadratic_forms[i]);
        }
        std::cout << "],\"directions\":[";
        for (std::size_t i = 0; i < st.directions.size(); ++i) {
            if (i > 0) std::cout << ",";
            std::cout << vector_json(st.directions[i]);
        }
        std::cout << "],\"solved\":" << (st.solved ? "true" : "false")
                  << ",\"note\":" << barflex::io::json_quote(st.note) << "}\n";
        return kExitOk;
    }

    std::cout << "input: " << label << "\n"
              << "nontrivial flex dim: " << flexes.cols()
              << "  self stress dim: " << stresses.count() << "\n";
    for (std::size_t i = 0; i < st.quadratic_forms.size(); ++i) {
        std::cout << "stress form " << i << ":";
        const barflex::Matrix& q = st.quadratic_forms[i];
        for (int r = 0; r < q.rows(); ++r) {
            for (int c = 0; c < q.cols(); ++c) {
                std::cout << ' ' << barflex::io::format_real(q(r, c));
            }
            if (r + 1 < q.rows()) std::cout << " |";
        }
        std::cout << "\n";
    }
    if (st.solved) {
        std::cout << "realizable directions (flex coefficients):\n";
        for (const auto& dir : st.directions) {
            std::cout << " ";
            for (int i = 0; i < dir.size(); ++i) {
                std::cout << ' ' << barflex::io::format_real(dir[i]);
            }
            std::cout << "\n";
        }
        if (st.directions.empty()) std::cout << "  none (flex space fails the stress test)\n";
    }
    if (!st.note.empty()) std::cout << "note: " << st.note << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// follow

struct FollowArgs {
    CommonArgs common;
    std::string result_path;
    int direction = 0;
    int steps = 50;
    bool reverse = false;
    std::string direction_vector;  // comma-separated override, bypasses the certificate
    bool svg = false;
    std::optional<double> arc_step;
    std::optional<double> path_tol;
};

Vector parse_direction_vector(const std::string& text, int expected) {
    std::vector<double> values;
    std::stringstream ss(text);
    std::string token;
    while (std::getline(ss, token, ',')) {
        try {
            std::size_t used = 0;
            values.push_back(std::stod(token, &used));
            while (used < token.size() && std::isspace(static_cast<unsigned char>(token[used]))) {
                ++used;
            }
            if (used != token.size()) throw std::invalid_argument(token);
        } catch (const std::exception&) {
            throw InputError("--direction-vector: cannot parse '" + token + "' as a number");
        }
    }
    if (static_cast<int>(values.size()) != expected) {
        throw InputError("--direction-vector: expected " + std::to_string(expected) +
                         " comma-separated numbers, got " + std::to_string(values.size()));
    }
    Vector v(expected);
    for (int i = 0; i < expected; ++i) v[i] = values[static_cast<std::size_t>(i)];
    return v;
}

// Framework and certified ambient directions out of a search result JSON.
std::pair<Framework, std::vector<Vector>> load_search_result(const std::string& path) {
    const std::string text = barflex::io::read_text_file(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(path + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("framework")) {
        throw InputError(path + ": not a search result (missing 'framework')");
    }
    Framework fw = barflex::io::parse_framework_json(j["framework"].dump(), path + "#framework");
    std::vector<Vector> directions;
    if (j.contains("certificate") && j["certificate"].is_object()) {
        const auto& cert = j["certificate"];
        if (cert.contains("realizable_directions_ambient")) {
            for (const auto& row : cert["realizable_directions_ambient"]) {
                Vector v(static_cast<int>(row.size()));
                for (std::size_t i = 0; i < row.size(); ++i) {
                    v[static_cast<int>(i)] = row[i].get<double>();
                }
                directions.push_back(std::move(v));
            }
        }
    }
    return {std::move(fw), std::move(directions)};
}

int cmd_follow(const FollowArgs& fa) {
    auto [fw, directions] = load_search_result(fa.result_path);

    Vector u;
    if (!fa.direction_vector.empty()) {
        u = parse_direction_vector(fa.direction_vector, fw.dof());
    } else {
        if (directions.empty()) {
            throw InputError(fa.result_path +
                             ": certificate has no realizable directions to follow");
        }
        if (fa.direction < 0 || fa.direction >= static_cast<int>(directions.size())) {
            throw InputError("--direction " + std::to_string(fa.direction) +
                             " out of range; certificate has " +
                             std::to_string(directions.size()) + " realizable directions");
        }
        u = directions[static_cast<std::size_t>(fa.direction)];
    }

    barflex::ContinuationOptions opt;
    if (fa.arc_step) opt.arc_step = *fa.arc_step;
    if (fa.path_tol) opt.path_tol = *fa.path_tol;
    opt.direction_sign = fa.reverse ? -1 : 1;

    const barflex::FlexPath path = barflex::follow_branch(fw, u, fa.steps, opt);

    const std::string jsonl_path = out_path(fa.common, "path.jsonl");
    barflex::io::write_text_file(jsonl_path, barflex::io::path_to_jsonl(path));
    std::vector<std::string> written = {jsonl_path};

    if (fa.svg) {
        const Framework first = barflex::framework_at(fw, path.steps.front());
        const Framework last = barflex::framework_at(fw, path.steps.back());
        const std::string first_path = out_path(fa.common, "path_first.svg");
        const std::string last_path = out_path(fa.common, "path_last.svg");
        barflex::io::write_text_file(first_path, barflex::svg::render_framework(first, &u));
        barflex::io::write_text_file(last_path, barflex::svg::render_framework(last));
        written.push_back(first_path);
        written.push_back(last_path);
    }

    std::cout << "path: " << path.n_steps() << " steps written ("
              << (path.truncated ? "truncated" : "complete") << ")";
    for (const auto& w : written) std::cout << " " << w;
    std::cout << "\n";
    if (path.truncated) {
        std::cerr << "continuation failed: " << path.failure_reason << "\n";
        return kExitContinuation;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// render

struct RenderArgs {
    CommonArgs common;
    std::string out_file;
    std::optional<int> flex;
};

int cmd_render(const RenderArgs& ra) {
    Framework fw;
    std::vector<Vector> directions;
    std::string label;
    if (!ra.common.input.empty()) {
        // A search result (has "framework") or a bare framework JSON.
        const std::string text = barflex::io::read_text_file(ra.common.input);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw InputError(ra.common.input + ": " + e.what());
        }
        if (j.is_object() && j.contains("framework")) {
            std::tie(fw, directions) = load_search_result(ra.common.input);
        } else {
            fw = barflex::io::parse_framework_json(text, ra.common.input);
        }
        label = ra.common.input;
    } else {
        std::tie(fw, label) = resolve_input(ra.common);
    }

    const Vector* flex_ptr = nullptr;
    Vector flex;
    if (ra.flex) {
        if (*ra.flex < 0 || *ra.flex >= static_cast<int>(directions.size())) {
            throw InputError("--flex " + std::to_string(*ra.flex) +
                             " out of range; input carries " +
                             std::to_string(directions.size()) + " flex directions");
        }
        flex = directions[static_cast<std::size_t>(*ra.flex)];
        flex_ptr = &flex;
    }

    const std::string svg = barflex::svg::render_framework(fw, flex_ptr);
    const std::string target =
        ra.out_file.empty() ? out_path(ra.common, "render.svg") : ra.out_file;
    barflex::io::write_text_file(target, svg);
    std::cout << "wrote " << target << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Singular flexible bar frameworks: saddle search, certification, flex tracing"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    CommonArgs analyze_args;
    auto* analyze = app.add_subcommand("analyze", "Rigidity and constraint diagnostics");
    add_common_options(analyze, analyze_args);

    SearchArgs search_args;
    auto* search = app.add_subcommand("search", "Constrained index-k saddle search");
    add_common_options(search, search_args.common);
    search->add_option("--k", search_args.k, "Saddle index");
    search->add_option("--step-size", search_args.step_size, "Gradient step size");
    search->add_option("--tol", search_args.tol, "Convergence tolerance on the iterate move");
    search->add_option("--max-iters", search_args.max_iters, "Iteration cap");
    search->add_option("--perturb-scale", search_args.perturb_scale,
                       "Multi-start tangent perturbation scale");
    search->add_option("--starts", search_args.starts, "Number of search starts");
    search->add_flag("--parallel", search_args.parallel, "Run starts on separate threads");

    CommonArgs certify_args;
    auto* certify = app.add_subcommand("certify", "Certify the input configuration");
    add_common_options(certify, certify_args);

    CommonArgs stress_args;
    auto* stress = app.add_subcommand("stress-test", "Second-order stress test");
    add_common_options(stress, stress_args);

    FollowArgs follow_args;
    auto* follow = app.add_subcommand("follow", "Trace a nonlinear flex branch");
    follow->add_option("result", follow_args.result_path, "Search result JSON")->required();
    add_common_options(follow, follow_args.common, /*with_input=*/false);
    follow->add_option("--direction", follow_args.direction,
                       "Index into the certificate's realizable directions");
    follow->add_option("--steps", follow_args.steps, "Number of continuation steps");
    follow->add_flag("--reverse", follow_args.reverse, "Follow the opposite orientation");
    follow->add_option("--direction-vector", follow_args.direction_vector,
                       "Comma-separated ambient direction overriding the certificate");
    follow->add_flag("--svg", follow_args.svg, "Render first/last frames");
    follow->add_option("--arc-step", follow_args.arc_step, "Predictor arc length");
    follow->add_option("--path-tol", follow_args.path_tol, "Corrector residual tolerance");

    RenderArgs render_args;
    auto* render = app.add_subcommand("render", "Deterministic SVG rendering");
    render->add_option("input", render_args.common.input,
                       "Framework JSON or search result JSON");
    render->add_option("--fixture", render_args.common.fixture,
                       "Built-in fixture: four-bar, heptagon-1, heptagon-2");
    render->add_option("--out-dir", render_args.common.out_dir, "Directory for output files");
    render->add_option("-o,--out", render_args.out_file, "Output SVG path");
    render->add_option("--flex", render_args.flex,
                       "Overlay arrows for this realizable direction (result input)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (analyze->parsed()) return cmd_analyze(analyze_args);
        if (search->parsed()) return cmd_search(search_args);
        if (certify->parsed()) return cmd_certify(certify_args);
        if (stress->parsed()) return cmd_stress_test(stress_args);
        if (follow->parsed()) return cmd_follow(follow_args);
        if (render->parsed()) return cmd_render(render_args);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
