#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "barflex/analysis.hpp"
#include "barflex/continuation.hpp"
#include "barflex/framework.hpp"
#include "barflex/search.hpp"

namespace barflex::io {

/// Malformed or schema-violating input. The message carries the source name
/// plus line/column for parse errors and the offending field for schema errors.
struct InputError : std::runtime_error {
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Framework JSON schema:
/// { "dim": int, "vertices": [[x,y,...], ...], "edges": [[a,b], ...],
///   "free_edge": int, "rest_lengths": [..] optional (default: measured),
///   "pins": [{"vertex": int, "axis": int, "value": real}, ...] }
/// Unknown keys are rejected.
Framework parse_framework_json(const std::string& text,
                               const std::string& source_name = "<input>");
Framework load_framework_file(const std::string& path);

/// SearchConfig as a JSON object or a flat `key = value` TOML subset
/// (comments with #, no sections, no quoted strings). Keys: k, step_size,
/// tol, max_iters, projection_tol, projection_max_iter, max_step_halvings,
/// licq_tol, seed, perturb_scale, record_history. All optional; unknown keys
/// are rejected. seed accepts a number or a decimal string.
SearchConfig parse_search_config_json(const std::string& text,
                                      const std::string& source_name = "<config>");
SearchConfig parse_search_config_toml(const std::string& text,
                                      const std::string& source_name = "<config>");
/// Dispatches on extension: .json vs anything else (treated as TOML).
SearchConfig load_search_config_file(const std::string& path);

/// Shortest text that round-trips a double exactly (printf %.17g).
/// Non-finite values render as "null" so every emitted document stays JSON.
std::string format_real(double v);

/// The string as a JSON literal, quotes and escapes included.
std::string json_quote(const std::string& s);

std::string framework_to_json(const Framework& fw, int indent = 0);
std::string certificate_to_json(const SingularityCertificate& cert, int indent = 0);
std::string search_config_to_json(const SearchConfig& cfg, int indent = 0);

/// Full search report: outcome scalars, events, the final framework, and the
/// certificate when one was computed. Deterministic byte-for-byte for a fixed
/// (framework, config, seed).
std::string search_result_to_json(const SearchResult& result, const Framework& final_fw,
                                  const SingularityCertificate* cert);

/// Header `iter,energy,move_norm,constraint_inf,kkt_residual`, one row per
/// recorded iteration.
std::string history_to_csv(const std::vector<HistoryRow>& history);

/// One JSON object per line: {"t": cumulative arc position, "coords": [...],
/// "residual": max fixed-edge residual}.
std::string path_to_jsonl(const FlexPath& path);

struct RunManifest {
    std::string input;
    std::string command;
    std::string config_json;  // embedded verbatim as the config snapshot
    std::string tool_version;
    double wall_time_seconds = 0.0;
    std::vector<std::string> outputs;
};

std::string manifest_to_json(const RunManifest& manifest);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace barflex::io
