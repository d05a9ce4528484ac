#include "barflex/io.hpp"

#include <json.hpp>

#include <cctype>
#include <cerrno>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace barflex::io {

namespace {

using nlohmann::json;

std::string locate(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return std::to_string(line) + ":" + std::to_string(col);
}

json parse_json_text(const std::string& text, const std::string& source) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        // e.byte is 1-based and points one past the offending character.
        std::size_t byte = e.byte > 0 ? e.byte - 1 : 0;
        throw InputError(source + ":" + locate(text, byte) + ": " + e.what());
    }
}

[[noreturn]] void fail_field(const std::string& source, const std::string& field,
                             const std::string& msg) {
    throw InputError(source + ": field '" + field + "': " + msg);
}

void reject_unknown_keys(const json& obj, const std::vector<std::string>& allowed,
                         const std::string& source, const std::string& context) {
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const auto& key : allowed) {
            if (item.key() == key) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw InputError(source + ": unknown key '" + item.key() + "' in " + context);
        }
    }
}

const json& require_key(const json& obj, const char* key, const std::string& source) {
    auto it = obj.find(key);
    if (it == obj.end()) fail_field(source, key, "missing");
    return *it;
}

int as_int(const json& v, const std::string& source, const std::string& field) {
    if (!v.is_number_integer()) fail_field(source, field, "expected an integer");
    return v.get<int>();
}

double as_real(const json& v, const std::string& source, const std::string& field) {
    if (!v.is_number()) fail_field(source, field, "expected a number");
    return v.get<double>();
}

std::uint64_t parse_seed_string(const std::string& s, const std::string& source,
                                const std::string& field) {
    if (s.empty()) fail_field(source, field, "empty seed string");
    errno = 0;
    char* end = nullptr;
    unsigned long long value = std::strtoull(s.c_str(), &end, 10);
    if (errno != 0 || end != s.c_str() + s.size() || s[0] == '-') {
        fail_field(source, field, "expected an unsigned decimal integer, got '" + s + "'");
    }
    return static_cast<std::uint64_t>(value);
}

/// Serializer with explicit member order and %.17g reals.
class JsonWriter {
  public:
    explicit JsonWriter(int indent = 0) : indent_(indent) {}

    void begin_object() { open('{'); }
    void end_object() { close('}'); }
    void begin_array() { open('['); }
    void end_array() { close(']'); }

    void key(const char* name) {
        separate();
        out_ += '"';
        out_ += name;
        out_ += "\":";
        if (indent_ > 0) out_ += ' ';
        pending_key_ = true;
    }

    void value(double v) { raw(format_real(v)); }
    void value(int v) { raw(std::to_string(v)); }
    void value(bool v) { raw(v ? "true" : "false"); }
    void value(const std::string& v) { raw(quote(v)); }
    void value(const char* v) { raw(quote(v)); }
    void null() { raw("null"); }
    void raw(const std::string& text) {
        separate();
        out_ += text;
    }

    std::string take() { return std::move(out_); }

    static std::string quote(const std::string& s) {
        std::string q = "\"";
        for (char c : s) {
            switch (c) {
                case '"': q += "\\\""; break;
                case '\\': q += "\\\\"; break;
                case '\n': q += "\\n"; break;
                case '\r': q += "\\r"; break;
                case '\t': q += "\\t"; break;
                default:
                    if (static_cast<unsigned char>(c) < 0x20) {
                        char buf[8];
                        std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                        q += buf;
                    } else {
                        q += c;
                    }
            }
        }
        q += '"';
        return q;
    }

  private:
    void open(char c) {
        separate();
        out_ += c;
        depth_ += 1;
        had_item_.push_back(false);
    }

    void close(char c) {
        depth_ -= 1;
        bool had = had_item_.back();
        had_item_.pop_back();
        if (indent_ > 0 && had) newline_indent();
        out_ += c;
    }

    // Commas between siblings; a value directly after key() never separates.
    void separate() {
        if (pending_key_) {
            pending_key_ = false;
            return;
        }
        if (depth_ == 0) return;
        if (had_item_.back()) out_ += ',';
        had_item_.back() = true;
        if (indent_ > 0) newline_indent();
    }

    void newline_indent() {
        out_ += '\n';
        out_.append(static_cast<std::size_t>(depth_ * indent_), ' ');
    }

    std::string out_;
    int indent_ = 0;
    int depth_ = 0;
    bool pending_key_ = false;
    std::vector<bool> had_item_;
};

void write_vector(JsonWriter& w, const Vector& v) {
    w.begin_array();
    for (int i = 0; i < v.size(); ++i) w.value(v[i]);
    w.end_array();
}

void write_framework(JsonWriter& w, const Framework& fw) {
    w.begin_object();
    w.key("dim");
    w.value(fw.dim());
    w.key("vertices");
    w.begin_array();
    for (int i = 0; i < fw.n_vertices(); ++i) {
        w.begin_array();
        for (int a = 0; a < fw.dim(); ++a) w.value(fw.config.coords[i * fw.dim() + a]);
        w.end_array();
    }
    w.end_array();
    w.key("edges");
    w.begin_array();
    for (const auto& [a, b] : fw.topology.edges) {
        w.begin_array();
        w.value(a);
        w.value(b);
        w.end_array();
    }
    w.end_array();
    w.key("free_edge");
    w.value(fw.topology.free_edge);
    w.key("rest_lengths");
    write_vector(w, fw.rest_lengths);
    w.key("pins");
    w.begin_array();
    for (const auto& pin : fw.pins.pins) {
        w.begin_object();
        w.key("vertex");
        w.value(pin.vertex);
        w.key("axis");
        w.value(pin.axis);
        w.key("value");
        w.value(pin.value);
        w.end_object();
    }
    w.end_array();
    w.end_object();
}

void write_certificate(JsonWriter& w, const SingularityCertificate& cert) {
    w.begin_object();
    w.key("kkt_residual");
    w.value(cert.kkt_residual);
    w.key("licq_margin");
    w.value(cert.licq_margin);
    w.key("tangent_dim");
    w.value(cert.tangent_dim);
    w.key("eigenvalues");
    w.begin_array();
    for (double ev : cert.eigenvalues) w.value(ev);
    w.end_array();
    w.key("index");
    w.value(cert.index);
    w.key("degenerate");
    w.value(cert.degenerate);
    w.key("rigidity_rank");
    w.value(cert.rigidity_rank);
    w.key("nontrivial_flex_dim");
    w.value(cert.nontrivial_flex_dim);
    w.key("self_stress_dim");
    w.value(cert.self_stress_dim);
    w.key("realizable_directions");
    w.begin_array();
    for (const auto& dir : cert.realizable_directions) write_vector(w, dir);
    w.end_array();
    w.key("realizable_directions_ambient");
    w.begin_array();
    for (const auto& dir : cert.realizable_directions_ambient) write_vector(w, dir);
    w.end_array();
    w.key("licq_ok");
    w.value(cert.licq_ok);
    w.key("normal_space_residual");
    w.value(cert.normal_space_residual);
    w.key("certified_singular_flexible");
    w.value(cert.certified_singular_flexible);
    w.end_object();
}

void write_search_config(JsonWriter& w, const SearchConfig& cfg) {
    w.begin_object();
    w.key("k");
    w.value(cfg.k);
    w.key("step_size");
    w.value(cfg.step_size);
    w.key("tol");
    w.value(cfg.tol);
    w.key("max_iters");
    w.value(cfg.max_iters);
    w.key("projection_tol");
    w.value(cfg.projection_tol);
    w.key("projection_max_iter");
    w.value(cfg.projection_max_iter);
    w.key("max_step_halvings");
    w.value(cfg.max_step_halvings);
    w.key("licq_tol");
    w.value(cfg.licq_tol);
    w.key("seed");
    w.value(std::to_string(cfg.seed));
    w.key("perturb_scale");
    w.value(cfg.perturb_scale);
    w.key("record_history");
    w.value(cfg.record_history);
    w.end_object();
}

}  // namespace

Framework parse_framework_json(const std::string& text, const std::string& source_name) {
    json j = parse_json_text(text, source_name);
    if (!j.is_object()) throw InputError(source_name + ": top level must be a JSON object");
    reject_unknown_keys(j, {"dim", "vertices", "edges", "free_edge", "rest_lengths", "pins"},
                        source_name, "framework");

    Framework fw;
    fw.config.dim = as_int(require_key(j, "dim", source_name), source_name, "dim");
    if (fw.config.dim <= 0) fail_field(source_name, "dim", "must be positive");

    const json& verts = require_key(j, "vertices", source_name);
    if (!verts.is_array()) fail_field(source_name, "vertices", "expected an array");
    fw.topology.n_vertices = static_cast<int>(verts.size());
    fw.config.coords.resize(fw.topology.n_vertices * fw.config.dim);
    for (int i = 0; i < fw.topology.n_vertices; ++i) {
        const json& row = verts[static_cast<std::size_t>(i)];
        std::string field = "vertices[" + std::to_string(i) + "]";
        if (!row.is_array() || static_cast<int>(row.size()) != fw.config.dim) {
            fail_field(source_name, field,
                       "expected an array of " + std::to_string(fw.config.dim) + " numbers");
        }
        for (int a = 0; a < fw.config.dim; ++a) {
            fw.config.coords[i * fw.config.dim + a] =
                as_real(row[static_cast<std::size_t>(a)], source_name, field);
        }
    }

    const json& edges = require_key(j, "edges", source_name);
    if (!edges.is_array()) fail_field(source_name, "edges", "expected an array");
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const json& row = edges[e];
        std::string field = "edges[" + std::to_string(e) + "]";
        if (!row.is_array() || row.size() != 2) {
            fail_field(source_name, field, "expected a pair of vertex indices");
        }
        fw.topology.edges.emplace_back(as_int(row[0], source_name, field),
                                       as_int(row[1], source_name, field));
    }

    fw.topology.free_edge =
        as_int(require_key(j, "free_edge", source_name), source_name, "free_edge");

    const json& pins = require_key(j, "pins", source_name);
    if (!pins.is_array()) fail_field(source_name, "pins", "expected an array");
    for (std::size_t p = 0; p < pins.size(); ++p) {
        const json& row = pins[p];
        std::string field = "pins[" + std::to_string(p) + "]";
        if (!row.is_object()) fail_field(source_name, field, "expected an object");
        reject_unknown_keys(row, {"vertex", "axis", "value"}, source_name, field);
        Pin pin;
        pin.vertex = as_int(require_key(row, "vertex", source_name), source_name, field);
        pin.axis = as_int(require_key(row, "axis", source_name), source_name, field);
        pin.value = as_real(require_key(row, "value", source_name), source_name, field);
        fw.pins.pins.push_back(pin);
    }

    if (auto it = j.find("rest_lengths"); it != j.end()) {
        if (!it->is_array() || it->size() != fw.topology.edges.size()) {
            fail_field(source_name, "rest_lengths",
                       "expected an array of " + std::to_string(fw.topology.edges.size()) +
                           " numbers (one per edge)");
        }
        fw.rest_lengths.resize(static_cast<int>(it->size()));
        for (std::size_t i = 0; i < it->size(); ++i) {
            fw.rest_lengths[static_cast<int>(i)] =
                as_real((*it)[i], source_name, "rest_lengths[" + std::to_string(i) + "]");
        }
    } else if (fw.topology.free_edge >= 0 &&
               fw.topology.free_edge < fw.topology.n_edges() &&
               fw.topology.n_vertices * fw.config.dim ==
                   static_cast<int>(fw.config.coords.size())) {
        set_rest_lengths_from_config(fw);
    }

    try {
        fw.validate();
    } catch (const std::invalid_argument& e) {
        throw InputError(source_name + ": " + e.what());
    }
    return fw;
}

Framework load_framework_file(const std::string& path) {
    return parse_framework_json(read_text_file(path), path);
}

namespace {

// Shared key dispatch for both config formats. Setter receives a type-checked
// value extracted from JSON or from TOML text.
void set_config_key(SearchConfig& cfg, const std::string& key, const json& v,
                    const std::string& source) {
    if (key == "k") {
        cfg.k = as_int(v, source, key);
    } else if (key == "step_size") {
        cfg.step_size = as_real(v, source, key);
    } else if (key == "tol") {
        cfg.tol = as_real(v, source, key);
    } else if (key == "max_iters") {
        cfg.max_iters = as_int(v, source, key);
    } else if (key == "projection_tol") {
        cfg.projection_tol = as_real(v, source, key);
    } else if (key == "projection_max_iter") {
        cfg.projection_max_iter = as_int(v, source, key);
    } else if (key == "max_step_halvings") {
        cfg.max_step_halvings = as_int(v, source, key);
    } else if (key == "licq_tol") {
        cfg.licq_tol = as_real(v, source, key);
    } else if (key == "perturb_scale") {
        cfg.perturb_scale = as_real(v, source, key);
    } else if (key == "record_history") {
        if (!v.is_boolean()) fail_field(source, key, "expected true or false");
        cfg.record_history = v.get<bool>();
    } else if (key == "seed") {
        if (v.is_string()) {
            cfg.seed = parse_seed_string(v.get<std::string>(), source, key);
        } else if (v.is_number_unsigned()) {
            cfg.seed = v.get<std::uint64_t>();
        } else if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
            cfg.seed = static_cast<std::uint64_t>(v.get<std::int64_t>());
        } else {
            fail_field(source, key, "expected a non-negative integer or decimal string");
        }
    } else {
        throw InputError(source + ": unknown config key '" + key + "'");
    }
}

void validate_config(SearchConfig& cfg, const std::string& source) {
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw InputError(source + ": " + e.what());
    }
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

SearchConfig parse_search_config_json(const std::string& text, const std::string& source_name) {
    json j = parse_json_text(text, source_name);
    if (!j.is_object()) throw InputError(source_name + ": top level must be a JSON object");
    SearchConfig cfg;
    for (const auto& item : j.items()) set_config_key(cfg, item.key(), item.value(), source_name);
    validate_config(cfg, source_name);
    return cfg;
}

SearchConfig parse_search_config_toml(const std::string& text, const std::string& source_name) {
    SearchConfig cfg;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string where = source_name + ":" + std::to_string(line_no);
        if (std::size_t hash = line.find('#'); hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) continue;
        if (line[0] == '[') {
            throw InputError(where + ": sections are not supported in the flat config format");
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw InputError(where + ": expected 'key = value'");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw InputError(where + ": expected 'key = value'");
        }

        json v;
        if (key == "seed") {
            v = value;  // always routed through the decimal-string path
        } else if (value == "true" || value == "false") {
            v = (value == "true");
        } else if (key == "k" || key == "max_iters" || key == "projection_max_iter" ||
                   key == "max_step_halvings") {
            errno = 0;
            char* end = nullptr;
            long parsed = std::strtol(value.c_str(), &end, 10);
            if (errno != 0 || end != value.c_str() + value.size()) {
                throw InputError(where + ": expected an integer for '" + key + "'");
            }
            v = static_cast<std::int64_t>(parsed);
        } else {
            errno = 0;
            char* end = nullptr;
            double parsed = std::strtod(value.c_str(), &end);
            if (errno != 0 || end != value.c_str() + value.size()) {
                throw InputError(where + ": expected a number for '" + key + "'");
            }
            v = parsed;
        }
        set_config_key(cfg, key, v, where);
    }
    validate_config(cfg, source_name);
    return cfg;
}

SearchConfig load_search_config_file(const std::string& path) {
    std::string text = read_text_file(path);
    if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
        return parse_search_config_json(text, path);
    }
    return parse_search_config_toml(text, path);
}

std::string json_quote(const std::string& s) { return JsonWriter::quote(s); }

std::string format_real(double v) {
    if (!std::isfinite(v)) return "null";
    char buf[40];
    for (int precision = 1; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

std::string framework_to_json(const Framework& fw, int indent) {
    JsonWriter w(indent);
    write_framework(w, fw);
    return w.take();
}

std::string certificate_to_json(const SingularityCertificate& cert, int indent) {
    JsonWriter w(indent);
    write_certificate(w, cert);
    return w.take();
}

std::string search_config_to_json(const SearchConfig& cfg, int indent) {
    JsonWriter w(indent);
    write_search_config(w, cfg);
    return w.take();
}

std::string search_result_to_json(const SearchResult& result, const Framework& final_fw,
                                  const SingularityCertificate* cert) {
    JsonWriter w(2);
    w.begin_object();
    w.key("converged");
    w.value(result.converged);
    w.key("iterations");
    w.value(result.iterations);
    w.key("final_move");
    w.value(result.final_move);
    w.key("kkt_residual");
    w.value(result.kkt_residual);
    w.key("constraint_inf");
    w.value(result.constraint_inf);
    w.key("energy");
    w.value(result.energy);
    w.key("start_index");
    w.value(result.start_index);
    w.key("seed");
    w.value(std::to_string(result.seed));
    w.key("failure_reason");
    if (result.failure_reason.empty()) {
        w.null();
    } else {
        w.value(result.failure_reason);
    }
    w.key("events");
    w.begin_array();
    for (const auto& event : result.events) w.value(event);
    w.end_array();
    w.key("framework");
    write_framework(w, final_fw);
    w.key("certificate");
    if (cert != nullptr) {
        write_certificate(w, *cert);
    } else {
        w.null();
    }
    w.end_object();
    std::string out = w.take();
    out += '\n';
    return out;
}

std::string history_to_csv(const std::vector<HistoryRow>& history) {
    std::string out = "iter,energy,move_norm,constraint_inf,kkt_residual\n";
    for (const auto& row : history) {
        out += std::to_string(row.iter);
        out += ',';
        out += format_real(row.energy);
        out += ',';
        out += format_real(row.move_norm);
        out += ',';
        out += format_real(row.constraint_inf);
        out += ',';
        out += format_real(row.kkt_residual);
        out += '\n';
    }
    return out;
}

std::string path_to_jsonl(const FlexPath& path) {
    std::string out;
    double t = 0.0;
    for (std::size_t i = 0; i < path.steps.size(); ++i) {
        if (i > 0) t += (path.steps[i] - path.steps[i - 1]).norm();
        JsonWriter w(0);
        w.begin_object();
        w.key("t");
        w.value(t);
        w.key("coords");
        write_vector(w, path.steps[i]);
        w.key("residual");
        w.value(path.residuals[i]);
        w.end_object();
        out += w.take();
        out += '\n';
    }
    return out;
}

std::string manifest_to_json(const RunManifest& manifest) {
    JsonWriter w(2);
    w.begin_object();
    w.key("input");
    w.value(manifest.input);
    w.key("command");
    w.value(manifest.command);
    w.key("config");
    w.raw(manifest.config_json);
    w.key("tool_version");
    w.value(manifest.tool_version);
    w.key("wall_time_seconds");
    w.value(manifest.wall_time_seconds);
    w.key("outputs");
    w.begin_array();
    for (const auto& path : manifest.outputs) w.value(path);
    w.end_array();
    w.end_object();
    std::string out = w.take();
    out += '\n';
    return out;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << content;
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace barflex::io
