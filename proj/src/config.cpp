#include "wfopt/config.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "wfopt/textfile.hpp"

namespace fs = std::filesystem;

namespace wfopt {

namespace {

using nlohmann::json;

[[noreturn]] void bad_key(const std::string& origin, const std::string& key,
                          const char* expect) {
    throw ConfigError(origin + ": key '" + key + "' must be " + expect);
}

double num_or(const json& j, const std::string& origin, const std::string& key,
              double fallback) {
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    if (!it->is_number()) bad_key(origin, key, "a number");
    return it->get<double>();
}

int int_or(const json& j, const std::string& origin, const std::string& key,
           int fallback) {
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    if (!it->is_number_integer()) bad_key(origin, key, "an integer");
    return it->get<int>();
}

std::string str_or(const json& j, const std::string& origin,
                   const std::string& key, const std::string& fallback) {
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    if (!it->is_string()) bad_key(origin, key, "a string");
    return it->get<std::string>();
}

GridSpec grid_or(const json& j, const std::string& origin,
                 const std::string& key, GridSpec fallback) {
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    if (!it->is_object()) bad_key(origin, key, "an object");
    GridSpec g = fallback;
    const std::string where = origin + ": " + key;
    g.n_id = int_or(*it, where, "n_id", g.n_id);
    g.n_iq = int_or(*it, where, "n_iq", g.n_iq);
    g.n_if = int_or(*it, where, "n_if", g.n_if);
    return g;
}

void parse_range(const json& j, const std::string& origin,
                 const std::string& key, double& lo, double& hi) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() ||
        !j[1].is_number())
        bad_key(origin, key, "a [min, max] number pair");
    lo = j[0].get<double>();
    hi = j[1].get<double>();
}

void parse_bounds(const json& j, const std::string& origin, DesignBounds& b) {
    if (!j.is_object()) bad_key(origin, "bounds", "an object");
    if (auto it = j.find("slot_width"); it != j.end())
        parse_range(*it, origin, "bounds.slot_width", b.slot_width_min,
                    b.slot_width_max);
    if (auto it = j.find("slot_depth"); it != j.end())
        parse_range(*it, origin, "bounds.slot_depth", b.slot_depth_min,
                    b.slot_depth_max);
    if (auto it = j.find("stator_yoke_width"); it != j.end())
        parse_range(*it, origin, "bounds.stator_yoke_width", b.yoke_width_min,
                    b.yoke_width_max);
    if (auto it = j.find("turns"); it != j.end()) {
        double lo = 0.0, hi = 0.0;
        parse_range(*it, origin, "bounds.turns", lo, hi);
        b.optimize_turns = true;
        b.turns_min = static_cast<int>(lo);
        b.turns_max = static_cast<int>(hi);
    }
}

ConstraintKind parse_kind(const std::string& origin, const std::string& text) {
    if (text == "lower_bound") return ConstraintKind::lower_bound;
    if (text == "upper_bound") return ConstraintKind::upper_bound;
    if (text == "maximize") return ConstraintKind::maximize;
    throw ConfigError(origin + ": unknown constraint kind '" + text + "'");
}

void parse_constraints(const json& j, const std::string& origin,
                       ConstraintSpec& spec) {
    if (!j.is_array()) bad_key(origin, "constraints", "an array");
    spec.items.clear();
    for (const auto& entry : j) {
        if (!entry.is_object())
            bad_key(origin, "constraints[]", "an object");
        Constraint c;
        c.name = str_or(entry, origin, "name", "");
        if (c.name.empty())
            throw ConfigError(origin + ": constraint entry without a name");
        c.kind = parse_kind(origin, str_or(entry, origin, "kind", "lower_bound"));
        c.threshold = num_or(entry, origin, "threshold", 0.0);
        c.weight = num_or(entry, origin, "weight", 1.0);
        spec.items.push_back(std::move(c));
    }
}

const std::string& path_for_role(const RunConfig& c, const std::string& role) {
    if (role == "design") return c.design_path;
    if (role == "reference_design") return c.reference_design_path;
    if (role == "vehicle") return c.vehicle_path;
    if (role == "reference_vehicle") return c.reference_vehicle_path;
    if (role == "cycle") return c.cycle_path;
    if (role == "device") return c.device_path;
    if (role == "reference_device") return c.reference_device_path;
    if (role == "gear") return c.gear_path;
    if (role == "reference_gear") return c.reference_gear_path;
    if (role == "economics") return c.economics_path;
    if (role == "materials") return c.materials_dir;
    throw ConfigError("unknown input role '" + role + "'");
}

std::string iso8601_utc_now() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return std::string(buf);
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
    const std::string text = read_file(path);
    json root = json::parse(text, nullptr, false);
    if (root.is_discarded())
        throw ConfigError(path + ": malformed JSON");
    if (!root.is_object())
        throw ConfigError(path + ": top level must be an object");

    RunConfig c;
    c.origin = path;
    c.config_hash = hash_bytes_hex(text);

    c.materials_dir = str_or(root, path, "materials_dir", c.materials_dir);
    c.design_path = str_or(root, path, "design", "");
    c.reference_design_path = str_or(root, path, "reference_design", "");
    c.vehicle_path = str_or(root, path, "vehicle", "");
    c.reference_vehicle_path = str_or(root, path, "reference_vehicle", "");
    c.cycle_path = str_or(root, path, "cycle", "");
    c.device_path = str_or(root, path, "device", "");
    c.reference_device_path = str_or(root, path, "reference_device", "");
    c.gear_path = str_or(root, path, "gear", "");
    c.reference_gear_path = str_or(root, path, "reference_gear", "");
    c.economics_path = str_or(root, path, "economics", "");
    c.output_dir = str_or(root, path, "output_dir", c.output_dir);

    if (auto it = root.find("seed"); it != root.end()) {
        if (!it->is_number_unsigned() && !it->is_number_integer())
            bad_key(path, "seed", "a nonnegative integer");
        const auto v = it->get<long long>();
        if (v < 0) bad_key(path, "seed", "a nonnegative integer");
        c.seed = static_cast<std::uint64_t>(v);
    }
    c.threads = int_or(root, path, "threads", c.threads);
    if (c.threads < 1) bad_key(path, "threads", "a positive integer");

    c.map_grid = grid_or(root, path, "map_grid", c.map_grid);
    c.search_grid = grid_or(root, path, "search_grid", c.search_grid);
    c.dc_link_voltage =
        num_or(root, path, "dc_link_voltage", c.dc_link_voltage);
    c.cycle_dc_voltage =
        num_or(root, path, "cycle_dc_voltage", c.cycle_dc_voltage);
    c.max_dc_voltage = num_or(root, path, "max_dc_voltage", c.max_dc_voltage);
    c.switching_frequency =
        num_or(root, path, "switching_frequency_hz", c.switching_frequency);
    if (c.dc_link_voltage <= 0.0 || c.cycle_dc_voltage <= 0.0 ||
        c.switching_frequency <= 0.0)
        throw ConfigError(path + ": voltages and switching frequency must be positive");
    if (c.dc_link_voltage > c.max_dc_voltage ||
        c.cycle_dc_voltage > c.max_dc_voltage)
        throw ConfigError(path + ": DC link voltage exceeds max_dc_voltage");

    const std::string strat = str_or(root, path, "strategy", "mtpl");
    if (strat == "mtpl") c.strategy = ControlStrategy::mtpl;
    else if (strat == "mtpa") c.strategy = ControlStrategy::mtpa;
    else throw ConfigError(path + ": unknown strategy '" + strat + "'");

    if (auto it = root.find("operating_points"); it != root.end()) {
        if (!it->is_object()) bad_key(path, "operating_points", "an object");
        auto& p = c.points;
        p.op1_torque = num_or(*it, path, "op1_torque_nm", p.op1_torque);
        p.op1_speed_rpm = num_or(*it, path, "op1_speed_rpm", p.op1_speed_rpm);
        p.op2_torque = num_or(*it, path, "op2_torque_nm", p.op2_torque);
        p.op2_speed_rpm = num_or(*it, path, "op2_speed_rpm", p.op2_speed_rpm);
        p.peak_torque_speed_rpm =
            num_or(*it, path, "peak_torque_speed_rpm", p.peak_torque_speed_rpm);
        p.peak_power_speed_rpm =
            num_or(*it, path, "peak_power_speed_rpm", p.peak_power_speed_rpm);
    }

    if (auto it = root.find("bounds"); it != root.end())
        parse_bounds(*it, path, c.bounds);

    if (auto it = root.find("ga"); it != root.end()) {
        if (!it->is_object()) bad_key(path, "ga", "an object");
        c.ga.population = int_or(*it, path, "population", c.ga.population);
        c.ga.generations = int_or(*it, path, "generations", c.ga.generations);
        c.ga.crossover_prob =
            num_or(*it, path, "crossover_prob", c.ga.crossover_prob);
        c.ga.sbx_eta = num_or(*it, path, "sbx_eta", c.ga.sbx_eta);
        c.ga.mutation_eta = num_or(*it, path, "mutation_eta", c.ga.mutation_eta);
        c.ga.mutation_rate =
            num_or(*it, path, "mutation_rate", c.ga.mutation_rate);
    }

    if (auto it = root.find("solver"); it != root.end()) {
        if (!it->is_object()) bad_key(path, "solver", "an object");
        c.solver.n_if = int_or(*it, path, "n_if", c.solver.n_if);
        c.solver.n_angle = int_or(*it, path, "n_angle", c.solver.n_angle);
        c.solver.n_mag = int_or(*it, path, "n_mag", c.solver.n_mag);
        c.solver.refine_rounds =
            int_or(*it, path, "refine_rounds", c.solver.refine_rounds);
    }

    if (auto it = root.find("constraints"); it != root.end())
        parse_constraints(*it, path, c.constraints);

    if (auto it = root.find("envelope_speeds_rpm"); it != root.end()) {
        if (!it->is_array()) bad_key(path, "envelope_speeds_rpm", "an array");
        c.envelope_speeds_rpm.clear();
        for (const auto& v : *it) {
            if (!v.is_number())
                bad_key(path, "envelope_speeds_rpm[]", "a number");
            c.envelope_speeds_rpm.push_back(v.get<double>());
        }
    }
    if (c.envelope_speeds_rpm.empty()) {
        for (int k = 0; k <= 28; ++k)
            c.envelope_speeds_rpm.push_back(500.0 * k);
    }

    if (auto it = root.find("efficiency_sweep"); it != root.end()) {
        if (!it->is_object()) bad_key(path, "efficiency_sweep", "an object");
        c.sweep.torque_max = num_or(*it, path, "torque_max_nm", c.sweep.torque_max);
        c.sweep.n_torque = int_or(*it, path, "n_torque", c.sweep.n_torque);
        c.sweep.speed_max_rpm =
            num_or(*it, path, "speed_max_rpm", c.sweep.speed_max_rpm);
        c.sweep.n_speed = int_or(*it, path, "n_speed", c.sweep.n_speed);
    }
    c.histogram_torque_bins =
        int_or(root, path, "histogram_torque_bins", c.histogram_torque_bins);
    c.histogram_speed_bins =
        int_or(root, path, "histogram_speed_bins", c.histogram_speed_bins);

    c.ga.seed = c.seed;
    return c;
}

void apply_env_overrides(RunConfig& config) {
    if (const char* v = std::getenv("WFOPT_SEED")) {
        char* end = nullptr;
        const unsigned long long parsed = std::strtoull(v, &end, 10);
        if (end == v || *end != '\0')
            throw ConfigError("WFOPT_SEED: not a nonnegative integer");
        config.seed = parsed;
        config.ga.seed = parsed;
    }
    if (const char* v = std::getenv("WFOPT_OUTPUT_DIR")) {
        if (*v == '\0') throw ConfigError("WFOPT_OUTPUT_DIR: empty path");
        config.output_dir = v;
    }
    if (const char* v = std::getenv("WFOPT_THREADS")) {
        char* end = nullptr;
        const long parsed = std::strtol(v, &end, 10);
        if (end == v || *end != '\0' || parsed < 1)
            throw ConfigError("WFOPT_THREADS: not a positive integer");
        config.threads = static_cast<int>(parsed);
    }
}

void require_inputs(const RunConfig& config,
                    const std::vector<std::string>& needs) {
    for (const auto& role : needs) {
        const std::string& path = path_for_role(config, role);
        if (path.empty())
            throw ConfigError(config.origin + ": missing '" + role +
                              "' path required by this command");
        std::error_code ec;
        if (role == "materials") {
            if (!fs::is_directory(path, ec))
                throw ConfigError(path + ": materials directory not found");
        } else if (!fs::is_regular_file(path, ec)) {
            throw ConfigError(path + ": file not found (required as " + role +
                              ")");
        }
    }
}

std::string hash_bytes_hex(const std::string& bytes) {
    return hash_hex(fnv1a64(bytes));
}

std::string hash_file_hex(const std::string& path) {
    return hash_bytes_hex(read_file(path));
}

OutputLock::OutputLock(const std::string& output_dir) {
    std::error_code ec;
    fs::create_directories(output_dir, ec);
    if (ec)
        throw ConfigError(output_dir + ": cannot create output directory");
    path_ = output_dir + "/.lock";
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0)
        throw ConfigError(output_dir +
                          ": output directory is locked by another run "
                          "(remove .lock if stale)");
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] ssize_t n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
    held_ = true;
}

OutputLock::~OutputLock() {
    if (held_) {
        std::error_code ec;
        fs::remove(path_, ec);
    }
}

OutputTransaction::~OutputTransaction() {
    if (committed_) return;
    for (const auto& p : paths_) {
        std::error_code ec;
        fs::remove(p, ec);
    }
}

void OutputTransaction::track(const std::string& path) {
    paths_.push_back(path);
}

void OutputTransaction::commit() { committed_ = true; }

void write_manifest(const std::string& path, const std::string& command,
                    const RunConfig& config,
                    const std::vector<ManifestEntry>& inputs,
                    const std::vector<ManifestEntry>& outputs) {
    json doc;
    doc["schema"] = "run_manifest/1";
    doc["command"] = command;
    doc["tool_version"] = kToolVersion;
    doc["config_path"] = config.origin;
    doc["config_hash"] = config.config_hash;
    doc["seed"] = config.seed;
    doc["threads"] = config.threads;
    doc["generated_at"] = iso8601_utc_now();
    doc["inputs"] = json::array();
    for (const auto& e : inputs)
        doc["inputs"].push_back({{"path", e.path}, {"hash", e.hash}});
    doc["outputs"] = json::array();
    for (const auto& e : outputs)
        doc["outputs"].push_back({{"path", e.path}, {"hash", e.hash}});
    write_file_atomic(path, doc.dump(2) + "\n");
}

}  // namespace wfopt
