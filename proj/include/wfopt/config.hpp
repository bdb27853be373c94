#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wfopt/control.hpp"
#include "wfopt/mec.hpp"
#include "wfopt/optimize.hpp"

namespace wfopt {

inline constexpr const char* kToolVersion = "0.1.0";

// Axes for efficiency-map sweeps driven from the run configuration.
struct MapSweep {
    double torque_max = 600.0;  // N*m
    int n_torque = 13;
    double speed_max_rpm = 14000.0;
    int n_speed = 15;
};

// One JSON file describes a whole study; each command reads the sections it
// needs. The raw bytes are hashed (FNV-1a 64) and that hash is stamped into
// every artifact so outputs can be traced back to their configuration.
struct RunConfig {
    std::string origin;       // path the config was loaded from
    std::string config_hash;  // hex digest of the raw file bytes

    std::string materials_dir = "data/materials";
    std::string design_path;
    std::string reference_design_path;
    std::string vehicle_path;
    std::string reference_vehicle_path;
    std::string cycle_path;
    std::string device_path;
    std::string reference_device_path;
    std::string gear_path;
    std::string reference_gear_path;
    std::string economics_path;

    std::string output_dir = "out";
    std::uint64_t seed = 1;
    int threads = 1;

    GridSpec map_grid;               // full-resolution flux map
    GridSpec search_grid{9, 9, 5};   // coarse grid used inside the GA
    double dc_link_voltage = 625.0;  // design-rating checks
    double cycle_dc_voltage = 800.0;
    double max_dc_voltage = 900.0;
    double switching_frequency = 10e3;  // Hz
    ControlStrategy strategy = ControlStrategy::mtpl;

    OperatingPoints points;
    DesignBounds bounds;
    GaParams ga;
    SolverOptions solver;
    ConstraintSpec constraints = ConstraintSpec::benchmark();

    std::vector<double> envelope_speeds_rpm;  // default filled by loader
    MapSweep sweep;

    int histogram_torque_bins = 12;
    int histogram_speed_bins = 12;
};

// Parses the JSON config. Malformed JSON, wrong types or out-of-range
// values raise ConfigError naming the offending key.
RunConfig load_run_config(const std::string& path);

// Environment overrides (lower precedence than command-line flags):
// WFOPT_SEED, WFOPT_OUTPUT_DIR, WFOPT_THREADS.
void apply_env_overrides(RunConfig& config);

// Checks that every input file a command needs exists before any work
// starts. `needs` lists RunConfig path fields by role name, e.g. "design",
// "vehicle", "cycle", "device", "gear", "economics", "reference_design".
void require_inputs(const RunConfig& config,
                    const std::vector<std::string>& needs);

std::string hash_bytes_hex(const std::string& bytes);
std::string hash_file_hex(const std::string& path);

// Exclusive .lock file in the output directory; released on destruction.
// A held lock from another run raises ConfigError.
class OutputLock {
  public:
    explicit OutputLock(const std::string& output_dir);
    ~OutputLock();
    OutputLock(const OutputLock&) = delete;
    OutputLock& operator=(const OutputLock&) = delete;

  private:
    std::string path_;
    bool held_ = false;
};

// Registers artifacts while a command runs; anything not committed is
// deleted when the transaction unwinds, so failures leave no partial files.
class OutputTransaction {
  public:
    ~OutputTransaction();
    void track(const std::string& path);
    void commit();

  private:
    std::vector<std::string> paths_;
    bool committed_ = false;
};

struct ManifestEntry {
    std::string path;
    std::string hash;
};

// Run manifest: the only artifact carrying a timestamp, so repeated runs
// with the same seed produce byte-identical data files.
void write_manifest(const std::string& path, const std::string& command,
                    const RunConfig& config,
                    const std::vector<ManifestEntry>& inputs,
                    const std::vector<ManifestEntry>& outputs);

}  // namespace wfopt
