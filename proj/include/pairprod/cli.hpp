#pragma once

#include "pairprod/analysis.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

// Configuration, artifact writing and subcommand dispatch behind the
// `pairprod` executable.

namespace pairprod::cli {

inline constexpr const char* tool_name = "pairprod";
inline constexpr const char* output_dir_env = "PAIRPROD_OUTPUT_DIR";

std::string version();

/// Fully resolved run configuration. Every key has a documented default.
struct RunConfig
{
    // field.*
    double eps = 0.1;
    double tau = 20.0;
    double omega = 1.0;
    double window_tau_multiples = 8.0;
    // well.*, envelope.*
    SauterWell well;
    double T_over_tau = 16.0;
    double t1_over_tau = 1.0;
    // numerics.*
    double qkt_dt = 0.0; ///< 0: min(0.02, 0.05 / max omega_k)
    double k_max = 6.0;
    std::size_t k_points = 1201;
    double k_perp = 0.0;
    double tdde_dt = 0.02;
    bool adapt_dt = true;
    double L = 137.0;
    std::size_t Nz = 2048;
    double spatial_dt = 0.0; ///< 0: 0.95 of the split-step limit
    std::size_t potential_samples = default_potential_samples;
    double energy_bin = 2e-3;
    // scan.*
    double omega_min = 0.4;
    double omega_max = 4.0;
    std::size_t scan_points = 100;
    std::vector<double> omegas; ///< explicit list; overrides the log range when non-empty
    std::string scan_method = "both";
    int n_max = 4;
    // run.*
    unsigned workers = 1;
    std::string output_dir; ///< empty: $PAIRPROD_OUTPUT_DIR, else ./pairprod_out
    unsigned long long seed = 0;

    /// Assigns one dotted key. Throws ConfigError naming the key on unknown keys or bad values.
    void set(const std::string& key, const std::string& value);
    /// Canonical text of one key.
    std::string get(const std::string& key) const;
    /// Throws ConfigError on the first violated invariant.
    void validate() const;

    /// Every key in documentation order.
    static const std::vector<std::string>& keys();
    static std::string describe(const std::string& key);
    std::vector<std::pair<std::string, std::string>> resolved() const;

    PulseField pulse() const;
    PulseField pulse(double omega) const;
    WellEnvelope envelope() const;
    qkt::MomentumGrid momentum_grid() const;
    spatial::SpatialGrid spatial_grid() const;
    analysis::ScanSetup scan_setup() const;
    std::vector<double> scan_omegas() const;
    std::filesystem::path output_path() const;
};

/// key=value lines; blank lines and lines starting with '#' are skipped.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path);

/// Defaults, then the file (if any), then overrides in order; validated.
RunConfig parse_config(const std::optional<std::filesystem::path>& path,
                       const std::vector<std::pair<std::string, std::string>>& overrides = {});

/// Shortest text that is exact at 17 significant digits.
std::string format_double(double x);

/// Comma separated rows with a header; floats via format_double.
class Csv
{
  public:
    explicit Csv(std::vector<std::string> header);
    void row(const std::vector<double>& values);
    void row(const std::vector<std::string>& cells);
    const std::string& text() const noexcept { return text_; }

  private:
    std::size_t width_;
    std::string text_;
};

std::string sha256_hex(const std::string& bytes);

/// Writes through a temporary file in the same directory and renames it into place.
void write_atomic(const std::filesystem::path& path, const std::string& content);

struct OutputFile
{
    std::string name;
    std::string sha256;
    std::size_t bytes = 0;
};

struct RunManifest
{
    std::string command;
    std::vector<std::pair<std::string, std::string>> config;
    std::vector<std::pair<std::string, double>> timings; ///< seconds per stage, in stage order
    std::vector<OutputFile> outputs;
    std::string version;

    std::string to_json() const;
};

inline const std::vector<std::string> commands = {"qkt",  "tdde-homog", "tdde-spatial", "bound-states",
                                                  "scan", "compare",    "enhance"};

/// Runs one subcommand and writes its artifacts plus manifest.json into the
/// output directory. Returns the manifest that was written.
RunManifest dispatch(const std::string& command, const RunConfig& config);

/// Entry point shared by the executable and the tests: 0 success, 1 solver failure, 2 bad configuration.
int main(int argc, char** argv);

} // namespace pairprod::cli
