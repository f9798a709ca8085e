#include "pairprod/cli.hpp"

#include "pairprod/errors.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <stdexcept>

#ifndef PAIRPROD_VERSION
#define PAIRPROD_VERSION "0.0.0"
#endif

namespace pairprod::cli {

using json = nlohmann::ordered_json;

std::string version()
{
    return PAIRPROD_VERSION;
}

// ---------------------------------------------------------------------------
// Value parsing

namespace {

std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

double parse_double(const std::string& key, const std::string& text)
{
    const std::string t = trim(text);
    double v = 0.0;
    const char* end = t.data() + t.size();
    const auto [ptr, ec] = std::from_chars(t.data(), end, v);
    if (t.empty() || ec != std::errc() || ptr != end || !std::isfinite(v))
        throw ConfigError(key, "not a finite number: '" + text + "'");
    return v;
}

unsigned long long parse_unsigned(const std::string& key, const std::string& text)
{
    const std::string t = trim(text);
    unsigned long long v = 0;
    const char* end = t.data() + t.size();
    const auto [ptr, ec] = std::from_chars(t.data(), end, v);
    if (t.empty() || ec != std::errc() || ptr != end)
        throw ConfigError(key, "not a non-negative integer: '" + text + "'");
    return v;
}

bool parse_bool(const std::string& key, const std::string& text)
{
    const std::string t = trim(text);
    if (t == "true" || t == "1") return true;
    if (t == "false" || t == "0") return false;
    throw ConfigError(key, "expected true or false: '" + text + "'");
}

std::vector<double> parse_list(const std::string& key, const std::string& text)
{
    std::vector<double> out;
    if (trim(text).empty()) return out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_double(key, item));
    return out;
}

std::string join(const std::vector<double>& values)
{
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        out += format_double(values[i]);
    }
    return out;
}

struct KeySpec
{
    std::string name;
    std::string help;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <class T>
KeySpec real(std::string name, std::string help, T RunConfig::*member)
{
    return {name, std::move(help), [member, name](RunConfig& c, const std::string& v) { c.*member = parse_double(name, v); },
            [member](const RunConfig& c) { return format_double(c.*member); }};
}

KeySpec well_real(std::string name, std::string help, double SauterWell::*member)
{
    return {name, std::move(help),
            [member, name](RunConfig& c, const std::string& v) { c.well.*member = parse_double(name, v); },
            [member](const RunConfig& c) { return format_double(c.well.*member); }};
}

template <class T>
KeySpec integer(std::string name, std::string help, T RunConfig::*member)
{
    return {name, std::move(help),
            [member, name](RunConfig& c, const std::string& v) {
                const auto x = parse_unsigned(name, v);
                if (x > static_cast<unsigned long long>(std::numeric_limits<T>::max()))
                    throw ConfigError(name, "value too large");
                c.*member = static_cast<T>(x);
            },
            [member](const RunConfig& c) { return std::to_string(c.*member); }};
}

const std::vector<KeySpec>& registry()
{
    static const std::vector<KeySpec> specs = {
        real("field.eps", "peak field strength in units of m^2", &RunConfig::eps),
        real("field.tau", "Gaussian envelope width in 1/m", &RunConfig::tau),
        real("field.omega", "carrier frequency in m", &RunConfig::omega),
        real("field.window_tau_multiples", "simulation window is [-x tau, x tau]", &RunConfig::window_tau_multiples),
        well_real("well.V0", "well depth in m", &SauterWell::V0),
        well_real("well.W", "well width in 1/m", &SauterWell::W),
        well_real("well.D", "edge thickness in 1/m", &SauterWell::D),
        real("envelope.T_over_tau", "well switching window T in units of tau", &RunConfig::T_over_tau),
        real("envelope.t1_over_tau", "well ramp time t1 in units of tau", &RunConfig::t1_over_tau),
        real("numerics.qkt_dt", "RK4 step; 0 picks min(0.02, 0.05 / max omega_k)", &RunConfig::qkt_dt),
        real("numerics.k_max", "momentum cutoff for QKT grids and TDDE box modes", &RunConfig::k_max),
        integer("numerics.k_points", "odd number of QKT momentum points on [-k_max, k_max]", &RunConfig::k_points),
        real("numerics.k_perp", "transverse momentum of the QKT modes", &RunConfig::k_perp),
        real("numerics.tdde_dt", "homogeneous TDDE step", &RunConfig::tdde_dt),
        {"numerics.adapt_dt", "shrink the TDDE step to its phase limit when needed",
         [](RunConfig& c, const std::string& v) { c.adapt_dt = parse_bool("numerics.adapt_dt", v); },
         [](const RunConfig& c) { return std::string(c.adapt_dt ? "true" : "false"); }},
        real("numerics.L", "box length in Compton wavelengths", &RunConfig::L),
        integer("numerics.Nz", "spatial grid points (power of two)", &RunConfig::Nz),
        real("numerics.spatial_dt", "split-operator step; 0 picks 0.95 of its stability limit", &RunConfig::spatial_dt),
        integer("numerics.potential_samples", "samples of the vector-potential table", &RunConfig::potential_samples),
        real("numerics.energy_bin", "energy bin width of dN/dE", &RunConfig::energy_bin),
        real("scan.omega_min", "lower end of the log-spaced frequency scan", &RunConfig::omega_min),
        real("scan.omega_max", "upper end of the log-spaced frequency scan", &RunConfig::omega_max),
        integer("scan.points", "number of log-spaced frequencies", &RunConfig::scan_points),
        {"scan.omegas", "comma separated frequencies; replaces the log range when set",
         [](RunConfig& c, const std::string& v) { c.omegas = parse_list("scan.omegas", v); },
         [](const RunConfig& c) { return join(c.omegas); }},
        {"scan.method", "both | qkt | tdde_homog | tdde_spatial",
         [](RunConfig& c, const std::string& v) { c.scan_method = trim(v); },
         [](const RunConfig& c) { return c.scan_method; }},
        integer("scan.n_max", "highest photon number for threshold detection", &RunConfig::n_max),
        integer("run.workers", "worker threads", &RunConfig::workers),
        {"run.output_dir", "output directory; empty uses $PAIRPROD_OUTPUT_DIR, then ./pairprod_out",
         [](RunConfig& c, const std::string& v) { c.output_dir = trim(v); },
         [](const RunConfig& c) { return c.output_dir; }},
        integer("run.seed", "seed for sampled diagnostics (none of the current outputs sample)", &RunConfig::seed),
    };
    return specs;
}

const KeySpec& find_key(const std::string& key)
{
    for (const KeySpec& s : registry())
        if (s.name == key) return s;
    throw ConfigError(key, "unknown configuration key");
}

} // namespace

void RunConfig::set(const std::string& key, const std::string& value)
{
    find_key(key).set(*this, value);
}

std::string RunConfig::get(const std::string& key) const
{
    return find_key(key).get(*this);
}

const std::vector<std::string>& RunConfig::keys()
{
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n;
        for (const KeySpec& s : registry()) n.push_back(s.name);
        return n;
    }();
    return names;
}

std::string RunConfig::describe(const std::string& key)
{
    return find_key(key).help;
}

std::vector<std::pair<std::string, std::string>> RunConfig::resolved() const
{
    std::vector<std::pair<std::string, std::string>> out;
    for (const KeySpec& s : registry()) out.emplace_back(s.name, s.get(*this));
    return out;
}

void RunConfig::validate() const
{
    if (!(eps >= 0.0)) throw ConfigError("field.eps", "must be >= 0");
    if (!(tau > 0.0)) throw ConfigError("field.tau", "must be > 0");
    if (!(omega > 0.0)) throw ConfigError("field.omega", "must be > 0");
    if (!(window_tau_multiples > 0.0)) throw ConfigError("field.window_tau_multiples", "must be > 0");
    if (eps > 0.0 && 0.5 * window_tau_multiples * window_tau_multiples < 32.0 * (1.0 - 1e-12))
        throw ConfigError("field.window_tau_multiples", "window must extend to at least 8 tau");
    well.validate();
    if (!(T_over_tau > 0.0)) throw ConfigError("envelope.T_over_tau", "must be > 0");
    if (!(t1_over_tau > 0.0) || 2.0 * t1_over_tau > T_over_tau)
        throw ConfigError("envelope.t1_over_tau", "must be > 0 and at most T/2");
    if (0.5 * T_over_tau > window_tau_multiples * (1.0 + 1e-12))
        throw ConfigError("envelope.T_over_tau", "switching window must lie inside the field window");
    if (!(qkt_dt >= 0.0)) throw ConfigError("numerics.qkt_dt", "must be >= 0");
    if (!(k_max > 0.0)) throw ConfigError("numerics.k_max", "must be > 0");
    if (k_points < 3 || k_points % 2 == 0) throw ConfigError("numerics.k_points", "must be odd and >= 3");
    if (!(k_perp >= 0.0)) throw ConfigError("numerics.k_perp", "must be >= 0");
    if (!(tdde_dt > 0.0)) throw ConfigError("numerics.tdde_dt", "must be > 0");
    if (!(L > 0.0)) throw ConfigError("numerics.L", "must be > 0");
    if (Nz < 256 || !std::has_single_bit(Nz)) throw ConfigError("numerics.Nz", "must be a power of two >= 256");
    if (!(L / static_cast<double>(Nz) < 0.25)) throw ConfigError("numerics.Nz", "grid spacing L/Nz must be < 0.25");
    if (!(spatial_dt >= 0.0)) throw ConfigError("numerics.spatial_dt", "must be >= 0");
    if (!(energy_bin > 0.0)) throw ConfigError("numerics.energy_bin", "must be > 0");
    if (!(omega_min > 0.0)) throw ConfigError("scan.omega_min", "must be > 0");
    if (!(omega_max > omega_min)) throw ConfigError("scan.omega_max", "must exceed scan.omega_min");
    if (scan_points < 2) throw ConfigError("scan.points", "must be >= 2");
    for (std::size_t i = 0; i < omegas.size(); ++i)
        if (!(omegas[i] > 0.0) || (i > 0 && !(omegas[i] > omegas[i - 1])))
            throw ConfigError("scan.omegas", "must be positive and strictly increasing");
    if (scan_method != "both" && scan_method != "qkt" && scan_method != "tdde_homog" && scan_method != "tdde_spatial")
        throw ConfigError("scan.method", "must be one of both, qkt, tdde_homog, tdde_spatial");
    if (n_max < 1) throw ConfigError("scan.n_max", "must be >= 1");
    if (workers < 1) throw ConfigError("run.workers", "must be >= 1");

    const double highest = std::max({omega, omegas.empty() ? omega_max : omegas.back()});
    if (static_cast<double>(potential_samples) < 1000.0 * tau * highest)
        throw ConfigError("numerics.potential_samples", "need at least 1000 samples per unit of tau * omega");
}

PulseField RunConfig::pulse() const
{
    return pulse(omega);
}

PulseField RunConfig::pulse(double w) const
{
    return PulseField::centered(eps, tau, w, window_tau_multiples);
}

WellEnvelope RunConfig::envelope() const
{
    return {T_over_tau * tau, t1_over_tau * tau};
}

qkt::MomentumGrid RunConfig::momentum_grid() const
{
    return {-k_max, k_max, k_points};
}

spatial::SpatialGrid RunConfig::spatial_grid() const
{
    return {L, Nz};
}

analysis::ScanSetup RunConfig::scan_setup() const
{
    analysis::ScanSetup s;
    s.eps = eps;
    s.tau = tau;
    s.window_tau_multiples = window_tau_multiples;
    s.potential_samples = potential_samples;
    s.qkt_grid = momentum_grid();
    s.qkt.dt = qkt_dt;
    s.qkt.k_perp = k_perp;
    s.qkt.workers = workers;
    s.tdde.L = L;
    s.tdde.dt = tdde_dt;
    s.tdde.k_max = k_max;
    s.tdde.adapt_dt = adapt_dt;
    s.tdde.workers = workers;
    s.grid = spatial_grid();
    s.well = well;
    s.envelope_T_over_tau = T_over_tau;
    s.envelope_t1_over_tau = t1_over_tau;
    s.spatial.dt = spatial_dt;
    s.spatial.workers = workers;
    return s;
}

std::vector<double> RunConfig::scan_omegas() const
{
    if (!omegas.empty()) return omegas;
    return analysis::log_space(omega_min, omega_max, scan_points);
}

std::filesystem::path RunConfig::output_path() const
{
    if (!output_dir.empty()) return output_dir;
    if (const char* env = std::getenv(output_dir_env); env && *env) return env;
    return "pairprod_out";
}

std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot read config file " + path.string());
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("", path.string() + ":" + std::to_string(number) + ": expected key=value");
        out.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return out;
}

RunConfig parse_config(const std::optional<std::filesystem::path>& path,
                       const std::vector<std::pair<std::string, std::string>>& overrides)
{
    RunConfig c;
    if (path)
        for (const auto& [k, v] : read_config_file(*path)) c.set(k, v);
    for (const auto& [k, v] : overrides) c.set(k, v);
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Output helpers

std::string format_double(double x)
{
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    if (ec != std::errc()) throw std::runtime_error("float formatting failed");
    return std::string(buf, ptr);
}

Csv::Csv(std::vector<std::string> header) : width_(header.size())
{
    row(header);
}

void Csv::row(const std::vector<std::string>& cells)
{
    if (cells.size() != width_) throw std::logic_error("CSV row width differs from header");
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) text_ += ',';
        text_ += cells[i];
    }
    text_ += '\n';
}

void Csv::row(const std::vector<double>& values)
{
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_double(v));
    row(cells);
}

std::string sha256_hex(const std::string& bytes)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < length; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

void write_atomic(const std::filesystem::path& path, const std::string& content)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out.flush()) throw std::runtime_error("cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string RunManifest::to_json() const
{
    json j;
    j["tool"] = tool_name;
    j["version"] = version;
    j["command"] = command;
    json cfg = json::object();
    for (const auto& [k, v] : config) cfg[k] = v;
    j["config"] = cfg;
    json t = json::object();
    for (const auto& [stage, seconds] : timings) t[stage] = seconds;
    j["timings_seconds"] = t;
    json files = json::array();
    for (const OutputFile& f : outputs) files.push_back({{"file", f.name}, {"sha256", f.sha256}, {"bytes", f.bytes}});
    j["outputs"] = files;
    return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Dispatch

namespace {

using Clock = std::chrono::steady_clock;

class Run
{
  public:
    Run(std::string command, const RunConfig& config) : config_(config), dir_(config.output_path())
    {
        manifest_.command = std::move(command);
        manifest_.config = config.resolved();
        manifest_.version = version();
        start_ = Clock::now();
    }

    void stage(const std::string& name)
    {
        const auto now = Clock::now();
        manifest_.timings.emplace_back(name, std::chrono::duration<double>(now - start_).count());
        start_ = now;
    }

    double elapsed_total() const
    {
        double sum = std::chrono::duration<double>(Clock::now() - start_).count();
        for (const auto& t : manifest_.timings) sum += t.second;
        return sum;
    }

    void write(const std::string& name, const std::string& content)
    {
        write_atomic(dir_ / name, content);
        manifest_.outputs.push_back({name, sha256_hex(content), content.size()});
    }

    void write_json(const std::string& name, json j)
    {
        json cfg = json::object();
        for (const auto& [k, v] : manifest_.config) cfg[k] = v;
        j["config"] = cfg;
        write(name, j.dump(2) + "\n");
    }

    RunManifest finish()
    {
        std::string resolved;
        for (const auto& [k, v] : manifest_.config) resolved += k + "=" + v + "\n";
        write("config_resolved.txt", resolved);
        stage("write");
        write_atomic(dir_ / "manifest.json", manifest_.to_json());
        return manifest_;
    }

    const RunConfig& config() const { return config_; }

  private:
    const RunConfig& config_;
    std::filesystem::path dir_;
    RunManifest manifest_;
    Clock::time_point start_;
};

std::string energy_csv(const analysis::SpectrumResult& s)
{
    Csv csv({"E_lo", "E_hi", "dN_dE"});
    for (std::size_t i = 0; i < s.values.size(); ++i) csv.row(std::vector<double>{s.lower[i], s.upper[i], s.values[i]});
    return csv.text();
}

json number_or_null(double x)
{
    return std::isfinite(x) ? json(x) : json(nullptr);
}

void run_qkt(Run& run)
{
    const RunConfig& c = run.config();
    const PulseField pulse = c.pulse();
    const VectorPotentialTable table = build_vector_potential(pulse, c.potential_samples);
    run.stage("setup");
    qkt::Options o;
    o.dt = c.qkt_dt;
    o.k_perp = c.k_perp;
    o.workers = c.workers;
    const qkt::YieldResult r = qkt::solve(pulse, table, c.momentum_grid(), o);
    run.stage("solve");

    Csv csv({"k_z", "N_final"});
    for (std::size_t i = 0; i < r.spectrum.k.size(); ++i) csv.row(std::vector<double>{r.spectrum.k[i], r.spectrum.N[i]});
    run.write("qkt_spectrum.csv", csv.text());
    if (c.k_perp == 0.0)
        run.write("qkt_energy.csv", energy_csv(analysis::energy_distribution(r.spectrum.k, r.spectrum.N, {1e-4, c.energy_bin})));
    run.write_json("qkt_summary.json", {{"yield_per_compton", r.yield},
                                        {"dt", r.spectrum.dt},
                                        {"k_max", r.grid.k_max},
                                        {"k_points", r.grid.points},
                                        {"runtime_seconds", run.elapsed_total()}});
}

void run_tdde_homog(Run& run)
{
    const RunConfig& c = run.config();
    const PulseField pulse = c.pulse();
    const VectorPotentialTable table = build_vector_potential(pulse, c.potential_samples);
    run.stage("setup");
    const tdde::YieldResult r = tdde::solve(pulse, table, c.scan_setup().tdde);
    run.stage("solve");

    Csv csv({"k", "prob"});
    std::vector<double> N(r.k.size());
    for (std::size_t i = 0; i < r.k.size(); ++i) {
        csv.row(std::vector<double>{r.k[i], r.probability[i]});
        N[i] = 2.0 * r.probability[i];
    }
    run.write("tdde_spectrum.csv", csv.text());
    if (r.k.size() >= 3) run.write("tdde_energy.csv", energy_csv(analysis::energy_distribution(r.k, N, {1e-4, c.energy_bin})));
    run.write_json("tdde_summary.json", {{"yield_per_compton", r.yield},
                                         {"dt", r.dt},
                                         {"modes", r.k.size()},
                                         {"max_unitarity_error", r.max_unitarity_error},
                                         {"runtime_seconds", run.elapsed_total()}});
}

void run_tdde_spatial(Run& run)
{
    const RunConfig& c = run.config();
    const PulseField pulse = c.pulse();
    const VectorPotentialTable table = build_vector_potential(pulse, c.potential_samples);
    const spatial::SpatialGrid grid = c.spatial_grid();
    run.stage("setup");
    spatial::PropagationOptions o;
    o.dt = c.spatial_dt;
    o.workers = c.workers;
    const spatial::TransitionMatrix U = spatial::propagate_all_negative(grid, pulse, table, c.well, c.envelope(), o);
    run.stage("solve");

    const spatial::Basis basis = spatial::build_basis(grid);
    const std::vector<double> el = spatial::electron_spectrum(U);
    const std::vector<double> po = spatial::positron_spectrum(U);
    const std::vector<double> n_el = spatial::electron_density(U, basis);
    const std::vector<double> n_po = spatial::positron_density(U, basis);
    run.stage("observables");

    Csv spectrum({"p_index", "k", "N_el"});
    for (std::size_t p = 0; p < grid.Nz; ++p)
        spectrum.row(std::vector<std::string>{std::to_string(p), format_double(grid.k(p)), format_double(el[p])});
    run.write("spatial_spectrum.csv", spectrum.text());
    Csv density({"z", "N_el", "N_po"});
    for (std::size_t j = 0; j < grid.Nz; ++j) density.row(std::vector<double>{grid.z(j), n_el[j], n_po[j]});
    run.write("spatial_density.csv", density.text());

    double defect = 0.0;
    for (std::size_t n = 0; n < U.dim; ++n) defect = std::max(defect, std::abs(po[n] + U.negative_weight[n] - 1.0));
    const double count = spatial::pair_number(U);
    run.write_json("spatial_summary.json", {{"pair_number", count},
                                            {"yield_per_compton", 2.0 * count / grid.L},
                                            {"dt", U.dt},
                                            {"steps", U.steps},
                                            {"max_unitarity_defect", defect},
                                            {"runtime_seconds", run.elapsed_total()}});
}

void run_bound_states(Run& run)
{
    const RunConfig& c = run.config();
    run.stage("setup");
    const spatial::BoundStateSet set = spatial::find_bound_states(c.spatial_grid(), c.well);
    run.stage("solve");
    Csv csv({"index", "E_bound"});
    json energies = json::array();
    json resonances = json::array();
    for (std::size_t i = 0; i < set.states.size(); ++i) {
        csv.row(std::vector<std::string>{std::to_string(i), format_double(set.states[i].energy)});
        energies.push_back(set.states[i].energy);
        resonances.push_back(set.states[i].energy + 1.0);
    }
    run.write("bound_states.csv", csv.text());
    run.write_json("bound_states.json", {{"energies", energies},
                                         {"resonance_omegas", resonances},
                                         {"grid_L", set.grid.L},
                                         {"grid_Nz", set.grid.Nz}});
}

json peaks_json(const std::vector<double>& omega, const std::vector<double>& yield, int n_max)
{
    try {
        json out = json::array();
        for (const analysis::ThresholdPeak& p : analysis::threshold_peaks(omega, yield, n_max)) {
            out.push_back({{"n", p.n},
                           {"omega_peak", p.omega ? json(*p.omega) : json(nullptr)},
                           {"contrast", number_or_null(p.contrast)}});
        }
        return out;
    } catch (const std::invalid_argument& e) {
        return {{"error", e.what()}};
    }
}

json failures(const analysis::ScanResult& s)
{
    json out = json::array();
    for (const analysis::ScanRow& r : s.rows)
        if (!r.ok) out.push_back({{"omega", r.parameter}, {"error", r.error}});
    return out;
}

void run_scan(Run& run)
{
    const RunConfig& c = run.config();
    const std::vector<double> omegas = c.scan_omegas();
    const analysis::ScanSetup setup = c.scan_setup();
    run.stage("setup");

    json summary;
    if (c.scan_method == "both") {
        const auto q = analysis::frequency_scan(analysis::Method::qkt, omegas, setup);
        run.stage("solve_qkt");
        const auto t = analysis::frequency_scan(analysis::Method::tdde_homog, omegas, setup);
        run.stage("solve_tdde");
        const auto yq = q.column("yield");
        const auto yt = t.column("yield");
        Csv csv({"omega", "yield_qkt", "yield_tdde", "rel_diff"});
        for (std::size_t i = 0; i < omegas.size(); ++i)
            csv.row(std::vector<double>{omegas[i], yq[i], yt[i], std::abs(yq[i] - yt[i]) / yt[i]});
        run.write("scan.csv", csv.text());
        summary["threshold_peaks_qkt"] = peaks_json(omegas, yq, c.n_max);
        summary["threshold_peaks_tdde"] = peaks_json(omegas, yt, c.n_max);
        json failed = failures(q);
        for (auto& f : failures(t)) failed.push_back(f);
        summary["failed_rows"] = failed;
    } else {
        const analysis::Method m = c.scan_method == "qkt"          ? analysis::Method::qkt
                                   : c.scan_method == "tdde_homog" ? analysis::Method::tdde_homog
                                                                   : analysis::Method::tdde_spatial;
        const auto s = analysis::frequency_scan(m, omegas, setup);
        run.stage("solve");
        const auto y = s.column("yield");
        const std::string name = m == analysis::Method::qkt          ? "yield_qkt"
                                 : m == analysis::Method::tdde_homog ? "yield_tdde"
                                                                     : "yield_spatial";
        Csv csv({"omega", name});
        for (std::size_t i = 0; i < omegas.size(); ++i) csv.row(std::vector<double>{omegas[i], y[i]});
        run.write("scan.csv", csv.text());
        summary["threshold_peaks"] = peaks_json(omegas, y, c.n_max);
        summary["failed_rows"] = failures(s);
    }
    summary["runtime_seconds"] = run.elapsed_total();
    run.write_json("scan_summary.json", summary);
}

void run_compare(Run& run)
{
    const RunConfig& c = run.config();
    const PulseField pulse = c.pulse();
    const VectorPotentialTable table = build_vector_potential(pulse, c.potential_samples);
    run.stage("setup");
    analysis::CompareOptions o;
    o.workers = c.workers;
    const analysis::CompareReport r = analysis::compare_methods(c.momentum_grid(), pulse, table, o);
    run.stage("solve");

    Csv csv({"k", "N_qkt", "N_tdde", "rel_diff"});
    for (std::size_t i = 0; i < r.k.size(); ++i) {
        const double rel = r.N_tdde[i] > 0.0 ? std::abs(r.N_qkt[i] - r.N_tdde[i]) / r.N_tdde[i] : 0.0;
        csv.row(std::vector<double>{r.k[i], r.N_qkt[i], r.N_tdde[i], rel});
    }
    run.write("compare_spectrum.csv", csv.text());
    run.write_json("compare_report.json", {{"max_rel_err", r.max_rel_err},
                                           {"argmax_k", r.argmax_k},
                                           {"pass", r.pass},
                                           {"yield_qkt", r.yield_qkt},
                                           {"yield_tdde", r.yield_tdde},
                                           {"yield_rel_err", r.yield_rel_err},
                                           {"tail_energy", number_or_null(r.tail_energy)},
                                           {"tail_max_rel_err", r.tail_max_rel_err},
                                           {"tail_argmax_k", r.tail_argmax_k},
                                           {"tail_deviation", r.tail_deviation},
                                           {"flag", r.flag}});
}

void run_enhance(Run& run)
{
    const RunConfig& c = run.config();
    const std::vector<double> omegas = c.scan_omegas();
    run.stage("setup");
    const analysis::ScanResult s = analysis::enhancement_decomposition(omegas, c.scan_setup());
    run.stage("solve");
    const auto total = s.column("N_total");
    const auto background = s.column("N_background");
    const auto enhance = s.column("N_enhance");
    Csv csv({"omega", "N_total", "N_background", "N_enhance"});
    for (std::size_t i = 0; i < omegas.size(); ++i) csv.row(std::vector<double>{omegas[i], total[i], background[i], enhance[i]});
    run.write("enhance.csv", csv.text());

    const auto best = static_cast<std::size_t>(std::max_element(enhance.begin(), enhance.end()) - enhance.begin());
    json rows = json::array();
    for (std::size_t i = 0; i < omegas.size(); ++i)
        rows.push_back({{"omega", omegas[i]},
                        {"yield_total", s.rows[i].values[3]},
                        {"yield_background", s.rows[i].values[4]},
                        {"yield_enhance", s.rows[i].values[5]}});
    run.write_json("enhance_summary.json", {{"L", c.L},
                                            {"argmax_omega", omegas[best]},
                                            {"max_N_enhance", enhance[best]},
                                            {"per_compton", rows},
                                            {"runtime_seconds", run.elapsed_total()}});
}

} // namespace

RunManifest dispatch(const std::string& command, const RunConfig& config)
{
    config.validate();
    Run run(command, config);
    if (command == "qkt") run_qkt(run);
    else if (command == "tdde-homog") run_tdde_homog(run);
    else if (command == "tdde-spatial") run_tdde_spatial(run);
    else if (command == "bound-states") run_bound_states(run);
    else if (command == "scan") run_scan(run);
    else if (command == "compare") run_compare(run);
    else if (command == "enhance") run_enhance(run);
    else throw ConfigError("", "unknown command '" + command + "'");
    return run.finish();
}

namespace {

std::vector<std::pair<std::string, std::string>> collect_overrides(const std::vector<std::string>& sets,
                                                                   const std::vector<std::string>& extras)
{
    std::vector<std::pair<std::string, std::string>> out;
    auto split = [](const std::string& kv) -> std::pair<std::string, std::string> {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError(kv, "override must look like key=value");
        return {trim(kv.substr(0, eq)), trim(kv.substr(eq + 1))};
    };
    for (const std::string& s : sets) out.push_back(split(s));
    for (std::size_t i = 0; i < extras.size(); ++i) {
        const std::string& a = extras[i];
        if (a.rfind("--", 0) != 0) throw ConfigError("", "unexpected argument '" + a + "'");
        const std::string body = a.substr(2);
        if (body.find('=') != std::string::npos) {
            out.push_back(split(body));
        } else if (i + 1 < extras.size() && extras[i + 1].rfind("--", 0) != 0) {
            out.emplace_back(body, extras[++i]);
        } else {
            throw ConfigError(body, "missing value");
        }
    }
    return out;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Vacuum pair production in oscillating fields: quantum kinetic and Dirac-equation solvers"};
    app.set_version_flag("--version", version());
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run a solver or analysis and write its artifacts");
    std::string command;
    std::string config_path;
    std::vector<std::string> sets;
    run->add_option("command", command, "what to run")->required()->check(CLI::IsMember(commands));
    run->add_option("-c,--config", config_path, "key=value configuration file")->check(CLI::ExistingFile);
    run->add_option("--set", sets, "override one key (key=value); repeatable");
    run->allow_extras();
    run->footer("Any configuration key can also be given as --key=value, e.g. --field.omega=2.");

    auto* keys = app.add_subcommand("keys", "list configuration keys with their defaults");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*keys) {
            const RunConfig defaults;
            for (const auto& [k, v] : defaults.resolved())
                std::cout << k << "=" << v << "    # " << RunConfig::describe(k) << "\n";
            return 0;
        }
        std::optional<std::filesystem::path> path;
        if (!config_path.empty()) path = config_path;
        const RunConfig config = parse_config(path, collect_overrides(sets, run->remaining()));
        const RunManifest m = dispatch(command, config);
        std::cout << "wrote " << m.outputs.size() + 1 << " files to " << config.output_path().string() << "\n";
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace pairprod::cli
