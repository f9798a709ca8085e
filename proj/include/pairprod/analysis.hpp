#pragma once

#include "pairprod/fields.hpp"
#include "pairprod/qkt.hpp"
#include "pairprod/tdde_homog.hpp"
#include "pairprod/tdde_spatial.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pairprod::analysis {

// ---------------------------------------------------------------------------
// Tabulated scans

struct ScanRow
{
    double parameter = 0.0;
    std::vector<double> values; ///< one per ScanResult::columns; NaN when the row failed
    bool ok = true;
    std::string error; ///< solver message for failed rows
};

struct ScanResult
{
    std::string parameter = "omega";
    std::vector<std::string> columns;
    std::vector<ScanRow> rows;
    std::map<std::string, std::string> provenance;

    /// Values of one column in row order. Throws std::out_of_range for unknown names.
    std::vector<double> column(const std::string& name) const;
    std::vector<double> parameters() const;
    /// Throws std::logic_error unless parameters increase strictly and every row has one value per column.
    void check() const;
};

// ---------------------------------------------------------------------------
// Spectra

enum class Abscissa
{
    momentum,
    energy
};

/// Binned spectrum. For energy spectra `values` are densities per unit energy.
struct SpectrumResult
{
    Abscissa abscissa = Abscissa::momentum;
    std::vector<double> lower; ///< bin lower edges (equal to centers for point spectra)
    std::vector<double> upper;
    std::vector<double> values;

    double center(std::size_t i) const { return 0.5 * (lower[i] + upper[i]); }
    /// sum of value * width
    double total() const;
};

struct EnergyBinning
{
    double first_edge_offset = 1e-4; ///< the first bin is [1, 1 + offset]
    double width = 2e-3;
};

/// dN/dE = [N(k) + N(-k)] dk/dE on energy bins, using the piecewise-linear
/// interpolant of N(k) integrated exactly over each bin's momentum range.
/// The integral of the result equals the trapezoid integral of N over k.
/// Throws std::invalid_argument unless k is a uniform grid symmetric about 0.
SpectrumResult energy_distribution(std::span<const double> k, std::span<const double> N,
                                   const EnergyBinning& binning = {});

struct SpectralPeak
{
    double x = 0.0;
    double value = 0.0;
    double prominence = 0.0; ///< in decades
};

/// Local maxima of log10(y) whose topographic prominence is at least
/// `min_prominence` decades, ordered by position.
std::vector<SpectralPeak> find_peaks(std::span<const double> x, std::span<const double> y,
                                     double min_prominence = 0.3);

// ---------------------------------------------------------------------------
// Frequency scans

enum class Method
{
    qkt,
    tdde_homog,
    tdde_spatial
};

std::string to_string(Method m);

/// Everything except omega, which the scan varies.
struct ScanSetup
{
    double eps = 0.1;
    double tau = 20.0;
    double window_tau_multiples = 8.0;
    std::size_t potential_samples = default_potential_samples;

    qkt::MomentumGrid qkt_grid;
    qkt::Options qkt;
    tdde::Options tdde;

    spatial::SpatialGrid grid;
    SauterWell well;
    double envelope_T_over_tau = 16.0;
    double envelope_t1_over_tau = 1.0;
    spatial::PropagationOptions spatial;

    PulseField pulse(double omega) const;
    WellEnvelope envelope() const;
};

/// Yield per Compton wavelength (spin summed) per omega. Column "yield".
/// Solver errors are caught per row and recorded; ConfigError is rethrown.
ScanResult frequency_scan(Method method, std::span<const double> omegas, const ScanSetup& setup);

/// Strictly increasing, log-spaced values in [lo, hi].
std::vector<double> log_space(double lo, double hi, std::size_t points);

struct ThresholdPeak
{
    int n = 0;
    std::optional<double> omega; ///< refined peak position, empty when none was detected
    double value = 0.0;
    double contrast = 0.0; ///< peak over the minimum on [0.85 * 2/n, 2/n]
};

struct ThresholdOptions
{
    double window = 0.15;        ///< relative half width around 2/n
    double min_contrast = 10.0;  ///< required peak / dip ratio
    std::size_t min_points = 8;  ///< per interval [2/(n+1), 2/n]
};

/// Multiphoton threshold peaks near omega = 2/n for n = 1..n_max.
/// Throws std::invalid_argument when the scan is too sparse.
std::vector<ThresholdPeak> threshold_peaks(std::span<const double> omega, std::span<const double> yield,
                                           int n_max, const ThresholdOptions& options = {});

/// Columns: N_total, N_background, N_enhance (extensive, per spin) and the
/// matching per-Compton-wavelength yields (x2 spin, / L).
ScanResult enhancement_decomposition(std::span<const double> omegas, const ScanSetup& setup);

// ---------------------------------------------------------------------------
// Cross-method comparison

struct CompareOptions
{
    double yield_tolerance = 1e-3;
    double spectrum_tolerance = 1e-3;
    double spectrum_floor = 1e-12; ///< modes below this occupation are not compared
    double tail_tolerance = 0.1;
    double tail_floor = 1e-24;     ///< roundoff level of the transfer products
    double yield_floor = 1e-20;    ///< yields below this count as zero
    /// QKT step as a fraction of its stability limit
    double qkt_dt_fraction = 0.125;
    unsigned workers = 1;
};

struct CompareReport
{
    std::vector<double> k;
    std::vector<double> N_qkt;
    std::vector<double> N_tdde; ///< 2 |U_k|^2, spin summed like N_qkt

    double yield_qkt = 0.0;
    double yield_tdde = 0.0;
    double yield_rel_err = 0.0;

    double max_rel_err = 0.0; ///< over compared modes outside the tail band
    double argmax_k = 0.0;
    bool pass = true;

    double tail_energy = 0.0; ///< lower edge of the tail band
    double tail_max_rel_err = 0.0;
    double tail_argmax_k = 0.0;
    bool tail_deviation = false;
    std::string flag; ///< "QKT tail deviation" when flagged
};

/// Energy of the third multiphoton peak, (n_min + 2) omega / 2 with n_min = ceil(2 / omega).
double third_peak_energy(double omega);

CompareReport compare_methods(const qkt::MomentumGrid& grid, const PulseField& pulse,
                              const VectorPotentialTable& table, const CompareOptions& options = {});

} // namespace pairprod::analysis
