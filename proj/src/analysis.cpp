#include "pairprod/analysis.hpp"

#include "pairprod/errors.hpp"
#include "pairprod/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace pairprod::analysis {

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();
constexpr double log_floor = 1e-300;

double safe_log10(double y)
{
    return std::log10(std::max(y, log_floor));
}

// Integral of the piecewise-linear interpolant of (x, y) from x.front() to t.
class LinearPrimitive
{
  public:
    LinearPrimitive(std::span<const double> x, std::span<const double> y) : x_(x), y_(y), cumulative_(x.size(), 0.0)
    {
        for (std::size_t i = 1; i < x.size(); ++i)
            cumulative_[i] = cumulative_[i - 1] + 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
    }

    double operator()(double t) const
    {
        if (t <= x_.front()) return 0.0;
        if (t >= x_.back()) return cumulative_.back();
        const auto it = std::upper_bound(x_.begin(), x_.end(), t);
        const std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
        const double h = t - x_[i];
        const double slope = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
        return cumulative_[i] + h * (y_[i] + 0.5 * slope * h);
    }

  private:
    std::span<const double> x_;
    std::span<const double> y_;
    std::vector<double> cumulative_;
};

void check_symmetric_uniform(std::span<const double> k)
{
    if (k.size() < 3 || k.size() % 2 == 0)
        throw std::invalid_argument("energy distribution needs an odd number (>= 3) of momenta");
    const double span = k.back() - k.front();
    const double h = span / static_cast<double>(k.size() - 1);
    if (!(h > 0.0)) throw std::invalid_argument("momenta must increase");
    for (std::size_t i = 0; i < k.size(); ++i) {
        if (std::abs(k[i] + k[k.size() - 1 - i]) > 1e-9 * span)
            throw std::invalid_argument("momentum grid is not symmetric about k = 0");
        if (i > 0 && std::abs(k[i] - k[i - 1] - h) > 1e-6 * h)
            throw std::invalid_argument("momentum grid is not uniform");
    }
}

// Vertex of the parabola through three points, clamped to [x0, x2].
double parabola_vertex(double x0, double y0, double x1, double y1, double x2, double y2)
{
    const double d0 = (y1 - y0) / (x1 - x0);
    const double d1 = (y2 - y1) / (x2 - x1);
    const double curvature = (d1 - d0) / (x2 - x0);
    if (!(curvature < 0.0)) return x1;
    const double vertex = 0.5 * (x0 + x1) - d0 / (2.0 * curvature);
    return std::clamp(vertex, x0, x2);
}

bool is_local_max(std::span<const double> y, std::size_t i)
{
    return i > 0 && i + 1 < y.size() && y[i] > y[i - 1] && y[i] >= y[i + 1];
}

} // namespace

std::vector<double> ScanResult::column(const std::string& name) const
{
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw std::out_of_range("no scan column named " + name);
    const auto c = static_cast<std::size_t>(it - columns.begin());
    std::vector<double> out;
    out.reserve(rows.size());
    for (const ScanRow& r : rows) out.push_back(r.values[c]);
    return out;
}

std::vector<double> ScanResult::parameters() const
{
    std::vector<double> out;
    out.reserve(rows.size());
    for (const ScanRow& r : rows) out.push_back(r.parameter);
    return out;
}

void ScanResult::check() const
{
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].values.size() != columns.size()) throw std::logic_error("scan row with wrong column count");
        if (i > 0 && !(rows[i].parameter > rows[i - 1].parameter))
            throw std::logic_error("scan parameters must increase strictly");
    }
}

double SpectrumResult::total() const
{
    double sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) sum += values[i] * (upper[i] - lower[i]);
    return sum;
}

SpectrumResult energy_distribution(std::span<const double> k, std::span<const double> N,
                                   const EnergyBinning& binning)
{
    if (k.size() != N.size()) throw std::invalid_argument("momenta and occupations differ in length");
    check_symmetric_uniform(k);
    if (!(binning.width > 0.0) || !(binning.first_edge_offset > 0.0))
        throw std::invalid_argument("energy bins need positive widths");

    const double k_max = k.back();
    const double e_max = std::sqrt(1.0 + k_max * k_max);
    std::vector<double> edges{1.0};
    const double first = 1.0 + binning.first_edge_offset;
    if (first < e_max) {
        for (std::size_t j = 0;; ++j) {
            const double e = first + binning.width * static_cast<double>(j);
            if (e >= e_max - 1e-9 * binning.width) break;
            edges.push_back(e);
        }
    }
    edges.push_back(e_max);

    const LinearPrimitive F(k, N);
    SpectrumResult s;
    s.abscissa = Abscissa::energy;
    const std::size_t bins = edges.size() - 1;
    s.lower.resize(bins);
    s.upper.resize(bins);
    s.values.resize(bins);
    for (std::size_t b = 0; b < bins; ++b) {
        const double ka = b == 0 ? 0.0 : std::sqrt(edges[b] * edges[b] - 1.0);
        const double kb = b + 1 == bins ? k_max : std::sqrt(edges[b + 1] * edges[b + 1] - 1.0);
        const double mass = (F(kb) - F(ka)) + (F(-ka) - F(-kb));
        s.lower[b] = edges[b];
        s.upper[b] = edges[b + 1];
        s.values[b] = std::max(0.0, mass) / (edges[b + 1] - edges[b]);
    }
    return s;
}

std::vector<SpectralPeak> find_peaks(std::span<const double> x, std::span<const double> y, double min_prominence)
{
    if (x.size() != y.size()) throw std::invalid_argument("abscissa and values differ in length");
    std::vector<double> ly(y.size());
    std::transform(y.begin(), y.end(), ly.begin(), safe_log10);

    std::vector<SpectralPeak> peaks;
    for (std::size_t i = 1; i + 1 < ly.size(); ++i) {
        if (!is_local_max(ly, i)) continue;
        double left = ly[i];
        for (std::size_t j = i; j-- > 0;) {
            if (ly[j] > ly[i]) break;
            left = std::min(left, ly[j]);
        }
        double right = ly[i];
        for (std::size_t j = i + 1; j < ly.size(); ++j) {
            if (ly[j] > ly[i]) break;
            right = std::min(right, ly[j]);
        }
        const double prominence = ly[i] - std::max(left, right);
        if (prominence >= min_prominence) peaks.push_back({x[i], y[i], prominence});
    }
    return peaks;
}

std::string to_string(Method m)
{
    switch (m) {
    case Method::qkt: return "qkt";
    case Method::tdde_homog: return "tdde_homog";
    case Method::tdde_spatial: return "tdde_spatial";
    }
    return "unknown";
}

PulseField ScanSetup::pulse(double omega) const
{
    return PulseField::centered(eps, tau, omega, window_tau_multiples);
}

WellEnvelope ScanSetup::envelope() const
{
    return {envelope_T_over_tau * tau, envelope_t1_over_tau * tau};
}

std::vector<double> log_space(double lo, double hi, std::size_t points)
{
    if (!(lo > 0.0) || !(hi > lo) || points < 2) throw ConfigError("scan", "log spacing needs 0 < lo < hi and >= 2 points");
    std::vector<double> out(points);
    const double a = std::log(lo);
    const double b = std::log(hi);
    for (std::size_t i = 0; i < points; ++i)
        out[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1));
    out.front() = lo;
    out.back() = hi;
    return out;
}

namespace {

void check_omegas(std::span<const double> omegas)
{
    if (omegas.empty()) throw ConfigError("scan.omega", "frequency list is empty");
    for (std::size_t i = 0; i < omegas.size(); ++i) {
        if (!(omegas[i] > 0.0)) throw ConfigError("scan.omega", "frequencies must be > 0");
        if (i > 0 && !(omegas[i] > omegas[i - 1])) throw ConfigError("scan.omega", "frequencies must increase strictly");
    }
}

// Parallelize over rows when there are enough of them, otherwise inside the solver.
std::pair<unsigned, unsigned> split_workers(unsigned workers, std::size_t rows)
{
    workers = std::max(1u, workers);
    if (rows >= workers) return {workers, 1u};
    return {1u, workers};
}

double scan_yield(Method method, double omega, const ScanSetup& setup, unsigned inner)
{
    const PulseField pulse = setup.pulse(omega);
    const VectorPotentialTable table = build_vector_potential(pulse, setup.potential_samples);
    switch (method) {
    case Method::qkt: {
        qkt::Options o = setup.qkt;
        o.workers = inner;
        return qkt::solve(pulse, table, setup.qkt_grid, o).yield;
    }
    case Method::tdde_homog: {
        tdde::Options o = setup.tdde;
        o.workers = inner;
        return tdde::solve(pulse, table, o).yield;
    }
    case Method::tdde_spatial: {
        spatial::PropagationOptions o = setup.spatial;
        o.workers = inner;
        const auto U = spatial::propagate_all_negative(setup.grid, pulse, table, setup.well, setup.envelope(), o);
        return 2.0 * spatial::pair_number(U) / setup.grid.L;
    }
    }
    return nan;
}

} // namespace

ScanResult frequency_scan(Method method, std::span<const double> omegas, const ScanSetup& setup)
{
    check_omegas(omegas);
    ScanResult result;
    result.columns = {"yield"};
    result.rows.resize(omegas.size());
    unsigned workers = 1;
    switch (method) {
    case Method::qkt: workers = setup.qkt.workers; break;
    case Method::tdde_homog: workers = setup.tdde.workers; break;
    case Method::tdde_spatial: workers = setup.spatial.workers; break;
    }
    const auto [outer, inner] = split_workers(workers, omegas.size());

    parallel_for(omegas.size(), outer, [&](std::size_t i) {
        ScanRow& row = result.rows[i];
        row.parameter = omegas[i];
        try {
            row.values = {scan_yield(method, omegas[i], setup, inner)};
        } catch (const ConfigError&) {
            throw;
        } catch (const NumericalError& e) {
            row.values = {nan};
            row.ok = false;
            row.error = e.what();
        }
    });
    result.provenance["method"] = to_string(method);
    return result;
}

std::vector<ThresholdPeak> threshold_peaks(std::span<const double> omega, std::span<const double> yield, int n_max,
                                           const ThresholdOptions& options)
{
    if (omega.size() != yield.size()) throw std::invalid_argument("scan columns differ in length");
    if (n_max < 1) throw std::invalid_argument("n_max must be >= 1");
    for (std::size_t i = 1; i < omega.size(); ++i)
        if (!(omega[i] > omega[i - 1])) throw std::invalid_argument("scan frequencies must increase strictly");

    for (int n = 1; n <= n_max; ++n) {
        const double hi = 2.0 / n;
        const double lo = 2.0 / (n + 1);
        const auto count = std::count_if(omega.begin(), omega.end(), [&](double w) { return w >= lo && w <= hi; });
        if (static_cast<std::size_t>(count) < options.min_points)
            throw std::invalid_argument("scan too sparse: " + std::to_string(count) + " points in [2/" +
                                        std::to_string(n + 1) + ", 2/" + std::to_string(n) + "], need " +
                                        std::to_string(options.min_points));
    }

    std::vector<double> ly(yield.size());
    std::transform(yield.begin(), yield.end(), ly.begin(), [](double y) {
        return std::isfinite(y) ? safe_log10(y) : -std::numeric_limits<double>::infinity();
    });

    std::vector<ThresholdPeak> out;
    for (int n = 1; n <= n_max; ++n) {
        ThresholdPeak peak;
        peak.n = n;
        const double centre = 2.0 / n;
        const double lo = (1.0 - options.window) * centre;
        const double hi = (1.0 + options.window) * centre;

        std::size_t best = omega.size();
        for (std::size_t i = 0; i < omega.size(); ++i) {
            if (omega[i] < lo || omega[i] > hi || !is_local_max(ly, i)) continue;
            if (best == omega.size() || ly[i] > ly[best]) best = i;
        }
        if (best < omega.size()) {
            double dip = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i <= best; ++i)
                if (omega[i] >= lo) dip = std::min(dip, yield[i]);
            peak.value = yield[best];
            peak.contrast = peak.value / std::max(dip, log_floor);
            if (peak.contrast >= options.min_contrast)
                peak.omega = parabola_vertex(omega[best - 1], ly[best - 1], omega[best], ly[best], omega[best + 1],
                                             ly[best + 1]);
        }
        out.push_back(peak);
    }
    return out;
}

ScanResult enhancement_decomposition(std::span<const double> omegas, const ScanSetup& setup)
{
    check_omegas(omegas);
    setup.grid.validate();
    const double L = setup.grid.L;
    ScanResult result;
    result.columns = {"N_total", "N_background", "N_enhance", "yield_total", "yield_background", "yield_enhance"};
    result.rows.resize(omegas.size());
    const auto [outer, inner] = split_workers(setup.spatial.workers, omegas.size());
    SauterWell off = setup.well;
    off.V0 = 0.0;

    parallel_for(omegas.size(), outer, [&](std::size_t i) {
        const PulseField pulse = setup.pulse(omegas[i]);
        const VectorPotentialTable table = build_vector_potential(pulse, setup.potential_samples);
        spatial::PropagationOptions o = setup.spatial;
        o.workers = inner;
        const WellEnvelope env = setup.envelope();
        const double total = spatial::pair_number(spatial::propagate_all_negative(setup.grid, pulse, table, setup.well, env, o));
        const double background = spatial::pair_number(spatial::propagate_all_negative(setup.grid, pulse, table, off, env, o));
        const double enhance = total - background;
        ScanRow& row = result.rows[i];
        row.parameter = omegas[i];
        row.values = {total, background, enhance, 2.0 * total / L, 2.0 * background / L, 2.0 * enhance / L};
    });
    return result;
}

double third_peak_energy(double omega)
{
    if (!(omega > 0.0)) return std::numeric_limits<double>::infinity();
    const double n_min = std::ceil(2.0 / omega - 1e-9);
    return 0.5 * (n_min + 2.0) * omega;
}

CompareReport compare_methods(const qkt::MomentumGrid& grid, const PulseField& pulse,
                              const VectorPotentialTable& table, const CompareOptions& options)
{
    pulse.validate();
    CompareReport r;
    r.k = grid.values();
    const double k_abs = std::max(std::abs(grid.k_min), std::abs(grid.k_max));

    qkt::Options q;
    q.dt = options.qkt_dt_fraction * qkt::max_stable_dt(k_abs, 0.0, table);
    q.workers = options.workers;
    r.N_qkt = qkt::spectrum(pulse, table, r.k, q).N;

    const double dt_tdde = 0.95 * tdde::max_phase_dt(k_abs, table);
    const auto states = tdde::propagate_modes(r.k, table, dt_tdde, options.workers);
    r.N_tdde.resize(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) r.N_tdde[i] = 2.0 * states[i].probability();

    const double h = grid.spacing();
    r.yield_qkt = qkt::trapezoid(r.N_qkt, h) / (2.0 * std::numbers::pi);
    r.yield_tdde = qkt::trapezoid(r.N_tdde, h) / (2.0 * std::numbers::pi);
    if (std::max(r.yield_qkt, r.yield_tdde) <= options.yield_floor)
        r.yield_rel_err = 0.0;
    else
        r.yield_rel_err = r.yield_tdde > 0.0 ? std::abs(r.yield_qkt - r.yield_tdde) / r.yield_tdde
                                             : std::numeric_limits<double>::infinity();

    r.tail_energy = third_peak_energy(pulse.omega);
    for (std::size_t i = 0; i < r.k.size(); ++i) {
        const double q_i = r.N_qkt[i];
        const double t_i = r.N_tdde[i];
        const double rel = std::abs(q_i - t_i) / std::max(t_i, log_floor);
        const double energy = std::sqrt(1.0 + r.k[i] * r.k[i]);
        if (energy > r.tail_energy) {
            if (t_i > options.tail_floor && rel > r.tail_max_rel_err) {
                r.tail_max_rel_err = rel;
                r.tail_argmax_k = r.k[i];
            }
        } else if (std::max(q_i, t_i) > options.spectrum_floor && rel > r.max_rel_err) {
            r.max_rel_err = rel;
            r.argmax_k = r.k[i];
        }
    }
    r.tail_deviation = r.tail_max_rel_err > options.tail_tolerance;
    if (r.tail_deviation) r.flag = "QKT tail deviation";
    r.pass = r.yield_rel_err <= options.yield_tolerance && r.max_rel_err <= options.spectrum_tolerance;
    return r;
}

} // namespace pairprod::analysis
