#include "pairprod/tdde_homog.hpp"

#include "pairprod/errors.hpp"
#include "pairprod/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace pairprod::tdde {

namespace {

constexpr double phase_limit = 0.1;
constexpr double unitarity_tolerance = 1e-8;

std::vector<double> midpoint_samples(const VectorPotentialTable& table, const StepGrid& grid)
{
    std::vector<double> a(grid.steps);
    for (std::size_t n = 0; n < grid.steps; ++n) a[n] = table(grid.time(n) + 0.5 * grid.dt);
    return a;
}

TransferState product(double k, std::span<const double> a_mid, double dt)
{
    TransferState s;
    s.k = k;
    Mat2 m = Mat2::identity();
    for (double a : a_mid) m = gamma_step(k, a, dt) * m;
    s.M = m;
    const FreeSpinorPair sp = free_spinors(k);
    const Spinor mv = m * sp.v;
    s.U = dot(sp.u, mv);
    s.V = dot(sp.v, mv);
    const double drift = m.unitarity_error();
    if (drift > unitarity_tolerance)
        throw NumericalError("transfer matrix lost unitarity (" + std::to_string(drift) +
                             ") at k = " + std::to_string(k));
    return s;
}

void check_phase(double dt, double k_abs, const VectorPotentialTable& table)
{
    if (!(dt > 0.0)) throw ConfigError("numerics.dt", "must be > 0");
    const double limit = max_phase_dt(k_abs, table);
    if (dt >= limit)
        throw ConfigError("numerics.dt", "step " + std::to_string(dt) +
                                             " does not resolve the mode phase (limit " +
                                             std::to_string(limit) + ")");
}

} // namespace

double Mat2::unitarity_error() const
{
    const Mat2 p = adjoint() * *this;
    return std::max({std::abs(p.a00 - 1.0), std::abs(p.a01), std::abs(p.a10), std::abs(p.a11 - 1.0)});
}

FreeSpinorPair free_spinors(double k)
{
    FreeSpinorPair s;
    s.k = k;
    s.energy = std::sqrt(1.0 + k * k);
    const double e = s.energy;
    const double sign = k < 0.0 ? -1.0 : 1.0;
    const double norm = 1.0 / std::sqrt(2.0 * e);
    const double big = std::sqrt(e + 1.0) * norm;
    // sqrt(E - 1) = |k| / sqrt(E + 1) without cancellation at small k
    const double small = std::abs(k) / std::sqrt(e + 1.0) * norm;
    s.u = {cplx{big}, cplx{sign * small}};
    s.v = {cplx{-sign * small}, cplx{big}};
    return s;
}

Mat2 gamma_step(double k, double A, double dt)
{
    const double p = k + A;
    const double e = std::sqrt(1.0 + p * p);
    const double phi = dt * e;
    const double c = std::cos(phi);
    const double s = std::sin(phi) / e;
    return {cplx{c, -s}, cplx{0.0, -s * p}, cplx{0.0, -s * p}, cplx{c, s}};
}

double max_phase_dt(double k_abs_max, const VectorPotentialTable& table)
{
    const double p = std::abs(k_abs_max) + table.max_abs();
    return phase_limit / std::sqrt(1.0 + p * p);
}

TransferState propagate_mode(double k, const PulseField& pulse, const VectorPotentialTable& table,
                             double dt)
{
    pulse.validate();
    check_phase(dt, std::abs(k), table);
    const StepGrid grid = StepGrid::covering(table.t_start(), table.t_end(), dt);
    const std::vector<double> a_mid = midpoint_samples(table, grid);
    return product(k, a_mid, grid.dt);
}

std::vector<TransferState> propagate_modes(std::span<const double> k_values,
                                           const VectorPotentialTable& table, double dt,
                                           unsigned workers)
{
    double k_abs = 0.0;
    for (double k : k_values) k_abs = std::max(k_abs, std::abs(k));
    check_phase(dt, k_abs, table);
    const StepGrid grid = StepGrid::covering(table.t_start(), table.t_end(), dt);
    const std::vector<double> a_mid = midpoint_samples(table, grid);
    std::vector<TransferState> out(k_values.size());
    parallel_for(out.size(), workers, [&](std::size_t i) { out[i] = product(k_values[i], a_mid, grid.dt); });
    return out;
}

std::vector<double> box_modes(double L, double k_max)
{
    if (!(L > 0.0)) throw ConfigError("numerics.L", "must be > 0");
    const double dk = 2.0 * std::numbers::pi / L;
    const auto J = static_cast<long>(std::floor(k_max / dk + 1e-9));
    std::vector<double> k;
    k.reserve(static_cast<std::size_t>(2 * J + 1));
    for (long j = -J; j <= J; ++j) k.push_back(dk * static_cast<double>(j));
    return k;
}

double yield_tdde_homog(const PulseField& pulse, const VectorPotentialTable& table, double L,
                        double dt, double k_max, unsigned workers)
{
    pulse.validate();
    const std::vector<double> k = box_modes(L, k_max);
    const auto states = propagate_modes(k, table, dt, workers);
    std::vector<double> prob(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) prob[i] = states[i].probability();
    if (qkt::edge_leaks(prob))
        throw GridError("spectral leakage: |U_k|^2 at |k| = " + std::to_string(k_max) +
                        " exceeds 1e-6 of the maximum");
    double sum = 0.0;
    for (double p : prob) sum += p;
    return 2.0 * sum / L;
}

YieldResult solve(const PulseField& pulse, const VectorPotentialTable& table, const Options& options)
{
    pulse.validate();
    constexpr int max_widenings = 8;
    double k_max = options.k_max;
    for (int attempt = 0;; ++attempt) {
        const std::vector<double> k = box_modes(options.L, k_max);
        double dt = options.dt;
        if (options.adapt_dt) dt = std::min(dt, 0.95 * max_phase_dt(k_max, table));
        const auto states = propagate_modes(k, table, dt, options.workers);

        YieldResult r;
        r.k = k;
        r.probability.resize(k.size());
        double sum = 0.0;
        for (std::size_t i = 0; i < states.size(); ++i) {
            r.probability[i] = states[i].probability();
            sum += r.probability[i];
            r.max_unitarity_error = std::max(r.max_unitarity_error, states[i].M.unitarity_error());
        }
        if (!qkt::edge_leaks(r.probability)) {
            r.yield = 2.0 * sum / options.L;
            r.dt = StepGrid::covering(table.t_start(), table.t_end(), dt).dt;
            return r;
        }
        if (attempt == max_widenings)
            throw GridError("spectral leakage persists up to |k| = " + std::to_string(k_max));
        k_max *= 1.5;
    }
}

} // namespace pairprod::tdde
