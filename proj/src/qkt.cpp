#include "pairprod/qkt.hpp"

#include "pairprod/errors.hpp"
#include "pairprod/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace pairprod::qkt {

namespace {

constexpr double default_dt = 0.02;
constexpr double phase_per_step = 0.05;
constexpr double pauli_slack = 1e-9;
// N counts both spin states, so the Pauli bound applies to N / 2.
constexpr double spin_states = 2.0;
constexpr double bookkeeping_slack = 1e-6;
constexpr double edge_fraction = 1e-6;
constexpr double edge_floor = 1e-24; // roundoff of an empty spectrum

// A and E on the half-step lattice t_start + j dt/2, j = 0 .. 2 steps.
struct DriveSamples
{
    StepGrid grid;
    std::vector<double> A;
    std::vector<double> E;
};

DriveSamples sample_drive(const VectorPotentialTable& table, double dt)
{
    DriveSamples d;
    d.grid = StepGrid::covering(table.t_start(), table.t_end(), dt);
    const std::size_t n = 2 * d.grid.steps + 1;
    d.A.resize(n);
    d.E.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double t = d.grid.t_start + 0.5 * d.grid.dt * static_cast<double>(j);
        d.A[j] = table(t);
        d.E[j] = table.field(t);
    }
    return d;
}

struct State
{
    double N, G, H;
};

inline State rhs(const State& y, double k_z, double eps_perp2, double A, double E) noexcept
{
    const double P = k_z + A;
    const double w2 = eps_perp2 + P * P;
    const double w = std::sqrt(w2);
    const double W = E * std::sqrt(eps_perp2) / w2;
    return {W * y.G, W * (1.0 - y.N) - 2.0 * w * y.H, 2.0 * w * y.G};
}

VlasovMode integrate(double k_z, double k_perp, const DriveSamples& d)
{
    const double dt = d.grid.dt;
    const double half = 0.5 * dt;
    const double eps_perp2 = 1.0 + k_perp * k_perp;
    State y{0.0, 0.0, 0.0};
    double max_n = 0.0;
    for (std::size_t n = 0; n < d.grid.steps; ++n) {
        const std::size_t j = 2 * n;
        const State k1 = rhs(y, k_z, eps_perp2, d.A[j], d.E[j]);
        const State k2 = rhs({y.N + half * k1.N, y.G + half * k1.G, y.H + half * k1.H}, k_z,
                             eps_perp2, d.A[j + 1], d.E[j + 1]);
        const State k3 = rhs({y.N + half * k2.N, y.G + half * k2.G, y.H + half * k2.H}, k_z,
                             eps_perp2, d.A[j + 1], d.E[j + 1]);
        const State k4 = rhs({y.N + dt * k3.N, y.G + dt * k3.G, y.H + dt * k3.H}, k_z, eps_perp2,
                             d.A[j + 2], d.E[j + 2]);
        y.N += dt / 6.0 * (k1.N + 2.0 * k2.N + 2.0 * k3.N + k4.N);
        y.G += dt / 6.0 * (k1.G + 2.0 * k2.G + 2.0 * k3.G + k4.G);
        y.H += dt / 6.0 * (k1.H + 2.0 * k2.H + 2.0 * k3.H + k4.H);
        max_n = std::max(max_n, y.N);
    }

    if (max_n / spin_states > 1.0 + pauli_slack)
        throw NumericalError("Pauli bound violated for k_z = " + std::to_string(k_z));
    if (y.G * y.G + y.H * y.H > 2.0 * y.N - y.N * y.N + bookkeeping_slack)
        throw NumericalError("auxiliary pair inconsistent with N for k_z = " + std::to_string(k_z));
    return {k_z, k_perp, y.N, y.G, y.H};
}

void check_step(double dt, double k_abs_max, double k_perp, const VectorPotentialTable& table)
{
    if (!(dt > 0.0)) throw ConfigError("numerics.dt", "must be > 0");
    const double limit = max_stable_dt(k_abs_max, k_perp, table);
    if (dt > limit * (1.0 + 1e-12))
        throw ConfigError("numerics.dt", "step " + std::to_string(dt) + " exceeds 0.05/max(w) = " +
                                             std::to_string(limit));
}

} // namespace

KinematicFactors kinematics(double k_z, double k_perp, double A, double E) noexcept
{
    KinematicFactors f;
    f.P_z = k_z + A;
    f.eps_perp = std::sqrt(1.0 + k_perp * k_perp);
    const double w2 = f.eps_perp * f.eps_perp + f.P_z * f.P_z;
    f.omega_k = std::sqrt(w2);
    f.W = E * f.eps_perp / w2;
    return f;
}

KinematicFactors kinematics(double k_z, double k_perp, const PulseField& pulse,
                            const VectorPotentialTable& table, double t)
{
    return kinematics(k_z, k_perp, table(t), efield_at(pulse, t));
}

Derivative vlasov_rhs(const VlasovMode& mode, const KinematicFactors& fac) noexcept
{
    return {fac.W * mode.G, fac.W * (1.0 - mode.N) - 2.0 * fac.omega_k * mode.H,
            2.0 * fac.omega_k * mode.G};
}

MomentumGrid MomentumGrid::symmetric(double k_max, double spacing)
{
    if (!(k_max > 0.0) || !(spacing > 0.0)) throw ConfigError("numerics.k_max", "must be > 0");
    const auto half = static_cast<std::size_t>(std::ceil(k_max / spacing - 1e-9));
    MomentumGrid g;
    g.k_max = spacing * static_cast<double>(half);
    g.k_min = -g.k_max;
    g.points = 2 * half + 1;
    return g;
}

std::vector<double> MomentumGrid::values() const
{
    std::vector<double> k(points);
    for (std::size_t i = 0; i < points; ++i) k[i] = this->k(i);
    // exact zero and exact mirror symmetry for symmetric grids
    if (k_min == -k_max) {
        for (std::size_t i = 0; i < points / 2; ++i) k[points - 1 - i] = -k[i];
        if (points % 2 == 1) k[points / 2] = 0.0;
    }
    return k;
}

double max_stable_dt(double k_abs_max, double k_perp, const VectorPotentialTable& table)
{
    const double p = std::abs(k_abs_max) + table.max_abs();
    return phase_per_step / std::sqrt(1.0 + k_perp * k_perp + p * p);
}

VlasovMode integrate_mode(double k_z, double k_perp, const PulseField& pulse,
                          const VectorPotentialTable& table, double dt)
{
    pulse.validate();
    check_step(dt, std::abs(k_z), k_perp, table);
    return integrate(k_z, k_perp, sample_drive(table, dt));
}

VlasovMode integrate_mode_checked(double k_z, double k_perp, const PulseField& pulse,
                                  const VectorPotentialTable& table, double dt)
{
    const VlasovMode coarse = integrate_mode(k_z, k_perp, pulse, table, dt);
    const VlasovMode fine = integrate_mode(k_z, k_perp, pulse, table, 0.5 * dt);
    const double scale = std::max(std::abs(fine.N), 1e-300);
    if (std::abs(coarse.N - fine.N) > 1e-3 * scale)
        throw NumericalError("RK4 step too large for k_z = " + std::to_string(k_z) +
                             ": N changes by more than 1e-3 relative on halving dt");
    return fine;
}

Spectrum spectrum(const PulseField& pulse, const VectorPotentialTable& table,
                  std::span<const double> k_values, const Options& options)
{
    pulse.validate();
    double k_abs = 0.0;
    for (double k : k_values) k_abs = std::max(k_abs, std::abs(k));
    const double dt = options.dt > 0.0
                          ? options.dt
                          : std::min(default_dt, max_stable_dt(k_abs, options.k_perp, table));
    check_step(dt, k_abs, options.k_perp, table);

    const DriveSamples drive = sample_drive(table, dt);
    Spectrum s;
    s.k.assign(k_values.begin(), k_values.end());
    s.N.resize(s.k.size());
    s.dt = drive.grid.dt;
    parallel_for(s.k.size(), options.workers,
                 [&](std::size_t i) { s.N[i] = integrate(s.k[i], options.k_perp, drive).N; });
    return s;
}

bool edge_leaks(std::span<const double> occupation) noexcept
{
    if (occupation.empty()) return false;
    const double peak = *std::max_element(occupation.begin(), occupation.end());
    const double edge = std::max(occupation.front(), occupation.back());
    return edge > edge_floor && edge > edge_fraction * peak;
}

double trapezoid(std::span<const double> values, double spacing) noexcept
{
    if (values.size() < 2) return 0.0;
    double sum = 0.5 * (values.front() + values.back());
    for (std::size_t i = 1; i + 1 < values.size(); ++i) sum += values[i];
    return sum * spacing;
}

double yield_qkt(const PulseField& pulse, const VectorPotentialTable& table,
                 const MomentumGrid& grid, const Options& options)
{
    const std::vector<double> k = grid.values();
    const Spectrum s = spectrum(pulse, table, k, options);
    if (edge_leaks(s.N))
        throw GridError("spectral leakage: occupation at |k| = " + std::to_string(grid.k_max) +
                        " exceeds 1e-6 of the maximum");
    return trapezoid(s.N, grid.spacing()) / (2.0 * std::numbers::pi);
}

YieldResult solve(const PulseField& pulse, const VectorPotentialTable& table, MomentumGrid grid,
                  const Options& options)
{
    constexpr int max_widenings = 8;
    const double spacing = grid.spacing();
    for (int attempt = 0;; ++attempt) {
        const std::vector<double> k = grid.values();
        Spectrum s = spectrum(pulse, table, k, options);
        if (!edge_leaks(s.N)) {
            YieldResult r;
            r.yield = trapezoid(s.N, spacing) / (2.0 * std::numbers::pi);
            r.spectrum = std::move(s);
            r.grid = grid;
            return r;
        }
        if (attempt == max_widenings)
            throw GridError("spectral leakage persists up to |k| = " + std::to_string(grid.k_max));
        grid = MomentumGrid::symmetric(1.5 * std::max(std::abs(grid.k_min), grid.k_max), spacing);
    }
}

} // namespace pairprod::qkt
