#pragma once

#include "pairprod/fields.hpp"

#include <cstddef>
#include <span>
#include <vector>

// Quantum Vlasov equation in its local (N, G, H) form, one momentum mode at a time.
//
//   dN/dt = W G
//   dG/dt = W (1 - N) - 2 w H
//   dH/dt = 2 w G
//
// with w^2 = 1 + k_perp^2 + (k_z + A_z(t))^2 and W = E_z eps_perp / w^2.
// N is the spin-summed occupation of the mode.

namespace pairprod::qkt {

struct VlasovMode
{
    double k_z = 0.0;
    double k_perp = 0.0;
    double N = 0.0;
    double G = 0.0;
    double H = 0.0;
};

struct KinematicFactors
{
    double omega_k = 1.0;  ///< total energy
    double P_z = 0.0;      ///< kinetic momentum k_z + A_z
    double eps_perp = 1.0; ///< transverse energy
    double W = 0.0;        ///< source amplitude
};

struct Derivative
{
    double dN = 0.0;
    double dG = 0.0;
    double dH = 0.0;
};

KinematicFactors kinematics(double k_z, double k_perp, double A, double E) noexcept;
KinematicFactors kinematics(double k_z, double k_perp, const PulseField& pulse,
                            const VectorPotentialTable& table, double t);

Derivative vlasov_rhs(const VlasovMode& mode, const KinematicFactors& fac) noexcept;

/// Uniform symmetric momentum grid.
struct MomentumGrid
{
    double k_min = -6.0;
    double k_max = 6.0;
    std::size_t points = 1201;

    static MomentumGrid symmetric(double k_max, double spacing);
    double spacing() const noexcept { return (k_max - k_min) / static_cast<double>(points - 1); }
    double k(std::size_t i) const noexcept { return k_min + spacing() * static_cast<double>(i); }
    std::vector<double> values() const;
};

/// Largest step allowed for a mode set reaching |k| <= k_abs_max: 0.05 / max w.
double max_stable_dt(double k_abs_max, double k_perp, const VectorPotentialTable& table);

/// Classic RK4 from the table's t_start to t_end with step <= dt.
///
/// Throws ConfigError when dt exceeds max_stable_dt for this mode and
/// NumericalError when the result violates the Pauli bound or the
/// G^2 + H^2 <= 2N - N^2 bookkeeping.
VlasovMode integrate_mode(double k_z, double k_perp, const PulseField& pulse,
                          const VectorPotentialTable& table, double dt);

/// integrate_mode plus a step-halving check: throws NumericalError when the
/// final N changes by more than 1e-3 relative on halving dt.
VlasovMode integrate_mode_checked(double k_z, double k_perp, const PulseField& pulse,
                                  const VectorPotentialTable& table, double dt);

struct Options
{
    double dt = 0.0; ///< 0 selects min(0.02, 0.05 / max w)
    double k_perp = 0.0;
    unsigned workers = 1;
};

/// Final occupations on a momentum grid (no edge check).
struct Spectrum
{
    std::vector<double> k;
    std::vector<double> N;
    double dt = 0.0;
};

Spectrum spectrum(const PulseField& pulse, const VectorPotentialTable& table,
                  std::span<const double> k_values, const Options& options = {});

/// Trapezoidal integral of N(k)/(2 pi) over the grid. Throws GridError when
/// N at either edge exceeds 1e-6 of the spectral maximum.
double yield_qkt(const PulseField& pulse, const VectorPotentialTable& table,
                 const MomentumGrid& grid, const Options& options = {});

struct YieldResult
{
    Spectrum spectrum;
    MomentumGrid grid;
    double yield = 0.0;
};

/// yield_qkt on `grid`, widening the extent (same spacing) until the edge
/// criterion holds.
YieldResult solve(const PulseField& pulse, const VectorPotentialTable& table,
                  MomentumGrid grid = {}, const Options& options = {});

/// Edge criterion shared with the homogeneous Dirac solver.
bool edge_leaks(std::span<const double> occupation) noexcept;

/// Trapezoid over a uniform grid, summed in index order.
double trapezoid(std::span<const double> values, double spacing) noexcept;

} // namespace pairprod::qkt
