#pragma once

#include "pairprod/fields.hpp"
#include "pairprod/qkt.hpp"

#include <array>
#include <complex>
#include <span>
#include <vector>

// Momentum-space Dirac propagation for homogeneous fields. In the temporal
// gauge each canonical momentum k evolves independently under the 2x2
// Hamiltonian H = sigma1 (k + A_z(t)) + sigma3, so the full propagator is a
// time-ordered product of closed-form 2x2 exponentials per mode.

namespace pairprod::tdde {

using cplx = std::complex<double>;
using Spinor = std::array<cplx, 2>;

/// 2x2 complex matrix, row major.
struct Mat2
{
    cplx a00{1.0}, a01{0.0}, a10{0.0}, a11{1.0};

    static constexpr Mat2 identity() { return {}; }
    Mat2 adjoint() const { return {std::conj(a00), std::conj(a10), std::conj(a01), std::conj(a11)}; }
    Spinor operator*(const Spinor& s) const { return {a00 * s[0] + a01 * s[1], a10 * s[0] + a11 * s[1]}; }
    friend Mat2 operator*(const Mat2& x, const Mat2& y)
    {
        return {x.a00 * y.a00 + x.a01 * y.a10, x.a00 * y.a01 + x.a01 * y.a11,
                x.a10 * y.a00 + x.a11 * y.a10, x.a10 * y.a01 + x.a11 * y.a11};
    }
    /// max-abs entry of M^dagger M - I
    double unitarity_error() const;
};

inline cplx dot(const Spinor& a, const Spinor& b) { return std::conj(a[0]) * b[0] + std::conj(a[1]) * b[1]; }

/// Unit-normalized free solutions of H = sigma1 k + sigma3 at momentum k.
struct FreeSpinorPair
{
    double k = 0.0;
    double energy = 1.0; ///< sqrt(1 + k^2)
    Spinor u{};          ///< positive energy
    Spinor v{};          ///< negative energy
};

FreeSpinorPair free_spinors(double k);

/// exp(-i dt (sigma1 P + sigma3)) with P = k + A, in closed form:
/// cos(phi) - i dt sin(phi) (sigma3 + sigma1 P) / phi, phi = dt sqrt(1 + P^2).
Mat2 gamma_step(double k, double A, double dt);

struct TransferState
{
    double k = 0.0;
    Mat2 M;     ///< Gamma(t_end) ... Gamma(t_start)
    cplx U{};   ///< u^dagger M v
    cplx V{};   ///< v^dagger M v, the amplitude to stay in the negative continuum

    double probability() const { return std::norm(U); }
};

/// Largest dt with dt sqrt(1 + (|k| + max|A|)^2) < 0.1.
double max_phase_dt(double k_abs_max, const VectorPotentialTable& table);

/// Ordered product of gamma_step over the table window with A sampled at
/// step midpoints. Throws ConfigError if dt violates max_phase_dt and
/// NumericalError if ||M^dagger M - I|| exceeds 1e-8.
TransferState propagate_mode(double k, const PulseField& pulse, const VectorPotentialTable& table,
                             double dt);

/// Products for many modes sharing one set of midpoint samples.
std::vector<TransferState> propagate_modes(std::span<const double> k_values,
                                           const VectorPotentialTable& table, double dt,
                                           unsigned workers = 1);

/// Box modes k_j = 2 pi j / L for |k_j| <= k_max.
std::vector<double> box_modes(double L, double k_max);

/// (2 / L) sum_j |U_{k_j}|^2 with modes k_j = 2 pi j / L, |k_j| <= k_max.
/// Throws GridError on edge leakage.
double yield_tdde_homog(const PulseField& pulse, const VectorPotentialTable& table, double L,
                        double dt, double k_max = 6.0, unsigned workers = 1);

struct Options
{
    double L = 137.0;
    double dt = 0.02;
    double k_max = 6.0;
    /// Shrink dt when the requested step violates the phase limit for the mode set.
    bool adapt_dt = true;
    unsigned workers = 1;
};

struct YieldResult
{
    std::vector<double> k;
    std::vector<double> probability; ///< per spin, |U_k|^2
    double yield = 0.0;              ///< per Compton wavelength, spin summed
    double dt = 0.0;
    double max_unitarity_error = 0.0;
};

/// Yield with automatic widening of k_max until the edge criterion holds.
YieldResult solve(const PulseField& pulse, const VectorPotentialTable& table, const Options& options = {});

} // namespace pairprod::tdde
