#pragma once

#include "pairprod/fields.hpp"
#include "pairprod/tdde_homog.hpp"

#include <cstddef>
#include <span>
#include <vector>

// Coordinate-space Dirac propagation on a periodic grid: every free
// negative-energy plane wave is evolved under
//
//   H(t) = sigma1 (p + A_z(t)) + sigma3 + V(z) f(t)
//
// with Strang splitting (kinetic half step in momentum space, scalar well
// phase in position space) and projected onto the free positive-energy
// plane waves at the end of the window.

namespace pairprod::spatial {

using tdde::cplx;
using tdde::Spinor;

/// Periodic grid z_j = -L/2 + j dz with momenta k = 2 pi m / L, m in [-Nz/2, Nz/2).
///
/// Basis index p in [0, Nz) orders the momenta ascending (m = p - Nz/2).
/// Coefficient arrays are stored in FFT order; slot() maps between the two.
struct SpatialGrid
{
    double L = 32.0;
    std::size_t Nz = 512;

    /// Throws ConfigError unless Nz is a power of two >= 256 and dz < 0.25.
    void validate() const;

    double dz() const noexcept { return L / static_cast<double>(Nz); }
    double z(std::size_t j) const noexcept { return -0.5 * L + dz() * static_cast<double>(j); }
    /// momentum of basis index p
    double k(std::size_t p) const noexcept;
    /// FFT slot of basis index p (and, being an involution, the basis index of a slot)
    std::size_t slot(std::size_t p) const noexcept { return (p + Nz / 2) % Nz; }
    /// largest |k| on the grid
    double k_max() const noexcept;
};

/// Two-component wavefunction stored as normalized momentum coefficients:
/// psi(z) = L^-1/2 sum_k c(k) e^{ikz}, so that sum |c|^2 = int |psi|^2 dz.
struct SpinorField
{
    SpatialGrid grid;
    std::vector<cplx> a; ///< upper component, FFT order
    std::vector<cplx> b; ///< lower component, FFT order

    explicit SpinorField(const SpatialGrid& g) : grid(g), a(g.Nz), b(g.Nz) {}

    double norm() const;
    /// psi at the grid points, component by component
    std::vector<Spinor> position_values() const;
};

/// Free plane-wave spinors for every basis index.
struct Basis
{
    SpatialGrid grid;
    std::vector<tdde::FreeSpinorPair> modes; ///< indexed by basis index p

    SpinorField positive(std::size_t p) const;
    SpinorField negative(std::size_t n) const;
};

Basis build_basis(const SpatialGrid& grid);

/// Largest dt with dt (max|V| + E_max) < 0.2.
double max_split_dt(const SpatialGrid& grid, const SauterWell& well);

/// One Strang step from t to t + dt. The kinetic factors use A_z(t + dt/2),
/// the well phase uses V(z) f(t + dt/2). Throws NumericalError when the norm
/// changes by more than 1e-6.
SpinorField split_step(const SpinorField& psi, double t, double dt, const VectorPotentialTable& table,
                       const SauterWell& well, const WellEnvelope& env);

/// Amplitudes U_pn = <phi_p | psi_n(T/2)> for every positive p and negative n.
struct TransitionMatrix
{
    std::size_t dim = 0;
    std::vector<cplx> data;              ///< column major: column n is initial state n
    std::vector<double> negative_weight; ///< sum_n' |<phi_n'|psi_n>|^2 per column
    double dt = 0.0;
    std::size_t steps = 0;

    cplx operator()(std::size_t p, std::size_t n) const { return data[n * dim + p]; }
    std::span<const cplx> column(std::size_t n) const { return {data.data() + n * dim, dim}; }
};

struct PropagationOptions
{
    double dt = 0.0; ///< 0 selects 0.95 * max_split_dt
    unsigned workers = 1;
    /// Use FFT round trips even when the well is switched off.
    bool force_split = false;
};

/// Evolves every negative basis state over [-T/2, T/2] (T = env.T) and
/// projects onto all positive states. The table must cover the window.
/// Throws StateFailure carrying the basis index of a state whose norm drifts
/// by more than 1e-8.
TransitionMatrix propagate_all_negative(const SpatialGrid& grid, const PulseField& pulse,
                                        const VectorPotentialTable& table, const SauterWell& well,
                                        const WellEnvelope& env, const PropagationOptions& options = {});

double pair_number(const TransitionMatrix& U);

/// N_el(p) = sum_n |U_pn|^2
std::vector<double> electron_spectrum(const TransitionMatrix& U);
/// N_po(n) = sum_p |U_pn|^2
std::vector<double> positron_spectrum(const TransitionMatrix& U);
/// sum_n |sum_p U_pn phi_p(z_j)|^2 on the grid
std::vector<double> electron_density(const TransitionMatrix& U, const Basis& basis);
/// sum_p |sum_n U_pn phi_n(z_j)|^2 on the grid
std::vector<double> positron_density(const TransitionMatrix& U, const Basis& basis);

struct BoundState
{
    double energy = 0.0;
    SpinorField state;
};

struct BoundStateSet
{
    SpatialGrid grid; ///< grid the diagonalization ran on
    std::vector<BoundState> states;
};

/// Eigenpairs of sigma1 p + sigma3 + V(z) with energy in (-1, 1), ascending.
/// Grids finer than 1024 points are decimated to 1024 points at the same L.
BoundStateSet find_bound_states(const SpatialGrid& grid, const SauterWell& well);

} // namespace pairprod::spatial
