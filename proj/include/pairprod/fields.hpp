#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

// Background fields. Natural units throughout: m = e = c = hbar = 1, so times
// are in 1/m, lengths in the Compton wavelength and fields in m^2.

namespace pairprod {

/// Gaussian-envelope oscillating electric field E_z(t) = eps exp(-t^2/2tau^2) cos(omega t),
/// together with the simulation window it is used on.
struct PulseField
{
    double eps = 0.1;
    double tau = 20.0;
    double omega = 1.0;
    double t_start = -160.0;
    double t_end = 160.0;

    /// Pulse on the symmetric window [-multiples*tau, +multiples*tau].
    static PulseField centered(double eps, double tau, double omega, double multiples = 8.0);

    /// Throws ConfigError when eps < 0, tau <= 0, omega < 0 or the window is empty.
    void validate() const;
};

double efield_at(const PulseField& pulse, double t);

/// A_z(t) sampled on a uniform grid, with A(t_start) = 0 and dA/dt = -E_z.
///
/// Between samples the table uses cubic Hermite interpolation on the stored
/// values and their exact derivatives, so interpolation error is O(h^4).
class VectorPotentialTable
{
  public:
    /// Integrates -field over [t_start, t_end] with composite Simpson on each
    /// sample interval. Requires n_samples >= 2 and t_end > t_start.
    static VectorPotentialTable from_field(const std::function<double(double)>& field,
                                           double t_start, double t_end, std::size_t n_samples);

    double operator()(double t) const;
    /// The field used to build the table, -dA/dt, interpolated the same way.
    double field(double t) const;

    double t_start() const noexcept { return t_start_; }
    double t_end() const noexcept { return t_start_ + step_ * static_cast<double>(values_.size() - 1); }
    double step() const noexcept { return step_; }
    std::size_t size() const noexcept { return values_.size(); }
    double time(std::size_t i) const noexcept { return t_start_ + step_ * static_cast<double>(i); }
    std::span<const double> values() const noexcept { return values_; }
    /// max |A| over the samples
    double max_abs() const noexcept { return max_abs_; }

  private:
    double t_start_ = 0.0;
    double step_ = 1.0;
    std::vector<double> values_;
    std::vector<double> fields_;
    double max_abs_ = 0.0;
};

inline constexpr std::size_t default_potential_samples = std::size_t{1} << 18;

/// Uniform time stepping of [t_start, t_end] with the largest step <= max_dt
/// that divides the window into an integer number of steps.
struct StepGrid
{
    double t_start = 0.0;
    double dt = 0.0;
    std::size_t steps = 0;

    static StepGrid covering(double t_start, double t_end, double max_dt);
    double time(std::size_t n) const noexcept { return t_start + dt * static_cast<double>(n); }
    double t_end() const noexcept { return time(steps); }
};

/// Builds A_z for a pulse over its own window. Throws ConfigError when the
/// field is not negligible (> eps e^-32) at the window edges or when
/// n_samples < 1000 per unit of tau*omega.
VectorPotentialTable build_vector_potential(const PulseField& pulse,
                                            std::size_t n_samples = default_potential_samples);

/// Sauter-like well (V0/2) [tanh((z - W/2)/D) - tanh((z + W/2)/D)].
struct SauterWell
{
    double V0 = 1.0;
    double W = 4.0;
    double D = 0.3;

    void validate() const;
};

double well_at(const SauterWell& well, double z);

/// Switching function for the well on [-T/2, T/2]: sin^2 ramp of length t1,
/// plateau, cos^2 ramp of length t1.
struct WellEnvelope
{
    double T = 320.0;
    double t1 = 20.0;

    void validate() const;
};

double envelope_at(const WellEnvelope& env, double t);

} // namespace pairprod
