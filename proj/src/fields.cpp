#include "pairprod/fields.hpp"

#include "pairprod/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace pairprod {

namespace {

// Edge amplitude relative to eps must not exceed exp(-32), i.e. |t| >= 8 tau.
constexpr double edge_exponent = 32.0;

} // namespace

PulseField PulseField::centered(double eps, double tau, double omega, double multiples)
{
    PulseField p;
    p.eps = eps;
    p.tau = tau;
    p.omega = omega;
    p.t_start = -multiples * tau;
    p.t_end = multiples * tau;
    return p;
}

void PulseField::validate() const
{
    if (!(eps >= 0.0)) throw ConfigError("field.eps", "must be >= 0");
    if (!(tau > 0.0)) throw ConfigError("field.tau", "must be > 0");
    if (!(omega >= 0.0)) throw ConfigError("field.omega", "must be >= 0");
    if (!(t_end > t_start)) throw ConfigError("field.window_tau_multiples", "empty time window");
}

double efield_at(const PulseField& pulse, double t)
{
    const double x = t / pulse.tau;
    return pulse.eps * std::exp(-0.5 * x * x) * std::cos(pulse.omega * t);
}

VectorPotentialTable VectorPotentialTable::from_field(const std::function<double(double)>& field,
                                                      double t_start, double t_end,
                                                      std::size_t n_samples)
{
    if (n_samples < 2) throw ConfigError("numerics.potential_samples", "need at least two samples");
    if (!(t_end > t_start)) throw ConfigError("", "vector potential window is empty");

    VectorPotentialTable table;
    table.t_start_ = t_start;
    table.step_ = (t_end - t_start) / static_cast<double>(n_samples - 1);
    table.values_.resize(n_samples);
    table.fields_.resize(n_samples);

    const double h = table.step_;
    table.fields_[0] = field(t_start);
    table.values_[0] = 0.0;
    double a = 0.0;
    double max_abs = 0.0;
    for (std::size_t i = 0; i + 1 < n_samples; ++i) {
        const double t = table.time(i);
        const double e_mid = field(t + 0.5 * h);
        const double e_next = field(table.time(i + 1));
        a -= h / 6.0 * (table.fields_[i] + 4.0 * e_mid + e_next);
        table.fields_[i + 1] = e_next;
        table.values_[i + 1] = a;
        max_abs = std::max(max_abs, std::abs(a));
    }
    table.max_abs_ = max_abs;
    return table;
}

double VectorPotentialTable::operator()(double t) const
{
    const double u = (t - t_start_) / step_;
    if (u <= 0.0) return values_.front();
    const auto last = values_.size() - 1;
    if (u >= static_cast<double>(last)) return values_.back();
    const auto i = std::min(static_cast<std::size_t>(u), last - 1);
    const double s = u - static_cast<double>(i);
    const double s2 = s * s;
    const double s3 = s2 * s;
    const double h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    const double h10 = s3 - 2.0 * s2 + s;
    const double h01 = -2.0 * s3 + 3.0 * s2;
    const double h11 = s3 - s2;
    // dA/dt = -E at the nodes
    return h00 * values_[i] - h10 * step_ * fields_[i] + h01 * values_[i + 1] -
           h11 * step_ * fields_[i + 1];
}

double VectorPotentialTable::field(double t) const
{
    const double u = (t - t_start_) / step_;
    const auto last = values_.size() - 1;
    if (u < 0.0 || u > static_cast<double>(last)) return 0.0;
    const auto i = std::min(static_cast<std::size_t>(u), last - 1);
    const double s = u - static_cast<double>(i);
    const double s2 = s * s;
    const double d00 = 6.0 * s2 - 6.0 * s;
    const double d10 = 3.0 * s2 - 4.0 * s + 1.0;
    const double d01 = -6.0 * s2 + 6.0 * s;
    const double d11 = 3.0 * s2 - 2.0 * s;
    const double dadt = (d00 * values_[i] + d01 * values_[i + 1]) / step_ - d10 * fields_[i] -
                        d11 * fields_[i + 1];
    return -dadt;
}

StepGrid StepGrid::covering(double t_start, double t_end, double max_dt)
{
    if (!(max_dt > 0.0)) throw ConfigError("numerics.dt", "must be > 0");
    if (!(t_end > t_start)) throw ConfigError("", "time window is empty");
    StepGrid g;
    g.t_start = t_start;
    const double span = t_end - t_start;
    g.steps = static_cast<std::size_t>(std::ceil(span / max_dt * (1.0 - 1e-12)));
    g.steps = std::max<std::size_t>(g.steps, 1);
    g.dt = span / static_cast<double>(g.steps);
    return g;
}

VectorPotentialTable build_vector_potential(const PulseField& pulse, std::size_t n_samples)
{
    pulse.validate();
    if (pulse.eps > 0.0) {
        for (double t : {pulse.t_start, pulse.t_end}) {
            const double x = t / pulse.tau;
            if (0.5 * x * x < edge_exponent * (1.0 - 1e-12))
                throw ConfigError("field.window_tau_multiples",
                                  "field not negligible at window edge t = " + std::to_string(t));
        }
    }
    const double required = 1000.0 * pulse.tau * pulse.omega;
    if (static_cast<double>(n_samples) < required)
        throw ConfigError("numerics.potential_samples",
                          "need at least " + std::to_string(static_cast<long long>(std::ceil(required))) +
                              " samples to resolve the oscillation");
    return VectorPotentialTable::from_field([&pulse](double t) { return efield_at(pulse, t); },
                                            pulse.t_start, pulse.t_end, n_samples);
}

void SauterWell::validate() const
{
    if (!(V0 >= 0.0)) throw ConfigError("well.V0", "must be >= 0");
    if (!(W > 0.0)) throw ConfigError("well.W", "must be > 0");
    if (!(D > 0.0)) throw ConfigError("well.D", "must be > 0");
}

double well_at(const SauterWell& well, double z)
{
    // Evaluated as a symmetric combination so that V(z) == V(-z) bit for bit.
    const double half = 0.5 * well.W;
    const double za = std::abs(z);
    return 0.5 * well.V0 * (std::tanh((za - half) / well.D) - std::tanh((za + half) / well.D));
}

void WellEnvelope::validate() const
{
    if (!(t1 > 0.0)) throw ConfigError("envelope.t1_over_tau", "ramp duration must be > 0");
    if (!(2.0 * t1 <= T)) throw ConfigError("envelope.T_over_tau", "need 2 t1 <= T");
}

double envelope_at(const WellEnvelope& env, double t)
{
    const double half = 0.5 * env.T;
    if (t <= -half || t >= half) return 0.0;
    constexpr double pi = std::numbers::pi;
    const double rise = t + half;
    if (rise < env.t1) {
        const double s = std::sin(pi * rise / (2.0 * env.t1));
        return s * s;
    }
    const double fall = t - (half - env.t1);
    if (fall > 0.0) {
        const double c = std::cos(pi * fall / (2.0 * env.t1));
        return c * c;
    }
    return 1.0;
}

} // namespace pairprod
