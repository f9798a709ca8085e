#include "pairprod/tdde_spatial.hpp"

#include "pairprod/errors.hpp"
#include "pairprod/parallel.hpp"

#include <fftw3.h>

#include <lapacke.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

namespace pairprod::spatial {

namespace {

constexpr double split_phase_limit = 0.2;
constexpr double step_norm_tolerance = 1e-6;
constexpr double run_norm_tolerance = 1e-8;
constexpr std::size_t block_states = 64;
constexpr std::size_t norm_check_interval = 2048;
constexpr std::size_t max_dense_points = 1024;

struct FftwFree
{
    void operator()(fftw_complex* p) const noexcept { fftw_free(p); }
};
using Buffer = std::unique_ptr<fftw_complex[], FftwFree>;

Buffer allocate(std::size_t n)
{
    Buffer b(fftw_alloc_complex(n));
    if (!b) throw std::bad_alloc();
    std::fill_n(reinterpret_cast<double*>(b.get()), 2 * n, 0.0);
    return b;
}

// The FFTW planner is not thread safe; execution of an existing plan on new
// arrays is.
std::mutex planner_mutex;

// Batched in-place transforms of `howmany` contiguous length-n arrays.
class BatchFft
{
  public:
    BatchFft(std::size_t n, std::size_t howmany) : n_(n), howmany_(howmany)
    {
        std::lock_guard lock(planner_mutex);
        Buffer scratch = allocate(n * howmany);
        const int len[1] = {static_cast<int>(n)};
        // ESTIMATE planning is deterministic, so outputs do not depend on timing.
        forward_ = fftw_plan_many_dft(1, len, static_cast<int>(howmany), scratch.get(), nullptr, 1,
                                      static_cast<int>(n), scratch.get(), nullptr, 1, static_cast<int>(n),
                                      FFTW_FORWARD, FFTW_ESTIMATE);
        backward_ = fftw_plan_many_dft(1, len, static_cast<int>(howmany), scratch.get(), nullptr, 1,
                                       static_cast<int>(n), scratch.get(), nullptr, 1, static_cast<int>(n),
                                       FFTW_BACKWARD, FFTW_ESTIMATE);
        if (!forward_ || !backward_) throw std::runtime_error("FFTW planning failed");
    }
    BatchFft(const BatchFft&) = delete;
    BatchFft& operator=(const BatchFft&) = delete;
    ~BatchFft()
    {
        std::lock_guard lock(planner_mutex);
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(backward_);
    }

    void forward(fftw_complex* data) const { fftw_execute_dft(forward_, data, data); }
    void backward(fftw_complex* data) const { fftw_execute_dft(backward_, data, data); }
    std::size_t howmany() const noexcept { return howmany_; }
    std::size_t size() const noexcept { return n_; }

  private:
    std::size_t n_;
    std::size_t howmany_;
    fftw_plan forward_ = nullptr;
    fftw_plan backward_ = nullptr;
};

// 2x2 complex matrices per FFT slot, split into real arrays for the hot loop.
struct KineticFactors
{
    std::vector<double> m[8]; // 00r 00i 01r 01i 10r 10i 11r 11i

    explicit KineticFactors(std::size_t n)
    {
        for (auto& v : m) v.resize(n);
    }

    void set(std::size_t s, const tdde::Mat2& g)
    {
        m[0][s] = g.a00.real(), m[1][s] = g.a00.imag();
        m[2][s] = g.a01.real(), m[3][s] = g.a01.imag();
        m[4][s] = g.a10.real(), m[5][s] = g.a10.imag();
        m[6][s] = g.a11.real(), m[7][s] = g.a11.imag();
    }

    // (a, b) <- M (a, b) slot by slot for `count` states
    void apply(double* upper, double* lower, std::size_t n, std::size_t count) const
    {
        const double* m00r = m[0].data();
        const double* m00i = m[1].data();
        const double* m01r = m[2].data();
        const double* m01i = m[3].data();
        const double* m10r = m[4].data();
        const double* m10i = m[5].data();
        const double* m11r = m[6].data();
        const double* m11i = m[7].data();
        for (std::size_t i = 0; i < count; ++i) {
            double* a = upper + 2 * n * i;
            double* b = lower + 2 * n * i;
            for (std::size_t s = 0; s < n; ++s) {
                const double ar = a[2 * s], ai = a[2 * s + 1];
                const double br = b[2 * s], bi = b[2 * s + 1];
                a[2 * s] = m00r[s] * ar - m00i[s] * ai + m01r[s] * br - m01i[s] * bi;
                a[2 * s + 1] = m00r[s] * ai + m00i[s] * ar + m01r[s] * bi + m01i[s] * br;
                b[2 * s] = m10r[s] * ar - m10i[s] * ai + m11r[s] * br - m11i[s] * bi;
                b[2 * s + 1] = m10r[s] * ai + m10i[s] * ar + m11r[s] * bi + m11i[s] * br;
            }
        }
    }
};

// Field samples shared by every state of one propagation.
struct Schedule
{
    StepGrid steps;
    std::vector<double> a_mid;    // A_z(t_n + dt/2)
    std::vector<double> envelope; // f(t_n + dt/2)
};

Schedule make_schedule(const VectorPotentialTable& table, const WellEnvelope& env, double dt)
{
    Schedule s;
    s.steps = StepGrid::covering(-0.5 * env.T, 0.5 * env.T, dt);
    s.a_mid.resize(s.steps.steps);
    s.envelope.resize(s.steps.steps);
    for (std::size_t n = 0; n < s.steps.steps; ++n) {
        const double tm = s.steps.time(n) + 0.5 * s.steps.dt;
        s.a_mid[n] = table(tm);
        s.envelope[n] = envelope_at(env, tm);
    }
    return s;
}

std::vector<double> slot_momenta(const SpatialGrid& grid)
{
    std::vector<double> k(grid.Nz);
    for (std::size_t s = 0; s < grid.Nz; ++s) k[s] = grid.k(grid.slot(s));
    return k;
}

std::vector<double> sample_well(const SpatialGrid& grid, const SauterWell& well)
{
    std::vector<double> v(grid.Nz);
    for (std::size_t j = 0; j < grid.Nz; ++j) v[j] = well_at(well, grid.z(j));
    return v;
}

double block_norm(const double* upper, const double* lower, std::size_t n)
{
    double sum = 0.0;
    for (std::size_t s = 0; s < 2 * n; ++s) sum += upper[s] * upper[s] + lower[s] * lower[s];
    return sum;
}

// Strang propagation of `count` states held in `buf` (count upper components
// followed by count lower components, each Nz long, momentum space).
class SplitPropagator
{
  public:
    SplitPropagator(const SpatialGrid& grid, const Schedule& schedule, std::vector<double> potential,
                    std::size_t count)
        : grid_(grid), schedule_(schedule), momenta_(slot_momenta(grid)), potential_(std::move(potential)),
          fft_(grid.Nz, 2 * count)
    {
    }

    std::size_t capacity() const noexcept { return fft_.howmany() / 2; }

    /// Returns the index of the first state whose norm drifted, or count if none.
    std::size_t run(fftw_complex* buf, std::size_t count) const
    {
        const std::size_t n = grid_.Nz;
        const double dt = schedule_.steps.dt;
        const std::size_t steps = schedule_.steps.steps;
        double* upper = reinterpret_cast<double*>(buf);
        double* lower = upper + 2 * n * count;

        KineticFactors half(n), merged(n);
        std::vector<tdde::Mat2> previous(n);
        for (std::size_t s = 0; s < n; ++s) {
            previous[s] = tdde::gamma_step(momenta_[s], schedule_.a_mid[0], 0.5 * dt);
            half.set(s, previous[s]);
        }
        half.apply(upper, lower, n, count);

        std::vector<double> phase(2 * n);
        double phase_envelope = std::numeric_limits<double>::quiet_NaN();
        const double inv_n = 1.0 / static_cast<double>(n);

        for (std::size_t step = 0; step < steps; ++step) {
            fft_.backward(buf);
            const double f = schedule_.envelope[step];
            if (f != phase_envelope) {
                for (std::size_t j = 0; j < n; ++j) {
                    const double theta = -dt * potential_[j] * f;
                    phase[2 * j] = std::cos(theta) * inv_n;
                    phase[2 * j + 1] = std::sin(theta) * inv_n;
                }
                phase_envelope = f;
            }
            for (std::size_t i = 0; i < 2 * count; ++i) {
                double* x = upper + 2 * n * i;
                for (std::size_t j = 0; j < n; ++j) {
                    const double xr = x[2 * j], xi = x[2 * j + 1];
                    x[2 * j] = xr * phase[2 * j] - xi * phase[2 * j + 1];
                    x[2 * j + 1] = xr * phase[2 * j + 1] + xi * phase[2 * j];
                }
            }
            fft_.forward(buf);

            if (step + 1 < steps) {
                for (std::size_t s = 0; s < n; ++s) {
                    const tdde::Mat2 next = tdde::gamma_step(momenta_[s], schedule_.a_mid[step + 1], 0.5 * dt);
                    merged.set(s, next * previous[s]);
                    previous[s] = next;
                }
                merged.apply(upper, lower, n, count);
            } else {
                for (std::size_t s = 0; s < n; ++s) half.set(s, previous[s]);
                half.apply(upper, lower, n, count);
            }

            if ((step + 1) % norm_check_interval == 0 || step + 1 == steps) {
                for (std::size_t i = 0; i < count; ++i) {
                    const double norm = block_norm(upper + 2 * n * i, lower + 2 * n * i, n);
                    if (std::abs(norm - 1.0) > run_norm_tolerance) return i;
                }
            }
        }
        return count;
    }

  private:
    const SpatialGrid& grid_;
    const Schedule& schedule_;
    std::vector<double> momenta_;
    std::vector<double> potential_;
    BatchFft fft_;
};

void project_column(const Basis& basis, const cplx* upper, const cplx* lower, TransitionMatrix& U,
                    std::size_t column)
{
    const SpatialGrid& grid = basis.grid;
    cplx* out = U.data.data() + column * U.dim;
    double negative = 0.0;
    for (std::size_t p = 0; p < grid.Nz; ++p) {
        const std::size_t s = grid.slot(p);
        const Spinor c{upper[s], lower[s]};
        out[p] = tdde::dot(basis.modes[p].u, c);
        negative += std::norm(tdde::dot(basis.modes[p].v, c));
    }
    U.negative_weight[column] = negative;
}

// (-1)^m for basis index p: e^{i k z_j} = (-1)^m e^{2 pi i m j / Nz}
double offset_sign(const SpatialGrid& grid, std::size_t p)
{
    const auto m = static_cast<long>(p) - static_cast<long>(grid.Nz / 2);
    return (m % 2 == 0) ? 1.0 : -1.0;
}

} // namespace

void SpatialGrid::validate() const
{
    if (!(L > 0.0)) throw ConfigError("numerics.L", "must be > 0");
    if (Nz < 256 || !std::has_single_bit(Nz)) throw ConfigError("numerics.Nz", "must be a power of two >= 256");
    if (!(dz() < 0.25)) throw ConfigError("numerics.Nz", "grid spacing L/Nz must be < 0.25");
}

double SpatialGrid::k(std::size_t p) const noexcept
{
    const auto m = static_cast<double>(static_cast<long>(p) - static_cast<long>(Nz / 2));
    return 2.0 * std::numbers::pi * m / L;
}

double SpatialGrid::k_max() const noexcept
{
    return std::abs(k(0));
}

double SpinorField::norm() const
{
    double sum = 0.0;
    for (std::size_t s = 0; s < a.size(); ++s) sum += std::norm(a[s]) + std::norm(b[s]);
    return sum;
}

std::vector<Spinor> SpinorField::position_values() const
{
    const std::size_t n = grid.Nz;
    BatchFft fft(n, 2);
    Buffer buf = allocate(2 * n);
    auto* c = reinterpret_cast<cplx*>(buf.get());
    for (std::size_t s = 0; s < n; ++s) {
        const double sign = offset_sign(grid, grid.slot(s));
        c[s] = sign * a[s];
        c[n + s] = sign * b[s];
    }
    fft.backward(buf.get());
    const double scale = 1.0 / std::sqrt(grid.L);
    std::vector<Spinor> out(n);
    for (std::size_t j = 0; j < n; ++j) out[j] = {scale * c[j], scale * c[n + j]};
    return out;
}

SpinorField Basis::positive(std::size_t p) const
{
    SpinorField f(grid);
    const std::size_t s = grid.slot(p);
    f.a[s] = modes[p].u[0];
    f.b[s] = modes[p].u[1];
    return f;
}

SpinorField Basis::negative(std::size_t n) const
{
    SpinorField f(grid);
    const std::size_t s = grid.slot(n);
    f.a[s] = modes[n].v[0];
    f.b[s] = modes[n].v[1];
    return f;
}

Basis build_basis(const SpatialGrid& grid)
{
    grid.validate();
    Basis basis;
    basis.grid = grid;
    basis.modes.reserve(grid.Nz);
    for (std::size_t p = 0; p < grid.Nz; ++p) basis.modes.push_back(tdde::free_spinors(grid.k(p)));
    return basis;
}

double max_split_dt(const SpatialGrid& grid, const SauterWell& well)
{
    double v_max = 0.0;
    for (std::size_t j = 0; j < grid.Nz; ++j) v_max = std::max(v_max, std::abs(well_at(well, grid.z(j))));
    const double e_max = std::sqrt(1.0 + grid.k_max() * grid.k_max());
    return split_phase_limit / (v_max + e_max);
}

SpinorField split_step(const SpinorField& psi, double t, double dt, const VectorPotentialTable& table,
                       const SauterWell& well, const WellEnvelope& env)
{
    const SpatialGrid& grid = psi.grid;
    grid.validate();
    if (!(dt > 0.0)) throw ConfigError("numerics.dt", "must be > 0");
    if (dt >= max_split_dt(grid, well))
        throw ConfigError("numerics.spatial_dt", "step " + std::to_string(dt) + " exceeds the split-step limit");
    const std::size_t n = grid.Nz;
    const double tm = t + 0.5 * dt;
    const double A = table(tm);
    const double f = envelope_at(env, tm);

    BatchFft fft(n, 2);
    Buffer buf = allocate(2 * n);
    auto* c = reinterpret_cast<cplx*>(buf.get());
    std::copy(psi.a.begin(), psi.a.end(), c);
    std::copy(psi.b.begin(), psi.b.end(), c + n);

    auto kinetic = [&] {
        for (std::size_t s = 0; s < n; ++s) {
            const Spinor out = tdde::gamma_step(grid.k(grid.slot(s)), A, 0.5 * dt) * Spinor{c[s], c[n + s]};
            c[s] = out[0];
            c[n + s] = out[1];
        }
    };

    kinetic();
    fft.backward(buf.get());
    for (std::size_t j = 0; j < n; ++j) {
        const double theta = -dt * well_at(well, grid.z(j)) * f;
        const cplx phase = std::polar(1.0 / static_cast<double>(n), theta);
        c[j] *= phase;
        c[n + j] *= phase;
    }
    fft.forward(buf.get());
    kinetic();

    SpinorField out(grid);
    std::copy(c, c + n, out.a.begin());
    std::copy(c + n, c + 2 * n, out.b.begin());
    const double before = psi.norm();
    if (std::abs(out.norm() - before) > step_norm_tolerance * std::max(before, 1e-300))
        throw NumericalError("split step changed the norm by more than 1e-6");
    return out;
}

TransitionMatrix propagate_all_negative(const SpatialGrid& grid, const PulseField& pulse,
                                        const VectorPotentialTable& table, const SauterWell& well,
                                        const WellEnvelope& env, const PropagationOptions& options)
{
    grid.validate();
    pulse.validate();
    well.validate();
    env.validate();
    const double half_window = 0.5 * env.T;
    const double slack = 1e-12 * half_window;
    if (table.t_start() > -half_window + slack || table.t_end() < half_window - slack)
        throw ConfigError("envelope.T_over_tau", "vector potential table does not cover [-T/2, T/2]");

    const double limit = max_split_dt(grid, well);
    const double dt = options.dt > 0.0 ? options.dt : 0.95 * limit;
    if (dt >= limit)
        throw ConfigError("numerics.dt", "dt (max|V| + E_max) must be < 0.2; limit is " + std::to_string(limit));

    const Schedule schedule = make_schedule(table, env, dt);
    const Basis basis = build_basis(grid);
    const std::size_t n = grid.Nz;

    TransitionMatrix U;
    U.dim = n;
    U.data.assign(n * n, cplx{});
    U.negative_weight.assign(n, 0.0);
    U.dt = schedule.steps.dt;
    U.steps = schedule.steps.steps;

    if (well.V0 == 0.0 && !options.force_split) {
        // Without the well every mode evolves on its own; the product of the
        // same half-step factors reproduces the split propagation exactly.
        const double half = 0.5 * schedule.steps.dt;
        parallel_for(n, options.workers, [&](std::size_t p) {
            const double k = grid.k(p);
            Spinor c = basis.modes[p].v;
            for (double a : schedule.a_mid) {
                const tdde::Mat2 g = tdde::gamma_step(k, a, half);
                c = g * (g * c);
            }
            const double norm = std::norm(c[0]) + std::norm(c[1]);
            if (std::abs(norm - 1.0) > run_norm_tolerance) throw StateFailure(p, "norm drift");
            U.data[p * n + p] = tdde::dot(basis.modes[p].u, c);
            U.negative_weight[p] = std::norm(tdde::dot(basis.modes[p].v, c));
        });
        return U;
    }

    const std::size_t block = std::min(block_states, n);
    const std::vector<double> potential = sample_well(grid, well);
    const SplitPropagator propagator(grid, schedule, potential, block);
    const std::size_t blocks = (n + block - 1) / block;

    parallel_for(blocks, options.workers, [&](std::size_t blk) {
        const std::size_t first = blk * block;
        const std::size_t count = std::min(block, n - first);
        Buffer buf = allocate(2 * n * block);
        auto* c = reinterpret_cast<cplx*>(buf.get());
        cplx* upper = c;
        cplx* lower = c + n * block;
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t s = grid.slot(first + i);
            upper[i * n + s] = basis.modes[first + i].v[0];
            lower[i * n + s] = basis.modes[first + i].v[1];
        }
        // the batch always holds `block` states; unused slots stay zero
        const std::size_t failed = propagator.run(buf.get(), block);
        if (failed < count) throw StateFailure(first + failed, "norm drift beyond 1e-8");
        for (std::size_t i = 0; i < count; ++i) project_column(basis, upper + i * n, lower + i * n, U, first + i);
    });
    return U;
}

double pair_number(const TransitionMatrix& U)
{
    double sum = 0.0;
    for (const cplx& x : U.data) sum += std::norm(x);
    return sum;
}

std::vector<double> electron_spectrum(const TransitionMatrix& U)
{
    std::vector<double> out(U.dim, 0.0);
    for (std::size_t n = 0; n < U.dim; ++n)
        for (std::size_t p = 0; p < U.dim; ++p) out[p] += std::norm(U(p, n));
    return out;
}

std::vector<double> positron_spectrum(const TransitionMatrix& U)
{
    std::vector<double> out(U.dim, 0.0);
    for (std::size_t n = 0; n < U.dim; ++n)
        for (std::size_t p = 0; p < U.dim; ++p) out[n] += std::norm(U(p, n));
    return out;
}

namespace {

// sum over outer index of |sum over inner index coeff(inner, outer) phi_inner(z)|^2
template <class Coefficient>
std::vector<double> density(const Basis& basis, Coefficient&& coefficient)
{
    const SpatialGrid& grid = basis.grid;
    const std::size_t n = grid.Nz;
    BatchFft fft(n, 2);
    Buffer buf = allocate(2 * n);
    auto* c = reinterpret_cast<cplx*>(buf.get());
    std::vector<double> out(n, 0.0);
    const double scale = 1.0 / grid.L;
    for (std::size_t outer = 0; outer < n; ++outer) {
        for (std::size_t inner = 0; inner < n; ++inner) {
            const std::size_t s = grid.slot(inner);
            const Spinor w = coefficient(inner, outer);
            const double sign = offset_sign(grid, inner);
            c[s] = sign * w[0];
            c[n + s] = sign * w[1];
        }
        fft.backward(buf.get());
        for (std::size_t j = 0; j < n; ++j) out[j] += scale * (std::norm(c[j]) + std::norm(c[n + j]));
    }
    return out;
}

} // namespace

std::vector<double> electron_density(const TransitionMatrix& U, const Basis& basis)
{
    return density(basis, [&](std::size_t p, std::size_t n) {
        const cplx amp = U(p, n);
        return Spinor{amp * basis.modes[p].u[0], amp * basis.modes[p].u[1]};
    });
}

std::vector<double> positron_density(const TransitionMatrix& U, const Basis& basis)
{
    return density(basis, [&](std::size_t n, std::size_t p) {
        const cplx amp = U(p, n);
        return Spinor{amp * basis.modes[n].v[0], amp * basis.modes[n].v[1]};
    });
}

BoundStateSet find_bound_states(const SpatialGrid& requested, const SauterWell& well)
{
    requested.validate();
    well.validate();
    if (!(well.V0 < 2.0)) throw ConfigError("well.V0", "bound-state search needs a sub-critical well (V0 < 2)");

    SpatialGrid grid = requested;
    if (grid.Nz > max_dense_points) grid.Nz = max_dense_points;
    grid.validate();

    const std::size_t n = grid.Nz;
    const std::size_t dim = 2 * n;

    // Matrix elements of V between plane waves of momentum difference m:
    // (1/Nz) sum_j V(z_j) e^{-i 2 pi m z_j / L}; V is even, so they are real.
    std::vector<double> vhat(2 * n - 1, 0.0);
    const std::vector<double> potential = sample_well(grid, well);
    for (std::size_t d = 0; d < vhat.size(); ++d) {
        const double m = static_cast<double>(static_cast<long>(d) - static_cast<long>(n - 1));
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            sum += potential[j] * std::cos(2.0 * std::numbers::pi * m * grid.z(j) / grid.L);
        vhat[d] = sum / static_cast<double>(n);
    }

    // basis ordering: row r = component * Nz + p
    std::vector<cplx> h(dim * dim, cplx{});
    auto at = [&](std::size_t r, std::size_t c) -> cplx& { return h[c * dim + r]; };
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t q = 0; q < n; ++q) {
            const double v = vhat[p + (n - 1) - q];
            at(p, q) = v;
            at(n + p, n + q) = v;
        }
        at(p, p) += 1.0;
        at(n + p, n + p) -= 1.0;
        at(p, n + p) = grid.k(p);
        at(n + p, p) = grid.k(p);
    }

    lapack_int found = 0;
    std::vector<double> energies(dim);
    std::vector<cplx> vectors(dim * dim);
    std::vector<lapack_int> support(2 * dim);
    const lapack_int info = LAPACKE_zheevr(LAPACK_COL_MAJOR, 'V', 'V', 'L', static_cast<lapack_int>(dim), reinterpret_cast<lapack_complex_double*>(h.data()),
                                           static_cast<lapack_int>(dim), -1.0, 1.0, 0, 0, 0.0, &found,
                                           energies.data(), reinterpret_cast<lapack_complex_double*>(vectors.data()), static_cast<lapack_int>(dim),
                                           support.data());
    if (info != 0) throw NumericalError("Hermitian eigensolver failed (info " + std::to_string(info) + ")");

    BoundStateSet set;
    set.grid = grid;
    for (lapack_int i = 0; i < found; ++i) {
        const double e = energies[static_cast<std::size_t>(i)];
        if (!(e > -1.0 && e < 1.0)) continue;
        const cplx* col = vectors.data() + static_cast<std::size_t>(i) * dim;
        // fix the phase: largest component real and positive
        std::size_t big = 0;
        for (std::size_t r = 1; r < dim; ++r)
            if (std::abs(col[r]) > std::abs(col[big])) big = r;
        const cplx phase = std::abs(col[big]) > 0.0 ? std::conj(col[big]) / std::abs(col[big]) : cplx{1.0};

        BoundState state{e, SpinorField(grid)};
        for (std::size_t p = 0; p < n; ++p) {
            state.state.a[grid.slot(p)] = phase * col[p];
            state.state.b[grid.slot(p)] = phase * col[n + p];
        }
        set.states.push_back(std::move(state));
    }
    std::sort(set.states.begin(), set.states.end(),
              [](const BoundState& x, const BoundState& y) { return x.energy < y.energy; });
    return set;
}

} // namespace pairprod::spatial
