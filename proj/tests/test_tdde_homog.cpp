#include "pairprod/errors.hpp"
#include "pairprod/qkt.hpp"
#include "pairprod/tdde_homog.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace pairprod;
using tdde::cplx;

namespace {

double default_dt(const VectorPotentialTable& table) { return 0.95 * tdde::max_phase_dt(6.0, table); }

} // namespace

TEST_CASE("single step equals the matrix exponential")
{
    for (double k : {-2.5, -0.3, 0.0, 0.7, 4.0}) {
        for (double A : {-0.8, 0.0, 0.2}) {
            const double p = k + A;
            const double dt = 0.013;
            const auto g = tdde::gamma_step(k, A, dt);
            const auto e = oracle::expm_hermitian({1.0, p, p, -1.0}, dt);
            CHECK(std::abs(g.a00 - e[0]) < 1e-14);
            CHECK(std::abs(g.a01 - e[1]) < 1e-14);
            CHECK(std::abs(g.a10 - e[2]) < 1e-14);
            CHECK(std::abs(g.a11 - e[3]) < 1e-14);
            CHECK(g.unitarity_error() < 1e-14);
        }
    }
}

TEST_CASE("free spinors")
{
    for (double k : {-3.0, -1e-9, 0.0, 0.4, 2.0}) {
        const auto s = tdde::free_spinors(k);
        // (sigma1 k + sigma3) u = E u, (sigma1 k + sigma3) v = -E v
        CHECK(std::abs(s.u[0] + k * s.u[1] - s.energy * s.u[0]) < 1e-14);
        CHECK(std::abs(k * s.u[0] - s.u[1] - s.energy * s.u[1]) < 1e-14);
        CHECK(std::abs(s.v[0] + k * s.v[1] + s.energy * s.v[0]) < 1e-14);
        CHECK(std::abs(k * s.v[0] - s.v[1] + s.energy * s.v[1]) < 1e-14);
        CHECK(std::abs(tdde::dot(s.u, s.u) - 1.0) < 1e-15);
        CHECK(std::abs(tdde::dot(s.v, s.v) - 1.0) < 1e-15);
        CHECK(std::abs(tdde::dot(s.u, s.v)) < 1e-15);
    }
}

TEST_CASE("transfer products are unitary over full windows")
{
    const PulseField p = PulseField::centered(0.3, 20.0, 1.0);
    const auto table = build_vector_potential(p);
    const auto k = tdde::box_modes(137.0, 6.0);
    const auto states = tdde::propagate_modes(k, table, default_dt(table));
    double worst = 0.0, column = 0.0;
    for (const auto& s : states) {
        worst = std::max(worst, s.M.unitarity_error());
        column = std::max(column, std::abs(std::norm(s.U) + std::norm(s.V) - 1.0));
    }
    CHECK(worst < 1e-10);
    CHECK(column < 1e-10);
}

TEST_CASE("transfer products agree with direct spinor integration")
{
    std::mt19937_64 rng(20);
    std::uniform_real_distribution<double> eps(0.0, 0.3), omega(0.2, 3.0), kz(-1.5, 1.5);
    for (int i = 0; i < 20; ++i) {
        const PulseField p = PulseField::centered(eps(rng), 20.0, omega(rng));
        const double k = kz(rng);
        CAPTURE(p.eps);
        CAPTURE(p.omega);
        CAPTURE(k);
        const auto table = build_vector_potential(p);
        const double u = tdde::propagate_mode(k, p, table, 0.25 * default_dt(table)).probability();
        const double reference =
            oracle::spinor_probability(k, [&](double t) { return efield_at(p, t); }, p.t_start, p.t_end, 0.002);
        CHECK(std::abs(u - reference) < 1e-6);
    }
}

TEST_CASE("midpoint product converges at second order")
{
    const PulseField p = PulseField::centered(0.5, 10.0, 1.0);
    const auto table = build_vector_potential(p);
    const double k = 0.2;
    const double dt = 0.9 * tdde::max_phase_dt(k, table);
    const cplx u1 = tdde::propagate_mode(k, p, table, dt).U;
    const cplx u2 = tdde::propagate_mode(k, p, table, dt / 2).U;
    const cplx u4 = tdde::propagate_mode(k, p, table, dt / 4).U;
    const double order = std::log2(std::abs(u1 - u2) / std::abs(u2 - u4));
    CHECK(order == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("zero field creates no pairs")
{
    const PulseField p = PulseField::centered(0.0, 20.0, 1.0);
    const auto table = build_vector_potential(p);
    const auto r = tdde::solve(p, table, {});
    // |u^dagger M v|^2 vanishes up to the roundoff of the spinor products
    for (double x : r.probability) CHECK(x < 1e-24);
    CHECK(r.yield < 1e-24);
}

TEST_CASE("box modes")
{
    const auto k = tdde::box_modes(2.0 * std::numbers::pi, 3.0);
    CHECK(k.size() == 7);
    CHECK(k.front() == -3.0);
    CHECK(k[3] == 0.0);
    CHECK_THROWS_AS(tdde::box_modes(0.0, 1.0), ConfigError);
}

TEST_CASE("step size preconditions")
{
    const PulseField p = PulseField::centered(0.1, 20.0, 1.0);
    const auto table = build_vector_potential(p);
    CHECK_THROWS_AS(tdde::propagate_mode(5.0, p, table, 0.05), ConfigError);
    CHECK_THROWS_AS(tdde::propagate_mode(0.0, p, table, 0.0), ConfigError);
    tdde::Options o;
    o.adapt_dt = false;
    CHECK_THROWS_AS(tdde::solve(p, table, o), ConfigError);
    o.adapt_dt = true;
    CHECK(tdde::solve(p, table, o).dt < tdde::max_phase_dt(6.0, table));
}

TEST_CASE("leakage at the cutoff is reported")
{
    const PulseField p = PulseField::centered(0.1, 20.0, 2.0);
    const auto table = build_vector_potential(p);
    CHECK_THROWS_AS(tdde::yield_tdde_homog(p, table, 137.0, 0.009, 0.3), GridError);
    tdde::Options o;
    o.k_max = 0.3;
    const auto r = tdde::solve(p, table, o);
    CHECK_FALSE(qkt::edge_leaks(r.probability));
}

TEST_CASE("yield matches the Vlasov solver")
{
    const PulseField p = PulseField::centered(0.1, 20.0, 2.0);
    const auto table = build_vector_potential(p);
    const double y_qkt = qkt::solve(p, table).yield;
    tdde::Options o;
    o.L = 137.0;
    const double y_tdde = tdde::solve(p, table, o).yield;
    CHECK(std::abs(y_qkt - y_tdde) < 1e-3 * y_qkt);
}

TEST_CASE("yield per Compton wavelength is independent of the box length")
{
    const PulseField p = PulseField::centered(0.1, 20.0, 1.0);
    const auto table = build_vector_potential(p);
    tdde::Options o;
    o.L = 137.0;
    const double y1 = tdde::solve(p, table, o).yield;
    o.L = 274.0;
    const double y2 = tdde::solve(p, table, o).yield;
    CHECK(std::abs(y1 - y2) < 1e-4 * y2);
}

TEST_CASE("mode probabilities are half the spin-summed occupations")
{
    // Both integrators are run well inside their step limits so that the
    // comparison reaches occupations of 1e-12.
    const PulseField p = PulseField::centered(0.2, 20.0, 2.0);
    const auto table = build_vector_potential(p);
    const auto k = tdde::box_modes(60.0, 3.0);
    const auto states = tdde::propagate_modes(k, table, 0.25 * default_dt(table));
    qkt::Options o;
    o.dt = 0.125 * qkt::max_stable_dt(6.0, 0.0, table);
    const auto n = qkt::spectrum(p, table, k, o);
    int compared = 0;
    for (std::size_t i = 0; i < k.size(); ++i) {
        if (n.N[i] <= 1e-12) continue;
        CHECK(std::abs(2.0 * states[i].probability() - n.N[i]) < 1e-3 * n.N[i]);
        ++compared;
    }
    CHECK(compared > 10);
}
