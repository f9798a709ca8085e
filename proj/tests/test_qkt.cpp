#include "pairprod/errors.hpp"
#include "pairprod/qkt.hpp"
#include "pairprod/tdde_homog.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <random>

using namespace pairprod;

namespace {

double default_dt(double k, const VectorPotentialTable& table)
{
    return std::min(0.02, qkt::max_stable_dt(std::abs(k), 0.0, table));
}

} // namespace

TEST_CASE("kinematic factors")
{
    auto f = qkt::kinematics(0.0, 0.0, 0.0, 0.3);
    CHECK(f.omega_k == 1.0);
    CHECK(f.P_z == 0.0);
    CHECK(f.eps_perp == 1.0);
    CHECK(f.W == doctest::Approx(0.3));
    f = qkt::kinematics(3.0, 0.0, -3.0, 0.0);
    CHECK(f.P_z == 0.0);
    CHECK(f.omega_k == 1.0);
    CHECK(f.W == 0.0);
}

TEST_CASE("Vlasov right-hand side")
{
    auto d = qkt::vlasov_rhs({0, 0, 0, 0, 0}, {1.0, 0.0, 1.0, 0.0});
    CHECK(d.dN == 0.0);
    CHECK(d.dG == 0.0);
    CHECK(d.dH == 0.0);
    d = qkt::vlasov_rhs({0, 0, 0.0, 0.0, 1.0}, {1.0, 0.0, 1.0, 0.0});
    CHECK(d.dG == doctest::Approx(-2.0));
    d = qkt::vlasov_rhs({0, 0, 1.0, 0.1, 0.0}, {2.0, 0.0, 1.0, 0.5});
    CHECK(d.dN == doctest::Approx(0.05));
    CHECK(d.dG == doctest::Approx(0.0));
    CHECK(d.dH == doctest::Approx(0.4));
}

TEST_CASE("zero field leaves every mode empty")
{
    const PulseField p = PulseField::centered(0.0, 20.0, 1.0);
    const auto table = build_vector_potential(p);
    const qkt::MomentumGrid g{-2.0, 2.0, 41};
    const auto k = g.values();
    const auto s = qkt::spectrum(p, table, k, {});
    for (double n : s.N) CHECK(n == 0.0);
    const auto m = qkt::integrate_mode(0.7, 0.0, p, table, 0.01);
    CHECK(m.N == 0.0);
    CHECK(m.G == 0.0);
    CHECK(m.H == 0.0);
    CHECK(qkt::yield_qkt(p, table, g, {}) == 0.0);
}

TEST_CASE("modes agree with direct spinor integration")
{
    struct Case
    {
        double eps, omega, k;
    };
    for (const Case c : {Case{0.1, 2.0, 0.0}, Case{0.1, 2.0, -0.3}, Case{0.3, 0.7, 0.2}, Case{0.5, 1.1, 0.9}}) {
        CAPTURE(c.eps);
        CAPTURE(c.omega);
        CAPTURE(c.k);
        const PulseField p = PulseField::centered(c.eps, 20.0, c.omega);
        const auto table = build_vector_potential(p);
        const auto mode = qkt::integrate_mode(c.k, 0.0, p, table, default_dt(c.k, table));
        const double reference =
            2.0 * oracle::spinor_probability(c.k, [&](double t) { return efield_at(p, t); }, p.t_start, p.t_end, 0.002);
        CHECK(std::abs(mode.N - reference) < 1e-6);
    }
}

TEST_CASE("mode invariants hold along random modes")
{
    // (1 - N)^2 + G^2 + H^2 is conserved by the exact equations
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> eps(0.05, 0.8), omega(0.3, 3.0), kz(-2.0, 2.0);
    for (int i = 0; i < 10; ++i) {
        const PulseField p = PulseField::centered(eps(rng), 20.0, omega(rng));
        const auto table = build_vector_potential(p);
        const double k = kz(rng);
        const auto m = qkt::integrate_mode(k, 0.0, p, table, default_dt(k, table));
        CHECK(m.N >= -1e-12);
        CHECK(m.N / 2.0 <= 1.0 + 1e-9);
        CHECK(std::abs((1.0 - m.N) * (1.0 - m.N) + m.G * m.G + m.H * m.H - 1.0) < 1e-5);
    }
}

TEST_CASE("spin-summed occupation stays within two on a resonance line")
{
    const PulseField p = PulseField::centered(0.1, 20.0, 2.0);
    const auto table = build_vector_potential(p);
    const auto k = qkt::MomentumGrid{-0.4, 0.4, 161}.values();
    const auto s = qkt::spectrum(p, table, k, {});
    const double peak = *std::max_element(s.N.begin(), s.N.end());
    CHECK(peak > 0.5);
    CHECK(peak <= 2.0);
}

TEST_CASE("RK4 converges at fourth order")
{
    const PulseField p = PulseField::centered(0.5, 20.0, 1.0);
    const auto table = build_vector_potential(p);
    const double k = 0.3;
    const double dt = qkt::max_stable_dt(k, 0.0, table);
    const double n1 = qkt::integrate_mode(k, 0.0, p, table, dt).N;
    const double n2 = qkt::integrate_mode(k, 0.0, p, table, dt / 2).N;
    const double n4 = qkt::integrate_mode(k, 0.0, p, table, dt / 4).N;
    const double order = std::log2((n1 - n2) / (n2 - n4));
    CAPTURE(n1);
    CAPTURE(n2);
    CAPTURE(n4);
    CHECK(order == doctest::Approx(4.0).epsilon(0.3 / 4.0));
}

TEST_CASE("step size above the stability limit is rejected")
{
    const PulseField p = PulseField::centered(0.1, 20.0, 1.0);
    const auto table = build_vector_potential(p);
    CHECK_THROWS_AS(qkt::integrate_mode(5.0, 0.0, p, table, 0.02), ConfigError);
    CHECK_THROWS_AS(qkt::integrate_mode(0.0, 0.0, p, table, -1.0), ConfigError);
}

TEST_CASE("spectrum is unchanged by reversing the drive in time")
{
    // E(t) = g(t) cos(omega t + phi) reversed in time is g(t) cos(omega t - phi).
    const double tau = 20.0, omega = 0.9, phi = 0.7, eps = 0.3;
    auto drive = [&](double sign) {
        return [=](double t) { return eps * std::exp(-0.5 * t * t / (tau * tau)) * std::cos(omega * t + sign * phi); };
    };
    const PulseField p = PulseField::centered(eps, tau, omega);
    const auto fwd = VectorPotentialTable::from_field(drive(1.0), p.t_start, p.t_end, 1 << 17);
    const auto rev = VectorPotentialTable::from_field(drive(-1.0), p.t_start, p.t_end, 1 << 17);
    // the reversed drive maps canonical momentum k to -k - A(t_end)
    const std::vector<double> k{-1.1, -0.4, 0.25, 0.8};
    std::vector<double> mirrored;
    for (double x : k) mirrored.push_back(-x - fwd(fwd.t_end()));
    const auto a = qkt::spectrum(p, fwd, k, {});
    const auto b = qkt::spectrum(p, rev, mirrored, {});
    const auto c = qkt::spectrum(p, fwd, mirrored, {});
    bool asymmetric = false;
    for (std::size_t i = 0; i < k.size(); ++i) {
        CHECK(std::abs(a.N[i] - b.N[i]) < 1e-5 * a.N[i]);
        if (std::abs(a.N[i] - c.N[i]) > 1e-3 * a.N[i]) asymmetric = true;
    }
    CHECK(asymmetric);

    // the even pulse is its own reversal, so N(k) = N(-k)
    const PulseField even = PulseField::centered(0.1, 20.0, 1.0);
    const auto table = build_vector_potential(even);
    const qkt::MomentumGrid g{-1.5, 1.5, 31};
    const auto s = qkt::spectrum(even, table, g.values(), {});
    for (std::size_t i = 0; i < s.N.size(); ++i)
        CHECK(std::abs(s.N[i] - s.N[s.N.size() - 1 - i]) <= 1e-6 * s.N[i] + 1e-18);
}

TEST_CASE("momentum grids")
{
    const auto g = qkt::MomentumGrid::symmetric(6.0, 0.01);
    CHECK(g.points == 1201);
    const auto k = g.values();
    CHECK(k[600] == 0.0);
    for (std::size_t i = 0; i < k.size(); ++i) CHECK(k[i] == -k[k.size() - 1 - i]);
    CHECK(qkt::edge_leaks(std::vector<double>{1.0, 2.0, 1.0}));
    CHECK_FALSE(qkt::edge_leaks(std::vector<double>{0.0, 2.0, 1e-7}));
    CHECK(qkt::trapezoid(std::vector<double>{1.0, 1.0, 1.0}, 0.5) == 1.0);
}

TEST_CASE("yield per Compton wavelength matches the homogeneous Dirac solver")
{
    const PulseField p = PulseField::centered(0.1, 20.0, 2.0);
    const auto table = build_vector_potential(p);
    const double y_qkt = qkt::solve(p, table, {}, {}).yield;
    tdde::Options o;
    o.L = 548.0;
    const double y_tdde = tdde::solve(p, table, o).yield;
    CHECK(std::abs(y_qkt - y_tdde) < 1e-3 * y_tdde);
}

TEST_CASE("yield is converged in the momentum cutoff")
{
    const PulseField p = PulseField::centered(0.1, 20.0, 1.0);
    const auto table = build_vector_potential(p);
    const double narrow = qkt::yield_qkt(p, table, qkt::MomentumGrid::symmetric(3.0, 0.01), {});
    const double wide = qkt::yield_qkt(p, table, qkt::MomentumGrid::symmetric(6.0, 0.01), {});
    CHECK(std::abs(narrow - wide) < 1e-6 * wide);
}

TEST_CASE("leakage at the grid edge is reported")
{
    const PulseField p = PulseField::centered(0.1, 20.0, 2.0);
    const auto table = build_vector_potential(p);
    CHECK_THROWS_AS(qkt::yield_qkt(p, table, qkt::MomentumGrid::symmetric(0.3, 0.01), {}), GridError);
    const auto r = qkt::solve(p, table, qkt::MomentumGrid::symmetric(0.3, 0.01), {});
    CHECK(r.grid.k_max > 0.3);
    CHECK_FALSE(qkt::edge_leaks(r.spectrum.N));
}

TEST_CASE("parallel and serial spectra are bit identical")
{
    const PulseField p = PulseField::centered(0.1, 20.0, 1.5);
    const auto table = build_vector_potential(p);
    const auto k = qkt::MomentumGrid{-2.0, 2.0, 81}.values();
    qkt::Options serial, parallel;
    parallel.workers = 8;
    const auto a = qkt::spectrum(p, table, k, serial);
    const auto b = qkt::spectrum(p, table, k, parallel);
    CHECK(a.N == b.N);
}
