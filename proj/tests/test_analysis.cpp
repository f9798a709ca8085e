#include "pairprod/analysis.hpp"
#include "pairprod/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

using namespace pairprod;
using namespace pairprod::analysis;

namespace {

std::vector<double> uniform(double lo, double hi, std::size_t n)
{
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return x;
}

// Spatial setup small enough for a full run in seconds.
ScanSetup small_spatial(double V0)
{
    ScanSetup s;
    s.tau = 2.0;
    s.eps = 0.5;
    s.grid = {32.0, 256};
    s.well = {V0, 4.0, 0.3};
    s.tdde.L = 32.0;
    return s;
}

} // namespace

TEST_CASE("energy distribution of a narrow line")
{
    const auto k = uniform(-4.0, 4.0, 1601);
    std::vector<double> N(k.size(), 0.0);
    // a triangle of half width one grid step at k = 0.75, i.e. E = 1.25
    N[950] = 1.0;
    REQUIRE(k[950] == doctest::Approx(0.75));
    const auto d = energy_distribution(k, N);
    CHECK(d.abscissa == Abscissa::energy);
    CHECK(d.total() == doctest::Approx(qkt::trapezoid(N, k[1] - k[0])).epsilon(1e-12));
    std::size_t best = 0;
    for (std::size_t i = 0; i < d.values.size(); ++i)
        if (d.values[i] > d.values[best]) best = i;
    CHECK(std::abs(d.center(best) - std::sqrt(1.0 + 0.75 * 0.75)) < 5e-3);
    CHECK(d.lower.front() == 1.0);
    CHECK(d.upper.front() == doctest::Approx(1.0001));
    CHECK(d.upper.back() == doctest::Approx(std::sqrt(17.0)));
}

TEST_CASE("energy distribution conserves the total for smooth spectra")
{
    const auto k = uniform(-3.0, 3.0, 1201);
    std::vector<double> N(k.size());
    for (std::size_t i = 0; i < k.size(); ++i) N[i] = std::exp(-k[i] * k[i]) * (1.0 + 0.3 * std::sin(5.0 * k[i]));
    const auto d = energy_distribution(k, N, {1e-4, 0.01});
    CHECK(d.total() == doctest::Approx(qkt::trapezoid(N, k[1] - k[0])).epsilon(1e-12));
    for (double v : d.values) CHECK(v >= 0.0);
}

TEST_CASE("energy distribution rejects unusable grids")
{
    const auto asym = uniform(-3.0, 2.0, 101);
    std::vector<double> N(asym.size(), 1.0);
    CHECK_THROWS_AS(energy_distribution(asym, N), std::invalid_argument);
    const auto even = uniform(-3.0, 3.0, 100);
    CHECK_THROWS_AS(energy_distribution(even, std::vector<double>(100, 1.0)), std::invalid_argument);
    const auto k = uniform(-3.0, 3.0, 101);
    CHECK_THROWS_AS(energy_distribution(k, std::vector<double>(50, 1.0)), std::invalid_argument);
}

TEST_CASE("peak finder works in decades")
{
    const auto x = uniform(0.0, 10.0, 1001);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double a = std::exp(-std::pow(x[i] - 3.0, 2) / 0.02);
        const double b = std::exp(-std::pow(x[i] - 7.0, 2) / 0.02);
        // small ripple of 0.02 decades must not count
        y[i] = 1e-8 + 1e-3 * a + 1e-5 * b + 1e-8 * 0.05 * std::sin(40.0 * x[i]);
    }
    const auto peaks = find_peaks(x, y);
    REQUIRE(peaks.size() == 2);
    CHECK(peaks[0].x == doctest::Approx(3.0));
    CHECK(peaks[1].x == doctest::Approx(7.0));
    CHECK(peaks[0].prominence == doctest::Approx(5.0).epsilon(0.01));
    CHECK(peaks[1].prominence == doctest::Approx(3.0).epsilon(0.01));
    CHECK(find_peaks(x, std::vector<double>(x.size(), 1.0)).empty());
}

TEST_CASE("threshold peaks are recovered from a synthetic scan")
{
    const auto w = log_space(0.4, 4.0, 100);
    for (std::size_t i = 1; i < w.size(); ++i) CHECK(w[i] > w[i - 1]);
    CHECK(w.front() == doctest::Approx(0.4));
    CHECK(w.back() == doctest::Approx(4.0));

    // a peak slightly above each 2/n on a falling background
    const double shift = 1.03;
    std::vector<double> y(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        double v = 1e-12 * std::pow(w[i], 6);
        for (int n = 1; n <= 4; ++n) {
            const double c = shift * 2.0 / n;
            v += std::pow(1e-3, n) * std::exp(-std::pow((w[i] - c) / (0.02 * c), 2));
        }
        y[i] = v;
    }
    const auto peaks = threshold_peaks(w, y, 4);
    REQUIRE(peaks.size() == 4);
    for (const auto& p : peaks) {
        CAPTURE(p.n);
        REQUIRE(p.omega.has_value());
        const double target = 2.0 / p.n;
        CHECK(*p.omega >= target);
        CHECK(std::abs(*p.omega - shift * target) < 0.02 * target);
        CHECK(p.contrast >= 10.0);
    }

    // a featureless scan has no peaks
    std::vector<double> flat(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) flat[i] = std::exp(-1.0 / w[i]);
    for (const auto& p : threshold_peaks(w, flat, 4)) CHECK_FALSE(p.omega.has_value());

    const auto sparse = log_space(0.4, 4.0, 10);
    CHECK_THROWS_AS(threshold_peaks(sparse, std::vector<double>(10, 1.0), 4), std::invalid_argument);
}

TEST_CASE("zero field scans are identically zero")
{
    ScanSetup s;
    s.eps = 0.0;
    s.qkt_grid = qkt::MomentumGrid::symmetric(1.0, 0.02);
    s.tdde.k_max = 1.0;
    const std::vector<double> w{0.5, 1.0, 2.0};
    for (Method m : {Method::qkt, Method::tdde_homog}) {
        const auto r = frequency_scan(m, w, s);
        r.check();
        CHECK(r.columns == std::vector<std::string>{"yield"});
        for (double y : r.column("yield")) CHECK(y < 1e-24);
        CHECK(r.provenance.at("method") == to_string(m));
    }
}

TEST_CASE("scan rows are validated")
{
    ScanResult r;
    r.columns = {"yield"};
    r.rows = {{1.0, {1.0}}, {0.5, {2.0}}};
    CHECK_THROWS_AS(r.check(), std::logic_error);
    CHECK_THROWS_AS(r.column("missing"), std::out_of_range);
    ScanSetup s;
    s.tau = -1.0;
    CHECK_THROWS_AS(frequency_scan(Method::qkt, std::vector<double>{1.0}, s), ConfigError);
}

TEST_CASE("without a well there is nothing to enhance")
{
    const auto r = enhancement_decomposition(std::vector<double>{1.0}, small_spatial(0.0));
    r.check();
    CHECK(r.column("N_enhance")[0] == 0.0);
    CHECK(r.column("N_total")[0] == r.column("N_background")[0]);
    CHECK(r.column("N_total")[0] > 0.0);
}

TEST_CASE("enhancement decomposition is additive")
{
    const auto s = small_spatial(1.0);
    const auto r = enhancement_decomposition(std::vector<double>{1.6}, s);
    const double total = r.column("N_total")[0];
    const double background = r.column("N_background")[0];
    const double enhance = r.column("N_enhance")[0];
    CHECK(total == background + enhance);
    CHECK(r.column("yield_total")[0] == doctest::Approx(2.0 * total / s.grid.L));
    CHECK(r.column("yield_enhance")[0] == doctest::Approx(2.0 * enhance / s.grid.L));

    // the background equals the homogeneous box sum up to the different step sizes
    const auto homog = frequency_scan(Method::tdde_homog, std::vector<double>{1.6}, s);
    CHECK(r.column("yield_background")[0] == doctest::Approx(homog.column("yield")[0]).epsilon(1e-4));
}

TEST_CASE("compare report")
{
    const qkt::MomentumGrid grid = qkt::MomentumGrid::symmetric(3.0, 0.01);
    SUBCASE("no field, no discrepancy")
    {
        const PulseField p = PulseField::centered(0.0, 20.0, 1.0);
        const auto r = compare_methods(grid, p, build_vector_potential(p));
        CHECK(r.pass);
        CHECK(r.yield_qkt == 0.0);
        CHECK(r.max_rel_err == 0.0);
        CHECK_FALSE(r.tail_deviation);
    }
    SUBCASE("two-photon regime agrees")
    {
        const PulseField p = PulseField::centered(0.1, 20.0, 1.0);
        const auto r = compare_methods(grid, p, build_vector_potential(p));
        CAPTURE(r.max_rel_err);
        CAPTURE(r.argmax_k);
        CAPTURE(r.yield_rel_err);
        CHECK(r.pass);
        CHECK(r.yield_rel_err < 1e-3);
        CHECK(r.k.size() == grid.points);
        CHECK(r.tail_energy == doctest::Approx(third_peak_energy(1.0)));
    }
    CHECK(third_peak_energy(0.5) == doctest::Approx(1.5));
    CHECK(third_peak_energy(2.0) == doctest::Approx(3.0));
    CHECK(third_peak_energy(0.7) == doctest::Approx(0.5 * 5.0 * 0.7));
}
