#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "qdiff/decompose.hpp"
#include "qdiff/estimate.hpp"
#include "qdiff/qstats.hpp"

using namespace qdiff;
using Catch::Approx;

namespace {

IndexSeries daily(std::vector<double> v) {
    std::vector<Timestamp> ts(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) ts[i] = static_cast<Timestamp>(i) * 86400;
    return IndexSeries(std::move(ts), std::move(v), 86400);
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

// A smooth trend plus i.i.d. q-Gaussian noise.
struct Noisy {
    IndexSeries series;
    std::vector<double> noise;
};

Noisy smooth_plus_noise(std::size_t n, double q, double beta, std::uint64_t seed) {
    Noisy out;
    out.noise = sample_q_gaussian(q, beta, n, seed);
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i);
        v[i] = 1000.0 + 0.05 * t + 40.0 * std::sin(t / 3000.0) + out.noise[i];
    }
    out.series = daily(std::move(v));
    return out;
}

} // namespace

TEST_CASE("series invariants are enforced") {
    CHECK_THROWS_AS(IndexSeries({0, 86400}, {1.0, -1.0}, 86400), Error);
    CHECK_THROWS_AS(IndexSeries({0, 0}, {1.0, 2.0}, 86400), Error);
    CHECK_THROWS_AS(IndexSeries({0, 86400}, {1.0, std::nan("")}, 86400), Error);
    const IndexSeries gaps({0, 86400, 4 * 86400, 5 * 86400}, {1, 2, 3, 4}, 86400);
    CHECK(gaps.gap_count() == 1);
    CHECK(gaps.size() == 4);
}

TEST_CASE("price return examples") {
    const auto s = daily({100, 103, 99});
    const auto r = price_return(s, 0);
    REQUIRE(r.size() == 3);
    CHECK(r.values[0] == 0.0);
    CHECK(r.values[1] == 3.0);
    CHECK(r.values[2] == -1.0);
    const auto c = price_return(daily({5, 5, 5, 5}), 86400);
    CHECK(c.values == std::vector<double>{0, 0, 0});
    try {
        price_return(s, 12345);
        FAIL("expected a lookup error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::lookup);
    }
}

TEST_CASE("moving trend examples") {
    const auto m = moving_trend(daily({1, 2, 3, 4, 5}), 3);
    CHECK(m.values[1] == 2.0);
    CHECK(m.values[2] == 3.0);
    CHECK(m.values[3] == 4.0);
    // Symmetric truncation: the ends average over themselves only.
    CHECK(m.values[0] == 1.0);
    CHECK(m.values[4] == 5.0);

    const auto c = moving_trend(daily(std::vector<double>(50, 7.25)), 10);
    for (double v : c.values) CHECK(v == Approx(7.25).epsilon(1e-15));

    std::vector<double> line(200);
    for (std::size_t i = 0; i < line.size(); ++i) line[i] = 3.0 + 0.5 * static_cast<double>(i);
    const auto l = moving_trend(daily(line), 21);
    for (std::size_t i = 0; i < line.size(); ++i) CHECK(l.values[i] == Approx(line[i]).epsilon(1e-13));

    CHECK_THROWS_AS(moving_trend(daily({1, 2, 3}), 5), Error);
    CHECK_THROWS_AS(moving_trend(daily({1, 2, 3}), 1), Error);
}

TEST_CASE("even windows are widened to stay centred") {
    CHECK(centred_window(252) == 253);
    CHECK(centred_window(251) == 251);
    const auto m = moving_trend(daily({1, 2, 3, 4, 5, 6, 7}), 4);
    CHECK(m.values[3] == Approx(4.0));
}

TEST_CASE("pure trend leaves no fluctuation") {
    std::vector<double> v(400);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 100.0 + 0.25 * static_cast<double>(i);
    const auto d = detrend(daily(v), 0, 31);
    for (double f : d.fluctuation) CHECK(std::abs(f) < 1e-10);
}

TEST_CASE("reconstruction is exact and the fluctuation has zero mean") {
    const auto noisy = smooth_plus_noise(20'000, 1.4, 0.5, 3);
    const auto d = detrend(noisy.series, noisy.series.timestamps()[0], 252);
    REQUIRE(d.size() == noisy.series.size());
    double mean = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double x = d.price_return[i];
        CHECK(std::abs(d.trend[i] + d.fluctuation[i] - x) <= 1e-12 * std::max(1.0, std::abs(x)));
        mean += d.fluctuation[i];
        sq += d.fluctuation[i] * d.fluctuation[i];
    }
    const double n = static_cast<double>(d.size());
    mean /= n;
    const double sd = std::sqrt(sq / n - mean * mean);
    CHECK(std::abs(mean) < 0.01 * sd);
}

TEST_CASE("a constant shift moves the trend and leaves the fluctuation") {
    const auto noisy = smooth_plus_noise(5000, 1.3, 1.0, 4);
    const Timestamp t0 = noisy.series.timestamps()[0];
    const auto a = detrend(noisy.series, t0, 252);
    const auto b = detrend(noisy.series.shifted(1234.5), t0, 252);
    const auto ta = moving_trend(noisy.series, 252);
    const auto tb = moving_trend(noisy.series.shifted(1234.5), 252);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(std::abs(a.fluctuation[i] - b.fluctuation[i]) <= 1e-12 * 1234.5);
        CHECK(std::abs(tb.values[i] - ta.values[i] - 1234.5) <= 1e-12 * tb.values[i]);
    }
}

TEST_CASE("detrending recovers injected noise") {
    const auto noisy = smooth_plus_noise(30'000, 1.3, 0.8, 5);
    const auto d = detrend(noisy.series, noisy.series.timestamps()[0], 252);
    // X = I - I(t0), so the fluctuation tracks the noise minus its first value
    // less a small moving average of the noise.
    CHECK(correlation(d.fluctuation, noisy.noise) > 0.99);
}

TEST_CASE("fitted q of the recovered fluctuation matches the injected q") {
    for (double q : {1.2, 1.5}) {
        CAPTURE(q);
        const auto noisy = smooth_plus_noise(100'000, q, 1.0, 6);
        const auto d = detrend(noisy.series, noisy.series.timestamps()[0], 252);
        // The fluctuation itself (not its increments) carries the injected law.
        std::vector<double> x(d.fluctuation.begin() + 126, d.fluctuation.end() - 126);
        const auto dist = EmpiricalDistribution::from_samples(1.0, std::move(x));
        const auto fit = fit_cdf_least_squares(dist);
        CHECK(std::abs(fit.q - q) < 0.05);
    }
}
