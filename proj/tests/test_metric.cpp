#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "crv/metric.hpp"
#include "crv/rng.hpp"

using namespace crv;

namespace {

// Frozen reference values, computed with an arbitrary-precision calculator.
const double kQueuing = 0.02048;              // 4096 bits * 10 / 2 Mbps
const double kBackoffHalf2 = 0.004;           // z=1ms, bc=0.5, V=2
const double kBackoffLimit = 0.002;           // z/(1-bc) as V -> inf
const double kLinkSum = 0.05448;              // 20.48ms + 4ms + 30ms
const double kEuler = 2.7182818284590452354;
const double kNhdfBase = 917.76798825256975;  // 50 / 0.05448
const double kNhdfBaseSq = 842298.08026116901;

bool close_rel(double a, double b, double tol = 1e-9) {
    return std::fabs(a - b) <= tol * std::max(std::fabs(a), std::fabs(b));
}

} // namespace

TEST_CASE("queuing delay") {
    CHECK(queuing_delay(4096.0, 0, 2e6) == 0.0);
    CHECK(close_rel(queuing_delay(4096.0, 10, 2e6), kQueuing));
    CHECK(close_rel(queuing_delay(4096.0, 20, 2e6), 2.0 * kQueuing));
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        int v = 1 + static_cast<int>(rng.uniform_index(64));
        double bits = rng.uniform(100.0, 1e5);
        CHECK(close_rel(queuing_delay(bits, 2 * v, 2e6), 2.0 * queuing_delay(bits, v, 2e6)));
    }
    CHECK_THROWS_AS(queuing_delay(4096.0, 3, 0.0), InvalidInput);
    CHECK_THROWS_AS(queuing_delay(4096.0, -1, 2e6), InvalidInput);
}

TEST_CASE("back-off delay") {
    CHECK(close_rel(backoff_delay(0.5, 2, 1e-3), kBackoffHalf2));
    CHECK(close_rel(backoff_delay(0.5, 64, 1e-3), kBackoffLimit));
    // b_c -> 0+ blows up: monotone decreasing in b_c near zero.
    CHECK(backoff_delay(1e-9, 2, 1e-3) > 1e5);
    CHECK(backoff_delay(1e-12, 2, 1e-3) > backoff_delay(1e-9, 2, 1e-3));

    CHECK_THROWS_AS(backoff_delay(0.0, 2, 1e-3), InvalidInput);
    CHECK_THROWS_AS(backoff_delay(1.0, 2, 1e-3), InvalidInput);
    CHECK_THROWS_AS(backoff_delay(0.5, 1, 1e-3), DegenerateContention);
    CHECK_THROWS_AS(backoff_delay(0.5, 0, 1e-3), DegenerateContention);
    CHECK(backoff_delay_or_window(0.5, 1, 1e-3) == 1e-3);
    CHECK(backoff_delay_or_window(0.5, 0, 1e-3) == 1e-3);
    CHECK(close_rel(backoff_delay_or_window(0.5, 2, 1e-3), kBackoffHalf2));

    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
        // The closed form is U-shaped in b_c with its minimum at or below 0.5
        // for every V >= 2, so monotone growth is checked on [0.5, 1).
        double bc = rng.uniform(0.5, 0.93);
        int v = 2 + static_cast<int>(rng.uniform_index(40));
        double z = rng.uniform(1e-4, 1e-2);
        double d = backoff_delay(bc, v, z);
        CHECK(d > 0.0);
        CHECK(backoff_delay(bc + 0.05, v, z) > d);
        CHECK(backoff_delay(bc, v + 1, z) <= d); // decreasing in V everywhere
        // Strictly so while the contention term is still representable.
        int v_small = 2 + static_cast<int>(rng.uniform_index(12));
        CHECK(backoff_delay(0.55, v_small + 1, z) < backoff_delay(0.55, v_small, z));
    }
}

TEST_CASE("link delay is exactly the component sum") {
    CHECK(LinkDelays{0.0, 0.0, 0.0}.total_s() == 0.0);
    LinkDelays d{kQueuing, kBackoffHalf2, 0.030};
    CHECK(close_rel(d.total_s(), kLinkSum));
    Rng rng(7);
    for (int i = 0; i < 1000; ++i) {
        double a = rng.uniform(0.0, 1.0), b = rng.uniform(0.0, 1.0), c = rng.uniform(0.0, 1.0);
        CHECK(LinkDelays{a, b, c}.total_s() == a + b + c); // bit-exact additivity
        CHECK(LinkDelays{a, b, c}.total_s() ==
              doctest::Approx(LinkDelays{c, a, b}.total_s()).epsilon(1e-15));
    }
}

TEST_CASE("transmitting weight") {
    CHECK(close_rel(transmit_weight(500.0, 100.0, 0.05, 2.0), 50.0));
    CHECK(close_rel(transmit_weight(500.0, 200.0, 0.05, 2.0), 25.0));
    CHECK(close_rel(transmit_weight(1500.0, 100.0, 0.05, 2.0), 150.0));
    CHECK_THROWS_AS(transmit_weight(0.0, 1.0, 1.0, 1.0), InvalidInput);
    CHECK_THROWS_AS(transmit_weight(500.0, 0.0, 1.0, 1.0), InvariantViolation);
    CHECK_THROWS_AS(transmit_weight(500.0, 1.0, 0.0, 1.0), InvariantViolation);
    CHECK_THROWS_AS(transmit_weight(500.0, 1.0, 1.0, 0.0), InvariantViolation);
}

TEST_CASE("reliability factor") {
    CHECK(reliability(0) == 1.0);
    CHECK(close_rel(reliability(1), kEuler));
    for (int rn = 0; rn < 20; ++rn) CHECK(reliability(rn + 1) > reliability(rn));
    CHECK_THROWS_AS(reliability(-1), InvalidInput);
    CHECK(ReliabilityFactor::from_report_count(0).value() == 1.0);
    CHECK(ReliabilityFactor::infinite().is_infinite());
    CHECK_FALSE(ReliabilityFactor::from_report_count(3).is_infinite());
}

TEST_CASE("link weight exclusion rules") {
    CHECK(link_nhdf(50.0, 0.05448, 2, ReliabilityFactor::infinite()).excluded());
    CHECK(link_nhdf(50.0, 0.05448, 0, ReliabilityFactor()).excluded());
    CHECK(link_nhdf(50.0, 0.05448, 2, ReliabilityFactor::infinite()).value().is_zero());
    CHECK_THROWS_AS(link_nhdf(50.0, 0.0, 2, ReliabilityFactor()), InvalidInput);
    CHECK_THROWS_AS(link_nhdf(50.0, -1.0, 2, ReliabilityFactor()), InvalidInput);
}

TEST_CASE("link weight values") {
    // Unit base: any exponent, unit reliability.
    for (int cn : {1, 2, 5, 100}) {
        Nhdf n = link_nhdf(0.05448, 0.05448, cn, ReliabilityFactor());
        CHECK(close_rel(n.value().to_double(), 1.0));
    }
    Nhdf n2 = link_nhdf(50.0, 0.05448, 2, ReliabilityFactor());
    CHECK(close_rel(n2.value().to_double(), kNhdfBaseSq));
    Nhdf n3 = link_nhdf(50.0, 0.05448, 3, ReliabilityFactor());
    CHECK(n3.value() > n2.value()); // base > 1, higher power dominates
}

TEST_CASE("link weight monotonicity in the channel count, all three regimes") {
    Rng rng(9);
    for (int i = 0; i < 1000; ++i) {
        double delta = rng.uniform(0.01, 0.2);
        int cn = 1 + static_cast<int>(rng.uniform_index(30));
        double above = delta * rng.uniform(1.0 + 1e-6, 50.0);
        CHECK(link_nhdf(above, delta, cn + 1, ReliabilityFactor()).value() >
              link_nhdf(above, delta, cn, ReliabilityFactor()).value());
        double below = delta * rng.uniform(1e-3, 1.0 - 1e-6);
        CHECK(link_nhdf(below, delta, cn + 1, ReliabilityFactor()).value() <
              link_nhdf(below, delta, cn, ReliabilityFactor()).value());
        CHECK(link_nhdf(delta, delta, cn + 1, ReliabilityFactor()).value() ==
              link_nhdf(delta, delta, cn, ReliabilityFactor()).value());
    }
}

TEST_CASE("reliability divides out exactly") {
    Rng rng(13);
    for (int i = 0; i < 1000; ++i) {
        double xi = rng.uniform(0.1, 1e4);
        double delta = rng.uniform(1e-3, 0.5);
        int cn = static_cast<int>(rng.uniform_index(40)) + 1;
        int rn = static_cast<int>(rng.uniform_index(10));
        ReliabilityFactor rf = ReliabilityFactor::from_report_count(rn);
        Nhdf with = link_nhdf(xi, delta, cn, rf);
        Nhdf unit = link_nhdf(xi, delta, cn, ReliabilityFactor());
        CHECK(with.value() == unit.value() / WideReal(rf.value()));
    }
}

TEST_CASE("path weight") {
    CHECK(path_weight({}).is_zero());
    std::vector<Nhdf> one{Nhdf::of(WideReal(7.25))};
    CHECK(path_weight(one).to_double() == 7.25);
    std::vector<Nhdf> three{Nhdf::of(WideReal(3.0)), Nhdf::of(WideReal(4.0)),
                            Nhdf::of(WideReal(5.0))};
    CHECK(path_weight(three).to_double() == 12.0);

    std::vector<Nhdf> with_excluded{Nhdf::of(WideReal(3.0)), Nhdf::excluded_link(),
                                    Nhdf::of(WideReal(5.0))};
    CHECK(path_weight(with_excluded).is_zero());

    // Permutation invariance and concatenation additivity.
    Rng rng(17);
    for (int i = 0; i < 500; ++i) {
        std::vector<Nhdf> xs;
        int n = 1 + static_cast<int>(rng.uniform_index(6));
        for (int k = 0; k < n; ++k) xs.push_back(Nhdf::of(WideReal(rng.uniform(0.1, 100.0))));
        std::vector<Nhdf> rev(xs.rbegin(), xs.rend());
        CHECK(path_weight(xs).to_double() ==
              doctest::Approx(path_weight(rev).to_double()).epsilon(1e-12));
        std::vector<Nhdf> ys;
        int m = 1 + static_cast<int>(rng.uniform_index(6));
        for (int k = 0; k < m; ++k) ys.push_back(Nhdf::of(WideReal(rng.uniform(0.1, 100.0))));
        std::vector<Nhdf> cat = xs;
        cat.insert(cat.end(), ys.begin(), ys.end());
        CHECK(path_weight(cat).to_double() ==
              doctest::Approx(path_weight(xs).to_double() + path_weight(ys).to_double())
                  .epsilon(1e-12));
    }
}
