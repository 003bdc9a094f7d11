#include <doctest.h>

#include <cmath>

#include "nihigs/higs.hpp"
#include "nihigs/ni.hpp"  // SplitMix64

using namespace nihigs;

TEST_CASE("params validation") {
    CHECK_NOTHROW(HigsParams<double>(0.0, 0.5));
    CHECK_THROWS_AS(HigsParams<double>(-0.1, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(HigsParams<double>(0.1, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(HigsParams<double>(0.1, -1.0), std::invalid_argument);
}

TEST_CASE("in_sector") {
    const HigsParams<double> p(0.1, 0.6);
    CHECK(in_sector(p, 0.0, 0.0));   // boundary counts as inside
    CHECK(in_sector(p, 0.0, 1.0));   // 0.1 >= 0.1^2/0.6
    CHECK_FALSE(in_sector(p, 1.0, -1.0));  // -0.9 < 0.9^2/0.6
}

TEST_CASE("exact sector boundary selects the integrator branch") {
    // omega = 0.5, k_h = 2, e = 1: the successor w = x + 0.5 sits on the
    // boundary w e = w^2 / k_h at w = 2 and w = 0, both exact in doubles
    const HigsParams<double> p(0.5, 2.0);
    for (const double x : {1.5, -0.5}) {
        CHECK(in_sector(p, x, 1.0));
        CHECK(higs_step(p, HigsState<double>{x, HigsMode::Unset}, 1.0).mode ==
              HigsMode::Integrator);
    }
    // just outside on either side switches to gain
    CHECK(higs_step(p, HigsState<double>{1.5 + 1e-9, HigsMode::Unset}, 1.0).mode ==
          HigsMode::Gain);
    CHECK(higs_step(p, HigsState<double>{-0.5 - 1e-9, HigsMode::Unset}, 1.0).mode ==
          HigsMode::Gain);
}

TEST_CASE("higs_step branches") {
    const HigsParams<double> p(0.1, 0.6);
    SUBCASE("origin is a fixed point, integrator branch") {
        const auto s = higs_step(p, HigsState<double>{}, 0.0);
        CHECK(s.state.x_tilde == 0.0);
        CHECK(s.y == 0.0);
        CHECK(s.mode == HigsMode::Integrator);
    }
    SUBCASE("integrator branch") {
        const auto s = higs_step(p, HigsState<double>{}, 1.0);
        CHECK(s.state.x_tilde == doctest::Approx(0.1));
        CHECK(s.y == doctest::Approx(0.1));
        CHECK(s.mode == HigsMode::Integrator);
    }
    SUBCASE("gain branch") {
        const auto s = higs_step(p, HigsState<double>{1.0, HigsMode::Unset}, -1.0);
        CHECK(s.state.x_tilde == doctest::Approx(-0.6));
        CHECK(s.y == doctest::Approx(-0.6));
        CHECK(s.mode == HigsMode::Gain);
    }
    SUBCASE("non-finite input") {
        CHECK_THROWS_AS(higs_step(p, HigsState<double>{},
                                  std::numeric_limits<double>::infinity()),
                        std::invalid_argument);
    }
}

TEST_CASE("sani_storage") {
    CHECK(sani_storage(HigsParams<double>(0.1, 0.6), 0.0) == 0.0);
    CHECK(sani_storage(HigsParams<double>(0.1, 0.6), 0.6) == doctest::Approx(0.3));
    CHECK(sani_storage(HigsParams<double>(0.1, 2.0), -2.0) == doctest::Approx(1.0));
}

TEST_CASE("check_sani_step example values") {
    const HigsParams<double> p(0.1, 0.6);
    SUBCASE("both sides zero") {
        const auto c = check_sani_step(p, 0.0, 0.0);
        CHECK(c.slack == 0.0);
        CHECK(c.holds);
    }
    SUBCASE("integrator path") {
        const auto c = check_sani_step(p, 0.0, 1.0);
        CHECK(c.mode == HigsMode::Integrator);
        CHECK(c.slack == doctest::Approx(11.0 / 120.0));  // 0.1 - 0.01/1.2
        CHECK(c.holds);
    }
    SUBCASE("gain path: slack is (x - k_h e)^2 / (2 k_h)") {
        const auto c = check_sani_step(p, 1.0, -1.0);
        CHECK(c.mode == HigsMode::Gain);
        CHECK(c.slack == doctest::Approx(32.0 / 15.0));  // 1.6^2 / 1.2
        CHECK(c.holds);
    }
}

TEST_CASE("dissipation holds for random states, inputs and parameters") {
    detail::SplitMix64 rng(987);
    double worst = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 100000; ++i) {
        const double omega = 5.0 * std::abs(rng.sym());
        const double k_h = 5.0 * std::abs(rng.sym()) + 1e-3;
        const HigsParams<double> p(omega, k_h);
        const double x = 10.0 * rng.sym();
        const double e = 10.0 * rng.sym();
        const auto c = check_sani_step(p, x, e);
        CHECK(c.holds);
        worst = std::min(worst, c.slack);
        if (!c.holds) break;
    }
    CHECK(worst > -1e-10);
}

TEST_CASE("integrator branch bounds the state/input ratio") {
    detail::SplitMix64 rng(55);
    for (int i = 0; i < 20000; ++i) {
        const double omega = 3.0 * std::abs(rng.sym());
        const double k_h = 3.0 * std::abs(rng.sym()) + 1e-3;
        const HigsParams<double> p(omega, k_h);
        const double x = 10.0 * rng.sym();
        const double e = 10.0 * rng.sym();
        if (e == 0.0) continue;
        const auto s = higs_step(p, HigsState<double>{x, HigsMode::Unset}, e);
        if (s.mode != HigsMode::Integrator) continue;
        const double ratio = x / e;
        CHECK(ratio >= -omega - 1e-9);
        CHECK(ratio <= k_h - omega + 1e-9);
    }
}

TEST_CASE("output pair stays in the sector; gain branch lands on the k_h ray") {
    detail::SplitMix64 rng(321);
    const HigsParams<double> p(0.4, 1.3);
    double x = 7.0;  // deliberately outside the sector at k = 0
    for (int k = 0; k < 500; ++k) {
        const double e = 5.0 * rng.sym();
        const auto s = higs_step(p, HigsState<double>{x, HigsMode::Unset}, e);
        // output sector: y e >= y^2 / k_h within the round-off slack
        const double tau = 1e-14 * std::max({1.0, e * e, x * x});
        CHECK(s.y * e >= s.y * s.y / p.k_h - tau);
        if (s.mode == HigsMode::Gain) {
            CHECK(s.y == p.k_h * e);  // exact ray
        } else {
            CHECK(in_sector(p, x, e));
        }
        x = s.state.x_tilde;
    }
}

TEST_CASE("positive homogeneity of the step map") {
    detail::SplitMix64 rng(77);
    const HigsParams<double> p(0.25, 0.9);
    for (int i = 0; i < 2000; ++i) {
        const double x = 4.0 * rng.sym();
        const double e = 4.0 * rng.sym();
        // keep clear of the sector boundary so the slack cannot flip the mode
        const double w = x + p.omega_h * e;
        if (std::abs(w * e - w * w / p.k_h) < 1e-6 * std::max(1.0, e * e + x * x)) {
            continue;
        }
        const auto base = higs_step(p, HigsState<double>{x, HigsMode::Unset}, e);

        // powers of two scale exactly
        const auto doubled = higs_step(p, HigsState<double>{2 * x, HigsMode::Unset}, 2 * e);
        CHECK(doubled.mode == base.mode);
        CHECK(doubled.y == 2 * base.y);

        const double lam = 0.1 + 3.0 * std::abs(rng.sym());
        const auto scaled =
            higs_step(p, HigsState<double>{lam * x, HigsMode::Unset}, lam * e);
        CHECK(scaled.mode == base.mode);
        CHECK(scaled.y == doctest::Approx(lam * base.y).epsilon(1e-12));
    }
}

TEST_CASE("higs works with float scalars") {
    const HigsParams<float> p(0.1f, 0.6f);
    const auto s = higs_step(p, HigsState<float>{}, 1.0f);
    CHECK(s.mode == HigsMode::Integrator);
    CHECK(s.y == doctest::Approx(0.1f));
}
