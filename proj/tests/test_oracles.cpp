#include "doctest.h"

#include "ltearp/analytic.hpp"
#include "ltearp/oracles.hpp"

#include <cmath>

using namespace ltearp;
using doctest::Approx;

TEST_CASE("preamble oracle is seeded and reproducible") {
    const auto a = oracle::mc_preamble(2.0, 54, 5, 5000, 7);
    const auto b = oracle::mc_preamble(2.0, 54, 5, 5000, 7);
    CHECK(a.collision.value == b.collision.value);
    CHECK(a.collision.seed == 7);
    CHECK(a.collision.trials == 5000);
    CHECK(oracle::mc_preamble(2.0, 54, 5, 5000, 8).collision.value != a.collision.value);
    CHECK_THROWS_AS(oracle::mc_preamble(2.0, 54, 5, 999, 1), std::invalid_argument);
}

TEST_CASE("preamble oracle frozen values") {
    // Poisson(10) contenders over 54 preambles
    const auto est = oracle::mc_preamble(2.0, 54, 5, 20000, 1);
    CHECK(est.collision.value == Approx(0.1548).epsilon(0.05));
    CHECK(est.collision.value <= collision_probability(2.0, 54, 5) + 3 * est.collision.std_error);
    const auto rates = preamble_rates(2.0, 54, 5);
    CHECK(est.activated_per_rao / 5 == Approx(rates.lambda_a).epsilon(0.01));
    CHECK(est.singletons_per_rao / 5 == Approx(rates.lambda_s).epsilon(0.02));
}

TEST_CASE("collision bound holds above one expected contender per preamble slot") {
    for (double load : {5.0, 20.0, 54.0, 200.0}) {
        const double lt = load / 5;
        const auto est = oracle::mc_preamble(lt, 54, 5, 10000, 3);
        CHECK(est.collision.value <= collision_probability(lt, 54, 5) + 3 * est.collision.std_error);
    }
}

TEST_CASE("collision bound fails at very low load") {
    // with about one contender per RAO the bound reads 0 but collisions do happen
    const auto est = oracle::mc_preamble(0.2, 54, 5, 200000, 5);
    CHECK(collision_probability(0.2, 54, 5) == 0.0);
    CHECK(est.collision.value > 3 * est.collision.std_error);
}

TEST_CASE("impatient queue oracle") {
    const auto est = oracle::impatient_queue(0.5, 1.0, 10.0, 2e6, 11);
    CHECK(est.value == Approx(0.002786).epsilon(0.1));
    CHECK(est.std_error > 0.0);
    CHECK(est.seed == 11);
    CHECK(oracle::impatient_queue(0.5, 1.0, 10.0, 2e5, 11).value ==
          oracle::impatient_queue(0.5, 1.0, 10.0, 2e5, 11).value);
    CHECK_THROWS_AS(oracle::impatient_queue(0.5, 1.0, 10.0, 1e3, 1), std::invalid_argument);
    CHECK(oracle::impatient_queue(0.0, 1.0, 10.0, 1e5, 1).value == 0.0);

    // deadline equal to the mean service time: nobody may wait
    const auto edge = oracle::impatient_queue(0.5, 1.0, 1.0, 1e6, 2);
    CHECK(edge.value == Approx(0.5 / 1.5).epsilon(0.02));
}

TEST_CASE("queue formula against oracle grid") {
    for (double rho : {0.3, 0.6, 0.9})
        for (double t_d : {10.0, 40.0})
            for (double mu : {3.0, 13.0, 21.0}) {
                const ChannelLoad load{rho * mu, mu, t_d};
                const auto est = oracle::impatient_queue(load.lambda, mu, t_d, 3e5 / mu, 42);
                const double f = queue_loss(load);
                CHECK(std::abs(f - est.value) <= std::max(0.1 * f, 0.005));
            }
}

TEST_CASE("sojourn patience loses more than waiting-time patience") {
    const auto wait = oracle::impatient_queue(0.9, 1.0, 10.0, 1e6, 4, oracle::Patience::WaitingTime);
    const auto sojourn = oracle::impatient_queue(0.9, 1.0, 10.0, 1e6, 4, oracle::Patience::Sojourn);
    CHECK(sojourn.value > wait.value);
}

TEST_CASE("numeric chain matches the closed form") {
    const auto a = markov_steady_state(0.2, 0.1, 0.3, 2, 4);
    const auto b = oracle::markov_numeric(0.2, 0.1, 0.3, 2, 4);
    CHECK(std::abs(a.b_off - b.b_off) <= 1e-10);
    CHECK(std::abs(a.b_connect - b.b_connect) <= 1e-10);
    CHECK(std::abs(a.b_drop - b.b_drop) <= 1e-10);
    CHECK(std::abs(a.b_00 - b.b_00) <= 1e-10);
    for (std::size_t i = 0; i < a.b_cr.size(); ++i) CHECK(std::abs(a.b_cr[i] - b.b_cr[i]) <= 1e-10);
    for (std::size_t i = 0; i < a.b_backoff.size(); ++i)
        for (std::size_t k = 0; k < a.b_backoff[i].size(); ++k)
            CHECK(std::abs(a.b_backoff[i][k] - b.b_backoff[i][k]) <= 1e-10);
    CHECK(std::abs(b.total() - 1.0) <= 1e-12);
}

TEST_CASE("numeric chain with no arrivals stays off") {
    const auto s = oracle::markov_numeric(0.2, 0.1, 0.0, 2, 4);
    CHECK(s.b_off == Approx(1.0));
    CHECK(std::abs(s.b_drop) <= 1e-12);
}
