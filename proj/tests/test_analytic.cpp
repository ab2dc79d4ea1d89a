#include "doctest.h"

#include "ltearp/analytic.hpp"

#include <cmath>

using namespace ltearp;
using doctest::Approx;

namespace {

ScenarioSpec reference_spec(Bandwidth bw, int b_data, SignalingMode mode) {
    ScenarioSpec s;
    s.cell = default_cell(bw);
    s.cell.pdcch_capacity_mode = PdcchCapacityMode::Format1Messages;
    s.cell.pusch_capacity_mode = PuschCapacityMode::PerSubframe;
    s.catalog.mode = mode;
    s.traffic.b_data = b_data;
    return s;
}

ScenarioSpec at(ScenarioSpec s, double per_s) {
    s.traffic.lambda_i = per_s / 1000.0;
    return s;
}

}  // namespace

TEST_CASE("collision probability") {
    CHECK(collision_probability(0.2, 54, 5) == 0.0);
    CHECK(collision_probability(0.1, 54, 5) == 0.0);
    CHECK(collision_probability(0.4, 1, 5) == 1.0);
    CHECK(collision_probability(2.0, 54, 5) == Approx(0.1548).epsilon(1e-3));
    double prev = 0.0;
    for (double lt = 0.0; lt < 50.0; lt += 0.25) {
        const double p = collision_probability(lt, 54, 5);
        CHECK(p >= prev);
        CHECK(p <= 1.0);
        prev = p;
    }
}

TEST_CASE("preamble rates") {
    const auto zero = preamble_rates(0.0, 54, 5);
    CHECK(zero.lambda_a == 0.0);
    CHECK(zero.lambda_s == 0.0);

    const auto unit = preamble_rates(54.0 / 5.0, 54, 5);
    CHECK(unit.lambda_a == Approx((1 - std::exp(-1.0)) * 10.8));
    CHECK(unit.lambda_a == Approx(6.827).epsilon(1e-3));
    CHECK(unit.lambda_s == Approx(3.973).epsilon(1e-3));

    const auto small = preamble_rates(1e-6, 54, 5);
    CHECK(small.lambda_a == Approx(1e-6).epsilon(1e-6));
    CHECK(small.lambda_s == Approx(1e-6).epsilon(1e-6));

    for (double lt : {0.01, 0.3, 1.0, 5.0, 20.0, 100.0})
        for (int delta : {1, 2, 5, 10, 20}) {
            const auto r = preamble_rates(lt, 54, delta);
            CHECK(r.lambda_s <= r.lambda_a);
            CHECK(r.lambda_a <= lt * (1 + 1e-12));
        }
}

TEST_CASE("queue loss examples") {
    CHECK(queue_loss({0.0, 1.0, 10.0}) == 0.0);
    for (double rho : {0.1, 0.5, 0.9}) CHECK(queue_loss({rho * 4.0, 4.0, 0.25}) == Approx(rho / (1 + rho)));
    CHECK(queue_loss({0.5, 1.0, 10.0}) == Approx(0.002786).epsilon(1e-3));
    CHECK_THROWS_AS(queue_loss({1.0, 1.0, 0.5}), std::domain_error);
    CHECK_THROWS_AS(queue_loss({1.0, 0.0, 10.0}), std::domain_error);
}

TEST_CASE("queue loss overload continuation") {
    for (double mu : {3.0, 13.0, 21.0})
        for (double t_d : {10.0, 40.0}) {
            const double seam = queue_loss({(1 - kOverloadEpsilon) * mu * (1 - 1e-12), mu, t_d});
            const double at_seam = queue_loss({(1 - kOverloadEpsilon) * mu, mu, t_d});
            CHECK(at_seam == Approx(seam).epsilon(1e-6));
            double prev = at_seam;
            for (double rho : {1.0, 1.01, 1.5, 2.0, 10.0, 1e6}) {
                const double p = queue_loss({rho * mu, mu, t_d});
                CHECK(p >= prev);
                CHECK(p < 1.0);
                CHECK(p >= 1 - 1 / rho - 1e-15);
                prev = p;
            }
        }
}

TEST_CASE("queue loss monotonicity grid") {
    const double rhos[] = {0.05, 0.2, 0.4, 0.6, 0.8, 0.95, 0.999};
    for (double mu : {1.0, 3.0, 13.0, 21.0})
        for (double t_d : {1.0, 5.0, 10.0, 40.0}) {
            double prev = 0.0;
            for (double rho : rhos) {
                const double p = queue_loss({rho * mu, mu, t_d});
                CHECK(p >= prev);
                prev = p;
                // more capacity at the same arrival rate never hurts
                CHECK(queue_loss({rho * mu, mu * 1.1, t_d}) <= p);
                // a longer deadline never hurts
                CHECK(queue_loss({rho * mu, mu, t_d * 2}) <= p);
            }
        }
}

TEST_CASE("channel loads follow the resource table") {
    const auto full = reference_spec(Bandwidth::MHz5, 1000, SignalingMode::Full);
    const double ls = 0.5;
    const auto loads = channel_loads(0.0, 0.0, ls, full);
    // 6 signaling grants + ceil(1000/216) = 5 data grants per singleton
    CHECK(loads.pdcch.lambda == Approx(ls * 11));
    // 1 + ceil(1000/36) + ceil(10/36) + ceil(13/36) = 1 + 28 + 1 + 1
    CHECK(loads.pusch.lambda == Approx(ls * 31));
    CHECK(loads.pdsch.lambda == Approx(ls * (2 + 4 + 1)));

    const auto zero = channel_loads(0.0, 0.0, 0.0, full);
    CHECK(zero.pdcch.lambda == 0.0);
    CHECK(zero.pdsch.lambda == 0.0);
    CHECK(zero.pusch.lambda == 0.0);

    auto shrt = reference_spec(Bandwidth::MHz5, 100, SignalingMode::Short);
    const auto s = channel_loads(1.0, 0.8, 0.6, shrt);
    CHECK(s.pusch.lambda == Approx(0.8 * 1 + 0.6 * 4));
    CHECK(s.pdcch.lambda == Approx(-std::expm1(-5.0) / 5 + 0.6 * 2));
    CHECK(s.pdsch.lambda == Approx(std::ceil(0.8 * 8 / 36)));

    CHECK(s.pdcch.mu == 10.0);
    CHECK(s.pdsch.mu == 25.0);
    CHECK(s.pusch.mu == Approx(25 - 6.0 / 5));
    CHECK(s.pdcch.t_d == 10.0);
    CHECK(s.pusch.t_d == 40.0);

    shrt.cell.pusch_capacity_mode = PuschCapacityMode::PerFrameVerbatim;
    CHECK(channel_loads(1.0, 0.8, 0.6, shrt).pusch.mu == Approx(25 - 60.0 / 5));

    shrt.limit_mask = LimitMask::parse("prach,pdcch");
    const auto masked = channel_loads(1.0, 0.8, 0.6, shrt);
    CHECK(masked.pdcch.lambda > 0.0);
    CHECK(masked.pdsch.lambda == 0.0);
    CHECK(masked.pusch.lambda == 0.0);
}

TEST_CASE("grant, one-shot and outage probabilities") {
    ChannelLoads idle;
    CHECK(grant_failure(idle) == 0.0);

    // three equal channel losses of 0.1: rho/(1+rho) = 0.1 at t_d = 1/mu
    const double rho = 0.1 / 0.9;
    const ChannelLoad c{rho, 1.0, 1.0};
    CHECK(grant_failure({c, c, c}) == Approx(0.271));
    CHECK(grant_failure({c, c, ChannelLoad{}}) == Approx(1 - 0.81));

    CHECK(one_shot_failure(0, 0) == 0.0);
    CHECK(one_shot_failure(1, 0.3) == 1.0);
    CHECK(one_shot_failure(0.1548, 0.05) == Approx(0.1971).epsilon(1e-3));
    for (double a : {0.0, 0.2, 0.7, 1.0})
        for (double b : {0.0, 0.4, 0.9}) CHECK(one_shot_failure(a, b) == one_shot_failure(b, a));

    CHECK(outage_probability(0.37, 0) == 0.37);
    CHECK(outage_probability(0.5, 9) == Approx(9.765625e-4));
    CHECK(outage_probability(1.0, 9) == 1.0);

    CHECK(expected_transmissions(0.0, 9) == 1.0);
    CHECK(expected_transmissions(0.5, 1) == Approx(1.5));
    CHECK(expected_transmissions(1.0, 9) == Approx(10.0));
    CHECK(expected_transmissions(1.0 - 1e-9, 9) == Approx(10.0));
    for (double p = 0.0; p <= 1.0; p += 0.05) {
        const double n = expected_transmissions(p, 9);
        CHECK(n >= 1.0);
        CHECK(n <= 10.0 + 1e-12);
    }
}

TEST_CASE("markov steady state") {
    const auto idle = markov_steady_state(0.2, 0.1, 0.0, 2, 4);
    CHECK(idle.b_off == 1.0);
    CHECK(idle.b_connect == 0.0);
    CHECK(idle.b_drop == 0.0);

    const auto clean = markov_steady_state(0.0, 0.0, 0.3, 3, 8);
    CHECK(clean.b_drop == 0.0);
    CHECK(clean.b_connect == Approx(0.3 * clean.b_off));
    for (const auto& row : clean.b_backoff)
        for (double v : row) CHECK(v == 0.0);

    const double grid[] = {0.0, 0.05, 0.3, 0.7, 1.0};
    for (int m : {0, 1, 2, 9})
        for (int w_c : {1, 4, 20})
            for (double p_c : grid)
                for (double p_e : grid)
                    for (double p_on : {0.01, 0.3, 0.9}) {
                        const auto s = markov_steady_state(p_c, p_e, p_on, m, w_c);
                        CHECK(std::abs(s.total() - 1.0) <= 1e-12);
                        const double ratio = s.b_drop / (s.b_drop + s.b_connect);
                        CHECK(std::abs(ratio - outage_probability(one_shot_failure(p_c, p_e), m)) <= 1e-12);
                    }
}

TEST_CASE("fixed point") {
    auto spec = reference_spec(Bandwidth::MHz5, 100, SignalingMode::Short);

    spec.traffic.lambda_i = 1e-7;
    const auto quiet = solve_total_rate(spec);
    CHECK(quiet.lambda_t == Approx(1e-7));
    CHECK(quiet.p_outage < 1e-12);

    const auto frozen = solve_fixed_point(2.0, 9, [](double) { return 0.5; });
    CHECK(frozen.converged);
    CHECK(frozen.lambda_t == Approx(2.0 * (1 - std::pow(2.0, -10)) / 0.5).epsilon(1e-8));

    for (double per_s : {10.0, 500.0, 2000.0, 3500.0, 4000.0, 4100.0, 8000.0}) {
        const auto r = solve_total_rate(at(spec, per_s));
        CHECK(r.lambda_t >= r.lambda_i);
        CHECK(r.lambda_t <= (spec.cell.m + 1) * r.lambda_i * (1 + 1e-12));
        CHECK(r.lambda_s <= r.lambda_a);
        CHECK(r.lambda_a <= r.lambda_t * (1 + 1e-12));
        CHECK(r.p_outage == Approx(std::pow(r.p_f, spec.cell.m + 1)).epsilon(1e-12));
        CHECK(r.n_tx >= 1.0);
        CHECK(r.n_tx <= spec.cell.m + 1 + 1e-12);
        for (double p : {r.p_c, r.p_e, r.p_f, r.p_outage, r.p_q_pdcch, r.p_q_pdsch, r.p_q_pusch}) {
            CHECK(p >= 0.0);
            CHECK(p <= 1.0);
        }
        if (r.converged) {
            const double residual = std::abs(r.lambda_t - r.lambda_i * expected_transmissions(r.p_f, spec.cell.m));
            CHECK(residual / r.lambda_t < 1e-6);
        }
    }
}

TEST_CASE("reference operating points") {
    CHECK(solve_total_rate(at(reference_spec(Bandwidth::MHz5, 100, SignalingMode::Short), 3000)).p_outage < 0.1);
    CHECK(solve_total_rate(at(reference_spec(Bandwidth::MHz5, 100, SignalingMode::Short), 5000)).p_outage > 0.1);
    CHECK(solve_total_rate(at(reference_spec(Bandwidth::MHz1_4, 100, SignalingMode::Short), 500)).p_outage < 0.1);
    CHECK(solve_total_rate(at(reference_spec(Bandwidth::MHz1_4, 1000, SignalingMode::Short), 200)).p_outage > 0.1);
    auto tiny = reference_spec(Bandwidth::MHz5, 100, SignalingMode::Short);
    tiny.traffic.lambda_i = 1e-4;
    CHECK(solve_total_rate(tiny).p_outage < 1e-9);
}

TEST_CASE("masked PRACH has no collisions") {
    auto spec = at(reference_spec(Bandwidth::MHz5, 100, SignalingMode::Short), 20000);
    spec.limit_mask = LimitMask::parse("pusch");
    const auto r = evaluate_at(spec.traffic.lambda_i, spec);
    CHECK(r.p_c == 0.0);
    CHECK(r.lambda_a == r.lambda_t);
    CHECK(r.lambda_s == r.lambda_t);
    CHECK(r.p_q_pdcch == 0.0);
    CHECK(r.p_q_pdsch == 0.0);
}
