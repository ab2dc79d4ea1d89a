#pragma once

#include "ltearp/config.hpp"

#include <functional>
#include <vector>

namespace ltearp {

/// Arrival rate, service capacity (per subframe) and deadline (subframes) of
/// one shared channel, seen as a queue with impatient customers.
struct ChannelLoad {
    double lambda = 0.0;
    double mu = 1.0;
    double t_d = 1.0;

    double rho() const { return lambda / mu; }
};

struct ChannelLoads {
    ChannelLoad pdcch;
    ChannelLoad pdsch;
    ChannelLoad pusch;
};

struct PreambleRates {
    double lambda_a = 0.0;  // activated preambles per subframe
    double lambda_s = 0.0;  // singleton preambles per subframe
};

struct AnalyticResult {
    double lambda_i = 0.0;
    double lambda_t = 0.0;
    double lambda_a = 0.0;
    double lambda_s = 0.0;
    double p_c = 0.0;
    double p_e = 0.0;
    double p_f = 0.0;
    double p_q_pdcch = 0.0;
    double p_q_pdsch = 0.0;
    double p_q_pusch = 0.0;
    double rho_pdcch = 0.0;
    double rho_pdsch = 0.0;
    double rho_pusch = 0.0;
    double p_outage = 0.0;
    double n_tx = 1.0;
    double b_off = 1.0;
    double b_connect = 0.0;
    double b_drop = 0.0;
    bool converged = false;
    int iterations = 0;

    double lambda_r() const { return lambda_t - lambda_i; }
};

/// Steady state of the per-UE retransmission chain. `b_cr[i]` holds CR(i) for
/// i in [0, m]; `b_backoff[i-1][k]` holds state (i, k) for i in [1, m] and
/// k in [0, w_c).
struct MarkovState {
    double b_off = 1.0;
    double b_connect = 0.0;
    double b_drop = 0.0;
    double b_00 = 0.0;
    std::vector<double> b_cr;
    std::vector<std::vector<double>> b_backoff;

    double total() const;
};

/// Overload seam of queue_loss: the M/M/1 expression is used for rho < 1 - eps.
inline constexpr double kOverloadEpsilon = 1e-6;

struct FixedPointOptions {
    double damping = 0.5;
    double tolerance = 1e-9;
    int max_iterations = 10000;
};

/// Upper bound on the preamble collision probability at total attempt rate
/// `lambda_t`; zero while fewer than one contender per RAO is expected.
double collision_probability(double lambda_t, int d, int delta_rao);

PreambleRates preamble_rates(double lambda_t, int d, int delta_rao);

/// Long-run fraction of customers lost by an M/M/1 queue whose customers leave
/// once their deadline passes. Past rho = 1 - eps the loss is continued by
/// max(1 - 1/rho, seam value). Throws std::domain_error if t_d < 1/mu.
double queue_loss(const ChannelLoad& load);

/// Per-channel demand for the current attempt rates. Channels outside the
/// scenario's limit mask carry no load.
ChannelLoads channel_loads(double lambda_t, double lambda_a, double lambda_s, const ScenarioSpec& spec);

double grant_failure(const ChannelLoads& loads);
double one_shot_failure(double p_c, double p_e);
double outage_probability(double p_f, int m);
double expected_transmissions(double p_f, int m);

MarkovState markov_steady_state(double p_c, double p_e, double p_on, int m, int w_c);

/// Damped iteration of lambda_t = lambda_i * N_TX(p_f(lambda_t)). Returns the
/// last iterate, whether it converged, and the number of iterations used.
struct FixedPoint {
    double lambda_t = 0.0;
    bool converged = false;
    int iterations = 0;
};
FixedPoint solve_fixed_point(double lambda_i, int m, const std::function<double(double)>& failure_at,
                             const FixedPointOptions& opts = {});

/// All one-shot quantities evaluated at a given total attempt rate.
AnalyticResult evaluate_at(double lambda_t, const ScenarioSpec& spec);

AnalyticResult solve_total_rate(const ScenarioSpec& spec, const FixedPointOptions& opts = {});

}  // namespace ltearp
