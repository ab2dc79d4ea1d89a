#pragma once

// Brute-force reference computations used to validate the closed-form model.
// Nothing here calls into the analytic implementation.

#include "ltearp/analytic.hpp"

#include <cstdint>
#include <stdexcept>

namespace ltearp::oracle {

struct OracleEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::int64_t trials = 0;
    std::uint64_t seed = 0;
};

struct PreambleEstimate {
    OracleEstimate collision;  // fraction of contending UEs that share their preamble
    double activated_per_rao = 0.0;
    double singletons_per_rao = 0.0;
};

/// Poisson(lambda_t * delta_rao) contenders per trial pick preambles uniformly
/// from d. The collision estimate averages the per-trial collided fraction
/// over trials with at least one contender.
PreambleEstimate mc_preamble(double lambda_t, int d, int delta_rao, std::int64_t trials, std::uint64_t seed);

enum class Patience {
    WaitingTime,  // leave if service has not started within t_d - 1/mu
    Sojourn       // lost unless service completes within t_d; service is cut at the deadline
};

/// Single-server FIFO queue with Poisson arrivals and exponential service,
/// run for `duration` time units. Standard error uses 50 batch means.
OracleEstimate impatient_queue(double lambda, double mu, double t_d, double duration, std::uint64_t seed,
                               Patience patience = Patience::WaitingTime);

class SingularChainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Stationary distribution of the retransmission chain, from an explicit
/// transition matrix and a dense linear solve.
MarkovState markov_numeric(double p_c, double p_e, double p_on, int m, int w_c);

}  // namespace ltearp::oracle
