#include "ltearp/oracles.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <vector>

namespace ltearp::oracle {

namespace {

struct RunningMean {
    std::int64_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        ++n;
        const double delta = x - mean;
        mean += delta / n;
        m2 += delta * (x - mean);
    }
    double std_error() const { return n > 1 ? std::sqrt(m2 / (n - 1) / n) : 0.0; }
};

}  // namespace

PreambleEstimate mc_preamble(double lambda_t, int d, int delta_rao, std::int64_t trials, std::uint64_t seed) {
    if (trials < 1000) throw std::invalid_argument("mc_preamble: need at least 1000 trials");
    std::mt19937_64 rng(seed);
    std::poisson_distribution<int> contenders(std::max(lambda_t * delta_rao, 1e-300));
    std::uniform_int_distribution<int> pick(0, d - 1);
    std::vector<int> counts(static_cast<std::size_t>(d));
    std::vector<int> chosen;

    RunningMean collided;
    double activated_sum = 0.0;
    double singleton_sum = 0.0;
    for (std::int64_t t = 0; t < trials; ++t) {
        const int n = lambda_t > 0.0 ? contenders(rng) : 0;
        if (n == 0) continue;
        chosen.resize(static_cast<std::size_t>(n));
        for (auto& c : chosen) {
            c = pick(rng);
            ++counts[static_cast<std::size_t>(c)];
        }
        int shared = 0;
        for (int c : chosen)
            if (counts[static_cast<std::size_t>(c)] > 1) ++shared;
        for (int& c : counts) {
            if (c > 0) activated_sum += 1.0;
            if (c == 1) singleton_sum += 1.0;
            c = 0;
        }
        collided.add(static_cast<double>(shared) / n);
    }

    PreambleEstimate est;
    est.collision = {collided.mean, collided.std_error(), trials, seed};
    est.activated_per_rao = activated_sum / static_cast<double>(trials);
    est.singletons_per_rao = singleton_sum / static_cast<double>(trials);
    return est;
}

OracleEstimate impatient_queue(double lambda, double mu, double t_d, double duration, std::uint64_t seed,
                               Patience patience) {
    if (duration * mu < 1e5) throw std::invalid_argument("impatient_queue: duration must cover 1e5 service intervals");
    OracleEstimate est{0.0, 0.0, 0, seed};
    if (lambda <= 0.0) return est;

    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> interarrival(lambda);
    std::exponential_distribution<double> service(mu);
    const double patience_wait = t_d - 1.0 / mu;

    std::vector<char> lost;
    double now = 0.0;
    double server_free = 0.0;  // time the server finishes the work accepted so far
    while (true) {
        now += interarrival(rng);
        if (now > duration) break;
        const double s = service(rng);
        const double start = std::max(now, server_free);
        bool is_lost = false;
        if (patience == Patience::WaitingTime) {
            if (start - now > patience_wait)
                is_lost = true;
            else
                server_free = start + s;
        } else {
            const double deadline = now + t_d;
            if (start >= deadline) {
                is_lost = true;
            } else if (start + s > deadline) {
                is_lost = true;
                server_free = deadline;
            } else {
                server_free = start + s;
            }
        }
        lost.push_back(is_lost ? 1 : 0);
    }

    est.trials = static_cast<std::int64_t>(lost.size());
    if (lost.empty()) return est;
    constexpr std::size_t kBatches = 50;
    const std::size_t per_batch = std::max<std::size_t>(1, lost.size() / kBatches);
    RunningMean batches;
    std::size_t total_lost = 0;
    for (char l : lost) total_lost += static_cast<std::size_t>(l);
    for (std::size_t b = 0; b + per_batch <= lost.size() && b / per_batch < kBatches; b += per_batch) {
        std::size_t sum = 0;
        for (std::size_t i = b; i < b + per_batch; ++i) sum += static_cast<std::size_t>(lost[i]);
        batches.add(static_cast<double>(sum) / per_batch);
    }
    est.value = static_cast<double>(total_lost) / lost.size();
    est.std_error = batches.std_error();
    return est;
}

MarkovState markov_numeric(double p_c, double p_e, double p_on, int m, int w_c) {
    // state layout: off, connect, drop, (0,0), CR(0..m), (i,k) for i in 1..m, k in 0..w_c-1
    const int off = 0, connect = 1, drop = 2, start = 3;
    auto cr = [&](int i) { return 4 + i; };
    auto backoff = [&](int i, int k) { return 5 + m + (i - 1) * w_c + k; };
    const int n = 5 + m + m * w_c;

    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
    P(off, start) += p_on;
    P(off, off) += 1.0 - p_on;
    P(connect, off) = 1.0;
    P(drop, off) = 1.0;

    auto head_of_stage = [&](int i) { return i == 0 ? start : backoff(i, 0); };
    auto fail_into_next = [&](int from, int i, double p) {
        if (i < m) {
            for (int k = 0; k < w_c; ++k) P(from, backoff(i + 1, k)) += p / w_c;
        } else {
            P(from, drop) += p;
        }
    };
    for (int i = 0; i <= m; ++i) {
        const int head = head_of_stage(i);
        P(head, cr(i)) += 1.0 - p_c;
        fail_into_next(head, i, p_c);
        P(cr(i), connect) += 1.0 - p_e;
        fail_into_next(cr(i), i, p_e);
    }
    for (int i = 1; i <= m; ++i)
        for (int k = 1; k < w_c; ++k) P(backoff(i, k), backoff(i, k - 1)) = 1.0;

    // pi (P - I) = 0 with one balance equation replaced by sum(pi) = 1
    Eigen::MatrixXd A = P.transpose() - Eigen::MatrixXd::Identity(n, n);
    A.row(0).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs(0) = 1.0;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (lu.rank() < n) throw SingularChainError("markov_numeric: chain has no unique stationary distribution");
    const Eigen::VectorXd pi = lu.solve(rhs);
    if ((A * pi - rhs).lpNorm<Eigen::Infinity>() > 1e-9) throw SingularChainError("markov_numeric: solve did not converge");

    MarkovState s;
    s.b_off = pi(off);
    s.b_connect = pi(connect);
    s.b_drop = pi(drop);
    s.b_00 = pi(start);
    s.b_cr.resize(static_cast<std::size_t>(m) + 1);
    for (int i = 0; i <= m; ++i) s.b_cr[i] = pi(cr(i));
    s.b_backoff.assign(static_cast<std::size_t>(m), std::vector<double>(static_cast<std::size_t>(w_c)));
    for (int i = 1; i <= m; ++i)
        for (int k = 0; k < w_c; ++k) s.b_backoff[i - 1][k] = pi(backoff(i, k));
    return s;
}

}  // namespace ltearp::oracle
