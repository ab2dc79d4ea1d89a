#include "ltearp/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ltearp {

namespace {

int ceil_div(int bytes, int per_unit) { return (bytes + per_unit - 1) / per_unit; }

// sum_{i=0}^{n-1} q^i
double geometric_sum(double q, int n) {
    if (n <= 0) return 0.0;
    if (std::abs(1.0 - q) > 1e-6) return (1.0 - std::pow(q, n)) / (1.0 - q);
    double sum = 0.0;
    double term = 1.0;
    for (int i = 0; i < n; ++i) {
        sum += term;
        term *= q;
    }
    return sum;
}

double mm1_impatient_loss(double rho, double mu, double tau) {
    const double omega = std::exp(-mu * (1.0 - rho) * tau);
    return (1.0 - rho) * rho * omega / (1.0 - rho * rho * omega);
}

}  // namespace

double MarkovState::total() const {
    double sum = b_off + b_connect + b_drop + b_00;
    for (double v : b_cr) sum += v;
    for (const auto& row : b_backoff)
        for (double v : row) sum += v;
    return sum;
}

double collision_probability(double lambda_t, int d, int delta_rao) {
    const double exponent = lambda_t * delta_rao - 1.0;
    if (exponent <= 0.0) return 0.0;
    if (d <= 1) return 1.0;
    const double p = 1.0 - std::pow(1.0 - 1.0 / d, exponent);
    return std::clamp(p, 0.0, 1.0);
}

PreambleRates preamble_rates(double lambda_t, int d, int delta_rao) {
    const double per_preamble = lambda_t * delta_rao / d;
    const double scale = static_cast<double>(d) / delta_rao;
    // -expm1 keeps lambda_a accurate when per_preamble is tiny
    return {-std::expm1(-per_preamble) * scale, per_preamble * std::exp(-per_preamble) * scale};
}

double queue_loss(const ChannelLoad& load) {
    if (!(load.mu > 0.0)) throw std::domain_error("queue_loss: service rate must be positive");
    if (load.t_d * load.mu < 1.0) throw std::domain_error("queue_loss: deadline shorter than mean service time");
    if (load.lambda <= 0.0) return 0.0;

    const double tau = load.t_d - 1.0 / load.mu;
    const double rho = load.rho();
    const double seam = 1.0 - kOverloadEpsilon;
    if (rho < seam) return mm1_impatient_loss(rho, load.mu, tau);

    const double loss = std::max(1.0 - 1.0 / rho, mm1_impatient_loss(seam, load.mu, tau));
    return std::clamp(loss, 0.0, std::nextafter(1.0, 0.0));
}

ChannelLoads channel_loads(double lambda_t, double lambda_a, double lambda_s, const ScenarioSpec& spec) {
    const auto& cell = spec.cell;
    const auto& k = spec.catalog;
    const int b_data = spec.traffic.b_data;
    const bool full = k.mode == SignalingMode::Full;
    const double delta = cell.delta_rao;

    const double rar_grants = -std::expm1(-lambda_t * delta) / delta;
    const int data_grants = ceil_div(b_data, k.n_frag * k.b_rb);
    const double rar_rbs = std::ceil(lambda_a * k.b_rar / k.b_rb);

    // Short format keeps RAR, RRC request, RRC complete and data; full format
    // adds RRC connect, both reconfiguration messages and the security exchange.
    const int pdcch_per_singleton = (full ? 6 : 1) + data_grants;
    const int pdsch_per_singleton =
        full ? ceil_div(k.b_conn, k.b_rb) + ceil_div(k.b_r_dl, k.b_rb) + ceil_div(k.b_s_cmd, k.b_rb) : 0;
    int pusch_per_singleton = ceil_div(k.b_comp, k.b_rb) + ceil_div(b_data, k.b_rb);
    if (full) pusch_per_singleton += ceil_div(k.b_r_ul, k.b_rb) + ceil_div(k.b_s_comp, k.b_rb);

    const double t_shared = std::min(cell.t_crt, cell.t_other);
    ChannelLoads loads;
    loads.pdcch = {rar_grants + lambda_s * pdcch_per_singleton, static_cast<double>(pdcch_capacity(cell)),
                   static_cast<double>(cell.t_rar)};
    loads.pdsch = {rar_rbs + lambda_s * pdsch_per_singleton, static_cast<double>(cell.n_dlrb), t_shared};
    loads.pusch = {lambda_a * ceil_div(k.b_req, k.b_rb) + lambda_s * pusch_per_singleton, pusch_capacity(cell),
                   t_shared};

    if (!spec.limit_mask.has(Channel::Pdcch)) loads.pdcch.lambda = 0.0;
    if (!spec.limit_mask.has(Channel::Pdsch)) loads.pdsch.lambda = 0.0;
    if (!spec.limit_mask.has(Channel::Pusch)) loads.pusch.lambda = 0.0;
    return loads;
}

double grant_failure(const ChannelLoads& loads) {
    const double ok = (1.0 - queue_loss(loads.pdcch)) * (1.0 - queue_loss(loads.pdsch)) * (1.0 - queue_loss(loads.pusch));
    return 1.0 - ok;
}

double one_shot_failure(double p_c, double p_e) { return 1.0 - (1.0 - p_c) * (1.0 - p_e); }

double outage_probability(double p_f, int m) { return std::pow(p_f, m + 1); }

double expected_transmissions(double p_f, int m) { return geometric_sum(p_f, m + 1); }

MarkovState markov_steady_state(double p_c, double p_e, double p_on, int m, int w_c) {
    const double q = p_e * (1.0 - p_c) + p_c;
    const double attempts = geometric_sum(q, m + 1);      // sum_{i=0}^{m} q^i
    const double retries = q * geometric_sum(q, m);       // sum_{i=1}^{m} q^i
    const double backoff_mass = (w_c + 1) / 2.0;          // sum_k (w_c - k) / w_c

    // Normalization solved for b_off; multiplying through by 2(1 - q) gives the
    // familiar closed form with 2(1 - p_e)(1 - p_c) in the numerator.
    MarkovState s;
    s.b_off = 1.0 / (1.0 + 2.0 * p_on + backoff_mass * p_on * retries + (1.0 - p_c) * p_on * attempts);
    s.b_00 = p_on * s.b_off;
    const double q_m1 = std::pow(q, m + 1);
    s.b_connect = (1.0 - q_m1) * s.b_00;
    s.b_drop = q_m1 * s.b_00;

    s.b_cr.resize(static_cast<std::size_t>(m) + 1);
    double qi = 1.0;
    for (int i = 0; i <= m; ++i) {
        s.b_cr[i] = (1.0 - p_c) * qi * s.b_00;
        qi *= q;
    }
    s.b_backoff.assign(static_cast<std::size_t>(m), std::vector<double>(static_cast<std::size_t>(w_c)));
    qi = q;
    for (int i = 1; i <= m; ++i) {
        for (int k = 0; k < w_c; ++k) s.b_backoff[i - 1][k] = static_cast<double>(w_c - k) / w_c * qi * s.b_00;
        qi *= q;
    }
    return s;
}

FixedPoint solve_fixed_point(double lambda_i, int m, const std::function<double(double)>& failure_at,
                             const FixedPointOptions& opts) {
    FixedPoint fp{lambda_i, false, 0};
    const double upper = (m + 1) * lambda_i;
    for (int it = 1; it <= opts.max_iterations; ++it) {
        const double target = lambda_i * expected_transmissions(failure_at(fp.lambda_t), m);
        double next = (1.0 - opts.damping) * fp.lambda_t + opts.damping * target;
        next = std::clamp(next, lambda_i, upper);
        const double step = std::abs(next - fp.lambda_t);
        fp.lambda_t = next;
        fp.iterations = it;
        if (step <= opts.tolerance * next) {
            fp.converged = true;
            break;
        }
    }
    return fp;
}

AnalyticResult evaluate_at(double lambda_t, const ScenarioSpec& spec) {
    const auto& cell = spec.cell;
    AnalyticResult r;
    r.lambda_i = spec.traffic.lambda_i;
    r.lambda_t = lambda_t;
    if (spec.limit_mask.has(Channel::Prach)) {
        const auto rates = preamble_rates(lambda_t, cell.d, cell.delta_rao);
        r.lambda_a = rates.lambda_a;
        r.lambda_s = rates.lambda_s;
        r.p_c = collision_probability(lambda_t, cell.d, cell.delta_rao);
    } else {
        // contention-free PRACH: every attempt is a singleton
        r.lambda_a = lambda_t;
        r.lambda_s = lambda_t;
        r.p_c = 0.0;
    }
    const auto loads = channel_loads(lambda_t, r.lambda_a, r.lambda_s, spec);
    r.p_q_pdcch = queue_loss(loads.pdcch);
    r.p_q_pdsch = queue_loss(loads.pdsch);
    r.p_q_pusch = queue_loss(loads.pusch);
    r.rho_pdcch = loads.pdcch.rho();
    r.rho_pdsch = loads.pdsch.rho();
    r.rho_pusch = loads.pusch.rho();
    r.p_e = 1.0 - (1.0 - r.p_q_pdcch) * (1.0 - r.p_q_pdsch) * (1.0 - r.p_q_pusch);
    r.p_f = one_shot_failure(r.p_c, r.p_e);
    r.p_outage = outage_probability(r.p_f, cell.m);
    r.n_tx = expected_transmissions(r.p_f, cell.m);

    const double p_on = -std::expm1(-spec.traffic.lambda_i);
    const auto chain = markov_steady_state(r.p_c, r.p_e, p_on, cell.m, cell.w_c);
    r.b_off = chain.b_off;
    r.b_connect = chain.b_connect;
    r.b_drop = chain.b_drop;
    return r;
}

AnalyticResult solve_total_rate(const ScenarioSpec& spec, const FixedPointOptions& opts) {
    const auto fp = solve_fixed_point(
        spec.traffic.lambda_i, spec.cell.m, [&](double lt) { return evaluate_at(lt, spec).p_f; }, opts);
    auto r = evaluate_at(fp.lambda_t, spec);
    r.converged = fp.converged;
    r.iterations = fp.iterations;
    return r;
}

}  // namespace ltearp
