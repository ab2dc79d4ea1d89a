#include "ltearp/harness.hpp"

#include "ltearp/oracles.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <tuple>

namespace ltearp {

namespace {

using nlohmann::ordered_json;

constexpr const char* kCsvHeader =
    "scenario_id,engine,seed,lambda_i_per_s,lambda_i_per_subframe,lambda_t,p_c,p_e,p_f,p_outage,n_tx,"
    "rho_pdcch,rho_pdsch,rho_pusch,outage_fraction_sim,successes,drops,duration_subframes";
constexpr std::size_t kCsvColumns = 18;

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

template <class T>
std::optional<T> parse_optional(const std::string& s) {
    if (s.empty()) return std::nullopt;
    T v{};
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) throw ParseError("csv: bad numeric field '" + s + "'");
    return v;
}

double sim_outage(std::int64_t drops, std::int64_t successes) {
    const auto n = drops + successes;
    return n > 0 ? static_cast<double>(drops) / static_cast<double>(n) : 0.0;
}

ScenarioSpec at_rate(const ScenarioSpec& spec, double lambda_i) {
    ScenarioSpec s = spec;
    s.traffic.lambda_i = lambda_i;
    s.traffic.n_devices.reset();
    s.traffic.report_interval_s.reset();
    return s;
}

ordered_json analytic_json(const AnalyticResult& r) {
    return ordered_json{{"lambda_i_per_subframe", r.lambda_i},
                        {"lambda_i_per_s", r.lambda_i * 1000.0},
                        {"lambda_t", r.lambda_t},
                        {"lambda_a", r.lambda_a},
                        {"lambda_s", r.lambda_s},
                        {"lambda_r", r.lambda_r()},
                        {"p_c", r.p_c},
                        {"p_q_pdcch", r.p_q_pdcch},
                        {"p_q_pdsch", r.p_q_pdsch},
                        {"p_q_pusch", r.p_q_pusch},
                        {"p_e", r.p_e},
                        {"p_f", r.p_f},
                        {"p_outage", r.p_outage},
                        {"n_tx", r.n_tx},
                        {"rho_pdcch", r.rho_pdcch},
                        {"rho_pdsch", r.rho_pdsch},
                        {"rho_pusch", r.rho_pusch},
                        {"b_off", r.b_off},
                        {"b_connect", r.b_connect},
                        {"b_drop", r.b_drop},
                        {"converged", r.converged},
                        {"iterations", r.iterations}};
}

ordered_json sim_json(const SimResult& r) {
    ordered_json channels = ordered_json::object();
    for (Channel c : {Channel::Prach, Channel::Pdcch, Channel::Pdsch, Channel::Pusch}) {
        const auto& s = r.channels[static_cast<std::size_t>(c)];
        channels[std::string(to_string(c))] = {{"served_units", s.served_units},
                                               {"expired_requests", s.expired_requests},
                                               {"mean_utilization", s.mean_utilization},
                                               {"bounded", s.bounded}};
    }
    return ordered_json{{"seed", r.rng_seed},
                        {"duration_subframes", r.duration_subframes},
                        {"warmup_subframes", r.warmup_subframes},
                        {"successes", r.successes},
                        {"drops", r.drops},
                        {"outage_fraction", r.outage_fraction},
                        {"latency_mean", r.latency_mean},
                        {"latency_p50", r.latency_p50},
                        {"latency_p90", r.latency_p90},
                        {"latency_p99", r.latency_p99},
                        {"msg1_histogram", r.msg1_histogram},
                        {"preamble_transmissions", r.preamble_transmissions},
                        {"collided_transmissions", r.collided_transmissions},
                        {"channels", channels},
                        {"created", r.created},
                        {"finished_done", r.finished_done},
                        {"finished_dropped", r.finished_dropped},
                        {"in_flight", r.in_flight}};
}

}  // namespace

std::string_view to_string(Engine e) { return e == Engine::Analytic ? "analytic" : "simulation"; }

std::string format_number(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

double SweepRow::outage() const {
    if (analytic) return analytic->p_outage;
    if (sim) return sim->outage_fraction;
    return 0.0;
}

void validate(const SweepSpec& sweep) {
    if (!(sweep.min_rate > 0.0)) throw ValidationError("min", "must be positive");
    if (!(sweep.min_rate < sweep.max_rate)) throw ValidationError("max", "must exceed min");
    if (sweep.points < 2) throw ValidationError("points", "need at least 2 points");
    if (!sweep.analytic && !sweep.simulation) throw ValidationError("engine", "engine set is empty");
    if (sweep.simulation) {
        if (sweep.sim.seeds < 1) throw ValidationError("seeds", "need at least one seed");
        if (sweep.sim.duration <= sweep.sim.effective_warmup())
            throw ValidationError("duration", "must exceed the warmup");
    }
    validate(sweep.base);
}

std::vector<double> sweep_rates(const SweepSpec& sweep) {
    std::vector<double> rates(static_cast<std::size_t>(sweep.points));
    const double n = sweep.points - 1;
    for (int i = 0; i < sweep.points; ++i) {
        const double f = i / n;
        rates[i] = sweep.log_spacing ? std::exp(std::log(sweep.min_rate) + f * std::log(sweep.max_rate / sweep.min_rate))
                                     : sweep.min_rate + f * (sweep.max_rate - sweep.min_rate);
    }
    rates.front() = sweep.min_rate;
    rates.back() = sweep.max_rate;
    return rates;
}

std::vector<SweepRow> run_sweep(const SweepSpec& sweep) {
    validate(sweep);
    std::vector<SweepRow> rows;
    for (double rate : sweep_rates(sweep)) {
        const ScenarioSpec spec = at_rate(sweep.base, rate);
        if (sweep.analytic) {
            SweepRow row{spec.name, Engine::Analytic, std::nullopt, rate, solve_total_rate(spec), std::nullopt};
            rows.push_back(std::move(row));
        }
        if (sweep.simulation) {
            for (int r = 0; r < sweep.sim.seeds; ++r) {
                const auto seed = sweep.sim.seed(r);
                SweepRow row{spec.name, Engine::Simulation, seed, rate, std::nullopt,
                             run(spec, seed, sweep.sim.duration, sweep.sim.effective_warmup())};
                rows.push_back(std::move(row));
            }
        }
    }
    std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
        return std::tuple(a.lambda_i_per_subframe, a.engine, a.seed.value_or(0)) <
               std::tuple(b.lambda_i_per_subframe, b.engine, b.seed.value_or(0));
    });
    return rows;
}

void write_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
    out << kCsvHeader << '\n';
    for (const auto& row : rows) {
        std::vector<std::string> f(kCsvColumns);
        f[0] = row.scenario_id;
        f[1] = std::string(to_string(row.engine));
        if (row.seed) f[2] = std::to_string(*row.seed);
        f[3] = format_number(row.lambda_i_per_subframe * 1000.0);
        f[4] = format_number(row.lambda_i_per_subframe);
        if (const auto& a = row.analytic) {
            f[5] = format_number(a->lambda_t);
            f[6] = format_number(a->p_c);
            f[7] = format_number(a->p_e);
            f[8] = format_number(a->p_f);
            f[9] = format_number(a->p_outage);
            f[10] = format_number(a->n_tx);
            f[11] = format_number(a->rho_pdcch);
            f[12] = format_number(a->rho_pdsch);
            f[13] = format_number(a->rho_pusch);
        }
        if (const auto& s = row.sim) {
            f[14] = format_number(s->outage_fraction);
            f[15] = std::to_string(s->successes);
            f[16] = std::to_string(s->drops);
            f[17] = std::to_string(s->duration_subframes);
        }
        for (std::size_t i = 0; i < f.size(); ++i) out << (i ? "," : "") << f[i];
        out << '\n';
    }
}

void write_json(const std::vector<SweepRow>& rows, std::ostream& out) {
    ordered_json arr = ordered_json::array();
    for (const auto& row : rows) {
        ordered_json j{{"scenario_id", row.scenario_id},
                       {"engine", std::string(to_string(row.engine))},
                       {"lambda_i_per_s", row.lambda_i_per_subframe * 1000.0},
                       {"lambda_i_per_subframe", row.lambda_i_per_subframe}};
        j["seed"] = row.seed ? ordered_json(*row.seed) : ordered_json(nullptr);
        if (row.analytic) j["analytic"] = analytic_json(*row.analytic);
        if (row.sim) j["simulation"] = sim_json(*row.sim);
        arr.push_back(std::move(j));
    }
    out << arr.dump(2) << '\n';
}

std::vector<CsvRecord> read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader) throw ParseError("csv: unexpected header");
    std::vector<CsvRecord> records;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != kCsvColumns) throw ParseError("csv: row has " + std::to_string(f.size()) + " columns");
        CsvRecord r;
        r.scenario_id = f[0];
        r.engine = f[1];
        r.seed = parse_optional<std::uint64_t>(f[2]);
        r.lambda_i_per_subframe = parse_optional<double>(f[4]).value_or(0.0);
        r.p_outage = parse_optional<double>(f[9]);
        r.outage_fraction_sim = parse_optional<double>(f[14]);
        r.successes = parse_optional<std::int64_t>(f[15]);
        r.drops = parse_optional<std::int64_t>(f[16]);
        records.push_back(std::move(r));
    }
    return records;
}

std::vector<CsvRecord> to_records(const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    write_csv(rows, out);
    std::istringstream in(out.str());
    return read_csv(in);
}

std::vector<SweepSummaryPoint> summarize(const std::vector<CsvRecord>& records) {
    struct Acc {
        double analytic = 0.0;
        std::int64_t drops = 0;
        std::int64_t total = 0;
    };
    std::vector<std::pair<std::pair<std::string, double>, Acc>> groups;
    for (const auto& r : records) {
        const auto key = std::pair(r.engine, r.lambda_i_per_subframe);
        auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == key; });
        if (it == groups.end()) {
            groups.push_back({key, Acc{}});
            it = std::prev(groups.end());
        }
        if (r.p_outage) it->second.analytic = *r.p_outage;
        it->second.drops += r.drops.value_or(0);
        it->second.total += r.drops.value_or(0) + r.successes.value_or(0);
    }
    std::vector<SweepSummaryPoint> out;
    for (const auto& [key, acc] : groups) {
        const double v = key.first == "analytic" ? acc.analytic : sim_outage(acc.drops, acc.total - acc.drops);
        out.push_back({key.first, key.second, v});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return std::tie(a.lambda_i_per_subframe, a.engine) < std::tie(b.lambda_i_per_subframe, b.engine);
    });
    return out;
}

double outage_at(const ScenarioSpec& spec, double lambda_i, Engine engine, const SimSettings& sim) {
    const ScenarioSpec s = at_rate(spec, lambda_i);
    if (engine == Engine::Analytic) return solve_total_rate(s).p_outage;
    std::int64_t drops = 0, successes = 0;
    for (int r = 0; r < sim.seeds; ++r) {
        const auto res = run(s, sim.seed(r), sim.duration, sim.effective_warmup());
        drops += res.drops;
        successes += res.successes;
    }
    return sim_outage(drops, successes);
}

BreakingPoint find_breaking_point(const ScenarioSpec& spec, Engine engine, const SearchRange& range,
                                  const SimSettings& sim) {
    if (!(range.lower > 0.0) || !(range.lower < range.upper))
        throw ValidationError("range", "need 0 < lower < upper");
    if (range.iterations < 1 || range.iterations > 20) throw ValidationError("iterations", "must be in [1, 20]");
    validate(at_rate(spec, range.lower));

    BreakingPoint bp;
    bp.engine = engine;
    bp.lower = range.lower;
    bp.upper = range.upper;
    bp.outage_lower = outage_at(spec, bp.lower, engine, sim);
    bp.outage_upper = outage_at(spec, bp.upper, engine, sim);
    if (bp.outage_upper <= kOutageThreshold)
        throw BracketNotFound("outage stays at or below 0.1 up to " + format_number(bp.upper * 1000.0) + " arrivals/s");
    if (bp.outage_lower > kOutageThreshold)
        throw BracketNotFound("outage already exceeds 0.1 at " + format_number(bp.lower * 1000.0) + " arrivals/s");

    for (int i = 0; i < range.iterations; ++i) {
        const double mid = std::sqrt(bp.lower * bp.upper);
        const double out = outage_at(spec, mid, engine, sim);
        ++bp.iterations;
        if (out > kOutageThreshold) {
            bp.upper = mid;
            bp.outage_upper = out;
        } else {
            bp.lower = mid;
            bp.outage_lower = out;
        }
    }
    bp.rate_per_subframe = bp.upper;
    return bp;
}

double ComparisonRow::abs_difference() const { return std::abs(analytic_outage - simulated_outage); }

std::vector<ComparisonRow> compare(const ScenarioSpec& spec, const std::vector<double>& rates_per_subframe,
                                   const SimSettings& sim) {
    if (rates_per_subframe.empty()) throw ValidationError("rates", "need at least one rate");
    if (sim.seeds < 1) throw ValidationError("seeds", "need at least one seed");
    std::vector<double> rates = rates_per_subframe;
    std::sort(rates.begin(), rates.end());
    std::vector<ComparisonRow> rows;
    for (double rate : rates) {
        const ScenarioSpec s = at_rate(spec, rate);
        validate(s);
        ComparisonRow row;
        row.lambda_i_per_subframe = rate;
        row.analytic_outage = solve_total_rate(s).p_outage;
        std::int64_t drops = 0, successes = 0;
        for (int r = 0; r < sim.seeds; ++r) {
            const auto res = run(s, sim.seed(r), sim.duration, sim.effective_warmup());
            drops += res.drops;
            successes += res.successes;
            row.per_seed_outage.push_back(res.outage_fraction);
            row.seeds.push_back(sim.seed(r));
        }
        row.simulated_outage = sim_outage(drops, successes);
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_comparison_table(const std::vector<ComparisonRow>& rows, std::ostream& out) {
    out << std::left << std::setw(16) << "arrivals/s" << std::setw(14) << "analytic" << std::setw(14) << "simulated"
        << "abs_diff\n";
    for (const auto& r : rows) {
        out << std::left << std::setw(16) << format_number(r.lambda_i_per_subframe * 1000.0) << std::setw(14)
            << std::setprecision(6) << r.analytic_outage << std::setw(14) << r.simulated_outage << r.abs_difference()
            << '\n';
    }
}

void write_comparison_csv(const std::vector<ComparisonRow>& rows, std::ostream& out) {
    out << "lambda_i_per_s,lambda_i_per_subframe,p_outage_analytic,outage_fraction_sim,abs_difference,seeds\n";
    for (const auto& r : rows) {
        std::string seeds;
        for (std::size_t i = 0; i < r.seeds.size(); ++i) seeds += (i ? ";" : "") + std::to_string(r.seeds[i]);
        out << format_number(r.lambda_i_per_subframe * 1000.0) << ',' << format_number(r.lambda_i_per_subframe) << ','
            << format_number(r.analytic_outage) << ',' << format_number(r.simulated_outage) << ','
            << format_number(r.abs_difference()) << ',' << seeds << '\n';
    }
}

void write_comparison_json(const std::vector<ComparisonRow>& rows, std::ostream& out) {
    ordered_json arr = ordered_json::array();
    for (const auto& r : rows) {
        arr.push_back({{"lambda_i_per_s", r.lambda_i_per_subframe * 1000.0},
                       {"lambda_i_per_subframe", r.lambda_i_per_subframe},
                       {"p_outage_analytic", r.analytic_outage},
                       {"outage_fraction_sim", r.simulated_outage},
                       {"abs_difference", r.abs_difference()},
                       {"seeds", r.seeds},
                       {"per_seed_outage", r.per_seed_outage}});
    }
    out << arr.dump(2) << '\n';
}

void write_analytic(const ScenarioSpec& spec, const AnalyticResult& r, std::ostream& out, bool json) {
    auto j = analytic_json(r);
    if (json) {
        ordered_json doc{{"scenario_id", spec.name}, {"result", j}};
        out << doc.dump(2) << '\n';
        return;
    }
    out << "scenario " << spec.name << '\n';
    for (const auto& [key, value] : j.items()) out << "  " << std::left << std::setw(24) << key << value.dump() << '\n';
}

void write_simulation(const ScenarioSpec& spec, const SimResult& r, std::ostream& out, bool json) {
    auto j = sim_json(r);
    if (json) {
        ordered_json doc{{"scenario_id", spec.name}, {"result", j}};
        out << doc.dump(2) << '\n';
        return;
    }
    out << "scenario " << spec.name << '\n';
    for (const auto& [key, value] : j.items()) out << "  " << std::left << std::setw(24) << key << value.dump() << '\n';
}

std::vector<ValidationCheck> run_validation(std::uint64_t seed, bool quick) {
    std::vector<ValidationCheck> checks;
    auto add = [&](std::string name, bool ok, std::string detail) {
        checks.push_back({std::move(name), std::move(detail), ok});
    };

    // queue_loss against the impatient-queue simulation
    for (double rho : {0.3, 0.6, 0.9})
        for (double t_d : {10.0, 40.0})
            for (double mu : {3.0, 13.0, 21.0}) {
                const ChannelLoad load{rho * mu, mu, t_d};
                const double formula = queue_loss(load);
                const double span = (quick ? 2e5 : 1e6) / mu;
                const auto est = oracle::impatient_queue(load.lambda, mu, t_d, span, seed);
                const double tol = std::max(0.1 * formula, 0.005);
                std::ostringstream d;
                d << "rho=" << rho << " T_d=" << t_d << " mu=" << mu << " formula=" << formula
                  << " oracle=" << est.value;
                add("queue_loss", std::abs(formula - est.value) <= tol, d.str());
            }

    // closed-form chain against the dense solve
    const double grid[] = {0.05, 0.3, 0.7};
    for (int m : {0, 2, 9})
        for (int w_c : {4, 20}) {
            double worst = 0.0, worst_identity = 0.0;
            for (double p_c : grid)
                for (double p_e : grid)
                    for (double p_on : grid) {
                        const auto a = markov_steady_state(p_c, p_e, p_on, m, w_c);
                        const auto b = oracle::markov_numeric(p_c, p_e, p_on, m, w_c);
                        auto upd = [&](double x, double y) { worst = std::max(worst, std::abs(x - y)); };
                        upd(a.b_off, b.b_off);
                        upd(a.b_connect, b.b_connect);
                        upd(a.b_drop, b.b_drop);
                        upd(a.b_00, b.b_00);
                        for (std::size_t i = 0; i < a.b_cr.size(); ++i) upd(a.b_cr[i], b.b_cr[i]);
                        for (std::size_t i = 0; i < a.b_backoff.size(); ++i)
                            for (std::size_t k = 0; k < a.b_backoff[i].size(); ++k)
                                upd(a.b_backoff[i][k], b.b_backoff[i][k]);
                        const double ratio = a.b_drop / (a.b_drop + a.b_connect);
                        worst_identity = std::max(
                            worst_identity,
                            std::abs(ratio - outage_probability(one_shot_failure(p_c, p_e), m)));
                    }
            std::ostringstream d;
            d << "m=" << m << " W_c=" << w_c << " max_elem_diff=" << worst << " identity_diff=" << worst_identity;
            add("markov_chain", worst <= 1e-10 && worst_identity <= 1e-12, d.str());
        }

    // collision bound direction
    const int d = 54, delta = 5;
    const std::int64_t trials = quick ? 5000 : 20000;
    for (int i = 0; i < 10; ++i) {
        const double load = 5.0 * std::pow(40.0, i / 9.0);  // expected contenders per RAO, 5..200
        const double lambda_t = load / delta;
        const double bound = collision_probability(lambda_t, d, delta);
        const auto est = oracle::mc_preamble(lambda_t, d, delta, trials, seed + static_cast<std::uint64_t>(i));
        std::ostringstream det;
        det << "contenders/RAO=" << load << " bound=" << bound << " mc=" << est.collision.value << " se="
            << est.collision.std_error;
        add("collision_bound", est.collision.value <= bound + 3.0 * est.collision.std_error, det.str());
    }

    // preamble rates against the Monte-Carlo counts
    for (double load : {2.0, 20.0, 80.0}) {
        const double lambda_t = load / delta;
        const auto rates = preamble_rates(lambda_t, d, delta);
        const auto est = oracle::mc_preamble(lambda_t, d, delta, trials, seed);
        // the oracle skips empty RAOs only in its collision average; its counts are per trial
        const double a = est.activated_per_rao / delta, s = est.singletons_per_rao / delta;
        const bool ok = std::abs(a - rates.lambda_a) <= 0.02 * rates.lambda_a + 1e-3 &&
                        std::abs(s - rates.lambda_s) <= 0.03 * rates.lambda_s + 1e-3;
        std::ostringstream det;
        det << "contenders/RAO=" << load << " lambda_a=" << rates.lambda_a << "/" << a << " lambda_s=" << rates.lambda_s
            << "/" << s;
        add("preamble_rates", ok, det.str());
    }
    return checks;
}

}  // namespace ltearp
