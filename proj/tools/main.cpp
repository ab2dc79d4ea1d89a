// ltearp: analytic model, simulator and experiment driver for LTE random access
// under machine-type traffic.

#include "ltearp/analytic.hpp"
#include "ltearp/config.hpp"
#include "ltearp/harness.hpp"
#include "ltearp/sim.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

namespace {

using namespace ltearp;

enum Exit { kOk = 0, kValidation = 1, kRuntime = 2, kBracket = 3 };

struct CommonOptions {
    std::string scenario;
    std::optional<double> bandwidth;
    std::optional<int> delta_rao;
    std::optional<int> payload;
    std::optional<std::string> signaling;
    std::optional<int> m;
    std::optional<double> rate_per_s;
    std::optional<double> rate_per_subframe;
    std::optional<std::string> limit_mask;
    std::optional<std::string> pdcch_mode;
    std::optional<std::string> pusch_mode;
    std::uint64_t seed = 1;
    int seeds = 5;
    std::int64_t duration = 200000;
    std::optional<std::int64_t> warmup;
    std::string out;
    std::string format = "csv";
};

void add_common(CLI::App* app, CommonOptions& o, bool rate) {
    app->add_option("--scenario", o.scenario, "Scenario YAML file")->check(CLI::ExistingFile);
    app->add_option("--bandwidth", o.bandwidth, "Bandwidth in MHz (1.4, 5, 10, 20)");
    app->add_option("--delta-rao", o.delta_rao, "Subframes between random access opportunities");
    app->add_option("--payload-bytes", o.payload, "Report payload in bytes");
    app->add_option("--signaling", o.signaling, "short or full")->check(CLI::IsMember({"short", "full"}));
    app->add_option("--m", o.m, "Maximum number of preamble retransmissions");
    app->add_option("--limit-mask", o.limit_mask, "Modeled bottlenecks, e.g. prach,pusch");
    app->add_option("--pdcch-capacity", o.pdcch_mode, "raw_cce or format1_messages")
        ->check(CLI::IsMember({"raw_cce", "format1_messages"}));
    app->add_option("--pusch-capacity", o.pusch_mode, "per_frame_verbatim or per_subframe")
        ->check(CLI::IsMember({"per_frame_verbatim", "per_subframe"}));
    if (rate) {
        auto* s = app->add_option("--rate-per-s", o.rate_per_s, "New arrivals per second");
        auto* f = app->add_option("--rate-per-subframe", o.rate_per_subframe, "New arrivals per subframe");
        s->excludes(f);
    }
    app->add_option("--seed", o.seed, "Base random seed");
    app->add_option("--seeds", o.seeds, "Replications per point")->check(CLI::PositiveNumber);
    app->add_option("--duration", o.duration, "Simulated subframes per run")->check(CLI::PositiveNumber);
    app->add_option("--warmup", o.warmup, "Warmup subframes (default 10% of duration)");
    app->add_option("--out", o.out, "Output file (default stdout)");
    app->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
}

ScenarioSpec build_scenario(const CommonOptions& o) {
    ScenarioSpec spec = o.scenario.empty() ? ScenarioSpec{} : load_scenario(o.scenario);
    if (o.bandwidth) {
        const auto bw = parse_bandwidth(*o.bandwidth);
        const auto fresh = default_cell(bw);
        spec.cell.bandwidth = bw;
        spec.cell.n_ulrb = fresh.n_ulrb;
        spec.cell.n_dlrb = fresh.n_dlrb;
        spec.cell.n_cce = fresh.n_cce;
    }
    if (o.delta_rao) spec.cell.delta_rao = *o.delta_rao;
    if (o.m) spec.cell.m = *o.m;
    if (o.payload) spec.traffic.b_data = *o.payload;
    if (o.signaling) spec.catalog.mode = parse_signaling_mode(*o.signaling);
    if (o.limit_mask) spec.limit_mask = LimitMask::parse(*o.limit_mask);
    if (o.pdcch_mode)
        spec.cell.pdcch_capacity_mode =
            *o.pdcch_mode == "raw_cce" ? PdcchCapacityMode::RawCce : PdcchCapacityMode::Format1Messages;
    if (o.pusch_mode)
        spec.cell.pusch_capacity_mode = *o.pusch_mode == "per_subframe" ? PuschCapacityMode::PerSubframe
                                                                        : PuschCapacityMode::PerFrameVerbatim;
    if (o.rate_per_s || o.rate_per_subframe) {
        spec.traffic.lambda_i = o.rate_per_s ? *o.rate_per_s / 1000.0 : *o.rate_per_subframe;
        spec.traffic.n_devices.reset();
        spec.traffic.report_interval_s.reset();
    }
    validate(spec);
    return spec;
}

SimSettings sim_settings(const CommonOptions& o) {
    SimSettings s;
    s.seeds = o.seeds;
    s.base_seed = o.seed;
    s.duration = o.duration;
    s.warmup = o.warmup;
    if (s.effective_warmup() < 0 || s.effective_warmup() >= s.duration)
        throw ValidationError("warmup", "must lie in [0, duration)");
    return s;
}

// Writes to --out when given, otherwise to stdout.
class Output {
public:
    explicit Output(const std::string& path) {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
            if (!*file_) throw std::runtime_error("cannot open output file " + path);
        }
    }
    std::ostream& stream() { return file_ ? *file_ : std::cout; }
    void finish() {
        if (file_) {
            file_->close();
            if (!*file_) throw std::runtime_error("write to output file failed");
        }
    }

private:
    std::unique_ptr<std::ofstream> file_;
};

std::vector<double> parse_rate_list(const std::vector<double>& per_s, const std::vector<double>& per_subframe) {
    std::vector<double> rates;
    for (double r : per_s) rates.push_back(r / 1000.0);
    for (double r : per_subframe) rates.push_back(r);
    return rates;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LTE random access capacity under machine-type traffic"};
    app.require_subcommand(1);

    CommonOptions o;
    std::string engine = "analytic";
    double min_rate = 0.0, max_rate = 0.0;
    int points = 20;
    std::string spacing = "log";
    bool quick = false;
    std::string trace_path;
    std::vector<double> list_per_s, list_per_subframe;

    auto* analytic = app.add_subcommand("analytic", "Solve the analytic model at one arrival rate");
    add_common(analytic, o, true);

    auto* simulate = app.add_subcommand("simulate", "Run one seeded simulation");
    add_common(simulate, o, true);
    simulate->add_option("--trace", trace_path, "Write a per-event trace to this file");

    auto* sweep = app.add_subcommand("sweep", "Sweep the arrival rate and write one CSV row per run");
    add_common(sweep, o, false);
    sweep->add_option("--engine", engine, "analytic, simulation or both")
        ->check(CLI::IsMember({"analytic", "simulation", "both"}));
    sweep->add_option("--min", min_rate, "Lowest arrival rate (arrivals/s)")->required();
    sweep->add_option("--max", max_rate, "Highest arrival rate (arrivals/s)")->required();
    sweep->add_option("--points", points, "Number of rates");
    sweep->add_option("--spacing", spacing, "log or linear")->check(CLI::IsMember({"log", "linear"}));

    auto* breaking = app.add_subcommand("breaking-point", "Find the rate where outage first exceeds 0.1");
    add_common(breaking, o, false);
    breaking->add_option("--engine", engine, "analytic or simulation")
        ->check(CLI::IsMember({"analytic", "simulation"}));
    double bp_min = 10.0, bp_max = 100000.0;
    int bp_iter = 20;
    breaking->add_option("--min", bp_min, "Lower end of the search range (arrivals/s)");
    breaking->add_option("--max", bp_max, "Upper end of the search range (arrivals/s)");
    breaking->add_option("--iterations", bp_iter, "Bisection steps (at most 20)");

    auto* cmp = app.add_subcommand("compare", "Analytic against simulated outage at given rates");
    add_common(cmp, o, false);
    cmp->add_option("--rates-per-s", list_per_s, "Arrival rates in arrivals/s")->delimiter(',');
    cmp->add_option("--rates-per-subframe", list_per_subframe, "Arrival rates per subframe")->delimiter(',');

    auto* val = app.add_subcommand("validate", "Check the closed forms against the reference oracles");
    val->add_option("--seed", o.seed, "Oracle seed");
    val->add_flag("--quick", quick, "Shorter Monte-Carlo runs");
    val->add_option("--out", o.out, "Output file (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        Output out(o.out);
        const bool json = o.format == "json";

        if (*analytic) {
            const auto spec = build_scenario(o);
            write_analytic(spec, solve_total_rate(spec), out.stream(), json);
        } else if (*simulate) {
            const auto spec = build_scenario(o);
            const auto s = sim_settings(o);
            std::unique_ptr<std::ofstream> trace;
            if (!trace_path.empty()) {
                trace = std::make_unique<std::ofstream>(trace_path);
                if (!*trace) throw std::runtime_error("cannot open trace file " + trace_path);
            }
            const auto r = run(spec, o.seed, s.duration, s.effective_warmup(), trace.get());
            write_simulation(spec, r, out.stream(), json);
        } else if (*sweep) {
            SweepSpec sw;
            sw.base = build_scenario(o);
            sw.min_rate = min_rate / 1000.0;
            sw.max_rate = max_rate / 1000.0;
            sw.points = points;
            sw.log_spacing = spacing == "log";
            sw.analytic = engine != "simulation";
            sw.simulation = engine != "analytic";
            sw.sim = sim_settings(o);
            const auto rows = run_sweep(sw);
            if (json)
                write_json(rows, out.stream());
            else
                write_csv(rows, out.stream());
        } else if (*breaking) {
            const auto spec = build_scenario(o);
            const Engine e = engine == "simulation" ? Engine::Simulation : Engine::Analytic;
            const auto bp = find_breaking_point(spec, e, {bp_min / 1000.0, bp_max / 1000.0, bp_iter}, sim_settings(o));
            auto& s = out.stream();
            if (json) {
                s << "{\n  \"scenario_id\": \"" << spec.name << "\",\n  \"engine\": \"" << to_string(bp.engine)
                  << "\",\n  \"rate_per_s\": " << format_number(bp.rate_per_s())
                  << ",\n  \"rate_per_subframe\": " << format_number(bp.rate_per_subframe)
                  << ",\n  \"bracket_per_s\": [" << format_number(bp.lower * 1000.0) << ", "
                  << format_number(bp.upper * 1000.0) << "],\n  \"outage_at_bracket\": ["
                  << format_number(bp.outage_lower) << ", " << format_number(bp.outage_upper)
                  << "],\n  \"iterations\": " << bp.iterations << "\n}\n";
            } else {
                s << "scenario_id,engine,rate_per_s,rate_per_subframe,lower_per_s,upper_per_s,outage_lower,"
                     "outage_upper,iterations\n"
                  << spec.name << ',' << to_string(bp.engine) << ',' << format_number(bp.rate_per_s()) << ','
                  << format_number(bp.rate_per_subframe) << ',' << format_number(bp.lower * 1000.0) << ','
                  << format_number(bp.upper * 1000.0) << ',' << format_number(bp.outage_lower) << ','
                  << format_number(bp.outage_upper) << ',' << bp.iterations << '\n';
            }
        } else if (*cmp) {
            const auto spec = build_scenario(o);
            const auto rows = compare(spec, parse_rate_list(list_per_s, list_per_subframe), sim_settings(o));
            write_comparison_table(rows, std::cerr);
            if (json)
                write_comparison_json(rows, out.stream());
            else
                write_comparison_csv(rows, out.stream());
        } else if (*val) {
            const auto checks = run_validation(o.seed, quick);
            bool all = true;
            for (const auto& c : checks) {
                out.stream() << (c.passed ? "PASS " : "FAIL ") << c.name << ' ' << c.detail << '\n';
                all = all && c.passed;
            }
            out.finish();
            return all ? kOk : kRuntime;
        }
        out.finish();
        return kOk;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return kValidation;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return kValidation;
    } catch (const BracketNotFound& e) {
        std::cerr << "bracket not found: " << e.what() << '\n';
        return kBracket;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntime;
    }
}
