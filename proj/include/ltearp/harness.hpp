#pragma once

#include "ltearp/analytic.hpp"
#include "ltearp/config.hpp"
#include "ltearp/sim.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ltearp {

enum class Engine { Analytic, Simulation };

std::string_view to_string(Engine e);

/// Outage level that defines the breaking point.
inline constexpr double kOutageThreshold = 0.1;

struct SimSettings {
    int seeds = 5;
    std::uint64_t base_seed = 1;
    std::int64_t duration = 200000;
    std::optional<std::int64_t> warmup;  // default: 10% of duration

    std::int64_t effective_warmup() const { return warmup.value_or(default_warmup(duration)); }
    std::uint64_t seed(int replicate) const { return base_seed + static_cast<std::uint64_t>(replicate); }
};

struct SweepSpec {
    ScenarioSpec base;
    double min_rate = 0.1;  // per subframe
    double max_rate = 10.0;
    int points = 20;
    bool log_spacing = true;
    bool analytic = true;
    bool simulation = false;
    SimSettings sim;
};

/// One CSV record. Engine-specific fields stay empty for the other engine.
struct SweepRow {
    std::string scenario_id;
    Engine engine = Engine::Analytic;
    std::optional<std::uint64_t> seed;
    double lambda_i_per_subframe = 0.0;
    std::optional<AnalyticResult> analytic;
    std::optional<SimResult> sim;

    double outage() const;
};

/// The exact rates visited by a sweep, ascending.
std::vector<double> sweep_rates(const SweepSpec& sweep);

/// Throws ValidationError when the sweep itself is ill-formed.
void validate(const SweepSpec& sweep);

std::vector<SweepRow> run_sweep(const SweepSpec& sweep);

void write_csv(const std::vector<SweepRow>& rows, std::ostream& out);
void write_json(const std::vector<SweepRow>& rows, std::ostream& out);

/// Values read back from a CSV written by write_csv.
struct CsvRecord {
    std::string scenario_id;
    std::string engine;
    std::optional<std::uint64_t> seed;
    double lambda_i_per_subframe = 0.0;
    std::optional<double> p_outage;
    std::optional<double> outage_fraction_sim;
    std::optional<std::int64_t> successes;
    std::optional<std::int64_t> drops;
};
std::vector<CsvRecord> read_csv(std::istream& in);

/// Mean outage per (engine, rate): simulation rows pool drops and successes.
struct SweepSummaryPoint {
    std::string engine;
    double lambda_i_per_subframe = 0.0;
    double outage = 0.0;
    bool operator==(const SweepSummaryPoint&) const = default;
};
std::vector<SweepSummaryPoint> summarize(const std::vector<CsvRecord>& records);
std::vector<CsvRecord> to_records(const std::vector<SweepRow>& rows);

class BracketNotFound : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct BreakingPoint {
    Engine engine = Engine::Analytic;
    double rate_per_subframe = 0.0;  // upper end of the final bracket
    double lower = 0.0;
    double upper = 0.0;
    double outage_lower = 0.0;
    double outage_upper = 0.0;
    int iterations = 0;

    double rate_per_s() const { return rate_per_subframe * 1000.0; }
};

struct SearchRange {
    double lower = 0.01;  // per subframe
    double upper = 100.0;
    int iterations = 20;
};

/// Outage at one arrival rate: the analytic P_outage, or the pooled simulated
/// outage fraction over all seeds.
double outage_at(const ScenarioSpec& spec, double lambda_i, Engine engine, const SimSettings& sim = {});

/// Geometric bisection for the first rate whose outage exceeds the threshold.
/// Throws BracketNotFound unless outage(lower) <= 0.1 < outage(upper).
BreakingPoint find_breaking_point(const ScenarioSpec& spec, Engine engine, const SearchRange& range = {},
                                  const SimSettings& sim = {});

struct ComparisonRow {
    double lambda_i_per_subframe = 0.0;
    double analytic_outage = 0.0;
    double simulated_outage = 0.0;
    std::vector<double> per_seed_outage;
    std::vector<std::uint64_t> seeds;

    double abs_difference() const;
};

std::vector<ComparisonRow> compare(const ScenarioSpec& spec, const std::vector<double>& rates_per_subframe,
                                   const SimSettings& sim);
void write_comparison_table(const std::vector<ComparisonRow>& rows, std::ostream& out);
void write_comparison_csv(const std::vector<ComparisonRow>& rows, std::ostream& out);
void write_comparison_json(const std::vector<ComparisonRow>& rows, std::ostream& out);

void write_analytic(const ScenarioSpec& spec, const AnalyticResult& r, std::ostream& out, bool json);
void write_simulation(const ScenarioSpec& spec, const SimResult& r, std::ostream& out, bool json);

/// One oracle-vs-model comparison of the validate command.
struct ValidationCheck {
    std::string name;
    std::string detail;
    bool passed = false;
};

/// Runs every oracle cross-check. `quick` shortens the Monte-Carlo runs.
std::vector<ValidationCheck> run_validation(std::uint64_t seed, bool quick);

std::string format_number(double v);

}  // namespace ltearp
