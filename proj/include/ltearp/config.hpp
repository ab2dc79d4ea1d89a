#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ltearp {

/// Thrown for configuration values that violate a type invariant. `field()`
/// names the offending scenario key.
class ValidationError : public std::runtime_error {
public:
    ValidationError(std::string field, const std::string& what)
        : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Thrown when a scenario file cannot be read or is not well-formed.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Bandwidth { MHz1_4, MHz5, MHz10, MHz20 };

enum class PdcchCapacityMode {
    RawCce,          // one CCE per PDCCH message
    Format1Messages  // format 1 consumes two CCEs
};

enum class PuschCapacityMode {
    PerFrameVerbatim,  // N_ULRB - 6 * 10 / delta_rao
    PerSubframe        // N_ULRB - 6 / delta_rao
};

enum class SignalingMode { Short, Full };

enum class Channel { Prach, Pdcch, Pdsch, Pusch };

/// Set of bottlenecks that are modeled. A disabled channel has zero loss in
/// the analytic model and unbounded capacity in simulation.
class LimitMask {
public:
    static constexpr LimitMask all() { return LimitMask{0b1111}; }
    static constexpr LimitMask none() { return LimitMask{0}; }

    constexpr bool has(Channel c) const { return bits_ & bit(c); }
    constexpr LimitMask with(Channel c) const { return LimitMask(bits_ | bit(c)); }
    constexpr bool empty() const { return bits_ == 0; }
    constexpr bool operator==(const LimitMask&) const = default;

    /// Comma separated channel names, e.g. "prach,pusch".
    static LimitMask parse(std::string_view text);
    std::string to_string() const;

private:
    constexpr explicit LimitMask(std::uint8_t bits) : bits_(bits) {}
    static constexpr std::uint8_t bit(Channel c) { return std::uint8_t(1u << static_cast<int>(c)); }
    std::uint8_t bits_;
};

/// Radio resources of one cell. All timers are in subframes (1 ms).
struct CellConfig {
    Bandwidth bandwidth = Bandwidth::MHz5;
    int n_ulrb = 25;
    int n_dlrb = 25;
    int n_cce = 21;  // CFI = 3
    PdcchCapacityMode pdcch_capacity_mode = PdcchCapacityMode::RawCce;
    PuschCapacityMode pusch_capacity_mode = PuschCapacityMode::PerFrameVerbatim;
    int d = 54;
    int delta_rao = 5;
    int m = 9;
    int w_c = 20;
    int t_rar = 10;
    int t_crt = 40;
    int t_other = 40;
    int proc_enb = 3;
    int proc_ue = 3;

    bool operator==(const CellConfig&) const = default;
};

/// Message sizes (bytes) of the connection establishment exchange.
struct SignalingCatalog {
    int b_rar = 8;
    int b_req = 7;
    int b_conn = 38;
    int b_comp = 20;
    int b_r_dl = 118;
    int b_r_ul = 10;
    int b_s_cmd = 11;
    int b_s_comp = 13;
    int b_rb = 36;
    int n_frag = 6;
    SignalingMode mode = SignalingMode::Short;

    bool operator==(const SignalingCatalog&) const = default;
};

struct TrafficConfig {
    double lambda_i = 1.0;  // new messages per subframe
    int b_data = 100;
    std::optional<std::int64_t> n_devices;
    std::optional<double> report_interval_s;

    bool operator==(const TrafficConfig&) const = default;
};

struct ScenarioSpec {
    std::string name = "default";
    CellConfig cell;
    SignalingCatalog catalog;
    TrafficConfig traffic;
    LimitMask limit_mask = LimitMask::all();

    bool operator==(const ScenarioSpec&) const = default;
};

// Number of CCEs per subframe at CFI = 3.
int cce_count(Bandwidth bw);
// Uplink/downlink resource blocks per subframe.
int resource_blocks(Bandwidth bw);
double bandwidth_mhz(Bandwidth bw);
Bandwidth parse_bandwidth(double mhz);

/// Cell defaults for a bandwidth: RB and CCE counts follow the bandwidth,
/// everything else is the 5 MHz reference configuration.
CellConfig default_cell(Bandwidth bw);

/// PDCCH messages that fit in one subframe.
int pdcch_capacity(const CellConfig& cell);

/// Mean PUSCH RBs per subframe left for signaling and data after PRACH.
double pusch_capacity(const CellConfig& cell);

/// Throws ValidationError naming the first field that breaks an invariant.
void validate(const ScenarioSpec& spec);

/// Derives lambda_i from n_devices/report_interval_s when both are present.
void apply_derived_rate(TrafficConfig& traffic);

ScenarioSpec load_scenario(const std::filesystem::path& path);
ScenarioSpec parse_scenario(std::string_view text);
std::string serialize_scenario(const ScenarioSpec& spec);

std::string_view to_string(PdcchCapacityMode m);
std::string_view to_string(PuschCapacityMode m);
std::string_view to_string(SignalingMode m);
std::string_view to_string(Channel c);

SignalingMode parse_signaling_mode(std::string_view text);

}  // namespace ltearp
