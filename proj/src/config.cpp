#include "ltearp/config.hpp"

#include <yaml-cpp/yaml.h>

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace ltearp {

namespace {

constexpr std::array<std::string_view, 4> kChannelNames{"prach", "pdcch", "pdsch", "pusch"};

const std::set<std::string, std::less<>> kKnownKeys{
    "name",     "bandwidth_mhz", "n_ulrb",  "n_dlrb",   "n_cce",    "pdcch_capacity_mode",
    "pusch_capacity_mode",       "d",       "delta_rao", "m",       "w_c",
    "t_rar",    "t_crt",         "t_other", "proc_enb", "proc_ue",  "b_rar",
    "b_req",    "b_conn",        "b_comp",  "b_r_dl",   "b_r_ul",   "b_s_cmd",
    "b_s_comp", "b_rb",          "n_frag",  "mode",     "lambda_i", "rate_per_s",
    "b_data",   "n_devices",     "report_interval_s",   "limit_mask"};

std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), end);
}

template <typename T>
T scalar_as(const YAML::Node& node, const std::string& key) {
    if (!node.IsScalar()) throw ValidationError(key, "expected a scalar value");
    try {
        return node.as<T>();
    } catch (const YAML::Exception&) {
        throw ValidationError(key, "cannot interpret '" + node.Scalar() + "'");
    }
}

PdcchCapacityMode parse_pdcch_mode(const std::string& s) {
    if (s == "raw_cce") return PdcchCapacityMode::RawCce;
    if (s == "format1_messages") return PdcchCapacityMode::Format1Messages;
    throw ValidationError("pdcch_capacity_mode", "expected raw_cce or format1_messages, got '" + s + "'");
}

PuschCapacityMode parse_pusch_mode(const std::string& s) {
    if (s == "per_frame_verbatim") return PuschCapacityMode::PerFrameVerbatim;
    if (s == "per_subframe") return PuschCapacityMode::PerSubframe;
    throw ValidationError("pusch_capacity_mode",
                          "expected per_frame_verbatim or per_subframe, got '" + s + "'");
}

}  // namespace

LimitMask LimitMask::parse(std::string_view text) {
    LimitMask mask = none();
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t comma = text.find(',', pos);
        if (comma == std::string_view::npos) comma = text.size();
        std::string_view tok = text.substr(pos, comma - pos);
        while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
        while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
        if (tok == "all") {
            mask = all();
        } else if (!tok.empty()) {
            bool found = false;
            for (std::size_t i = 0; i < kChannelNames.size(); ++i) {
                if (tok == kChannelNames[i]) {
                    mask = mask.with(static_cast<Channel>(i));
                    found = true;
                }
            }
            if (!found) throw ValidationError("limit_mask", "unknown channel '" + std::string(tok) + "'");
        }
        pos = comma + 1;
    }
    return mask;
}

std::string LimitMask::to_string() const {
    std::string out;
    for (std::size_t i = 0; i < kChannelNames.size(); ++i) {
        if (!has(static_cast<Channel>(i))) continue;
        if (!out.empty()) out += ',';
        out += kChannelNames[i];
    }
    return out;
}

int cce_count(Bandwidth bw) {
    switch (bw) {
        case Bandwidth::MHz1_4: return 6;
        case Bandwidth::MHz5: return 21;
        case Bandwidth::MHz10: return 43;
        case Bandwidth::MHz20: return 87;
    }
    return 0;
}

int resource_blocks(Bandwidth bw) {
    switch (bw) {
        case Bandwidth::MHz1_4: return 6;
        case Bandwidth::MHz5: return 25;
        case Bandwidth::MHz10: return 50;
        case Bandwidth::MHz20: return 100;
    }
    return 0;
}

double bandwidth_mhz(Bandwidth bw) {
    switch (bw) {
        case Bandwidth::MHz1_4: return 1.4;
        case Bandwidth::MHz5: return 5.0;
        case Bandwidth::MHz10: return 10.0;
        case Bandwidth::MHz20: return 20.0;
    }
    return 0.0;
}

Bandwidth parse_bandwidth(double mhz) {
    if (std::abs(mhz - 1.4) < 1e-9) return Bandwidth::MHz1_4;
    if (mhz == 5.0) return Bandwidth::MHz5;
    if (mhz == 10.0) return Bandwidth::MHz10;
    if (mhz == 20.0) return Bandwidth::MHz20;
    throw ValidationError("bandwidth_mhz", "must be one of 1.4, 5, 10, 20; got " + format_double(mhz));
}

CellConfig default_cell(Bandwidth bw) {
    CellConfig cell;
    cell.bandwidth = bw;
    cell.n_ulrb = resource_blocks(bw);
    cell.n_dlrb = resource_blocks(bw);
    cell.n_cce = cce_count(bw);
    return cell;
}

int pdcch_capacity(const CellConfig& cell) {
    return cell.pdcch_capacity_mode == PdcchCapacityMode::RawCce ? cell.n_cce : cell.n_cce / 2;
}

double pusch_capacity(const CellConfig& cell) {
    const double prach_rbs = cell.pusch_capacity_mode == PuschCapacityMode::PerFrameVerbatim
                                 ? 6.0 * 10.0 / cell.delta_rao
                                 : 6.0 / cell.delta_rao;
    return cell.n_ulrb - prach_rbs;
}

void apply_derived_rate(TrafficConfig& traffic) {
    if (traffic.n_devices && traffic.report_interval_s)
        traffic.lambda_i = static_cast<double>(*traffic.n_devices) / (*traffic.report_interval_s * 1000.0);
}

void validate(const ScenarioSpec& spec) {
    const auto& c = spec.cell;
    auto positive = [](const char* field, long long v) {
        if (v <= 0) throw ValidationError(field, "must be positive, got " + std::to_string(v));
    };
    if (spec.name.empty()) throw ValidationError("name", "must not be empty");
    positive("n_ulrb", c.n_ulrb);
    positive("n_dlrb", c.n_dlrb);
    if (c.n_cce != cce_count(c.bandwidth))
        throw ValidationError("n_cce", "must be " + std::to_string(cce_count(c.bandwidth)) +
                                           " for this bandwidth at CFI 3, got " + std::to_string(c.n_cce));
    positive("d", c.d);
    if (c.delta_rao < 1 || c.delta_rao > 20)
        throw ValidationError("delta_rao", "must lie in [1, 20], got " + std::to_string(c.delta_rao));
    if (c.m < 0) throw ValidationError("m", "must be non-negative, got " + std::to_string(c.m));
    positive("w_c", c.w_c);
    positive("t_rar", c.t_rar);
    positive("t_crt", c.t_crt);
    positive("t_other", c.t_other);
    if (c.t_rar > c.t_crt) throw ValidationError("t_rar", "must not exceed t_crt");
    if (c.proc_enb < 0) throw ValidationError("proc_enb", "must be non-negative");
    if (c.proc_ue < 0) throw ValidationError("proc_ue", "must be non-negative");
    if (pdcch_capacity(c) <= 0) throw ValidationError("pdcch_capacity_mode", "PDCCH capacity is zero");
    const double mu_pusch = pusch_capacity(c);
    const int t_d = std::min(c.t_crt, c.t_other);
    if (mu_pusch * t_d < 1.0)
        throw ValidationError("pusch_capacity_mode",
                              "PUSCH capacity " + format_double(mu_pusch) + " RB/subframe is not positive enough for delta_rao=" +
                                  std::to_string(c.delta_rao));

    const auto& k = spec.catalog;
    positive("b_rar", k.b_rar);
    positive("b_req", k.b_req);
    positive("b_conn", k.b_conn);
    positive("b_comp", k.b_comp);
    positive("b_r_dl", k.b_r_dl);
    positive("b_r_ul", k.b_r_ul);
    positive("b_s_cmd", k.b_s_cmd);
    positive("b_s_comp", k.b_s_comp);
    positive("b_rb", k.b_rb);
    positive("n_frag", k.n_frag);

    const auto& t = spec.traffic;
    if (!(t.lambda_i > 0.0) || !std::isfinite(t.lambda_i))
        throw ValidationError("lambda_i", "must be a positive finite rate");
    positive("b_data", t.b_data);
    if (t.n_devices.has_value() != t.report_interval_s.has_value())
        throw ValidationError(t.n_devices ? "report_interval_s" : "n_devices",
                              "n_devices and report_interval_s must be given together");
    if (t.n_devices) {
        positive("n_devices", *t.n_devices);
        if (!(*t.report_interval_s > 0.0)) throw ValidationError("report_interval_s", "must be positive");
        const double derived = static_cast<double>(*t.n_devices) / (*t.report_interval_s * 1000.0);
        if (std::abs(derived - t.lambda_i) > 1e-12 * derived)
            throw ValidationError("lambda_i", "inconsistent with n_devices / report_interval_s");
    }
    if (spec.limit_mask.empty()) throw ValidationError("limit_mask", "must enable at least one channel");
}

ScenarioSpec parse_scenario(std::string_view text) {
    YAML::Node root;
    try {
        root = YAML::Load(std::string(text));
    } catch (const YAML::Exception& e) {
        throw ParseError(std::string("malformed scenario: ") + e.what());
    }
    ScenarioSpec spec;
    if (root.IsNull()) {
        validate(spec);
        return spec;
    }
    if (!root.IsMap()) throw ParseError("scenario must be a key: value mapping");

    for (const auto& kv : root) {
        const auto key = kv.first.as<std::string>();
        if (!kKnownKeys.contains(key)) throw ValidationError(key, "unknown key");
    }
    auto get = [&](const char* key) -> std::optional<YAML::Node> {
        if (auto n = root[key]) return n;
        return std::nullopt;
    };

    if (auto n = get("bandwidth_mhz")) spec.cell = default_cell(parse_bandwidth(scalar_as<double>(*n, "bandwidth_mhz")));
    auto& c = spec.cell;
    if (auto n = get("name")) spec.name = scalar_as<std::string>(*n, "name");
    if (auto n = get("n_ulrb")) c.n_ulrb = scalar_as<int>(*n, "n_ulrb");
    if (auto n = get("n_dlrb")) c.n_dlrb = scalar_as<int>(*n, "n_dlrb");
    if (auto n = get("n_cce")) c.n_cce = scalar_as<int>(*n, "n_cce");
    if (auto n = get("pdcch_capacity_mode")) c.pdcch_capacity_mode = parse_pdcch_mode(scalar_as<std::string>(*n, "pdcch_capacity_mode"));
    if (auto n = get("pusch_capacity_mode")) c.pusch_capacity_mode = parse_pusch_mode(scalar_as<std::string>(*n, "pusch_capacity_mode"));
    if (auto n = get("d")) c.d = scalar_as<int>(*n, "d");
    if (auto n = get("delta_rao")) c.delta_rao = scalar_as<int>(*n, "delta_rao");
    if (auto n = get("m")) c.m = scalar_as<int>(*n, "m");
    if (auto n = get("w_c")) c.w_c = scalar_as<int>(*n, "w_c");
    if (auto n = get("t_rar")) c.t_rar = scalar_as<int>(*n, "t_rar");
    if (auto n = get("t_crt")) c.t_crt = scalar_as<int>(*n, "t_crt");
    if (auto n = get("t_other")) c.t_other = scalar_as<int>(*n, "t_other");
    if (auto n = get("proc_enb")) c.proc_enb = scalar_as<int>(*n, "proc_enb");
    if (auto n = get("proc_ue")) c.proc_ue = scalar_as<int>(*n, "proc_ue");

    auto& k = spec.catalog;
    if (auto n = get("b_rar")) k.b_rar = scalar_as<int>(*n, "b_rar");
    if (auto n = get("b_req")) k.b_req = scalar_as<int>(*n, "b_req");
    if (auto n = get("b_conn")) k.b_conn = scalar_as<int>(*n, "b_conn");
    if (auto n = get("b_comp")) k.b_comp = scalar_as<int>(*n, "b_comp");
    if (auto n = get("b_r_dl")) k.b_r_dl = scalar_as<int>(*n, "b_r_dl");
    if (auto n = get("b_r_ul")) k.b_r_ul = scalar_as<int>(*n, "b_r_ul");
    if (auto n = get("b_s_cmd")) k.b_s_cmd = scalar_as<int>(*n, "b_s_cmd");
    if (auto n = get("b_s_comp")) k.b_s_comp = scalar_as<int>(*n, "b_s_comp");
    if (auto n = get("b_rb")) k.b_rb = scalar_as<int>(*n, "b_rb");
    if (auto n = get("n_frag")) k.n_frag = scalar_as<int>(*n, "n_frag");
    if (auto n = get("mode")) k.mode = parse_signaling_mode(scalar_as<std::string>(*n, "mode"));

    auto& t = spec.traffic;
    if (get("lambda_i") && get("rate_per_s")) throw ValidationError("rate_per_s", "give either lambda_i or rate_per_s");
    if (auto n = get("lambda_i")) t.lambda_i = scalar_as<double>(*n, "lambda_i");
    if (auto n = get("rate_per_s")) t.lambda_i = scalar_as<double>(*n, "rate_per_s") / 1000.0;
    if (auto n = get("b_data")) t.b_data = scalar_as<int>(*n, "b_data");
    if (auto n = get("n_devices")) t.n_devices = scalar_as<std::int64_t>(*n, "n_devices");
    if (auto n = get("report_interval_s")) t.report_interval_s = scalar_as<double>(*n, "report_interval_s");
    if (t.n_devices && t.report_interval_s && !get("lambda_i") && !get("rate_per_s")) apply_derived_rate(t);

    if (auto n = get("limit_mask")) {
        if (n->IsSequence()) {
            std::string joined;
            for (const auto& item : *n) joined += scalar_as<std::string>(item, "limit_mask") + ",";
            spec.limit_mask = LimitMask::parse(joined);
        } else {
            spec.limit_mask = LimitMask::parse(scalar_as<std::string>(*n, "limit_mask"));
        }
    }

    validate(spec);
    return spec;
}

ScenarioSpec load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open scenario file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

std::string serialize_scenario(const ScenarioSpec& spec) {
    const auto& c = spec.cell;
    const auto& k = spec.catalog;
    const auto& t = spec.traffic;
    std::ostringstream out;
    out << "name: \"" << spec.name << "\"\n";
    out << "bandwidth_mhz: " << format_double(bandwidth_mhz(c.bandwidth)) << "\n";
    out << "n_ulrb: " << c.n_ulrb << "\n";
    out << "n_dlrb: " << c.n_dlrb << "\n";
    out << "n_cce: " << c.n_cce << "\n";
    out << "pdcch_capacity_mode: " << to_string(c.pdcch_capacity_mode) << "\n";
    out << "pusch_capacity_mode: " << to_string(c.pusch_capacity_mode) << "\n";
    out << "d: " << c.d << "\n";
    out << "delta_rao: " << c.delta_rao << "\n";
    out << "m: " << c.m << "\n";
    out << "w_c: " << c.w_c << "\n";
    out << "t_rar: " << c.t_rar << "\n";
    out << "t_crt: " << c.t_crt << "\n";
    out << "t_other: " << c.t_other << "\n";
    out << "proc_enb: " << c.proc_enb << "\n";
    out << "proc_ue: " << c.proc_ue << "\n";
    out << "b_rar: " << k.b_rar << "\n";
    out << "b_req: " << k.b_req << "\n";
    out << "b_conn: " << k.b_conn << "\n";
    out << "b_comp: " << k.b_comp << "\n";
    out << "b_r_dl: " << k.b_r_dl << "\n";
    out << "b_r_ul: " << k.b_r_ul << "\n";
    out << "b_s_cmd: " << k.b_s_cmd << "\n";
    out << "b_s_comp: " << k.b_s_comp << "\n";
    out << "b_rb: " << k.b_rb << "\n";
    out << "n_frag: " << k.n_frag << "\n";
    out << "mode: " << to_string(k.mode) << "\n";
    out << "lambda_i: " << format_double(t.lambda_i) << "\n";
    out << "b_data: " << t.b_data << "\n";
    if (t.n_devices) out << "n_devices: " << *t.n_devices << "\n";
    if (t.report_interval_s) out << "report_interval_s: " << format_double(*t.report_interval_s) << "\n";
    out << "limit_mask: \"" << spec.limit_mask.to_string() << "\"\n";
    return out.str();
}

std::string_view to_string(PdcchCapacityMode m) {
    return m == PdcchCapacityMode::RawCce ? "raw_cce" : "format1_messages";
}

std::string_view to_string(PuschCapacityMode m) {
    return m == PuschCapacityMode::PerFrameVerbatim ? "per_frame_verbatim" : "per_subframe";
}

std::string_view to_string(SignalingMode m) { return m == SignalingMode::Short ? "short" : "full"; }

std::string_view to_string(Channel c) { return kChannelNames[static_cast<std::size_t>(c)]; }

SignalingMode parse_signaling_mode(std::string_view text) {
    if (text == "short") return SignalingMode::Short;
    if (text == "full") return SignalingMode::Full;
    throw ValidationError("mode", "expected short or full, got '" + std::string(text) + "'");
}

}  // namespace ltearp
