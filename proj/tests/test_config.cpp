#include "doctest.h"

#include "ltearp/config.hpp"

#include <filesystem>
#include <fstream>

using namespace ltearp;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& text) {
    auto path = std::filesystem::temp_directory_path() / ("ltearp_test_" + name + ".yaml");
    std::ofstream(path) << text;
    return path;
}

std::string error_field(const std::string& text) {
    try {
        parse_scenario(text);
    } catch (const ValidationError& e) {
        return e.field();
    }
    return "";
}

}  // namespace

TEST_CASE("table defaults load from a minimal file") {
    const auto spec = load_scenario(write_temp("table", "bandwidth_mhz: 5\ndelta_rao: 5\nd: 54\nm: 9\n"));
    CHECK(spec.cell.bandwidth == Bandwidth::MHz5);
    CHECK(spec.cell.n_ulrb == 25);
    CHECK(spec.cell.n_dlrb == 25);
    CHECK(spec.cell.n_cce == 21);
    CHECK(spec.cell.d == 54);
    CHECK(spec.cell.delta_rao == 5);
    CHECK(spec.cell.m == 9);
    CHECK(spec.cell.w_c == 20);
    CHECK(spec.cell.t_rar == 10);
    CHECK(spec.cell.t_crt == 40);
    CHECK(spec.cell.proc_enb == 3);
    CHECK(spec.cell.proc_ue == 3);
}

TEST_CASE("an empty file yields the default scenario") {
    CHECK(load_scenario(write_temp("empty", "")) == ScenarioSpec{});
    CHECK(parse_scenario("{}") == ScenarioSpec{});
}

TEST_CASE("range and consistency violations name the field") {
    CHECK(error_field("delta_rao: 25\n") == "delta_rao");
    CHECK(error_field("delta_rao: 0\n") == "delta_rao");
    CHECK(error_field("d: 0\n") == "d");
    CHECK(error_field("t_rar: 50\n") == "t_rar");
    CHECK(error_field("bandwidth_mhz: 1.4\nn_cce: 21\n") == "n_cce");
    CHECK(error_field("bandwidth_mhz: 3\n") == "bandwidth_mhz");
    CHECK(error_field("lambda_i: 0\n") == "lambda_i");
    CHECK(error_field("b_data: -1\n") == "b_data");
    CHECK(error_field("limit_mask: []\n") == "limit_mask");
    CHECK(error_field("limit_mask: prach,pucch\n") == "limit_mask");
    CHECK(error_field("n_devices: 100\n") == "report_interval_s");
    CHECK(error_field("typo_key: 3\n") == "typo_key");
}

TEST_CASE("per-frame PUSCH capacity is rejected where it is not positive") {
    CHECK(error_field("bandwidth_mhz: 1.4\ndelta_rao: 5\n") == "pusch_capacity_mode");
    CHECK(error_field("bandwidth_mhz: 1.4\ndelta_rao: 5\npusch_capacity_mode: per_subframe\n").empty());
    CHECK(pusch_capacity(default_cell(Bandwidth::MHz5)) == doctest::Approx(13.0));
}

TEST_CASE("malformed files raise parse errors") {
    CHECK_THROWS_AS(parse_scenario("d: [1, 2\n"), ParseError);
    CHECK_THROWS_AS(parse_scenario("- 1\n- 2\n"), ParseError);
    CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.yaml"), ParseError);
}

TEST_CASE("default catalog matches the message size table") {
    const SignalingCatalog k;
    CHECK(k.b_rar == 8);
    CHECK(k.b_rb == 36);
    CHECK(k.b_req == 7);
    CHECK(k.b_conn == 38);
    CHECK(k.b_comp == 20);
    CHECK(k.b_r_dl == 118);
    CHECK(k.b_r_ul == 10);
    CHECK(k.b_s_cmd == 11);
    CHECK(k.b_s_comp == 13);
    CHECK(k.n_frag == 6);
}

TEST_CASE("pdcch capacity modes") {
    auto cell = default_cell(Bandwidth::MHz1_4);
    cell.pdcch_capacity_mode = PdcchCapacityMode::Format1Messages;
    CHECK(pdcch_capacity(cell) == 3);
    CHECK(pdcch_capacity(default_cell(Bandwidth::MHz5)) == 21);
    cell.n_cce = 0;
    CHECK(pdcch_capacity(cell) == 0);

    for (Bandwidth bw : {Bandwidth::MHz1_4, Bandwidth::MHz5, Bandwidth::MHz10, Bandwidth::MHz20})
        for (int n_cce = 0; n_cce <= 90; ++n_cce) {
            auto c = default_cell(bw);
            c.n_cce = n_cce;
            c.pdcch_capacity_mode = PdcchCapacityMode::RawCce;
            const int raw = pdcch_capacity(c);
            c.pdcch_capacity_mode = PdcchCapacityMode::Format1Messages;
            CHECK(pdcch_capacity(c) == raw / 2);
        }
}

TEST_CASE("device count derives the arrival rate") {
    const auto spec = parse_scenario("n_devices: 25000\nreport_interval_s: 10\n");
    CHECK(spec.traffic.lambda_i == doctest::Approx(2.5));
    CHECK(error_field("n_devices: 25000\nreport_interval_s: 10\nlambda_i: 1.0\n") == "lambda_i");
    CHECK(parse_scenario("rate_per_s: 700\n").traffic.lambda_i == doctest::Approx(0.7));
}

TEST_CASE("serialize then load round-trips") {
    for (const char* text :
         {"", "bandwidth_mhz: 1.4\npusch_capacity_mode: per_subframe\nmode: full\nb_data: 1000\nrate_per_s: 123.456\n",
          "name: ablation\nlimit_mask: [prach, pusch]\npdcch_capacity_mode: format1_messages\nm: 0\n",
          "bandwidth_mhz: 20\nn_devices: 7\nreport_interval_s: 3\n"}) {
        const auto a = parse_scenario(text);
        const auto b = parse_scenario(serialize_scenario(a));
        CHECK(a == b);
        CHECK(serialize_scenario(b) == serialize_scenario(a));
    }
}

TEST_CASE("limit mask parsing") {
    const auto m = LimitMask::parse("prach,pusch");
    CHECK(m.has(Channel::Prach));
    CHECK(m.has(Channel::Pusch));
    CHECK_FALSE(m.has(Channel::Pdcch));
    CHECK(LimitMask::parse(m.to_string()) == m);
    CHECK(LimitMask::parse("all") == LimitMask::all());
}
