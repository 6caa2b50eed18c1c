#include <cstdlib>
#include <sstream>

#include "doctest.h"
#include "kloosterlab/characters.hpp"
#include "kloosterlab/experiments.hpp"
#include "kloosterlab/hecke.hpp"
#include "kloosterlab/moments.hpp"

using namespace kloosterlab;

namespace {

std::string csv_of(const ReportTable& t) {
    std::ostringstream out;
    write_csv(t, out);
    return out.str();
}

std::string jsonl_of(const ReportTable& t) {
    std::ostringstream out;
    write_jsonl(t, out);
    return out.str();
}

ConfigError config_error(const std::string& text) {
    try {
        parse_config(text, "cfg.json", false);
    } catch (const ConfigError& e) {
        return e;
    }
    FAIL("no ConfigError");
    return ConfigError("", 0, "", "");
}

ConfigError run_error(const std::string& text) {
    try {
        run_experiment(parse_config(text, "cfg.json", false));
    } catch (const ConfigError& e) {
        return e;
    }
    FAIL("no ConfigError");
    return ConfigError("", 0, "", "");
}

} // namespace

TEST_CASE("config parsing and diagnostics") {
    auto cfg = parse_config(R"({
        // comments are allowed
        "experiment": "jutila", "seed": 17,
        "params": {"Q": [20, 50]},
        "quick": {"Q": [20]}
    })", "x.json", false);
    CHECK(cfg.experiment == "jutila");
    CHECK(cfg.seed == 17);
    CHECK(cfg.params["Q"].size() == 2);
    CHECK(parse_config(cfg.text, "x.json", true).params["Q"].size() == 1);

    auto bad_json = config_error("{\n  \"experiment\": \"jutila\",\n  \"seed\": 1,\n}\n");
    CHECK(bad_json.line() == 4);
    CHECK(std::string(bad_json.what()).find("cfg.json:4") == 0);

    auto unknown = config_error("{\n  \"experiment\": \"nope\"\n}");
    CHECK(unknown.field() == "experiment");
    CHECK(unknown.line() == 2);
    CHECK(config_error("{\"experiment\": \"jutila\", \"seeds\": 1}").field() == "seeds");
    CHECK(config_error("{\"experiment\": \"jutila\", \"seed\": -3}").field() == "seed");
    CHECK(config_error("{\"seed\": 3}").field() == "experiment");
    CHECK(config_error("[1, 2]").line() == 1);

    // parameter problems surface from the runner, before any work
    auto typo = run_error("{\"experiment\": \"jutila\",\n \"params\": {\n  \"Qs\": [20]\n }\n}");
    CHECK(typo.field() == "params.Qs");
    CHECK(typo.line() == 3);
    CHECK(run_error(R"({"experiment": "jutila", "params": {"Q": "many"}})").field() == "params.Q");
    CHECK(run_error(R"({"experiment": "moment", "params": {"moduli": [6]}})").field() == "params.moduli");
    CHECK(run_error(R"({"experiment": "moment", "params": {"weights": [[12, 14]]}})").field() == "params.weights");
    CHECK(run_error(R"({"experiment": "kloosterman-audit", "params": {"primes": [9]}})").field() == "params.primes");
    CHECK(run_error(R"({"experiment": "shifted-convolution", "params": {"average_N": 1000}})").field() ==
          "params.average_N");
}

TEST_CASE("report formats") {
    ReportTable t;
    t.experiment = "demo";
    t.columns = {"name", "n", "x"};
    CHECK(csv_of(t) == "# kloosterlab-report v1 demo\nname,n,x\n");
    CHECK(jsonl_of(t) ==
          "{\"schema\":\"kloosterlab-report\",\"version\":1,\"experiment\":\"demo\",\"columns\":[\"name\",\"n\",\"x\"]}\n");
    t.add({std::string("a"), i64(-3), 1.0 / 3});
    t.add({std::string("b"), i64(7), 2.5e-17});
    t.add({std::string("c"), i64(0), NAN});
    t.add({std::string("d"), i64(1), 3.0});
    CHECK_THROWS_AS(t.add({i64(1)}), std::logic_error);
    CHECK(format_cell(1.0 / 3) == "0.333333333333");
    CHECK(format_cell(123456789012345.0) == "1.23456789012e+14");
    const std::string csv = csv_of(t);
    CHECK(csv.find("a,-3,0.333333333333\n") != std::string::npos);
    CHECK(csv.find("c,0,nan\n") != std::string::npos);
    const std::string jl = jsonl_of(t);
    CHECK(jl.find("{\"name\":\"a\",\"n\":-3,\"x\":0.333333333333}\n") != std::string::npos);
    CHECK(jl.find("\"x\":\"nan\"") != std::string::npos);

    // csv and jsonl convert into each other without changing a byte
    std::istringstream in_csv(csv), in_jl(jl);
    auto from_csv = read_csv(in_csv);
    auto from_jl = read_jsonl(in_jl);
    CHECK(csv_of(from_csv) == csv);
    CHECK(jsonl_of(from_csv) == jl);
    CHECK(csv_of(from_jl) == csv);
    CHECK(from_csv.rows.size() == 4);

    std::istringstream junk("hello\n");
    CHECK_THROWS_AS(read_csv(junk), std::runtime_error);
    std::istringstream ragged("# kloosterlab-report v1 demo\na,b\n1\n");
    CHECK_THROWS_AS(read_csv(ragged), std::runtime_error);
    ReportTable sep;
    sep.experiment = "demo";
    sep.columns = {"s"};
    sep.add({std::string("x,y")});
    CHECK_THROWS_AS(csv_of(sep), std::invalid_argument);
}

TEST_CASE("explicit evaluation audit and determinism") {
    auto cfg = parse_config(R"({"experiment": "kloosterman-audit", "seed": 11,
        "params": {"primes": [5, 7], "exponents": [2, 3], "draws": 250, "gauss_primes": [], "weil_draws": 100}})",
                            "k.json", false);
    setenv("KLOOSTERLAB_WORKERS", "1", 1);
    auto a = run_experiment(cfg);
    setenv("KLOOSTERLAB_WORKERS", "3", 1);
    auto b = run_experiment(cfg);
    unsetenv("KLOOSTERLAB_WORKERS");
    CHECK(a.table.rows.size() == 1100);
    CHECK(a.failures.empty());
    CHECK(csv_of(a.table) == csv_of(b.table));
    CHECK(jsonl_of(a.table) == jsonl_of(b.table));
    CHECK(summarize(cfg, a).dump() == summarize(cfg, b).dump());
    REQUIRE(a.table.columns[8] == "residual");
    for (auto& row : a.table.rows) {
        if (std::get<std::string>(row[0]) == "explicit") CHECK(std::get<double>(row[8]) < 1e-8);
    }
    // a different seed draws different parameters
    cfg.seed = 12;
    CHECK(csv_of(run_experiment(cfg).table) != csv_of(a.table));
    auto s = summarize(cfg, a);
    CHECK(s["families"]["weil"]["count"] == 100);
    CHECK(s["hard_failures"] == 0);
}

TEST_CASE("empty sweep gives a header-only report") {
    auto cfg = parse_config(R"({"experiment": "jutila", "params": {"Q": []}})", "j.json", false);
    auto r = run_experiment(cfg);
    CHECK(r.table.rows.empty());
    CHECK(csv_of(r.table) ==
          "# kloosterlab-report v1 jutila\nQ,delta_exponent,delta,Lambda,mass,l2_error,bound,ratio,mass_residual,pass\n");
}

TEST_CASE("moment with q = 4 is a single character") {
    auto cfg = parse_config(R"({"experiment": "moment", "params": {"moduli": [4], "naive_moduli": []}})", "m.json", false);
    auto r = run_experiment(cfg);
    REQUIRE(r.table.rows.size() == 1);
    const auto& row = r.table.rows[0];
    CHECK(std::get<i64>(row[4]) == 1);  // psi
    auto f = newform(12, 1000);
    auto chars = CharacterGroup::create(4)->primitive_characters();
    REQUIRE(chars.size() == 1);
    CHECK(std::get<double>(row[5]) == doctest::Approx(std::norm(twisted_central_value(*f, chars[0]))).epsilon(1e-9));
    CHECK(r.failures.empty());
}
