#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include <json.hpp>

#include "trihedge/cli.hpp"
#include "trihedge/errors.hpp"

using namespace trihedge;
using nlohmann::json;

namespace {

json minimal_config() {
    return json{{"model", {{"p", 0.5}, {"sigma_bar", 0.2}, {"s0", 1.0}, {"ell", 1.0}, {"n", 10}}},
                {"payoff",
                 {{"kind", "markovian"},
                  {"name", "log_affine"},
                  {"params", {{"alpha", 0.0}, {"beta", 1.0}}}}}};
}

} // namespace

TEST_CASE("minimal config parses with defaults") {
    const auto config = cli::parse_config(minimal_config());
    CHECK(config.model.p == 0.5);
    CHECK(config.model.n == 10);
    CHECK(config.payoff.name() == "log_affine");
    CHECK(config.seed == 0);
    CHECK(config.format == "csv");
    CHECK(config.lattice_cap == 600);
    CHECK(config.pde.dy == 0.005);
}

TEST_CASE("unknown keys are rejected at every level") {
    auto doc = minimal_config();
    doc["bogus"] = 1;
    CHECK_THROWS_AS(cli::parse_config(doc), ConfigError);

    doc = minimal_config();
    doc["model"]["drift"] = 0.1;
    CHECK_THROWS_AS(cli::parse_config(doc), ConfigError);

    doc = minimal_config();
    doc["payoff"]["extra"] = 1;
    CHECK_THROWS_AS(cli::parse_config(doc), ConfigError);

    doc = minimal_config();
    doc["payoff"]["params"]["gamma"] = 1.0;
    CHECK_THROWS_AS(cli::parse_config(doc), ConfigError);

    doc = minimal_config();
    doc["pde"] = {{"dz", 0.01}};
    CHECK_THROWS_AS(cli::parse_config(doc), ConfigError);

    doc = minimal_config();
    doc["mc"] = {{"path", 100}};
    CHECK_THROWS_AS(cli::parse_config(doc), ConfigError);

    doc = minimal_config();
    doc["policy"] = {{"psi", 1}};
    CHECK_THROWS_AS(cli::parse_config(doc), ConfigError);
}

TEST_CASE("model preconditions surface as config-time errors") {
    auto doc = minimal_config();
    doc["model"]["p"] = 1.5;
    CHECK_THROWS_AS(cli::parse_config(doc), InputError);

    doc = minimal_config();
    doc["model"]["n"] = 0;
    CHECK_THROWS_AS(cli::parse_config(doc), InputError);

    doc = minimal_config();
    doc["model"].erase("ell");
    CHECK_THROWS_AS(cli::parse_config(doc), ConfigError);

    doc = minimal_config();
    doc["format"] = "xml";
    CHECK_THROWS_AS(cli::parse_config(doc), ConfigError);

    doc = minimal_config();
    doc["version"] = 2;
    CHECK_THROWS_AS(cli::parse_config(doc), ConfigError);
}

TEST_CASE("policy blocks validate ranges against the model") {
    auto doc = minimal_config();
    doc["policy"] = {{"phi", {{"type", "constant"}, {"value", 1.2}}}};
    CHECK_THROWS_AS(cli::parse_config(doc), ConfigError);

    doc = minimal_config();
    doc["policy"] = {{"alpha", {{"type", "constant"}, {"value", 0.5}}}}; // > sigma_bar
    CHECK_THROWS_AS(cli::parse_config(doc), ConfigError);

    doc = minimal_config();
    doc["policy"] = {{"alpha",
                      {{"type", "piecewise"},
                       {"times", {0.0, 0.5, 1.0}},
                       {"values", {0.1, 0.15}}}},
                     {"phi", {{"type", "qstar"}}}};
    const auto config = cli::parse_config(doc);
    CHECK(config.alpha_policy.type == "piecewise");
    CHECK(config.phi_policy.type == "qstar");

    doc = minimal_config();
    doc["policy"] = {{"alpha",
                      {{"type", "piecewise"},
                       {"times", {0.0, 0.7, 0.4, 1.0}},
                       {"values", {0.1, 0.1, 0.1}}}}};
    CHECK_THROWS_AS(cli::parse_config(doc), InputError);
}

TEST_CASE("payoff serialization uses the fixed field names") {
    const Payoff payoff = Payoff::smoothed_call(1.25, 0.3);
    const json j = cli::payoff_to_json(payoff);
    CHECK(j.at("kind") == "markovian");
    CHECK(j.at("name") == "smoothed_call");
    CHECK(j.at("params").at("strike") == 1.25);
    CHECK(j.at("params").at("width") == 0.3);
    CHECK(j.at("growth").contains("C"));
    CHECK(j.at("growth").contains("r"));

    const Payoff back = cli::payoff_from_json(j);
    CHECK(back.name() == payoff.name());
    CHECK(back(1.17) == payoff(1.17));
    CHECK(back.growth().C == payoff.growth().C);

    // growth override sticks
    json custom = j;
    custom["growth"] = {{"C", 9.0}, {"r", 2.0}};
    CHECK(cli::payoff_from_json(custom).growth().C == 9.0);

    const json path = {{"kind", "path"}, {"name", "lookback_max"}};
    CHECK_FALSE(cli::payoff_from_json(path).markovian());
    CHECK_THROWS_AS(cli::payoff_from_json(json{{"kind", "markovian"}, {"name", "nope"}}),
                    ConfigError);
}

TEST_CASE("run records summarize checks") {
    cli::RunRecord record;
    record.command = "price";
    record.outputs = {{"ce_primal", 1.0}};
    record.checks.push_back({"a", true, 0.0, 1.0});
    CHECK(record.checks_pass());
    record.checks.push_back({"b", false, 2.0, 1.0});
    CHECK_FALSE(record.checks_pass());
    const json j = record.to_json();
    CHECK(j.at("command") == "price");
    CHECK(j.at("outputs").at("ce_primal") == 1.0);
    CHECK(j.at("checks").size() == 2);
    CHECK(j.at("artifact_version") == cli::kArtifactVersion);
}

TEST_CASE("cmd_price: certainty equivalent sweeps monotone in p for convex payoffs") {
    // in-process command runs against a convex payoff at increasing p
    double prev = -1e300;
    for (double p : {0.2, 0.4, 0.6, 0.8}) {
        json doc = minimal_config();
        doc["model"]["p"] = p;
        doc["payoff"] = {{"kind", "markovian"}, {"name", "power"}, {"params", {{"exponent", 2.0}}}};
        doc["out"] = (std::filesystem::temp_directory_path() / "trihedge_sweep").string();
        const auto record = cli::cmd_price(cli::parse_config(doc));
        CHECK(record.checks_pass());
        const double ce = record.outputs.front().second; // ce_primal
        CHECK(ce >= prev - 1e-12);
        prev = ce;
    }
}
