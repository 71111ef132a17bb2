#include <doctest.h>

#include <fstream>

#include "fixtures.hpp"
#include "gal/config.hpp"
#include "gal/toml_lite.hpp"

using namespace gal;

TEST_CASE("toml scalars, tables and arrays") {
    const auto j = parse_toml(R"(
# comment
m = 10
lambda = 0.005
name = "a \"quoted\" name"  # trailing comment
raw = 'C:\path'
flag = true
big = 18446744073709551615
neg = -3
exp = 1e-3

[soi]
pseudo_token = "S*"

[backend]
kind = "simulated"
sigma = 0.05

[backend.extra]
x = 1

anchors = [
  "{SOI} in park",   # one
  "{SOI} on street",
]
point = { x = 1, y = [1, 2] }
dotted.key = "v"
)");
    CHECK(j["m"] == 10);
    CHECK(j["lambda"].get<double>() == 0.005);
    CHECK(j["name"] == "a \"quoted\" name");
    CHECK(j["raw"] == "C:\\path");
    CHECK(j["flag"] == true);
    CHECK(j["big"].get<std::uint64_t>() == 18446744073709551615ULL);
    CHECK(j["neg"] == -3);
    CHECK(j["exp"].get<double>() == 0.001);
    CHECK(j["soi"]["pseudo_token"] == "S*");
    CHECK(j["backend"]["sigma"].get<double>() == 0.05);
    CHECK(j["backend"]["extra"]["anchors"].size() == 2);
    CHECK(j["backend"]["extra"]["point"]["y"][1] == 2);
    CHECK(j["backend"]["extra"]["dotted"]["key"] == "v");
}

TEST_CASE("toml errors carry line numbers") {
    try {
        parse_toml("a = 1\nb = \n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_toml("a = 1\na = 2\n"), ConfigError);
    CHECK_THROWS_AS(parse_toml("a = \"unterminated\n"), ConfigError);
    CHECK_THROWS_AS(parse_toml("[t\n"), ConfigError);
}

TEST_CASE("config json round trip") {
    auto c = default_simulated_config();
    c.eval_prompts = {"a photo of {SOI}"};
    c.master_seed = 42;
    c.backend.simulated.g_init = 0.3;
    c.metrics_on = MetricsSource::Anchors;
    const auto back = config_from_json(to_json(c));
    CHECK(to_json(back).dump() == to_json(c).dump());
    CHECK(back.backend.simulated.g_init == 0.3);
}

TEST_CASE("config rejects unknown keys and bad values") {
    auto j = to_json(default_simulated_config());
    j["lamda"] = 0.1;
    CHECK_THROWS_AS(config_from_json(j), ConfigError);

    auto c = default_simulated_config();
    c.anchors.clear();
    CHECK_THROWS_AS(c.validate(), ConfigError);

    c = default_simulated_config();
    c.k = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);

    c = default_simulated_config();
    c.max_rounds = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);

    c = default_simulated_config();
    c.anchors.push_back("no placeholder");
    CHECK_THROWS_AS(c.validate(), ConfigError);

    c = default_simulated_config();
    c.metrics_on = MetricsSource::Eval;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("config hash ignores run_dir") {
    auto a = default_simulated_config();
    auto b = a;
    a.run_dir = "/tmp/one";
    b.run_dir = "/tmp/two";
    CHECK(config_hash(a) == config_hash(b));
    b.lambda = 0.01;
    CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("load_config_file reads TOML and JSON") {
    fixtures::TempDir dir;
    {
        std::ofstream out(dir / "run.toml");
        out << "m = 4\nk = 2\nmax_rounds = 3\nreferences = [\"ref/a.png\"]\n"
               "anchors = [\"{SOI} in park\", \"{SOI} on street\", \"{SOI} in desert\"]\n"
               "[soi]\nnon_soi_text = \"a dog\"\nreference_caption_template = \"a photo of a dog {SOI}\"\n"
               "[backend]\nkind = \"simulated\"\ng_init = 0.3\n";
    }
    const auto c = load_config_file(dir / "run.toml");
    CHECK(c.m == 4);
    CHECK(c.k == 2);
    CHECK(c.anchors.size() == 3);
    CHECK(c.backend.simulated.g_init == 0.3);
    CHECK_NOTHROW(c.validate());

    {
        std::ofstream out(dir / "run.json");
        out << to_json(c).dump();
    }
    CHECK(config_hash(load_config_file(dir / "run.json")) == config_hash(c));
    CHECK_THROWS_AS(load_config_file(dir / "missing.toml"), ConfigError);
}

TEST_CASE("master_seed accepts strings") {
    auto j = to_json(default_simulated_config());
    j["master_seed"] = "18446744073709551615";
    CHECK(config_from_json(j).master_seed == 18446744073709551615ULL);
    j["master_seed"] = -1;
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
}

TEST_CASE("remote backend config") {
    auto j = to_json(default_simulated_config());
    j["backend"] = {{"kind", "remote"}, {"endpoint", "http://localhost:9000"}};
    const auto c = config_from_json(j);
    CHECK(c.backend.kind == BackendKind::Remote);
    CHECK(c.backend.remote.max_attempts == 3);
}
