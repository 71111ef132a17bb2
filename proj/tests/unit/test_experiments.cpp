#include <doctest.h>

#include <algorithm>

#include "fixtures.hpp"
#include "gal/experiments.hpp"

using namespace gal;
using namespace gal::experiments;

namespace {
long lines(const std::string& s) { return std::count(s.begin(), s.end(), '\n'); }
}  // namespace

TEST_CASE("variant names") {
    CHECK(parse_variant("random").label() == "random");
    CHECK(parse_variant("uncertainty+balance").balance);
    CHECK(parse_variant("random+balance").kind == strategy::StrategyKind::Random);
    CHECK_THROWS_AS(parse_variant("human"), ConfigError);
    CHECK_THROWS_AS(parse_variant("+balance"), ConfigError);
}

TEST_CASE("comparison table shape") {
    fixtures::TempDir dir;
    auto base = fixtures::sim_config(dir / "base");
    const std::vector<Variant> three{parse_variant("random"), parse_variant("uncertainty"),
                                     parse_variant("uncertainty+balance")};
    const auto outcomes = compare(base, three, 2, dir.path());
    CHECK(outcomes.size() == 6);
    const auto csv = render_comparison_csv(outcomes, three);
    CHECK(lines(csv) == 1 + 6 + 3);
    CHECK(csv.find("uncertainty+balance,mean,") != std::string::npos);

    const std::vector<Variant> one{parse_variant("uncertainty")};
    const auto single = compare(base, one, 1, dir / "single");
    CHECK(lines(render_comparison_csv(single, one)) == 1 + 1 + 1);
    CHECK(single[0].status == RunStatus::Stopped);
    CHECK(single[0].mean_g.has_value());
}

TEST_CASE("compare refuses remote backends") {
    fixtures::TempDir dir;
    auto base = fixtures::sim_config(dir.path());
    base.backend.kind = BackendKind::Remote;
    base.backend.remote.endpoint = "http://127.0.0.1:1";
    CHECK_THROWS_AS(compare(base, {parse_variant("random")}, 1, dir.path()), ConfigError);
}

TEST_CASE("sweeps") {
    fixtures::TempDir dir;
    auto base = fixtures::sim_config(dir / "base");
    const auto lam = sweep(base, SweepParam::Lambda, {"0.001", "0.005", "0.05"}, 1, dir.path());
    CHECK(lam.size() == 3);
    CHECK(lines(render_sweep_csv(SweepParam::Lambda, lam)) == 4);

    const auto k = sweep(base, SweepParam::K, {"1", "3", "5"}, 1, dir.path());
    CHECK(k.size() == 3);

    const auto anchors = sweep(base, SweepParam::Anchors, {"6", "12"}, 1, dir.path());
    CHECK(anchors.size() == 2);

    CHECK_THROWS_AS(sweep(base, SweepParam::K, {}, 1, dir.path()), ConfigError);
    CHECK_THROWS_AS(sweep(base, SweepParam::K, {"x"}, 1, dir.path()), ConfigError);
    CHECK_THROWS_AS(sweep(base, SweepParam::Lambda, {"-1"}, 1, dir.path()), ConfigError);
    CHECK_THROWS_AS(parse_sweep_param("sigma"), ConfigError);
}
