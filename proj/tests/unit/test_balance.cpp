#include <doctest.h>

#include <cmath>

#include "gal/balance.hpp"
#include "gal/strategy.hpp"
#include "oracles.hpp"

using namespace gal;
using namespace gal::balance;

namespace {

std::vector<DirectionStats> stats_of(const std::vector<double>& omegas) {
    std::vector<DirectionStats> out;
    for (std::size_t i = 0; i < omegas.size(); ++i) {
        out.push_back({static_cast<int>(i), 0.0, omegas[i], std::nullopt});
    }
    return out;
}

std::vector<ReferenceItem> drafts(int n) {
    std::vector<ReferenceItem> out;
    for (int i = 0; i < n; ++i) {
        ReferenceItem r;
        r.image_ref = "img" + std::to_string(i);
        r.embedding = normalize({1.0, 0.0});
        r.origin = Origin::Synthetic;
        r.sample_id = "s" + std::to_string(i);
        r.anchor_id = i;
        out.push_back(r);
    }
    return out;
}

}  // namespace

TEST_CASE("openness examples") {
    CHECK(std::abs(openness(stats_of(std::vector<double>(18, std::log(2.0))), 0.005) - 0.00346574) < 1e-8);
    CHECK(openness(stats_of({0.0, 0.0}), 0.005) == 0.0);
    const double expect = 0.005 * (oracle_ref::entropy(0.5) + oracle_ref::entropy(0.3)) / 3.0;
    const double got = openness(stats_of({strategy::entropy(0.5), 0.0, strategy::entropy(0.3)}), 0.005);
    CHECK(std::abs(got - expect) < 1e-12);
    CHECK(std::abs(got - 0.00217335) < 1e-8);
    CHECK_THROWS_AS(openness(stats_of({}), 0.005), EmptyBatchError);
    CHECK_THROWS_AS(openness(stats_of({0.3}), 0.0), DomainError);
}

TEST_CASE("openness is linear in lambda") {
    const auto st = stats_of({0.1, 0.5, 0.69, 0.0, 0.2});
    const double base = openness(st, 0.001);
    for (double mult : {2.0, 5.0, 10.0, 50.0}) {
        CHECK(std::abs(openness(st, 0.001 * mult) - mult * base) < 1e-12);
    }
}

TEST_CASE("weight_new_references") {
    auto w = weight_new_references(drafts(3), 0.0021, true, 2);
    REQUIRE(w.items.size() == 3);
    for (const auto& r : w.items) {
        CHECK(r.weight == 0.0021F);
        CHECK(r.round_added == 2);
    }
    CHECK_FALSE(w.degenerate);

    auto u = weight_new_references(drafts(3), 0.0021, false, 2);
    for (const auto& r : u.items) {
        CHECK(r.weight == 1.0F);
    }

    CHECK(weight_new_references({}, 0.0021, true, 1).items.empty());

    auto z = weight_new_references(drafts(2), 0.0, true, 1);
    CHECK(z.items.empty());
    CHECK(z.degenerate);

    auto bad = drafts(1);
    bad[0].origin = Origin::Original;
    CHECK_THROWS_AS(weight_new_references(bad, 0.1, true, 1), ValidationError);
}

TEST_CASE("should_stop examples") {
    auto a = should_stop(stats_of({0.2, 0.0, 0.0}), 3, 1, 4);
    CHECK(a.stop);
    CHECK(a.reason == StopReason::Converged);
    auto b = should_stop(stats_of({0.2, 0.3, 0.4}), 3, 4, 4);
    CHECK(b.stop);
    CHECK(b.reason == StopReason::RoundCap);
    auto c = should_stop(stats_of({0.2, 0.3, 0.4}), 3, 2, 4);
    CHECK_FALSE(c.stop);
    CHECK(c.reason == StopReason::None);
}

TEST_CASE("should_stop agrees with a counter on every small pattern") {
    for (int n = 1; n <= 6; ++n) {
        for (unsigned mask = 0; mask < (1U << n); ++mask) {
            std::vector<double> om;
            std::vector<bool> pos;
            for (int i = 0; i < n; ++i) {
                const bool p = (mask >> i) & 1U;
                om.push_back(p ? 0.4 : 0.0);
                pos.push_back(p);
            }
            for (std::size_t k = 1; k <= 4; ++k) {
                for (int round = 1; round <= 3; ++round) {
                    const auto got = should_stop(stats_of(om), k, round, 3);
                    const auto want = oracle_ref::should_stop(pos, k, round, 3);
                    CHECK(got.stop == want.first);
                    CHECK(got.reason == want.second);
                }
            }
        }
    }
}

TEST_CASE("BalanceConfig validation") {
    BalanceConfig ok;
    CHECK_NOTHROW(ok.validate());
    BalanceConfig bad_lambda;
    bad_lambda.lambda = -1.0;
    CHECK_THROWS_AS(bad_lambda.validate(), ConfigError);
    BalanceConfig bad_k;
    bad_k.k = 0;
    CHECK_THROWS_AS(bad_k.validate(), ConfigError);
}
