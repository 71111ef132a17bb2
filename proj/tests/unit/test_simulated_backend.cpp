#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "gal/engine.hpp"
#include "gal/oracle.hpp"
#include "gal/random.hpp"
#include "gal/simulated_backend.hpp"

using namespace gal;
using backend::SimulatedBackend;

namespace {

struct World {
    RunConfig cfg;
    std::unique_ptr<backend::Backend> owner;
    SimulatedBackend* sim = nullptr;

    explicit World(std::uint64_t seed = 0, std::optional<double> g = std::nullopt) {
        cfg = default_simulated_config();
        cfg.master_seed = seed;
        cfg.backend.simulated.g_init = g;
        owner = make_backend(cfg);
        sim = dynamic_cast<SimulatedBackend*>(owner.get());
    }
    std::string prompt(std::size_t i) const { return render_prompt(cfg.anchors.at(i), cfg.soi.pseudo_token); }
};

}  // namespace

TEST_CASE("g extremes") {
    World w(1, 1.0);
    for (const auto& s : w.sim->sample_direction(0, 5, 10)) {
        CHECK(s.aligned);
    }
    World z(1, 0.0);
    std::vector<bool> flags;
    for (const auto& s : z.sim->sample_direction(0, 5, 10)) {
        CHECK_FALSE(s.aligned);
        flags.push_back(!s.aligned);
    }
}

TEST_CASE("branch labels replay the seeded Bernoulli draws") {
    World w(3, 0.5);
    const std::uint64_t base = 0xC0FFEE;
    const auto drawn = w.sim->sample_direction(2, base, 10);
    for (std::uint32_t j = 1; j <= 10; ++j) {
        // Independent replay: first 53-bit uniform of mt19937_64 seeded with
        // the per-sample seed, compared against g.
        std::mt19937_64 eng(sample_seed(base, j));
        const double u = static_cast<double>(eng() >> 11U) * 0x1.0p-53;
        CHECK(drawn[j - 1].aligned == (u < 0.5));
    }
    // Same inputs, same draw.
    const auto again = w.sim->sample_direction(2, base, 10);
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(again[i].embedding == drawn[i].embedding);
    }
}

TEST_CASE("oracle separates the two branches") {
    World w(4, 0.5);
    const auto non = w.sim->non_soi_vector();
    int agree = 0;
    int total = 0;
    for (std::size_t d = 0; d < w.sim->direction_count(); ++d) {
        for (const auto& s : w.sim->sample_direction(d, 1000 + d, 56)) {
            const bool overfit = oracle::phi(s.embedding, w.sim->direction_vector(d), non);
            agree += overfit == !s.aligned ? 1 : 0;
            ++total;
        }
    }
    CHECK(total >= 1000);
    CHECK(static_cast<double>(agree) / total >= 0.999);
}

TEST_CASE("fine-tune arithmetic") {
    World w(0);
    auto g = w.sim->alignment();
    // An aligned sample from anchor 0.
    w.sim->set_alignment(std::vector<double>(g.size(), 1.0));
    const auto images = w.sim->generate(w.prompt(0), 9, 1);
    REQUIRE(w.sim->is_aligned(images[0].image_uri));

    std::vector<double> start(g.size(), 0.4);
    w.sim->set_alignment(start);
    const backend::FinetuneReference ref{images[0].image_uri, w.prompt(0), 0.003F};
    w.sim->finetune(std::span(&ref, 1));
    const auto after = w.sim->alignment();
    const double strength = 0.15 + 10.0 * static_cast<double>(0.003F);
    CHECK(after[0] == doctest::Approx(0.4 + strength * 0.6).epsilon(1e-9));
    CHECK(after[0] == doctest::Approx(0.508).epsilon(1e-6));

    for (std::size_t j = 1; j < after.size(); ++j) {
        const double c = cosine_sim(w.sim->direction_vector(0), w.sim->direction_vector(j));
        if (c <= 0.0) {
            CHECK(after[j] == 0.4);
        } else {
            CHECK(after[j] == doctest::Approx(0.4 + strength * c * 0.6).epsilon(1e-9));
        }
    }

    // g = 1 is a fixed point of the aligned update.
    w.sim->set_alignment(std::vector<double>(g.size(), 1.0));
    w.sim->finetune(std::span(&ref, 1));
    for (double v : w.sim->alignment()) {
        CHECK(v == 1.0);
    }
}

TEST_CASE("an overfit reference pulls every direction down") {
    World w(0);
    const auto n = w.sim->direction_count();
    w.sim->set_alignment(std::vector<double>(n, 0.0));
    const auto images = w.sim->generate(w.prompt(1), 9, 1);
    REQUIRE_FALSE(w.sim->is_aligned(images[0].image_uri));
    w.sim->set_alignment(std::vector<double>(n, 0.5));
    const backend::FinetuneReference ref{images[0].image_uri, w.prompt(1), 0.01F};
    w.sim->finetune(std::span(&ref, 1));
    const double strength = 0.15 + 10.0 * static_cast<double>(0.01F);
    for (double v : w.sim->alignment()) {
        CHECK(v == doctest::Approx(0.5 - strength * 0.5).epsilon(1e-9));
    }
}

TEST_CASE("zero overfit penalty gives a monotone learner") {
    RunConfig cfg = default_simulated_config();
    cfg.backend.simulated.overfit_penalty = 0.0;
    auto be = make_backend(cfg);
    auto& sim = dynamic_cast<SimulatedBackend&>(*be);
    sim.set_alignment(std::vector<double>(sim.direction_count(), 0.0));
    const auto images = sim.generate(render_prompt(cfg.anchors[0], "S*"), 3, 1);
    sim.set_alignment(std::vector<double>(sim.direction_count(), 0.5));
    const backend::FinetuneReference ref{images[0].image_uri, "x", 1.0F};
    sim.finetune(std::span(&ref, 1));
    for (double v : sim.alignment()) {
        CHECK(v == 0.5);
    }
}

TEST_CASE("original references leave g alone") {
    World w(0);
    const auto before = w.sim->alignment();
    const backend::FinetuneReference ref{w.cfg.references[0], "caption", 1.0F};
    w.sim->finetune(std::span(&ref, 1));
    CHECK(w.sim->alignment() == before);
}

TEST_CASE("text and image embeddings") {
    World w(0);
    CHECK(w.sim->embed_text(w.prompt(0)) == w.sim->direction_vector(0));
    CHECK(w.sim->embed_text(scoring_text(w.cfg.anchors[0], "S*")) == w.sim->direction_vector(0));
    CHECK(w.sim->embed_text(w.cfg.soi.non_soi_text) == w.sim->non_soi_vector());
    CHECK(w.sim->embed_text("S*") == w.sim->soi_vector());

    const auto r = w.sim->embed_image(w.cfg.references[0]);
    CHECK(r.norm() == doctest::Approx(1.0).epsilon(1e-6));
    std::vector<double> mix(r.dim());
    for (std::size_t i = 0; i < r.dim(); ++i) {
        mix[i] = 0.6 * w.sim->soi_vector()[i] + 0.4 * w.sim->non_soi_vector()[i];
    }
    const auto expect = normalize(std::span<const double>(mix));
    CHECK(cosine_sim(r, expect) == doctest::Approx(1.0).epsilon(1e-6));

    CHECK_THROWS_AS(w.sim->embed_text(""), ValidationError);
    CHECK_THROWS_AS(w.sim->embed_text("a dog in a hat"), ValidationError);
    CHECK_THROWS_AS(w.sim->embed_image("sim://0/ffff"), ValidationError);
}

TEST_CASE("image embeddings match the generated draw") {
    World w(5, 0.5);
    const auto images = w.sim->generate(w.prompt(3), 77, 10);
    const auto drawn = w.sim->sample_direction(3, 77, 10);
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(w.sim->embed_image(images[i].image_uri) == drawn[i].embedding);
        CHECK(w.sim->is_aligned(images[i].image_uri) == drawn[i].aligned);
    }
}

TEST_CASE("snapshot and restore") {
    World w(0);
    const auto images = w.sim->generate(w.prompt(0), 1, 3);
    const auto snap = w.sim->snapshot();
    w.sim->set_alignment(std::vector<double>(w.sim->direction_count(), 0.9));

    World fresh(0);
    fresh.sim->restore(snap);
    CHECK(fresh.sim->alignment() == World(0).sim->alignment());
    CHECK(fresh.sim->embed_image(images[1].image_uri) == w.sim->embed_image(images[1].image_uri));
    CHECK_THROWS_AS(fresh.sim->restore(Json::object()), ValidationError);
}

TEST_CASE("world draw depends on the seed") {
    World a(1), b(2);
    CHECK_FALSE(a.sim->direction_vector(0) == b.sim->direction_vector(0));
    CHECK(World(1).sim->direction_vector(0) == a.sim->direction_vector(0));
    for (double g : a.sim->alignment()) {
        CHECK(g >= 0.1);
        CHECK(g < 0.6);
    }
}
