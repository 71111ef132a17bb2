#include <doctest.h>

#include <set>

#include "fixtures.hpp"
#include "gal/hashing.hpp"
#include "gal/remote_backend.hpp"
#include "stub_server.hpp"

using namespace gal;
using backend::RemoteBackend;

namespace {

RemoteBackend client_for(const stub::Server& server, int dim = 64) {
    RemoteConfig rc;
    rc.endpoint = server.endpoint();
    rc.backoff_ms = 1;
    rc.poll_interval_ms = 1;
    rc.timeout_ms = 5000;
    RemoteBackend be(rc, static_cast<std::size_t>(dim));
    be.set_sleeper([](int) {});
    return be;
}

}  // namespace

TEST_CASE("generate echoes the requested count") {
    stub::Server server(default_simulated_config(), {});
    auto be = client_for(server);
    const auto out = be.generate(render_prompt(default_simulated_config().anchors[0], "S*"), 7, 10);
    CHECK(out.size() == 10);
    std::set<std::string> ids;
    for (const auto& g : out) {
        ids.insert(g.sample_id);
        CHECK_FALSE(g.image_uri.empty());
    }
    CHECK(ids.size() == 10);
}

TEST_CASE("embeddings come back unit norm and match the simulator") {
    const auto cfg = default_simulated_config();
    stub::Server server(cfg, {});
    auto be = client_for(server);
    const auto e = be.embed_text(cfg.soi.non_soi_text);
    CHECK(e.norm() == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(cosine_sim(e, server.sim().non_soi_vector()) == doctest::Approx(1.0).epsilon(1e-6));
    const auto r = be.embed_image(cfg.references[0]);
    CHECK(cosine_sim(r, server.sim().reference_vector()) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("client errors are not retried") {
    stub::Server server(default_simulated_config(), {});
    auto be = client_for(server);
    CHECK_THROWS_AS(be.embed_text(""), ProtocolError);
    CHECK(server.posts == 1);
}

TEST_CASE("transient failures are retried with the same idempotency key") {
    stub::Server server(default_simulated_config(), {.transient_posts = 2});
    auto be = client_for(server);
    std::vector<int> sleeps;
    be.set_sleeper([&](int ms) { sleeps.push_back(ms); });
    CHECK_NOTHROW(be.embed_text("a cat"));
    CHECK(server.posts == 3);
    const auto keys = server.idempotency_keys();
    REQUIRE(keys.size() == 3);
    CHECK(keys[0] == keys[1]);
    CHECK(keys[1] == keys[2]);
    CHECK(keys[0] == sha256_hex(std::string("/v1/embed\n") + Json{{"kind", "text"}, {"text", "a cat"}}.dump()));
    CHECK(sleeps == std::vector<int>{1, 2});
}

TEST_CASE("exhausted retries raise BackendError") {
    stub::Server server(default_simulated_config(), {.transient_posts = 10});
    auto be = client_for(server);
    try {
        be.embed_text("a cat");
        FAIL("expected BackendError");
    } catch (const BackendError& e) {
        CHECK(e.status() == 503);
        CHECK(e.attempts() == 3);
    }
}

TEST_CASE("unreachable endpoint raises BackendError") {
    RemoteConfig rc;
    rc.endpoint = "http://127.0.0.1:1";
    rc.timeout_ms = 200;
    RemoteBackend be(rc, 64);
    be.set_sleeper([](int) {});
    CHECK_THROWS_AS(be.embed_text("a cat"), BackendError);
}

TEST_CASE("wrong embedding dimension is a protocol error") {
    stub::Server server(default_simulated_config(), {.wrong_dim = 12});
    auto be = client_for(server);
    CHECK_THROWS_AS(be.embed_text("a cat"), ProtocolError);
}

TEST_CASE("finetune posts weighted references and polls the job") {
    auto cfg = default_simulated_config();
    stub::Server server(cfg, {.pending_polls = 3});
    auto be = client_for(server);
    const auto images = be.generate(render_prompt(cfg.anchors[0], "S*"), 1, 3);
    std::vector<backend::FinetuneReference> refs{{cfg.references[0], "caption", 1.0F}};
    for (const auto& im : images) {
        refs.push_back({im.image_uri, "S* syn", 0.0021F});
    }
    be.finetune(refs);
    CHECK(server.job_polls == 4);
    const auto body = server.last_finetune_body();
    REQUIRE(body["references"].size() == 4);
    CHECK(body["references"][0]["weight"].get<double>() == 1.0);
    CHECK(body["references"][3]["weight"].get<double>() == doctest::Approx(0.0021));
}

TEST_CASE("a failed job raises BackendError") {
    stub::Server server(default_simulated_config(), {.failed_jobs = 1});
    auto be = client_for(server);
    std::vector<backend::FinetuneReference> refs{{"ref/reference-0.png", "c", 1.0F}};
    CHECK_THROWS_AS(be.finetune(refs), BackendError);
    CHECK_NOTHROW(be.finetune(refs));
}

TEST_CASE("remote config needs an endpoint") {
    CHECK_THROWS_AS(RemoteBackend(RemoteConfig{}, 64), ConfigError);
}
