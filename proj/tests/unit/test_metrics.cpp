#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "gal/config.hpp"
#include "gal/json_io.hpp"
#include "gal/metrics.hpp"
#include "gal/simulated_backend.hpp"
#include "gal/engine.hpp"

using namespace gal;

namespace {

GeneratedSample sample(std::initializer_list<double> v, bool overfit = false) {
    GeneratedSample s;
    s.embedding = normalize(v);
    s.overfit = overfit;
    return s;
}

/// Unit vector with cosine `c` to e0 in the (e0, e1) plane.
GeneratedSample at_cos(double c) { return sample({c, std::sqrt(1.0 - c * c)}); }

RoundRecord round_record(int n) {
    RoundRecord r;
    r.round = n;
    r.stats.push_back({0, 0.3, 0.61, std::nullopt});
    r.selected.push_back({0, "r" + std::to_string(n) + "-a0-j1"});
    r.openness = 0.00305;
    r.metrics = MetricsTriple{0.25, 0.5, 0.3, 18, 10};
    return r;
}

}  // namespace

TEST_CASE("txt_aln") {
    const auto p = normalize({1.0, 0.0});
    std::vector<GeneratedSample> same{sample({1.0, 0.0}), sample({1.0, 0.0})};
    std::vector<Embedding> prompts{p, p};
    CHECK(metrics::txt_aln(same, prompts) == doctest::Approx(1.0));

    std::vector<GeneratedSample> two{at_cos(0.2), at_cos(0.4)};
    CHECK(metrics::txt_aln(two, prompts) == doctest::Approx(0.3).epsilon(1e-6));

    std::vector<GeneratedSample> ortho{sample({0.0, 1.0})};
    std::vector<Embedding> one{p};
    CHECK(metrics::txt_aln(ortho, one) == 0.0);

    CHECK_THROWS_AS(metrics::txt_aln(std::vector<GeneratedSample>{}, std::vector<Embedding>{}), EmptyBatchError);
    CHECK_THROWS_AS(metrics::txt_aln(two, one), ValidationError);
}

TEST_CASE("img_aln") {
    const auto r = normalize({1.0, 0.0});
    std::vector<Embedding> refs{r};
    std::vector<GeneratedSample> same{sample({1.0, 0.0})};
    CHECK(metrics::img_aln(same, refs) == doctest::Approx(1.0));

    std::vector<GeneratedSample> mixed{sample({1.0, 0.0}), sample({0.0, 1.0})};
    CHECK(metrics::img_aln(mixed, refs) == doctest::Approx(0.5));

    std::vector<GeneratedSample> three{at_cos(0.5), at_cos(0.7), at_cos(0.9)};
    CHECK(metrics::img_aln(three, refs) == doctest::Approx(0.7).epsilon(1e-6));

    // Two references: the centroid sits halfway between them.
    std::vector<Embedding> pair{normalize({1.0, 0.0}), normalize({0.0, 1.0})};
    std::vector<GeneratedSample> mid{sample({1.0, 1.0})};
    CHECK(metrics::img_aln(mid, pair) == doctest::Approx(1.0));
    CHECK_THROWS_AS(metrics::img_aln(mid, std::vector<Embedding>{}), EmptyBatchError);
}

TEST_CASE("ovf") {
    std::vector<GeneratedSample> s{sample({1, 0}, true), sample({1, 0}), sample({1, 0}), sample({1, 0})};
    CHECK(metrics::ovf(s) == 0.25);
    std::vector<GeneratedSample> clean{sample({1, 0}), sample({1, 0})};
    CHECK(metrics::ovf(clean) == 0.0);
}

TEST_CASE("ovf of a fully overfit simulated direction is 1") {
    fixtures::TempDir dir;
    auto cfg = fixtures::sim_config(dir.path());
    cfg.backend.simulated.g_init = 0.0;
    auto be = make_backend(cfg);
    auto& sim = dynamic_cast<backend::SimulatedBackend&>(*be);
    const auto anchor = sim.embed_text(render_prompt(cfg.anchors[0], cfg.soi.pseudo_token));
    const auto non = sim.embed_text(cfg.soi.non_soi_text);
    const auto images = sim.generate(render_prompt(cfg.anchors[0], cfg.soi.pseudo_token), 77, 10);
    std::vector<GeneratedSample> batch;
    for (const auto& im : images) {
        GeneratedSample s;
        s.embedding = sim.embed_image(im.image_uri);
        s.overfit = cosine_sim(s.embedding, anchor) <= cosine_sim(s.embedding, non);
        batch.push_back(s);
    }
    CHECK(metrics::ovf(batch) == 1.0);
}

TEST_CASE("report csv") {
    std::vector<RoundRecord> four{round_record(1), round_record(2), round_record(3), round_record(4)};
    four.back().stopped = true;
    four.back().stop_reason = StopReason::RoundCap;
    const auto csv = metrics::render_report_csv(four, {"uncertainty", true});
    CHECK(csv.rfind(std::string(metrics::kReportHeader) + "\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
    CHECK(csv.find("4,uncertainty,true,0.25000000,0.50000000,0.30000000,0.0030500000,1,true,round_cap\n") !=
          std::string::npos);
    CHECK(csv == metrics::render_report_csv(four, {"uncertainty", true}));

    std::vector<RoundRecord> one{round_record(1)};
    const auto single = metrics::render_report_csv(one, {"random", false});
    CHECK(std::count(single.begin(), single.end(), '\n') == 2);

    fixtures::TempDir dir;
    metrics::emit_report(four, {"uncertainty", true}, dir.path());
    CHECK(fixtures::slurp(dir / "report.csv") == csv);
    const auto j = read_json_file(dir / "report.json");
    CHECK(j["rounds"].size() == 4);
    CHECK_THROWS_AS(metrics::emit_report(std::vector<RoundRecord>{}, {"x", true}, dir.path()), EmptyBatchError);
}
