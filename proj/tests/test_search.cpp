#include <filesystem>

#include "doctest.h"

#include "gram/search.hpp"
#include "test_util.hpp"

using namespace gram;

namespace {

SearchConfig cost_only_config(long iterations, std::uint64_t seed, const std::string& out_dir = "") {
    SearchConfig config;
    config.meta.hierarchies = 1;
    config.meta.dags_per_hierarchy = 2;
    config.meta.nodes_per_dag = 5;
    config.meta.seed = seed;
    config.iterations = iterations;
    config.evaluator.kind = EvaluatorBinding::Kind::cost_only;
    config.evaluator.cost.accuracy = 0.5;
    config.tmpl = NetTemplate::cifar;
    config.input = {32, 32, 3};
    config.num_classes = 10;
    config.checkpoint_interval = 5;
    config.output_dir = out_dir;
    return config;
}

// Planted-motif fixture. The exploration cap keeps fresh uniform weights off
// p = 1, where every draw is the complete graph and updates cancel exactly; a
// calibration sweep over 20 seeds gave worst-case separation 78x at 0.9 (the
// cap at 1.0 never separates).
SearchConfig motif_config(std::uint64_t seed) {
    SearchConfig config;
    config.meta.hierarchies = 1;
    config.meta.dags_per_hierarchy = 1;
    config.meta.nodes_per_dag = 8;
    config.meta.seed = seed;
    config.meta.alpha = 0.9;
    config.meta.beta0 = 0.4;
    config.meta.rho = 0.1;
    config.meta.gamma = 0.0;
    config.meta.p_min = 0.05;
    config.meta.p_max = 0.9;
    config.iterations = 300;
    config.evaluator.kind = EvaluatorBinding::Kind::synthetic_motif;
    config.evaluator.motif.motif = {{0, 0, 1}, {0, 1, 2}, {0, 2, 3}, {0, 3, 4}, {0, 4, 5}};
    config.tmpl = NetTemplate::cifar;
    config.input = {32, 32, 3};
    config.num_classes = 10;
    return config;
}

double motif_separation(const MetaGraph& meta, const std::vector<MotifEdge>& motif) {
    const auto& dag = meta.dag(0);
    double motif_sum = 0, other_sum = 0;
    int motif_count = 0, other_count = 0;
    dag.for_each_edge([&](int i, int j, std::size_t idx) {
        const bool in_motif = std::any_of(motif.begin(), motif.end(), [&](const MotifEdge& e) {
            return e.dag == 0 && e.from == i && e.to == j;
        });
        if (in_motif) {
            motif_sum += dag.weights()[idx];
            ++motif_count;
        } else {
            other_sum += dag.weights()[idx];
            ++other_count;
        }
    });
    return (motif_sum / motif_count) / (other_sum / other_count);
}

}  // namespace

TEST_CASE("a single cost-only iteration leaves an audit trail") {
    auto result = run_search(cost_only_config(1, 3));
    CHECK(result.history.records.size() == 1);
    CHECK(result.history.skipped.empty());
    CHECK(result.meta.iteration() == 1);
    // uniform init samples the complete graphs; the shared multiplier cancels
    for (const auto& dag : result.meta.dags())
        for (double w : dag.weights()) CHECK(w == 1.0);
    const auto& rec = result.history.records[0];
    CHECK(rec.eta == 0.5);
    CHECK(rec.eta_prime == doctest::Approx(0.5 - 0.01 * rec.tau));
}

TEST_CASE("search config validation and file loading") {
    auto config = cost_only_config(1, 1);
    config.iterations = 0;
    CHECK_THROWS_WITH_AS(config.validate(), doctest::Contains("iterations"), config_error);
    config = cost_only_config(1, 1);
    config.meta.nodes_per_dag = 1;
    CHECK_THROWS_WITH_AS(config.validate(), doctest::Contains("nodes_per_dag"), config_error);

    const std::string dir = testutil::make_temp_dir("cfg");
    testutil::spit(dir + "/config.json", cost_only_config(7, 9).to_json().dump(2));
    const auto loaded = load_search_config(dir + "/config.json");
    CHECK(loaded.iterations == 7);
    CHECK(loaded.meta.seed == 9);
    CHECK(loaded.evaluator.kind == EvaluatorBinding::Kind::cost_only);

    testutil::spit(dir + "/bad.json", "{\"iterations\": 3}");
    CHECK_THROWS_AS(load_search_config(dir + "/bad.json"), config_error);
    CHECK_THROWS_AS(load_search_config(dir + "/missing.json"), config_error);
    std::filesystem::remove_all(dir);
}

TEST_CASE("identical configs produce byte-identical artifacts") {
    const std::string dir_a = testutil::make_temp_dir("det_a");
    const std::string dir_b = testutil::make_temp_dir("det_b");
    run_search(cost_only_config(10, 42, dir_a));
    run_search(cost_only_config(10, 42, dir_b));
    CHECK(testutil::slurp(dir_a + "/history.csv") == testutil::slurp(dir_b + "/history.csv"));
    CHECK(testutil::slurp(dir_a + "/checkpoint-final.json") ==
          testutil::slurp(dir_b + "/checkpoint-final.json"));
    CHECK(!testutil::slurp(dir_a + "/history.csv").empty());
    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);
}

TEST_CASE("different seeds diverge") {
    auto a = run_search(cost_only_config(5, 1));
    auto b = run_search(cost_only_config(5, 2));
    CHECK(history_csv(a.meta) != history_csv(b.meta));
}

TEST_CASE("resuming from a checkpoint matches the uninterrupted run") {
    const std::string dir_full = testutil::make_temp_dir("full");
    const std::string dir_half = testutil::make_temp_dir("half");

    auto full = run_search(cost_only_config(10, 11, dir_full));

    auto half_config = cost_only_config(10, 11, dir_half);
    half_config.iterations = 5;
    run_search(half_config);
    auto resumed_config = cost_only_config(10, 11, dir_half);
    auto resumed =
        run_search(resumed_config, load_checkpoint(dir_half + "/checkpoint-final.json"));

    CHECK(resumed.meta == full.meta);
    CHECK(testutil::slurp(dir_full + "/history.csv") == testutil::slurp(dir_half + "/history.csv"));
    CHECK(testutil::slurp(dir_full + "/checkpoint-final.json") ==
          testutil::slurp(dir_half + "/checkpoint-final.json"));

    // mid-run periodic checkpoints resume identically as well
    auto from_periodic =
        run_search(cost_only_config(10, 11), load_checkpoint(dir_full + "/checkpoint-5.json"));
    CHECK(from_periodic.meta == full.meta);

    std::filesystem::remove_all(dir_full);
    std::filesystem::remove_all(dir_half);
}

TEST_CASE("resume rejects a mismatched config") {
    const std::string dir = testutil::make_temp_dir("mismatch");
    run_search(cost_only_config(3, 5, dir));
    auto other = cost_only_config(3, 6);
    CHECK_THROWS_AS(run_search(other, load_checkpoint(dir + "/checkpoint-final.json")),
                    config_error);
    std::filesystem::remove_all(dir);
}

TEST_CASE("beta column replays as an EMA over the score column") {
    auto result = run_search(motif_config(42));
    double beta = result.meta.config().beta0;
    for (const auto& rec : result.history.records) {
        beta = (1.0 - result.meta.config().rho) * beta + result.meta.config().rho * rec.eta_prime;
        CHECK(rec.beta == beta);  // same arithmetic, bit-exact replay
    }
}

TEST_CASE("all-empty samples are scored rather than resampled") {
    MetaGraphConfig config;
    config.hierarchies = 1;
    config.dags_per_hierarchy = 2;
    config.nodes_per_dag = 2;  // one edge per DAG
    config.seed = 4;
    MetaGraph meta(config);
    meta.dag(0).set_weight(0, 1, 1e-9);
    meta.dag(1).set_weight(0, 1, 1e-9);

    // at the 0.05 exploration floor an empty joint draw shows up quickly
    Rng rng(2);
    SampledGraphSet empty_sample;
    bool found = false;
    for (int tries = 0; tries < 1000 && !found; ++tries) {
        auto s = meta.subsample(rng);
        if (s.total_edges() == 0) {
            empty_sample = std::move(s);
            found = true;
        }
    }
    REQUIRE(found);

    const auto spec =
        assemble_from_sample(meta, empty_sample, NetTemplate::cifar, {32, 32, 3}, 10);
    CHECK(spec.shape_of("h0.concat") == TensorShape{32, 32, 3});  // pure pass-through
    CHECK(count_params(spec) == 3 * 10 + 10ULL);                  // only the classifier remains

    EvaluationSession session([] {
        EvaluatorBinding b;
        b.kind = EvaluatorBinding::Kind::cost_only;
        return b;
    }());
    const auto result = session.evaluate(spec, empty_sample);
    const auto before = meta.dags();
    meta.update_weights(empty_sample, penalized_score(result, 0.0));
    CHECK(meta.iteration() == 1);
    CHECK(meta.history().size() == 1);
    CHECK(meta.dags() == before);  // nothing sampled, nothing touched
}

TEST_CASE("planted motif separates by five-fold on the reference seed") {
    auto config = motif_config(42);
    auto result = run_search(config);
    CHECK(result.history.records.size() == 300);
    CHECK(motif_separation(result.meta, config.evaluator.motif.motif) >= 5.0);
}

TEST_CASE("search skips failed evaluations and aborts over budget") {
    // crash on the very first request, every respawn crashes again
    SearchConfig config = cost_only_config(6, 3);
    config.evaluator.kind = EvaluatorBinding::Kind::external_process;
    config.evaluator.external.command =
        std::string(GRAM_CLI_PATH) + " eval-echo --fail-mode crash";
    config.evaluator.external.timeout_s = 20.0;
    config.failure_budget = 3;
    const std::string dir = testutil::make_temp_dir("budget");
    config.output_dir = dir;

    CHECK_THROWS_AS(run_search(config), protocol_error);
    // the final checkpoint is intact and carries the skip records
    const auto meta = load_checkpoint(dir + "/checkpoint-final.json");
    CHECK(meta.iteration() == 0);
    CHECK(meta.skipped().size() == 4);  // budget 3 + the one that aborted
    CHECK(meta.history().empty());
    std::filesystem::remove_all(dir);
}

TEST_CASE("transient failures only cost the failed iterations") {
    SearchConfig config = cost_only_config(4, 3);
    config.evaluator.kind = EvaluatorBinding::Kind::external_process;
    config.evaluator.external.command =
        std::string(GRAM_CLI_PATH) + " eval-echo --fail-mode crash --fail-after 2";
    config.evaluator.external.timeout_s = 20.0;
    config.failure_budget = 10;

    auto result = run_search(config);
    CHECK(result.history.records.size() + result.history.skipped.size() == 4);
    CHECK(result.history.skipped.size() == 1);  // crashed once, respawned, finished
    CHECK(result.meta.iteration() == 3);
}

TEST_CASE("batched sampling applies updates sequentially") {
    auto config = cost_only_config(8, 21);
    config.batch_size = 4;
    auto result = run_search(config);
    CHECK(result.history.records.size() == 8);
    CHECK(result.meta.iteration() == 8);
}

TEST_CASE("extract_best composes prune, upscale, assembly and profiling") {
    auto result = run_search(motif_config(42));
    const auto [spec, report] =
        extract_best(result.meta, 0.4, NetTemplate::cifar, {32, 32, 3}, 10, 1.0);
    CHECK(spec.annotated());
    CHECK(report.macs > 0);
    CHECK(report.params > 0);

    const auto [spec_up, report_up] =
        extract_best(result.meta, 0.4, NetTemplate::cifar, {32, 32, 3}, 10, 1.5);
    CHECK(report_up.params > report.params);
    CHECK(report_up.macs >= report.macs);
    CHECK(spec_up.upscale_factor == 1.5);

    const auto [spec_mid, report_mid] =
        extract_best(result.meta, 0.4, NetTemplate::cifar, {32, 32, 3}, 10, 1.25);
    CHECK(report_mid.params <= report_up.params);
    CHECK(report_mid.macs <= report_up.macs);

    // level 0 keeps the complete graphs: the largest model this meta can emit
    const auto [complete_spec, complete_report] =
        extract_best(result.meta, 0.0, NetTemplate::cifar, {32, 32, 3}, 10, 1.0);
    CHECK(complete_report.macs >= report.macs);
    int kept_edges = 0;
    for (const auto& hierarchy : complete_spec.hierarchies)
        for (const auto& dag : hierarchy.dags) kept_edges += static_cast<int>(dag.edges.size());
    CHECK(kept_edges == 28);  // 8 choose 2
}

TEST_CASE("swiftnet naming convention") {
    CHECK(swiftnet_name(96, 0.4, 1.5) == "swiftnet-96-0.4-1.50");
    CHECK(swiftnet_name(96, 0.5, 1.0) == "swiftnet-96-0.5-1.00");
    CHECK(swiftnet_name(128, 0.65, 1.25) == "swiftnet-128-0.65-1.25");
    CHECK(swiftnet_name(32, 0.0, 1.0) == "swiftnet-32-0-1.00");
}

TEST_CASE("history csv carries the documented header and row shape") {
    auto result = run_search(cost_only_config(3, 8));
    const std::string csv = history_csv(result.meta);
    CHECK(csv.rfind("t,eta,tau,eta_prime,beta,edges_sampled\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    CHECK(csv.find("\n1,") != std::string::npos);
}
