#include <random>

#include "doctest.h"

#include "gram/evaluator.hpp"
#include "gram/search.hpp"
#include "test_util.hpp"

using namespace gram;

namespace {

// Minimal annotated spec + matching sample for evaluator plumbing.
struct Fixture {
    MetaGraph meta = testutil::tiny_meta(4, 9);
    SampledGraphSet sample;
    ArchitectureSpec spec;

    Fixture() {
        Rng rng(2);
        sample = meta.subsample(rng);
        spec = assemble_from_sample(meta, sample, NetTemplate::cifar, {32, 32, 3}, 10);
    }
};

SampledGraphSet sample_with(const MetaGraph& meta, const std::vector<Edge>& edges) {
    SampledGraphSet s;
    s.iteration = meta.iteration();
    s.nodes_per_dag = meta.config().nodes_per_dag;
    s.dags.resize(meta.dags().size());
    s.dags[0].edges = edges;
    return s;
}

std::string echo_cmd(const std::string& extra = "") {
    return std::string(GRAM_CLI_PATH) + " eval-echo" + (extra.empty() ? "" : " " + extra);
}

}  // namespace

TEST_CASE("penalized score subtracts gamma per millisecond") {
    CHECK(penalized_score({0.544, 4.24}, 0.01) == doctest::Approx(0.5016).epsilon(1e-12));
    CHECK(penalized_score({0.9, 123.0}, 0.0) == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(penalized_score({0.9, 0.0}, 0.5) == doctest::Approx(0.9).epsilon(1e-15));
    CHECK_THROWS_AS(penalized_score({0.5, 1.0}, -0.1), range_error);
    CHECK_THROWS_AS(penalized_score({1.5, 1.0}, 0.1), value_error);
    CHECK_THROWS_AS(penalized_score({0.5, -1.0}, 0.1), value_error);
}

TEST_CASE("penalty is exactly linear in latency") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> acc(0.0, 1.0), lat(0.0, 50.0), g(0.0, 0.2);
    for (int i = 0; i < 200; ++i) {
        const double a = acc(gen), t = lat(gen), gamma = g(gen), delta = lat(gen);
        CHECK(penalized_score({a, t + delta}, gamma) ==
              doctest::Approx(penalized_score({a, t}, gamma) - gamma * delta).epsilon(1e-12));
    }
}

TEST_CASE("synthetic motif rewards coverage and punishes clutter") {
    MetaGraph meta = testutil::tiny_meta(4, 1);
    SyntheticMotifParams params;
    params.motif = {{0, 0, 1}, {0, 1, 2}};
    params.base = 0.3;
    params.gain = 0.6;
    params.clutter = 0.2;

    // exactly the motif: eta = base + gain
    auto r = evaluate_synthetic_motif(params, sample_with(meta, {{0, 1}, {1, 2}}));
    CHECK(r.accuracy == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(r.latency_ms == 0.0);

    // empty sample: eta = base
    r = evaluate_synthetic_motif(params, sample_with(meta, {}));
    CHECK(r.accuracy == doctest::Approx(0.3).epsilon(1e-12));

    // half the motif plus one of the 6 possible edges off-motif
    r = evaluate_synthetic_motif(params, sample_with(meta, {{0, 1}, {2, 3}}));
    CHECK(r.accuracy == doctest::Approx(0.3 + 0.6 * 0.5 - 0.2 * (1.0 / 6.0)).epsilon(1e-12));
}

TEST_CASE("synthetic accuracy stays clamped to [0,1]") {
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> dist(-2.0, 3.0);
    MetaGraph meta = testutil::tiny_meta(5, 2);
    Rng rng(4);
    for (int i = 0; i < 300; ++i) {
        SyntheticMotifParams params;
        params.motif = {{0, 0, 1}};
        params.base = dist(gen);
        params.gain = dist(gen);
        params.clutter = dist(gen);
        const auto sample = meta.subsample(rng);
        const auto r = evaluate_synthetic_motif(params, sample);
        CHECK(r.accuracy >= 0.0);
        CHECK(r.accuracy <= 1.0);
    }
}

TEST_CASE("built-in evaluators are deterministic") {
    Fixture fx;
    EvaluatorBinding binding;
    binding.kind = EvaluatorBinding::Kind::synthetic_motif;
    binding.motif.motif = {{0, 0, 1}, {0, 2, 3}};
    EvaluationSession session(binding);
    const auto a = session.evaluate(fx.spec, fx.sample);
    const auto b = session.evaluate(fx.spec, fx.sample);
    CHECK(a == b);

    EvaluatorBinding cost;
    cost.kind = EvaluatorBinding::Kind::cost_only;
    cost.cost.accuracy = 0.5;
    EvaluationSession cost_session(cost);
    CHECK(cost_session.evaluate(fx.spec, fx.sample) == cost_session.evaluate(fx.spec, fx.sample));
}

TEST_CASE("cost-only evaluation prices the architecture") {
    Fixture fx;
    CostOnlyParams params;
    params.accuracy = 0.5;
    params.cost_model.overhead_ms = 0.5;
    params.cost_model.coeffs = {{"conv1x1", 0.0}, {"conv3x3", 0.0}, {"pool", 0.0}, {"dense", 0.0}};
    const auto r = evaluate_cost_only(params, fx.spec);
    CHECK(r.accuracy == 0.5);
    CHECK(r.latency_ms ==
          doctest::Approx(0.5 * static_cast<double>(profiled_layers(fx.spec).size())));
}

TEST_CASE("binding serialization round-trips") {
    EvaluatorBinding binding;
    binding.kind = EvaluatorBinding::Kind::synthetic_motif;
    binding.motif.motif = {{0, 1, 3}, {0, 0, 2}};
    binding.motif.base = 0.25;
    auto back = EvaluatorBinding::from_json(binding.to_json());
    CHECK(back.kind == binding.kind);
    CHECK(back.motif.motif == binding.motif.motif);
    CHECK(back.motif.base == binding.motif.base);

    EvaluatorBinding ext;
    ext.kind = EvaluatorBinding::Kind::external_process;
    ext.external.command = "my-evaluator --flag";
    ext.external.timeout_s = 12.5;
    ext.external.proxy_size = 500;
    back = EvaluatorBinding::from_json(ext.to_json());
    CHECK(back.external.command == ext.external.command);
    CHECK(back.external.timeout_s == ext.external.timeout_s);
    CHECK(back.external.proxy_size == ext.external.proxy_size);

    CHECK_THROWS_AS(EvaluatorBinding::from_json({{"kind", "nope"}}), schema_error);
}

TEST_CASE("external loopback evaluator round-trips metrics") {
    Fixture fx;
    ExternalProcessParams params;
    params.command = echo_cmd("--accuracy 0.5 --latency 1.0");
    params.timeout_s = 20.0;
    ExternalEvaluatorSession session(params);
    for (int i = 0; i < 5; ++i) {
        const auto r = session.evaluate(export_json(fx.spec));
        CHECK(r == EvalResult{0.5, 1.0});
    }
    session.shutdown();
}

TEST_CASE("external evaluator receives protocol-1 requests with proxy hints") {
    Fixture fx;
    // jq-free validation: the echo binary itself rejects protocol != 1
    ExternalProcessParams params;
    params.command = echo_cmd("--accuracy 0.25 --latency 2.5");
    params.timeout_s = 20.0;
    params.proxy_size = 500;
    ExternalEvaluatorSession session(params);
    const auto r = session.evaluate(export_json(fx.spec));
    CHECK(r.accuracy == doctest::Approx(0.25));
    CHECK(r.latency_ms == doctest::Approx(2.5));
    session.shutdown();
}

TEST_CASE("timeouts, malformed replies, wrong ids and crashes are distinct") {
    Fixture fx;
    const auto arch = export_json(fx.spec);

    ExternalProcessParams hang;
    hang.command = echo_cmd("--fail-mode hang");
    hang.timeout_s = 0.4;
    ExternalEvaluatorSession hang_session(hang);
    CHECK_THROWS_AS(hang_session.evaluate(arch), protocol_error);
    try {
        ExternalEvaluatorSession s(hang);
        s.evaluate(arch);
    } catch (const protocol_error& e) {
        CHECK(e.what_kind() == protocol_error::kind::timeout);
        CHECK(e.request_id() == 0);
    }

    ExternalProcessParams malformed;
    malformed.command = echo_cmd("--fail-mode malformed");
    malformed.timeout_s = 20.0;
    try {
        ExternalEvaluatorSession s(malformed);
        s.evaluate(arch);
        CHECK(false);
    } catch (const protocol_error& e) {
        CHECK(e.what_kind() == protocol_error::kind::malformed_reply);
    }

    ExternalProcessParams wrong_id;
    wrong_id.command = echo_cmd("--fail-mode wrong-id");
    wrong_id.timeout_s = 20.0;
    try {
        ExternalEvaluatorSession s(wrong_id);
        s.evaluate(arch);
        CHECK(false);
    } catch (const protocol_error& e) {
        CHECK(e.what_kind() == protocol_error::kind::id_mismatch);
    }

    ExternalProcessParams wrong_protocol;
    wrong_protocol.command = echo_cmd("--fail-mode wrong-protocol");
    wrong_protocol.timeout_s = 20.0;
    try {
        ExternalEvaluatorSession s(wrong_protocol);
        s.evaluate(arch);
        CHECK(false);
    } catch (const protocol_error& e) {
        CHECK(e.what_kind() == protocol_error::kind::version_mismatch);
    }

    try {
        ExternalProcessParams empty_cmd;  // never spawnable
        ExternalEvaluatorSession s(empty_cmd);
        CHECK(false);
    } catch (const protocol_error& e) {
        CHECK(e.what_kind() == protocol_error::kind::spawn_failed);
    }

    ExternalProcessParams crash;
    crash.command = echo_cmd("--fail-mode crash");
    crash.timeout_s = 20.0;
    try {
        ExternalEvaluatorSession s(crash);
        s.evaluate(arch);
        CHECK(false);
    } catch (const protocol_error& e) {
        CHECK(e.what_kind() == protocol_error::kind::process_exit);
    }

    ExternalProcessParams out_of_range;
    out_of_range.command = echo_cmd("--accuracy 7.5");
    out_of_range.timeout_s = 20.0;
    try {
        ExternalEvaluatorSession s(out_of_range);
        s.evaluate(arch);
        CHECK(false);
    } catch (const protocol_error& e) {
        CHECK(e.what_kind() == protocol_error::kind::malformed_reply);
    }
}

TEST_CASE("faults after a good reply only poison later requests") {
    Fixture fx;
    const auto arch = export_json(fx.spec);
    ExternalProcessParams params;
    params.command = echo_cmd("--fail-mode crash --fail-after 2");
    params.timeout_s = 20.0;
    ExternalEvaluatorSession session(params);
    CHECK(session.evaluate(arch) == EvalResult{0.5, 1.0});
    CHECK(session.evaluate(arch) == EvalResult{0.5, 1.0});
    CHECK_THROWS_AS(session.evaluate(arch), protocol_error);
    CHECK_FALSE(session.alive());
}

TEST_CASE("a python evaluator sees the architecture and the proxy hint") {
    Fixture fx;
    const std::string dir = testutil::make_temp_dir("pyeval");
    // replies with metrics derived from the request so the test can see what
    // actually arrived over the wire
    testutil::spit(dir + "/eval.py",
                   "import sys, json\n"
                   "for line in sys.stdin:\n"
                   "    req = json.loads(line)\n"
                   "    if req.get('cmd') == 'shutdown':\n"
                   "        break\n"
                   "    arch = req['architecture']\n"
                   "    nodes = sum(len(d['nodes']) for h in arch['hierarchies'] for d in h['dags'])\n"
                   "    reply = {'id': req['id'],\n"
                   "             'accuracy': req.get('proxy_size', 0) / 1000.0,\n"
                   "             'latency_ms': float(nodes)}\n"
                   "    print(json.dumps(reply), flush=True)\n");

    ExternalProcessParams params;
    params.command = "python3 " + dir + "/eval.py";
    params.timeout_s = 30.0;
    params.proxy_size = 500;
    ExternalEvaluatorSession session(params);
    const auto r = session.evaluate(export_json(fx.spec));
    CHECK(r.accuracy == doctest::Approx(0.5));
    int nodes = 0;
    for (const auto& hierarchy : fx.spec.hierarchies)
        for (const auto& dag : hierarchy.dags) nodes += static_cast<int>(dag.nodes.size());
    CHECK(r.latency_ms == doctest::Approx(static_cast<double>(nodes)));
    session.shutdown();

    // without the hint the request omits the field entirely
    params.proxy_size.reset();
    ExternalEvaluatorSession bare(params);
    CHECK(bare.evaluate(export_json(fx.spec)).accuracy == doctest::Approx(0.0));
    bare.shutdown();
    std::filesystem::remove_all(dir);
}

TEST_CASE("evaluation sessions respawn after a fault") {
    Fixture fx;
    EvaluatorBinding binding;
    binding.kind = EvaluatorBinding::Kind::external_process;
    binding.external.command = echo_cmd("--fail-mode crash --fail-after 1");
    binding.external.timeout_s = 20.0;
    EvaluationSession session(binding);
    CHECK(session.evaluate(fx.spec, fx.sample) == EvalResult{0.5, 1.0});
    CHECK_THROWS_AS(session.evaluate(fx.spec, fx.sample), protocol_error);
    // a fresh child makes the next request succeed again
    CHECK(session.evaluate(fx.spec, fx.sample) == EvalResult{0.5, 1.0});
    session.shutdown();
}
