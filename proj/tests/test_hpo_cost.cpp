#include <doctest.h>

#include <cmath>

#include "foclab/cost.hpp"
#include "foclab/errors.hpp"
#include "foclab/hpo.hpp"
#include "foclab/rng.hpp"

using namespace foclab;

TEST_CASE("hpo finds a 1-D quadratic minimum") {
    HPOSpace space;
    space.params = {{"x", ParamSpec::Kind::Continuous, -5.0, 5.0, false, {}}};
    space.budget = 20;
    space.seed = 3;
    const double x_star = 1.234;
    HPOResult res = hpo_search(
        space, [&](const TrialParams& p) { return std::pow(p.at("x") - x_star, 2); });
    REQUIRE(res.best_index >= 0);
    const double got = res.best().params.at("x");
    // within 5% of the search range of the analytic minimum
    CHECK(std::abs(got - x_star) <= 0.05 * 10.0);
}

TEST_CASE("hpo budget 2 returns the better of two random trials") {
    HPOSpace space;
    space.params = {{"x", ParamSpec::Kind::Continuous, 0.0, 1.0, false, {}}};
    space.budget = 2;
    space.seed = 5;
    HPOResult res =
        hpo_search(space, [](const TrialParams& p) { return p.at("x"); });
    REQUIRE(res.trials.size() == 2);
    CHECK(res.best().value ==
          std::min(res.trials[0].value, res.trials[1].value));
}

TEST_CASE("hpo is reproducible trial by trial") {
    HPOSpace space;
    space.params = {
        {"x", ParamSpec::Kind::Continuous, -2.0, 2.0, false, {}},
        {"n", ParamSpec::Kind::Integer, 1, 8, false, {}},
        {"c", ParamSpec::Kind::Choice, 0, 0, false, {0.1, 0.2, 0.4}},
    };
    space.budget = 15;
    space.seed = 11;
    auto objective = [](const TrialParams& p) {
        return std::abs(p.at("x")) + 0.01 * p.at("n") + p.at("c");
    };
    HPOResult a = hpo_search(space, objective);
    HPOResult b = hpo_search(space, objective);
    REQUIRE(a.trials.size() == b.trials.size());
    for (std::size_t i = 0; i < a.trials.size(); ++i) {
        CHECK(a.trials[i].value == b.trials[i].value);
        CHECK(a.trials[i].params == b.trials[i].params);
    }
    CHECK(a.best_index == b.best_index);
}

TEST_CASE("hpo bayes beats the random-search median on a smooth objective") {
    HPOSpace space;
    space.params = {{"x", ParamSpec::Kind::Continuous, -3.0, 3.0, false, {}},
                    {"y", ParamSpec::Kind::Continuous, -3.0, 3.0, false, {}}};
    space.budget = 30;
    space.seed = 2;
    auto objective = [](const TrialParams& p) {
        const double x = p.at("x"), y = p.at("y");
        return (x - 0.7) * (x - 0.7) + (y + 1.1) * (y + 1.1);
    };
    HPOResult bo = hpo_search(space, objective);

    HPOSpace rnd = space;
    rnd.mode = HPOSpace::Mode::Random;
    HPOResult rs = hpo_search(rnd, objective);
    std::vector<double> values;
    for (const auto& t : rs.trials) values.push_back(t.value);
    std::sort(values.begin(), values.end());
    const double median = values[values.size() / 2];
    CHECK(bo.best().value <= median);
}

TEST_CASE("hpo surfaces total failure with the trial count") {
    HPOSpace space;
    space.params = {{"x", ParamSpec::Kind::Continuous, 0.0, 1.0, false, {}}};
    space.budget = 4;
    space.seed = 1;
    CHECK_THROWS_AS(
        hpo_search(space,
                   [](const TrialParams&) -> double { throw DomainError("boom"); }),
        Error);
}

TEST_CASE("macc matches a brute-force layer walk on random architectures") {
    Rng rng(7);
    for (int t = 0; t < 100; ++t) {
        const int a = 2 + static_cast<int>(rng.index(10));
        const int b = 2 + static_cast<int>(rng.index(14));
        const int c = 2 + static_cast<int>(rng.index(7));
        TinyFCModel m = build_tinyfc({a, b, b, b, c}, t);

        // independent walk straight off the specs
        std::size_t expect = 3 + 1;  // input normalization + output scaling
        for (const auto& br : m.branches) {
            for (const auto& l : br) {
                expect += static_cast<std::size_t>(l.spec.in_width) * l.spec.out_width;
                expect += l.spec.out_width;  // bias
                if (l.spec.residual_from) expect += l.spec.out_width;
                if (l.spec.activation != Activation::Identity) expect += l.spec.out_width;
            }
        }
        expect += static_cast<std::size_t>(m.merge.spec.in_width) + 1 + 1;
        CHECK(count_macc(m) == expect);
    }
}

TEST_CASE("reference architecture cost anchors") {
    TinyFCModel m = build_tinyfc(kDefaultBranchWidths, 0);
    const std::size_t macc = count_macc(m);
    CHECK(macc >= 1400);
    CHECK(macc <= 1900);

    MemoryEstimate mem = estimate_memory(m);
    CHECK(mem.weight_bytes == m.param_count() * 4 + kModelHeaderBytes);
    // ~5.6 KiB of float weights, Table-5 scale
    CHECK(mem.weight_bytes > 5000);
    CHECK(mem.weight_bytes < 6500);
    CHECK(mem.activation_bytes > 0);
}

TEST_CASE("activation peak on a hand-scheduled toy") {
    // widths {4,2,2,2,2}: schedule branch0 (ops 0-4), branch1 (5-9), merge.
    // Live sets peak at 9 elements (input 3 + act1 4 + act2 2) in each
    // branch's second op; bytes = 9 * 4.
    TinyFCModel m = build_tinyfc({4, 2, 2, 2, 2}, 1);
    MemoryEstimate mem = estimate_memory(m);
    CHECK(mem.activation_bytes == 9 * 4);
}

TEST_CASE("latency stats are ordered and batched sanely") {
    TinyFCModel m = build_tinyfc(kDefaultBranchWidths, 1);
    m.input_norm = {{0, 0, 0}, {1, 1, 1}, true};
    LatencyStats st = bench_latency(m, 100);
    CHECK(st.min_us <= st.median_us);
    CHECK(st.median_us <= st.p99_us);
    CHECK(st.inner_iterations >= 1);
    CHECK(st.n_runs == 100);
    CHECK_THROWS_AS(bench_latency(m, 50), DomainError);
}

TEST_CASE("median latency orders by model size (majority vote)") {
    TinyFCModel big = build_tinyfc(kDefaultBranchWidths, 1);
    big.input_norm = {{0, 0, 0}, {1, 1, 1}, true};
    TinyFCModel small = build_tinyfc({2, 2, 2, 2, 2}, 1);
    small.input_norm = {{0, 0, 0}, {1, 1, 1}, true};
    int votes = 0;
    for (int rep = 0; rep < 10; ++rep) {
        const LatencyStats lb = bench_latency(big, 100);
        const LatencyStats ls = bench_latency(small, 100);
        if (ls.median_us < lb.median_us) ++votes;
    }
    CHECK(votes >= 6);
}

TEST_CASE("int8 memory estimate tracks the quarter-size trend") {
    TinyFCModel m = build_tinyfc(kDefaultBranchWidths, 2);
    m.input_norm = {{0, 0, 0}, {1, 1, 1}, true};
    m.target_scale = 1.0;
    Rng rng(3);
    std::vector<std::array<double, 3>> cal(256);
    for (auto& x : cal) {
        x = {rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(-5, 5)};
    }
    QuantizedModel q = quantize_int8(m, cal);
    const auto f = estimate_memory(m);
    const auto i8 = estimate_memory(q);
    const double fdata = static_cast<double>(f.weight_bytes - kModelHeaderBytes);
    const double qdata = static_cast<double>(i8.weight_bytes - kModelHeaderBytes);
    CHECK(std::abs(qdata - fdata / 4.0) <= 0.05 * (fdata / 4.0));
    CHECK(count_macc(q) == count_macc(m));
}
