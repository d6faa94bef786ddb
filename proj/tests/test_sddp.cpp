#include <doctest.h>

#include <cmath>
#include <random>

#include "msrt/sddp.hpp"
#include "oracles.hpp"

using namespace msrt;

namespace {

TrainOptions quick_opts(std::uint64_t seed = 1, long max_iters = 80) {
    TrainOptions o;
    o.max_iters = max_iters;
    o.stop_window = 15;
    o.stop_epsilon = 1e-9;
    o.stat_paths = 20;
    // oracle-equivalence tests want full convergence, not an early
    // statistical exit
    o.stat_check_every = 1000000;
    o.seed = seed;
    return o;
}

}  // namespace

TEST_CASE("single fraction training returns immediately with the exact bound") {
    std::mt19937_64 rng(3);
    PlanningProblem prob = test::random_tiny_problem(rng, 1, 3, 4, 2);
    auto [policy, report] = train(prob, RiskMeasure::expectation(), quick_opts());
    CHECK(report.iterations == 1);
    CHECK(report.stop_reason == "single_stage");
    const double oracle = test::extensive_expected_value(prob);
    CHECK(lower_bound(policy) == doctest::Approx(oracle).epsilon(1e-6));
}

TEST_CASE("risk neutral bound converges to the extensive optimum on tiny trees") {
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 3; ++rep) {
        const int F = 2 + static_cast<int>(rng() % 2);
        const int P = 2 + static_cast<int>(rng() % 2);
        PlanningProblem prob = test::random_tiny_problem(rng, F, P, 4, 2);
        auto [policy, report] = train(prob, RiskMeasure::expectation(), quick_opts(rep * 7 + 1, 50));
        const double oracle = test::extensive_expected_value(prob);
        CHECK_MESSAGE(std::abs(lower_bound(policy) - oracle) <= 1e-4 * (1.0 + std::abs(oracle)),
                      "F=" << F << " P=" << P << " lb=" << lower_bound(policy)
                           << " oracle=" << oracle);
        CHECK(lower_bound(policy) <= oracle + 1e-6 * (1.0 + std::abs(oracle)));
    }
}

TEST_CASE("worst case bound converges to the minimax oracle") {
    std::mt19937_64 rng(23);
    for (int rep = 0; rep < 3; ++rep) {
        const int F = 2 + static_cast<int>(rng() % 2);
        const int P = 2 + static_cast<int>(rng() % 2);
        PlanningProblem prob = test::random_tiny_problem(rng, F, P, 4, 2);
        auto [policy, report] = train(prob, RiskMeasure::worst(), quick_opts(rep * 5 + 2, 120));
        const double oracle = test::extensive_worst_case_value(prob);
        CHECK_MESSAGE(std::abs(lower_bound(policy) - oracle) <= 1e-4 * (1.0 + std::abs(oracle)),
                      "F=" << F << " P=" << P << " lb=" << lower_bound(policy)
                           << " oracle=" << oracle);
    }
}

TEST_CASE("lower bound history is monotone nondecreasing") {
    std::mt19937_64 rng(31);
    PlanningProblem prob = test::random_tiny_problem(rng, 3, 3, 5, 3);
    for (const auto& rm : {RiskMeasure::expectation(), RiskMeasure::avar(0.8),
                           RiskMeasure::parse("E+worst")}) {
        auto [policy, report] = train(prob, rm, quick_opts(5, 60));
        for (size_t k = 1; k < report.lb_history.size(); ++k)
            CHECK(report.lb_history[k] >= report.lb_history[k - 1] - 1e-9);
    }
}

TEST_CASE("cuts underestimate the exact cost-to-go at random states") {
    std::mt19937_64 rng(41);
    PlanningProblem prob = test::random_tiny_problem(rng, 2, 2, 3, 2);
    auto [policy, report] = train(prob, RiskMeasure::expectation(), quick_opts(9, 30));
    REQUIRE(policy.cuts.size() == 1);
    REQUIRE(!policy.cuts[0].empty());
    std::uniform_real_distribution<double> sd(0.0, 3.0);
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<double> state(static_cast<size_t>(prob.n_voxels()));
        for (auto& s : state) s = sd(rng);
        const double exact = test::extensive_expected_value(prob, 1, state);
        for (const auto& cut : policy.cuts[0]) {
            double val = cut.intercept;
            for (int i = 0; i < prob.n_voxels(); ++i)
                val += cut.gradient[static_cast<size_t>(i)] * state[static_cast<size_t>(i)];
            CHECK(val <= exact + 1e-7 * (1.0 + std::abs(exact)));
        }
    }
}

TEST_CASE("single-atom support reproduces the deterministic optimum for all measures") {
    std::mt19937_64 rng(57);
    PlanningProblem prob = test::random_tiny_problem(rng, 3, 1, 4, 2);
    const double det = lp::solve(extensive_deterministic_lp(prob)).objective;
    for (const char* rms : {"E", "avar:0.8", "worst", "E+avar:0.8", "E+worst"}) {
        auto [policy, report] = train(prob, RiskMeasure::parse(rms), quick_opts(3, 60));
        CHECK_MESSAGE(std::abs(lower_bound(policy) - det) <= 1e-5 * (1.0 + std::abs(det)),
                      "measure " << rms);
    }
}

TEST_CASE("zero-cost problem trains to a zero bound") {
    std::mt19937_64 rng(71);
    PlanningProblem prob = test::random_tiny_problem(rng, 2, 2, 3, 2);
    for (auto& v : prob.voxels) {
        v.w_stage_plus = v.w_stage_minus = 0.0;
        v.w_end_plus = v.w_end_minus = 0.0;
    }
    auto [policy, report] = train(prob, RiskMeasure::expectation(), quick_opts(1, 30));
    CHECK(lower_bound(policy) == doctest::Approx(0.0));
}

TEST_CASE("should_stop applies the documented rules") {
    TrainOptions o;
    o.max_iters = 100;
    o.stop_window = 20;
    o.stop_epsilon = 1e-4;
    // flat bound for risk-averse training stalls
    std::vector<double> flat(25, 3.0);
    auto d = should_stop(flat, {}, RiskMeasure::worst(), o);
    CHECK(d.stop);
    CHECK(d.reason == "bound_stall");
    // improving bound keeps going
    std::vector<double> rising;
    for (int i = 0; i < 25; ++i) rising.push_back(i * 0.1);
    CHECK_FALSE(should_stop(rising, {}, RiskMeasure::worst(), o).stop);
    // statistical rule for the risk-neutral measure: the bound must clear
    // mean - 1.96 * std / sqrt(M)
    std::vector<double> lb(25, 10.0);
    std::vector<double> costs;
    for (int i = 0; i < 50; ++i) costs.push_back(i % 2 == 0 ? 9.5 : 10.7);
    d = should_stop(lb, costs, RiskMeasure::expectation(), o);
    CHECK(d.stop);
    CHECK(d.reason == "statistical");
    // far-away forward costs do not stop it
    std::vector<double> costs2;
    for (int i = 0; i < 50; ++i) costs2.push_back(20.0 + (i % 5));
    CHECK_FALSE(should_stop(lb, costs2, RiskMeasure::expectation(), o).stop);
    // iteration cap, any measure
    std::vector<double> many(100, 1.0);
    d = should_stop(many, {}, RiskMeasure::expectation(), o);
    CHECK(d.stop);
    CHECK(d.reason == "max_iters");
}

TEST_CASE("lower_bound rejects untrained policies") {
    StagePolicy p;
    CHECK_THROWS_AS(lower_bound(p), StateError);
}

TEST_CASE("policy json round trip preserves cuts and metadata") {
    std::mt19937_64 rng(83);
    PlanningProblem prob = test::random_tiny_problem(rng, 3, 2, 3, 2);
    auto [policy, report] = train(prob, RiskMeasure::avar(0.8), quick_opts(2, 25));
    StagePolicy restored = policy_from_json(policy_to_json(policy));
    CHECK(restored.risk.str() == policy.risk.str());
    CHECK(restored.fractions == policy.fractions);
    CHECK(restored.n_state == policy.n_state);
    CHECK(restored.lb_history == policy.lb_history);
    CHECK(restored.state_voxels == policy.state_voxels);
    REQUIRE(restored.cuts.size() == policy.cuts.size());
    for (size_t f = 0; f < policy.cuts.size(); ++f) {
        REQUIRE(restored.cuts[f].size() == policy.cuts[f].size());
        for (size_t k = 0; k < policy.cuts[f].size(); ++k) {
            CHECK(restored.cuts[f][k].intercept == policy.cuts[f][k].intercept);
            CHECK(restored.cuts[f][k].gradient == policy.cuts[f][k].gradient);
        }
    }
}

TEST_CASE("training is deterministic for a fixed seed") {
    std::mt19937_64 rng(97);
    PlanningProblem prob = test::random_tiny_problem(rng, 2, 3, 4, 2);
    auto [p1, r1] = train(prob, RiskMeasure::worst(), quick_opts(42, 30));
    auto [p2, r2] = train(prob, RiskMeasure::worst(), quick_opts(42, 30));
    CHECK(r1.lb_history == r2.lb_history);
    CHECK(r1.stop_reason == r2.stop_reason);
    CHECK(policy_to_json(p1) == policy_to_json(p2));
}
