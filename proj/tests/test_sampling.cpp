#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>

#include "ocbc/envs.hpp"
#include "ocbc/errors.hpp"
#include "ocbc/iterate.hpp"
#include "ocbc/sampling.hpp"
#include "test_util.hpp"

using namespace ocbc;

namespace {

/// Deterministic cycle 0 -> 1 -> ... -> S-1 -> 0 with a single action.
Environment cycle(int S, double discount) {
    MdpData d;
    d.num_states = S;
    d.num_actions = 1;
    d.discount = discount;
    d.transition.assign(static_cast<std::size_t>(S), {std::vector<double>(static_cast<std::size_t>(S), 0.0)});
    for (int s = 0; s < S; ++s) d.transition[static_cast<std::size_t>(s)][0][static_cast<std::size_t>((s + 1) % S)] = 1.0;
    d.initial_dist.assign(static_cast<std::size_t>(S), 0.0);
    d.initial_dist[0] = 1.0;
    RowMatrix L = RowMatrix::Zero(S, S);
    for (int s = 0; s < S; ++s) L(s, s) = 1.0;
    return {TabularMDP(d), TaskSpace({}, Eigen::VectorXd::Constant(S, 1.0 / S), L)};
}

}  // namespace

TEST(Trajectory, DeterministicChain) {
    const Environment env = cycle(4, 0.9);
    const auto pi = ConditionedPolicy::uniform(4, 4, 1);
    const Trajectory t = sample_trajectory(env.mdp, env.tasks, pi, 2, 10, 1);
    ASSERT_EQ(t.steps.size(), 10u);
    EXPECT_EQ(t.commanded_task, 2);
    EXPECT_FALSE(t.absorbed);
    for (int i = 0; i < 10; ++i) {
        EXPECT_EQ(t.steps[static_cast<std::size_t>(i)].state, i % 4);
        EXPECT_EQ(t.steps[static_cast<std::size_t>(i)].next_state, (i + 1) % 4);
        EXPECT_EQ(t.steps[static_cast<std::size_t>(i)].label, i % 4);
    }
    const Trajectory one = sample_trajectory(env.mdp, env.tasks, pi, 0, 1, 2);
    EXPECT_EQ(one.steps.size(), 1u);
}

TEST(Trajectory, StopsAfterOneStepInAbsorbingState) {
    const Environment env = make_three_task_bandit();
    const auto pi = three_task_initial_behavior(env);
    const Trajectory t = sample_trajectory(env.mdp, env.tasks, pi, 0, 50, 3);
    ASSERT_EQ(t.steps.size(), 2u);
    EXPECT_TRUE(t.absorbed);
    EXPECT_EQ(t.steps[1].state, bandit_terminal(t.steps[0].action));
}

TEST(Trajectory, DiscountedVisitationMatchesOccupancy) {
    const auto inst = make_random_instance(5, {5, 5, 3, 3, 1, 1, {0.8}, false, 0.0});
    const auto pi = ConditionedPolicy::broadcast(inst.marginal, 1);
    const Eigen::VectorXd rho = state_occupancy(inst.mdp, inst.marginal);
    const int horizon = truncation_horizon(0.8, 1e-9);
    std::vector<double> visit(5, 0.0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const Trajectory t = sample_trajectory(inst.mdp, inst.tasks, pi, 0, horizon, derive_seed(6, static_cast<std::uint64_t>(i)));
        double w = 0.2;
        for (const auto& step : t.steps) {
            visit[static_cast<std::size_t>(step.state)] += w / n;
            w *= 0.8;
        }
    }
    std::vector<double> exact(rho.data(), rho.data() + 5);
    EXPECT_LT(ocbc::test::total_variation(exact, visit), 0.02);
}

TEST(Geometric, ZeroDiscountAlwaysZero) {
    Rng rng(1);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(geometric_index(0.0, 10, rng), 0);
    EXPECT_EQ(default_max_k(0.0), 0);
    EXPECT_LT(std::pow(0.9, default_max_k(0.9)), 1e-6);
    EXPECT_GE(std::pow(0.9, default_max_k(0.9) - 1), 1e-6);
}

TEST(Geometric, MeanAndChiSquare) {
    const double g = 0.9;
    const int max_k = default_max_k(g);
    Rng rng(7);
    const int n = 1000000;
    std::vector<double> counts(static_cast<std::size_t>(max_k + 1), 0.0);
    double sum = 0;
    for (int i = 0; i < n; ++i) {
        const int k = geometric_index(g, max_k, rng);
        ASSERT_LE(k, max_k);
        counts[static_cast<std::size_t>(k)] += 1;
        sum += k;
    }
    EXPECT_NEAR(sum / n, g / (1 - g), 0.09);
    // Pool the tail so every expected count is at least 5.
    const double z = 1 - std::pow(g, max_k + 1);
    double chi2 = 0, tail_obs = 0, tail_exp = 0;
    int bins = 0;
    for (int k = 0; k <= max_k; ++k) {
        const double expected = n * std::pow(g, k) * (1 - g) / z;
        if (expected < 5) {
            tail_obs += counts[static_cast<std::size_t>(k)];
            tail_exp += expected;
            continue;
        }
        chi2 += std::pow(counts[static_cast<std::size_t>(k)] - expected, 2) / expected;
        ++bins;
    }
    chi2 += std::pow(tail_obs - tail_exp, 2) / tail_exp;
    ++bins;
    boost::math::chi_squared dist(bins - 1);
    EXPECT_LT(chi2, boost::math::quantile(dist, 0.99));
}

TEST(Importance, ProductAndFilter) {
    RowMatrix b0(2, 2), b1(2, 2);
    b0 << 0.5, 0.5, 0.25, 0.75;
    b1 << 0.25, 0.75, 0.5, 0.5;
    const ConditionedPolicy beta({MarginalPolicy(b0), MarginalPolicy(b1)});
    const std::vector<int> states{0, 1}, actions{1, 0};
    // (0.75 / 0.5) * (0.5 / 0.25) = 3
    EXPECT_NEAR(importance_product(states, actions, 0, 1, beta), 3.0, 1e-14);
    EXPECT_NEAR(importance_product(states, actions, 0, 0, beta), 1.0, 1e-15);
    EXPECT_TRUE(filtered_accept(states, actions, 0, 1, beta, 2.0));
    EXPECT_FALSE(filtered_accept(states, actions, 0, 1, beta, 1.5));
    EXPECT_TRUE(filtered_accept(states, actions, 0, 1, beta, kInfiniteEpsilon));
    EXPECT_THROW(filtered_accept(states, actions, 0, 1, beta, -1.0), InvalidInput);

    RowMatrix zero(2, 2);
    zero << 1.0, 0.0, 0.5, 0.5;
    const ConditionedPolicy gap({MarginalPolicy(zero), MarginalPolicy(b1)});
    // Commanded policy never takes action 1 at state 0.
    EXPECT_THROW(importance_product(states, actions, 0, 1, gap), MalformedData);
    // Relabel policy gives zero: product 0.
    EXPECT_EQ(importance_product(states, actions, 1, 0, gap), 0.0);
}

TEST(Relabel, ZeroDiscountUsesOwnLabel) {
    const auto inst = make_random_instance(9, {4, 4, 2, 2, 2, 2, {0.0}, true, 0.0});
    const Trajectory t = sample_trajectory(inst.mdp, inst.tasks, inst.behavior, 0, 20, 10);
    const auto entries = hindsight_relabel(t, inst.tasks, 0.0, inst.behavior, kInfiniteEpsilon, 11, 20, 0);
    ASSERT_EQ(entries.size(), t.steps.size());
    for (const auto& e : entries) {
        EXPECT_EQ(e.k, 0);
        EXPECT_EQ(e.relabel_task, t.steps[static_cast<std::size_t>(e.t)].label);
    }
}

TEST(Relabel, SingleOutcomeAlwaysSame) {
    const auto base = make_random_instance(12, {4, 4, 2, 2, 1, 1, {0.9}, false, 0.0});
    const Trajectory t = sample_trajectory(base.mdp, base.tasks, base.behavior, 0, 200, 13);
    for (const auto& e : hindsight_relabel(t, base.tasks, 0.9, base.behavior, kInfiniteEpsilon, 14, 50, 60)) {
        EXPECT_EQ(e.relabel_task, 0);
        EXPECT_EQ(e.importance_product, 1.0);
    }
}

TEST(Relabel, BanditDistributionMatchesF) {
    const Environment env = make_three_task_bandit();
    const auto behavior = ConditionedPolicy::uniform(env.tasks.num_tasks(), env.mdp.num_states(), 3);
    SamplingOptions options;
    options.sample_budget = 100000;
    options.seed = 15;
    const SampledData data = collect_relabeled(env.mdp, env.tasks, behavior, options);
    EXPECT_EQ(data.counts.total_pairs, 100000);
    const auto F = future_outcome_distribution(env.mdp, env.tasks, MarginalPolicy::uniform(env.mdp.num_states(), 3));
    const int E = env.tasks.num_tasks();
    const int S = env.mdp.num_states();
    for (int a = 0; a < 3; ++a) {
        std::vector<double> exact, empirical;
        double n = 0;
        for (int e = 0; e < E; ++e) n += data.counts.relabeled[static_cast<std::size_t>((e * S + 0) * 3 + a)];
        for (int e = 0; e < E; ++e) {
            exact.push_back(F(e, 0, a));
            empirical.push_back(data.counts.relabeled[static_cast<std::size_t>((e * S + 0) * 3 + a)] / n);
        }
        EXPECT_LT(ocbc::test::total_variation(exact, empirical), 0.02) << "action " << a;
    }
}

TEST(Fit, SingleEntryAndUniformCounts) {
    const Environment env = make_three_task_bandit();
    RelabeledDataset ds;
    ds.entries.push_back({0, 0, 2, 0, 1, 3, 1.0, true});
    const FittedPolicy fit = fit_conditional_policy(ds, env.tasks, env.mdp.num_states(), 3, 0.0);
    EXPECT_EQ(fit.policy(1, 0, 2), 1.0);
    EXPECT_FALSE(fit.empty[1][0]);
    EXPECT_TRUE(fit.empty[0][0]);

    RelabelCounts counts(1, 3, 1);
    for (int a = 0; a < 3; ++a) counts.accepted[static_cast<std::size_t>(a)] = 5;
    const FittedPolicy u = fit_conditional_policy(counts, Smoothing::fixed(0.0));
    for (int a = 0; a < 3; ++a) EXPECT_NEAR(u.policy(0, 0, a), 1.0 / 3.0, 1e-15);

    EXPECT_THROW(fit_conditional_policy(RelabeledDataset{}, env.tasks, env.mdp.num_states(), 3, 0.0), InvalidInput);
}

TEST(Fit, SmoothingAndFallback) {
    RelabelCounts counts(2, 2, 1);
    counts.accepted[0] = 3;  // (e0, s0, a0)
    const auto fixed = fit_conditional_policy(counts, Smoothing::fixed(1.0));
    EXPECT_NEAR(fixed.policy(0, 0, 0), 4.0 / 5.0, 1e-15);
    const auto adaptive = fit_conditional_policy(counts, Smoothing::adaptive());
    // delta = 1 / (3 + 2)
    EXPECT_NEAR(adaptive.policy(0, 0, 0), 3.2 / 3.4, 1e-15);
    RowMatrix fb(2, 2);
    fb << 0.5, 0.5, 0.9, 0.1;
    const ConditionedPolicy fallback({MarginalPolicy(fb)});
    const auto with_fb = fit_conditional_policy(counts, Smoothing::adaptive(), &fallback);
    EXPECT_TRUE(with_fb.empty[0][1]);
    EXPECT_EQ(with_fb.policy(0, 1, 0), 0.9);
}

TEST(Fit, UnsmoothedFitMaximizesLikelihood) {
    const auto inst = make_random_instance(16, {3, 3, 3, 3, 2, 2, {0.9}, true, 0.0});
    SamplingOptions options;
    options.sample_budget = 2000;
    options.seed = 17;
    const SampledData data = collect_relabeled(inst.mdp, inst.tasks, inst.behavior, options);
    const auto fit = fit_conditional_policy(data.counts, Smoothing::fixed(0.0));
    const int S = 3, A = 3;
    auto loglik = [&](int e, int s, const std::vector<double>& row) {
        double ll = 0;
        for (int a = 0; a < A; ++a) {
            const double c = data.counts.accepted[static_cast<std::size_t>((e * S + s) * A + a)];
            if (c > 0) ll += c * std::log(row[static_cast<std::size_t>(a)]);
        }
        return ll;
    };
    Rng rng(18);
    for (int e = 0; e < inst.tasks.num_tasks(); ++e) {
        for (int s = 0; s < S; ++s) {
            if (fit.empty[static_cast<std::size_t>(e)][static_cast<std::size_t>(s)]) continue;
            std::vector<double> best(fit.policy.task(e).row(s).begin(), fit.policy.task(e).row(s).end());
            const double top = loglik(e, s, best);
            for (int trial = 0; trial < 200; ++trial) {
                std::vector<double> other(3);
                double z = 0;
                for (auto& x : other) z += x = rng.uniform_pos();
                for (auto& x : other) x /= z;
                EXPECT_LE(loglik(e, s, other), top + 1e-9);
            }
        }
    }
}

TEST(Fit, BanditFitApproachesBayes) {
    const Environment env = make_three_task_bandit();
    const auto behavior = ConditionedPolicy::uniform(env.tasks.num_tasks(), env.mdp.num_states(), 3);
    SamplingOptions options;
    options.sample_budget = 100000;
    options.seed = 19;
    const SampledData data = collect_relabeled(env.mdp, env.tasks, behavior, options);
    const auto fit = fit_conditional_policy(data.counts, Smoothing::fixed(0.0));
    const auto bayes = bayes_ocbc_policy(env.mdp, env.tasks, MarginalPolicy::uniform(env.mdp.num_states(), 3));
    for (int e : env.tasks.commanded_tasks()) {
        std::vector<double> a(fit.policy.task(e).row(0).begin(), fit.policy.task(e).row(0).end());
        std::vector<double> b(bayes.policy.task(e).row(0).begin(), bayes.policy.task(e).row(0).end());
        EXPECT_LT(ocbc::test::total_variation(a, b), 0.02);
    }
}

TEST(Collect, DeterministicPerSeed) {
    const Environment env = make_two_goal_gridworld();
    const auto behavior = ConditionedPolicy::uniform(env.tasks.num_tasks(), env.mdp.num_states(), 5);
    SamplingOptions options;
    options.sample_budget = 3000;
    options.seed = 21;
    options.epsilon = 0.5;
    options.keep_entries = true;
    const SampledData a = collect_relabeled(env.mdp, env.tasks, behavior, options);
    const SampledData b = collect_relabeled(env.mdp, env.tasks, behavior, options);
    EXPECT_EQ(a.counts.accepted, b.counts.accepted);
    EXPECT_EQ(dataset_csv(a.dataset), dataset_csv(b.dataset));
    EXPECT_EQ(static_cast<std::int64_t>(a.dataset.entries.size()), 3000);
    const std::string csv = dataset_csv(a.dataset);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,s,a,commanded_e,relabel_e,k,importance_product,accepted");
    options.seed = 22;
    const SampledData c = collect_relabeled(env.mdp, env.tasks, behavior, options);
    EXPECT_NE(a.counts.accepted, c.counts.accepted);
}
