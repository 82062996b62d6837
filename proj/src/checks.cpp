#include "ocbc/checks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ocbc/envs.hpp"
#include "ocbc/iterate.hpp"
#include "ocbc/normalized.hpp"
#include "ocbc/random.hpp"

namespace ocbc {

namespace {

void record(CheckSummary& s, bool ok) {
    if (ok) {
        ++s.passed;
    } else {
        ++s.failed;
    }
}

Eigen::VectorXd random_state_reward(int S, Rng& rng) {
    Eigen::VectorXd r(S);
    for (int s = 0; s < S; ++s) r(s) = 0.05 + 0.9 * rng.uniform();
    return r;
}

}  // namespace

CheckSummary check_outcome_identity_random(int count, std::uint64_t seed) {
    CheckSummary out{"outcome_identity", 0, 0, 0.0};
    for (int i = 0; i < count; ++i) {
        const auto inst = make_random_instance(derive_seed(seed, static_cast<std::uint64_t>(i)));
        const double d = verify_outcome_identity(inst.mdp, inst.tasks, inst.marginal);
        out.worst = std::max(out.worst, d);
        record(out, d < 1e-9);
    }
    return out;
}

CheckSummary check_jensen_random(int count, std::uint64_t seed) {
    CheckSummary out{"jensen", 0, 0, std::numeric_limits<double>::infinity()};
    for (int i = 0; i < count; ++i) {
        const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(i));
        const auto inst = make_random_instance(s);
        Rng rng(derive_seed(s, 1));
        const int task = rng.uniform_int(inst.tasks.num_tasks());
        const auto pi_o = bayes_ocbc_policy(inst.mdp, inst.tasks, inst.marginal).policy.task(task);
        const QTable q = exact_q(inst.mdp, inst.marginal, outcome_reward(inst.tasks, inst.mdp, task));
        const Eigen::VectorXd improved = pi_o.table().cwiseProduct(q).rowwise().sum();
        const Eigen::VectorXd base = inst.marginal.table().cwiseProduct(q).rowwise().sum();
        const double slack = (improved - base).minCoeff();
        out.worst = std::min(out.worst, slack);
        record(out, slack >= -1e-12);
    }
    return out;
}

CheckSummary check_em_equivalence_random(int count, std::uint64_t seed) {
    CheckSummary out{"em_equivalence", 0, 0, 0.0};
    RandomInstanceOptions options;
    options.min_tasks = options.max_tasks = 1;
    options.null_outcome = true;
    for (int i = 0; i < count; ++i) {
        const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(i));
        const auto inst = make_random_instance(s, options);
        Rng rng(derive_seed(s, 1));
        const int S = inst.mdp.num_states();
        const int A = inst.mdp.num_actions();
        const Eigen::VectorXd reward = random_state_reward(S, rng);
        // Strictly positive candidate so both objectives stay finite.
        RandomInstanceOptions dense;
        dense.sparsity = 0.0;
        dense.min_states = dense.max_states = S;
        dense.min_actions = dense.max_actions = A;
        dense.min_tasks = dense.max_tasks = 1;
        const auto other = make_random_instance(derive_seed(s, 2), dense);
        const auto obj = em_objective_equivalence(inst.mdp, reward, inst.marginal, other.behavior);
        const double d = std::abs(obj.ocbc - (obj.rwr + obj.e0_term));
        out.worst = std::max(out.worst, d);
        record(out, d <= 1e-12);
    }
    return out;
}

CheckSummary check_em_monotone_random(int count, int iterations, std::uint64_t seed) {
    CheckSummary out{"em_monotone", 0, 0, std::numeric_limits<double>::infinity()};
    for (int i = 0; i < count; ++i) {
        const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(i));
        const auto inst = make_random_instance(s);
        Rng rng(derive_seed(s, 1));
        const TaskSpace tasks = make_em_construction(inst.mdp, random_state_reward(inst.mdp.num_states(), rng));
        const auto records = iterate_ocbc(ConditionedPolicy::broadcast(inst.marginal, 2), inst.mdp, tasks, iterations);
        double worst = std::numeric_limits<double>::infinity();
        for (std::size_t k = 1; k < records.size(); ++k) {
            worst = std::min(worst, records[k].returns[1] - records[k - 1].returns[1]);
        }
        out.worst = std::min(out.worst, worst);
        record(out, worst >= -1e-12);
    }
    return out;
}

SuboptimalitySuite check_suboptimality_random(int num_seeds, const std::vector<double>& epsilons, int iterations,
                                std::uint64_t seed) {
    SuboptimalitySuite suite;
    suite.summary.name = "suboptimality_bound";
    RandomInstanceOptions options;
    options.min_states = options.max_states = 6;
    options.min_actions = options.max_actions = 3;
    options.min_tasks = options.max_tasks = 2;
    options.discounts = {0.1, 0.3, 0.5, 0.7, 0.9};
    for (int i = 0; i < num_seeds; ++i) {
        const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(i));
        const auto inst = make_random_instance(s, options);
        const auto start = ConditionedPolicy::uniform(inst.tasks.num_tasks(), inst.mdp.num_states(),
                                                      inst.mdp.num_actions());
        for (double eps : epsilons) {
            NormalizedOptions opts;
            opts.epsilon = eps;
            const auto transcript = iterate_normalized(start, inst.mdp, inst.tasks, iterations, opts);
            const auto report = check_suboptimality(inst.mdp, inst.tasks, transcript, eps);
            SuboptimalityCase c{s, inst.mdp.discount(), eps, report.tail_gap, report.bound, report.premise_gap,
                         report.bound_holds && report.premise_holds};
            if (c.bound < 1.0) ++suite.non_vacuous;
            const double ratio = c.bound > 0.0 ? c.gap / c.bound : (c.gap > 1e-9 ? INFINITY : 0.0);
            suite.summary.worst = std::max(suite.summary.worst, ratio);
            record(suite.summary, c.holds);
            suite.cases.push_back(c);
        }
    }
    return suite;
}

}  // namespace ocbc
