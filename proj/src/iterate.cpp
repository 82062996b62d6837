#include "ocbc/iterate.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "ocbc/errors.hpp"
#include "text_io.hpp"

namespace ocbc {

namespace {

// Reweights `base` rows by weight[s][a] (per task) and renormalizes. Rows with
// zero total fall back to `fallback_rows[e]`.
FlaggedPolicy reweight(const std::vector<RowMatrix>& weights, const std::vector<const MarginalPolicy*>& fallback_rows) {
    const auto E = weights.size();
    std::vector<MarginalPolicy> out;
    std::vector<std::vector<bool>> flags(E);
    for (std::size_t e = 0; e < E; ++e) {
        RowMatrix table = weights[e];
        const MarginalPolicy& base = *fallback_rows[e];
        flags[e].assign(static_cast<std::size_t>(table.rows()), false);
        for (Eigen::Index s = 0; s < table.rows(); ++s) {
            const double z = table.row(s).sum();
            if (z > 0.0 && std::isfinite(z)) {
                table.row(s) /= z;
            } else {
                table.row(s) = base.table().row(s);
                flags[e][static_cast<std::size_t>(s)] = true;
            }
        }
        out.emplace_back(std::move(table));
    }
    return FlaggedPolicy{ConditionedPolicy(std::move(out)), std::move(flags)};
}

}  // namespace

int FlaggedPolicy::fallback_count() const {
    int n = 0;
    for (const auto& rows : fallback) {
        for (bool f : rows) n += f ? 1 : 0;
    }
    return n;
}

MarginalPolicy average_policy(const ConditionedPolicy& behavior, const TabularMDP& mdp,
                              const TaskSpace& tasks) {
    return mixture_marginal(behavior, commanded_task_posterior(mdp, tasks, behavior));
}

FlaggedPolicy bayes_ocbc_policy(const TabularMDP& mdp, const TaskSpace& tasks,
                                const MarginalPolicy& marginal) {
    const auto f = future_outcome_distribution(mdp, tasks, marginal);
    std::vector<RowMatrix> weights;
    for (int e = 0; e < tasks.num_tasks(); ++e) weights.push_back(f.task(e).cwiseProduct(marginal.table()));
    return reweight(weights, std::vector<const MarginalPolicy*>(weights.size(), &marginal));
}

FlaggedPolicy improvement_step(const MarginalPolicy& behavior_marginal, const TabularMDP& mdp,
                               const TaskSpace& tasks, const TaskPosterior& posterior) {
    const auto f = future_outcome_distribution(mdp, tasks, behavior_marginal);
    std::vector<RowMatrix> weights;
    for (int e = 0; e < tasks.num_tasks(); ++e) {
        RowMatrix w = f.task(e).cwiseProduct(behavior_marginal.table());
        for (Eigen::Index s = 0; s < w.rows(); ++s) {
            const double p = posterior.weights(s, e);
            if (p > 0.0) w.row(s) /= p;
        }
        weights.push_back(std::move(w));
    }
    return reweight(weights, std::vector<const MarginalPolicy*>(weights.size(), &behavior_marginal));
}

std::vector<double> task_returns(const TabularMDP& mdp, const TaskSpace& tasks,
                                 const ConditionedPolicy& policy) {
    std::vector<double> out;
    for (int e = 0; e < tasks.num_tasks(); ++e) {
        out.push_back(expected_return(mdp, policy.task(e), outcome_reward(tasks, mdp, e)));
    }
    return out;
}

double ocbc_objective(const ConditionedPolicy& candidate, const TabularMDP& mdp,
                      const TaskSpace& tasks, const MarginalPolicy& behavior_marginal) {
    if (candidate.num_tasks() != tasks.num_tasks()) {
        throw InvalidInput("candidate must have one policy per outcome");
    }
    const OccupancyTable d = discounted_occupancy(mdp, behavior_marginal);
    const auto f = future_outcome_distribution(mdp, tasks, behavior_marginal);
    double total = 0.0;
    for (int e = 0; e < tasks.num_tasks(); ++e) {
        for (int s = 0; s < mdp.num_states(); ++s) {
            for (int a = 0; a < mdp.num_actions(); ++a) {
                const double mass = d(s, a) * f(e, s, a);
                if (mass <= 0.0) continue;
                const double p = candidate(e, s, a);
                if (p <= 0.0) return -std::numeric_limits<double>::infinity();
                total += mass * std::log(p);
            }
        }
    }
    return total;
}

OcbcIterateRecord ocbc_iterate(const ConditionedPolicy& behavior, const TabularMDP& mdp,
                               const TaskSpace& tasks) {
    MarginalPolicy marginal = average_policy(behavior, mdp, tasks);
    FlaggedPolicy next = bayes_ocbc_policy(mdp, tasks, marginal);
    OcbcIterateRecord rec{1, marginal, next.policy, {}, 0.0, next.fallback_count()};
    rec.returns = task_returns(mdp, tasks, rec.policy);
    rec.objective = ocbc_objective(rec.policy, mdp, tasks, rec.marginal);
    return rec;
}

std::vector<OcbcIterateRecord> iterate_ocbc(const ConditionedPolicy& behavior, const TabularMDP& mdp,
                                            const TaskSpace& tasks, int num_iters) {
    if (num_iters < 1) throw InvalidInput("num_iters must be at least 1");
    std::vector<OcbcIterateRecord> out;
    {
        MarginalPolicy marginal = average_policy(behavior, mdp, tasks);
        OcbcIterateRecord first{0, marginal, behavior, task_returns(mdp, tasks, behavior), 0.0, 0};
        first.objective = ocbc_objective(behavior, mdp, tasks, marginal);
        out.push_back(std::move(first));
    }
    for (int k = 1; k <= num_iters; ++k) {
        OcbcIterateRecord rec = ocbc_iterate(out.back().policy, mdp, tasks);
        rec.iteration = k;
        out.push_back(std::move(rec));
    }
    return out;
}

std::string iterate_csv(const std::vector<OcbcIterateRecord>& records, const TaskSpace& tasks) {
    std::ostringstream out;
    out << "iteration,task,return,objective\n";
    for (const auto& rec : records) {
        for (int e : tasks.commanded_tasks()) {
            out << rec.iteration << ',' << e << ',' << detail::format_double(rec.returns[static_cast<std::size_t>(e)])
                << ',' << detail::format_double(rec.objective) << '\n';
        }
    }
    return out.str();
}

}  // namespace ocbc
