#pragma once

#include <string>
#include <vector>

#include "ocbc/mdp.hpp"
#include "ocbc/outcomes.hpp"

namespace ocbc {

/// A conditioned policy plus the (task, state) rows that fell back to the
/// behavior row because the Bayes denominator was zero.
struct FlaggedPolicy {
    ConditionedPolicy policy;
    /// fallback[e][s]
    std::vector<std::vector<bool>> fallback;

    int fallback_count() const;
};

/// Averaging step: the posterior-weighted mixture of the task policies.
MarginalPolicy average_policy(const ConditionedPolicy& behavior, const TabularMDP& mdp,
                              const TaskSpace& tasks);

/// pi_O[e][s][a] proportional to F[e][s][a] * beta[s][a], with F computed under
/// `marginal`. Zero rows fall back to beta[s] and are flagged.
FlaggedPolicy bayes_ocbc_policy(const TabularMDP& mdp, const TaskSpace& tasks,
                                const MarginalPolicy& marginal);

/// Improvement step: beta[s][a] * F[e][s][a] / W[s][e], renormalized. The
/// division is skipped where W[s][e] = 0.
FlaggedPolicy improvement_step(const MarginalPolicy& behavior_marginal, const TabularMDP& mdp,
                               const TaskSpace& tasks, const TaskPosterior& posterior);

/// Per-outcome expected return of policy(.|., e) under outcome_reward(e).
std::vector<double> task_returns(const TabularMDP& mdp, const TaskSpace& tasks,
                                 const ConditionedPolicy& policy);

struct OcbcIterateRecord {
    int iteration = 0;
    /// The averaged behavior this iterate was fit to.
    MarginalPolicy marginal;
    /// The iterate itself.
    ConditionedPolicy policy;
    std::vector<double> returns;
    double objective = 0.0;
    int fallback_rows = 0;
};

/// Returns -infinity when the candidate puts zero probability on an action
/// that carries data mass.
double ocbc_objective(const ConditionedPolicy& candidate, const TabularMDP& mdp,
                      const TaskSpace& tasks, const MarginalPolicy& behavior_marginal);

/// One exact application: average the task behaviors, then apply Bayes' rule.
OcbcIterateRecord ocbc_iterate(const ConditionedPolicy& behavior, const TabularMDP& mdp,
                               const TaskSpace& tasks);

/// Records 0..num_iters. Record 0 describes the initial behavior (its
/// objective is measured against its own average); record k is the k-th
/// iterate.
std::vector<OcbcIterateRecord> iterate_ocbc(const ConditionedPolicy& behavior, const TabularMDP& mdp,
                                            const TaskSpace& tasks, int num_iters);

/// CSV with header iteration,task,return,objective; one row per commanded task.
std::string iterate_csv(const std::vector<OcbcIterateRecord>& records, const TaskSpace& tasks);

}  // namespace ocbc
