#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ocbc/mdp.hpp"

namespace ocbc {

/// Finite outcome set with a commanded prior p_e[e] and a state labeler
/// L[s][e] = p(e_t = e | s_t = s). One outcome may be designated as the
/// null/failure outcome; it is never commanded.
class TaskSpace {
public:
    /// Throws InvalidInput if the prior or a labeler row is not a distribution
    /// within kProbabilityTolerance, or if the null outcome has nonzero prior.
    TaskSpace(std::vector<std::string> names, Eigen::VectorXd prior, RowMatrix labeler,
              std::optional<int> null_outcome = std::nullopt);

    int num_tasks() const { return static_cast<int>(prior_.size()); }
    int num_states() const { return static_cast<int>(labeler_.rows()); }
    const std::vector<std::string>& names() const { return names_; }
    const Eigen::VectorXd& prior() const { return prior_; }
    double prior(int e) const { return prior_(e); }
    const RowMatrix& labeler() const { return labeler_; }
    double label(int s, int e) const { return labeler_(s, e); }
    std::span<const double> label_row(int s) const {
        return {labeler_.data() + static_cast<std::ptrdiff_t>(s) * labeler_.cols(),
                static_cast<std::size_t>(labeler_.cols())};
    }
    std::optional<int> null_outcome() const { return null_outcome_; }

    /// Tasks with positive prior, in index order.
    std::vector<int> commanded_tasks() const;

    TaskSpace with_prior(const Eigen::VectorXd& prior) const;

private:
    std::vector<std::string> names_;
    Eigen::VectorXd prior_;
    RowMatrix labeler_;
    std::optional<int> null_outcome_;
};

/// F[e][s][a]: discounted probability of achieving e in the future of (s, a).
struct FutureOutcomeTable {
    std::vector<QTable> tables;

    int num_tasks() const { return static_cast<int>(tables.size()); }
    double operator()(int e, int s, int a) const { return tables[static_cast<std::size_t>(e)](s, a); }
    const QTable& task(int e) const { return tables.at(static_cast<std::size_t>(e)); }
};

/// W[s][e] = p(e | s) for commanded tasks. Rows of states no task visits are
/// set to the prior and marked undefined.
struct TaskPosterior {
    RowMatrix weights;
    std::vector<bool> defined;
};

/// r_e[s][a] = (1 - gamma) L[s][e], declared range [0, 1 - gamma].
RewardTable outcome_reward(const TaskSpace& tasks, const TabularMDP& mdp, int e);

/// F[e] for every outcome. Computed from the discounted label series
/// G = (1 - gamma) sum_t (gamma P_beta)^t L, summed by repeated squaring,
/// followed by one action-level backup; this is deliberately a different
/// route from exact_q so the two can be compared.
FutureOutcomeTable future_outcome_distribution(const TabularMDP& mdp, const TaskSpace& tasks,
                                               const MarginalPolicy& behavior);

/// max over (e, s, a) of |F - Q_e| with Q_e = exact_q(outcome_reward(e)).
double verify_outcome_identity(const TabularMDP& mdp, const TaskSpace& tasks, const MarginalPolicy& behavior);

/// W[s][e] proportional to p_e[e] * rho_e[s], rho_e the discounted state
/// occupancy of the task-e behavior.
TaskPosterior commanded_task_posterior(const TabularMDP& mdp, const TaskSpace& tasks,
                                       const ConditionedPolicy& behavior);

/// beta[s][a] = sum_e W[s][e] beta_e[s][a].
MarginalPolicy mixture_marginal(const ConditionedPolicy& behavior, const TaskPosterior& posterior);

/// Labeler from positive, state-only rewards plus an appended failure outcome:
/// r_max = max_s sum_e r_e(s), r_fail = r_max - sum_e r_e and
/// L[s][e] = r_e(s) / r_max. The given tasks get a uniform prior and the
/// failure outcome is the null outcome. Throws InvalidInput for non-positive
/// rewards and Unsupported for rewards that depend on the action.
TaskSpace embed_rewards(const std::vector<RewardTable>& rewards, const TabularMDP& mdp);

}  // namespace ocbc
