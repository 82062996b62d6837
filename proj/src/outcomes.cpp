#include "ocbc/outcomes.hpp"

#include <cmath>
#include <sstream>

#include "ocbc/errors.hpp"

namespace ocbc {

namespace {

void check_distribution(const double* p, Eigen::Index n, const std::string& what) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(p[i] >= 0.0) || !std::isfinite(p[i])) {
            throw InvalidInput(what + " has a negative or non-finite entry");
        }
        sum += p[i];
    }
    if (std::abs(sum - 1.0) > kProbabilityTolerance) {
        std::ostringstream msg;
        msg << what << " sums to " << sum;
        throw InvalidInput(msg.str());
    }
}

void check_shapes(const TabularMDP& mdp, const TaskSpace& tasks) {
    if (tasks.num_states() != mdp.num_states()) {
        throw InvalidInput("task space labeler does not match the MDP's state count");
    }
}

}  // namespace

TaskSpace::TaskSpace(std::vector<std::string> names, Eigen::VectorXd prior, RowMatrix labeler,
                     std::optional<int> null_outcome)
    : names_(std::move(names)), prior_(std::move(prior)), labeler_(std::move(labeler)),
      null_outcome_(null_outcome) {
    if (prior_.size() == 0) throw InvalidInput("task space needs at least one outcome");
    if (labeler_.cols() != prior_.size()) throw InvalidInput("labeler columns must match the prior length");
    if (labeler_.rows() == 0) throw InvalidInput("labeler has no states");
    if (names_.empty()) {
        for (Eigen::Index e = 0; e < prior_.size(); ++e) names_.push_back("e" + std::to_string(e));
    }
    if (static_cast<Eigen::Index>(names_.size()) != prior_.size()) {
        throw InvalidInput("outcome names must match the prior length");
    }
    check_distribution(prior_.data(), prior_.size(), "task prior");
    prior_ /= prior_.sum();
    for (Eigen::Index s = 0; s < labeler_.rows(); ++s) {
        check_distribution(labeler_.data() + s * labeler_.cols(), labeler_.cols(),
                           "labeler row " + std::to_string(s));
        labeler_.row(s) /= labeler_.row(s).sum();
    }
    if (null_outcome_) {
        const int n = *null_outcome_;
        if (n < 0 || n >= num_tasks()) throw InvalidInput("null outcome index out of range");
        if (prior_(n) != 0.0) throw InvalidInput("null outcome must have prior 0");
    }
}

std::vector<int> TaskSpace::commanded_tasks() const {
    std::vector<int> out;
    for (int e = 0; e < num_tasks(); ++e) {
        if (prior_(e) > 0.0) out.push_back(e);
    }
    return out;
}

TaskSpace TaskSpace::with_prior(const Eigen::VectorXd& prior) const {
    return TaskSpace(names_, prior, labeler_, null_outcome_);
}

RewardTable outcome_reward(const TaskSpace& tasks, const TabularMDP& mdp, int e) {
    check_shapes(mdp, tasks);
    if (e < 0 || e >= tasks.num_tasks()) throw InvalidInput("task index out of range");
    const double scale = 1.0 - mdp.discount();
    RowMatrix r(mdp.num_states(), mdp.num_actions());
    for (int s = 0; s < mdp.num_states(); ++s) r.row(s).setConstant(scale * tasks.label(s, e));
    return RewardTable(std::move(r), 0.0, scale);
}

FutureOutcomeTable future_outcome_distribution(const TabularMDP& mdp, const TaskSpace& tasks,
                                               const MarginalPolicy& behavior) {
    check_shapes(mdp, tasks);
    const int S = mdp.num_states();
    const int A = mdp.num_actions();
    const int E = tasks.num_tasks();
    const double gamma = mdp.discount();

    // series = sum_{t < 2^J} (gamma P_beta)^t L, doubling the number of terms
    // each round until the remaining tail weight gamma^(2^J) is negligible.
    Eigen::MatrixXd power = gamma * Eigen::MatrixXd(policy_transition(mdp, behavior));
    Eigen::MatrixXd series = tasks.labeler();
    double weight = gamma;
    while (weight >= 1e-18) {
        series += power * series;
        power = power * power;
        weight *= weight;
    }
    const Eigen::MatrixXd values = (1.0 - gamma) * series;  // V_e(s) under beta
    const Eigen::MatrixXd ahead = mdp.transition_matrix() * values;  // (S*A) x E

    FutureOutcomeTable out;
    out.tables.assign(static_cast<std::size_t>(E), QTable(S, A));
    for (int e = 0; e < E; ++e) {
        QTable& f = out.tables[static_cast<std::size_t>(e)];
        for (int s = 0; s < S; ++s) {
            for (int a = 0; a < A; ++a) {
                f(s, a) = (1.0 - gamma) * tasks.label(s, e) + gamma * ahead(mdp.index(s, a), e);
            }
        }
    }
    return out;
}

double verify_outcome_identity(const TabularMDP& mdp, const TaskSpace& tasks, const MarginalPolicy& behavior) {
    const auto f = future_outcome_distribution(mdp, tasks, behavior);
    double worst = 0.0;
    for (int e = 0; e < tasks.num_tasks(); ++e) {
        const QTable q = exact_q(mdp, behavior, outcome_reward(tasks, mdp, e));
        worst = std::max(worst, (f.task(e) - q).cwiseAbs().maxCoeff());
    }
    return worst;
}

TaskPosterior commanded_task_posterior(const TabularMDP& mdp, const TaskSpace& tasks,
                                       const ConditionedPolicy& behavior) {
    check_shapes(mdp, tasks);
    if (behavior.num_tasks() != tasks.num_tasks()) {
        throw InvalidInput("conditioned behavior must have one policy per outcome");
    }
    const int S = mdp.num_states();
    const int E = tasks.num_tasks();
    RowMatrix mass = RowMatrix::Zero(S, E);
    for (int e : tasks.commanded_tasks()) {
        mass.col(e) = tasks.prior(e) * state_occupancy(mdp, behavior.task(e));
    }
    TaskPosterior out;
    out.weights.resize(S, E);
    out.defined.assign(static_cast<std::size_t>(S), false);
    for (int s = 0; s < S; ++s) {
        const double total = mass.row(s).sum();
        if (total > 0.0) {
            out.weights.row(s) = mass.row(s) / total;
            out.defined[static_cast<std::size_t>(s)] = true;
        } else {
            out.weights.row(s) = tasks.prior().transpose();
        }
    }
    return out;
}

MarginalPolicy mixture_marginal(const ConditionedPolicy& behavior, const TaskPosterior& posterior) {
    const int S = behavior.num_states();
    const int A = behavior.num_actions();
    if (posterior.weights.rows() != S || posterior.weights.cols() != behavior.num_tasks()) {
        throw InvalidInput("posterior shape does not match the conditioned behavior");
    }
    RowMatrix out = RowMatrix::Zero(S, A);
    for (int e = 0; e < behavior.num_tasks(); ++e) {
        out += posterior.weights.col(e).asDiagonal() * behavior.task(e).table();
    }
    for (int s = 0; s < S; ++s) out.row(s) /= out.row(s).sum();
    return MarginalPolicy(std::move(out));
}

TaskSpace embed_rewards(const std::vector<RewardTable>& rewards, const TabularMDP& mdp) {
    if (rewards.empty()) throw InvalidInput("embed_rewards needs at least one reward table");
    const int S = mdp.num_states();
    const int A = mdp.num_actions();
    const int E = static_cast<int>(rewards.size());
    RowMatrix state_reward(S, E);
    for (int e = 0; e < E; ++e) {
        const RewardTable& r = rewards[static_cast<std::size_t>(e)];
        if (r.num_states() != S || r.num_actions() != A) {
            throw InvalidInput("reward table " + std::to_string(e) + " does not match the MDP");
        }
        for (int s = 0; s < S; ++s) {
            for (int a = 0; a < A; ++a) {
                if (!(r(s, a) > 0.0)) {
                    throw InvalidInput("reward table " + std::to_string(e) + " has a non-positive entry");
                }
                if (r(s, a) != r(s, 0)) {
                    throw Unsupported("reward table " + std::to_string(e) +
                                      " depends on the action; only state rewards can be embedded");
                }
            }
            state_reward(s, e) = r(s, 0);
        }
    }
    const double r_max = state_reward.rowwise().sum().maxCoeff();
    RowMatrix labeler(S, E + 1);
    for (int s = 0; s < S; ++s) {
        const double total = state_reward.row(s).sum();
        if (total > r_max) throw InvalidInput("reward sum exceeds r_max");
        for (int e = 0; e < E; ++e) labeler(s, e) = state_reward(s, e) / r_max;
        labeler(s, E) = (r_max - total) / r_max;
    }
    Eigen::VectorXd prior = Eigen::VectorXd::Zero(E + 1);
    prior.head(E).setConstant(1.0 / E);
    std::vector<std::string> names;
    for (int e = 0; e < E; ++e) names.push_back("e" + std::to_string(e));
    names.emplace_back("fail");
    return TaskSpace(std::move(names), std::move(prior), std::move(labeler), E);
}

}  // namespace ocbc
