#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ocbc {

/// Tolerance applied to probability vectors supplied by callers.
inline constexpr double kProbabilityTolerance = 1e-12;
/// Tolerance applied to quantities computed from valid inputs.
inline constexpr double kDerivedTolerance = 1e-10;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Q[s][a].
using QTable = RowMatrix;
/// V[s].
using ValueTable = Eigen::VectorXd;
/// Discounted state-action occupancy d[s][a].
using OccupancyTable = RowMatrix;

/// Plain, unchecked description of a finite MDP. This is what parsers and
/// factories produce; TabularMDP is the checked form.
struct MdpData {
    int num_states = 0;
    int num_actions = 0;
    /// transition[s][a][s']
    std::vector<std::vector<std::vector<double>>> transition;
    std::vector<double> initial_dist;
    double discount = 0.0;
};

struct Violation {
    enum class Kind { Shape, NegativeEntry, RowSum, InitialDist, Discount };
    Kind kind;
    int state = -1;
    int action = -1;
    std::string message;
};

/// Lists every invariant violation of `data`; empty when the MDP is valid.
std::vector<Violation> validate_mdp(const MdpData& data);

/// A validated finite MDP: states, actions, transition tensor, initial
/// distribution and discount in [0, 1). Immutable after construction.
class TabularMDP {
public:
    /// Throws InvalidInput listing the violations when `data` is invalid. Rows
    /// within tolerance are renormalized exactly.
    explicit TabularMDP(const MdpData& data);

    int num_states() const { return num_states_; }
    int num_actions() const { return num_actions_; }
    double discount() const { return discount_; }

    double transition(int s, int a, int next) const {
        return transition_(index(s, a), next);
    }
    /// Next-state distribution of (s, a).
    std::span<const double> successors(int s, int a) const {
        return {transition_.data() + static_cast<std::ptrdiff_t>(index(s, a)) * num_states_,
                static_cast<std::size_t>(num_states_)};
    }
    /// Row (s * num_actions + a) holds P[s][a][.].
    const RowMatrix& transition_matrix() const { return transition_; }
    const Eigen::VectorXd& initial_dist() const { return initial_; }

    /// True when every action keeps the process in `s` with probability one.
    bool is_absorbing(int s) const { return absorbing_[static_cast<std::size_t>(s)]; }

    int index(int s, int a) const { return s * num_actions_ + a; }

    MdpData data() const;
    TabularMDP with_initial_dist(const Eigen::VectorXd& initial) const;

private:
    int num_states_;
    int num_actions_;
    double discount_;
    RowMatrix transition_;
    Eigen::VectorXd initial_;
    std::vector<bool> absorbing_;
};

/// Stochastic action table pi[s][a] (task-agnostic policies such as beta(a|s)).
class MarginalPolicy {
public:
    /// Rows must be distributions within kProbabilityTolerance; they are
    /// renormalized exactly. Throws InvalidInput otherwise.
    explicit MarginalPolicy(RowMatrix table);

    static MarginalPolicy uniform(int num_states, int num_actions);
    /// Point mass on actions[s] at every state.
    static MarginalPolicy deterministic(std::span<const int> actions, int num_actions);

    int num_states() const { return static_cast<int>(table_.rows()); }
    int num_actions() const { return static_cast<int>(table_.cols()); }
    double operator()(int s, int a) const { return table_(s, a); }
    std::span<const double> row(int s) const {
        return {table_.data() + static_cast<std::ptrdiff_t>(s) * table_.cols(),
                static_cast<std::size_t>(table_.cols())};
    }
    const RowMatrix& table() const { return table_; }

private:
    RowMatrix table_;
};

/// Task-conditioned policy pi[e][s][a].
class ConditionedPolicy {
public:
    explicit ConditionedPolicy(std::vector<MarginalPolicy> per_task);

    static ConditionedPolicy uniform(int num_tasks, int num_states, int num_actions);
    /// The same marginal policy for every task.
    static ConditionedPolicy broadcast(const MarginalPolicy& policy, int num_tasks);

    int num_tasks() const { return static_cast<int>(tasks_.size()); }
    int num_states() const { return tasks_.front().num_states(); }
    int num_actions() const { return tasks_.front().num_actions(); }
    double operator()(int e, int s, int a) const { return tasks_[static_cast<std::size_t>(e)](s, a); }
    const MarginalPolicy& task(int e) const { return tasks_.at(static_cast<std::size_t>(e)); }
    const std::vector<MarginalPolicy>& tasks() const { return tasks_; }

private:
    std::vector<MarginalPolicy> tasks_;
};

/// Reward r[s][a] with a declared range that every entry respects.
class RewardTable {
public:
    RewardTable(RowMatrix values, double lo, double hi);

    /// Declared range taken from the entries themselves.
    static RewardTable from_values(RowMatrix values);

    double operator()(int s, int a) const { return values_(s, a); }
    const RowMatrix& values() const { return values_; }
    double lo() const { return lo_; }
    double hi() const { return hi_; }
    int num_states() const { return static_cast<int>(values_.rows()); }
    int num_actions() const { return static_cast<int>(values_.cols()); }

private:
    RowMatrix values_;
    double lo_;
    double hi_;
};

enum class SolveMethod { Auto, DenseLU, ValueIteration };

/// Q^pi for `reward`: the fixed point of
/// Q = r + gamma * P * (pi . Q). Dense LU over the (s, a) system by default;
/// value iteration to residual 1e-12 for large instances.
QTable exact_q(const TabularMDP& mdp, const MarginalPolicy& policy, const RewardTable& reward,
               SolveMethod method = SolveMethod::Auto);

/// max |Q - r - gamma P pi Q|.
double bellman_residual(const TabularMDP& mdp, const MarginalPolicy& policy,
                        const RewardTable& reward, const QTable& q);

ValueTable exact_v(const TabularMDP& mdp, const MarginalPolicy& policy, const RewardTable& reward);

/// E_{s0 ~ p0}[V(s0)].
double expected_return(const TabularMDP& mdp, const MarginalPolicy& policy,
                       const RewardTable& reward);

/// P_pi[s][s'] = sum_a pi[s][a] P[s][a][s'].
RowMatrix policy_transition(const TabularMDP& mdp, const MarginalPolicy& policy);

/// rho[s] = (1 - gamma) sum_t gamma^t Pr(s_t = s), from the flow equations.
Eigen::VectorXd state_occupancy(const TabularMDP& mdp, const MarginalPolicy& policy);

/// d[s][a] = rho[s] pi[s][a]; sums to one.
OccupancyTable discounted_occupancy(const TabularMDP& mdp, const MarginalPolicy& policy);

struct MonteCarloEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    int num_rollouts = 0;
    int horizon = 0;
};

/// Smallest T with gamma^T below `mass` (1 when gamma is zero).
int truncation_horizon(double discount, double mass);

/// Sampled discounted return, truncated where gamma^T < 1e-9. Rollout i uses
/// derive_seed(seed, i), so the estimate does not depend on evaluation order.
MonteCarloEstimate monte_carlo_return(const TabularMDP& mdp, const MarginalPolicy& policy,
                                      const RewardTable& reward, int num_rollouts,
                                      std::uint64_t seed);

struct OptimalSolution {
    std::vector<int> actions;
    QTable q;
    ValueTable values;
    double expected_return = 0.0;
};

/// Exact policy iteration; ties resolved toward the lowest action index.
OptimalSolution solve_optimal(const TabularMDP& mdp, const RewardTable& reward);

/// E[min(T, horizon)] where T is the first time the process is in `targets`,
/// starting from p0 under `policy`.
double expected_steps_to(const TabularMDP& mdp, const MarginalPolicy& policy,
                         std::span<const int> targets, int horizon);

}  // namespace ocbc
