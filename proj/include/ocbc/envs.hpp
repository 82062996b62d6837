#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ocbc/mdp.hpp"
#include "ocbc/outcomes.hpp"

namespace ocbc {

struct Environment {
    TabularMDP mdp;
    TaskSpace tasks;
};

/// One-step bandit embedded as start state 0 followed by an absorbing terminal
/// state 1 + a for each action a. Terminal 1 + a is labeled e with probability
/// success(a, e); a trailing null outcome takes the remaining mass and labels
/// the start state.
struct BanditSpec {
    /// success(a, e), rows summing to at most 1.
    RowMatrix success;
    /// Commanded prior over the real tasks; uniform when empty.
    Eigen::VectorXd prior;
    double discount = 0.9;
    std::vector<std::string> task_names;
};

Environment make_bandit(const BanditSpec& spec);

inline int bandit_terminal(int action) { return action + 1; }

/// Three actions, three tasks plus the null outcome, uniform prior, gamma 0.9.
/// a1 succeeds at every task with probability 0.3; a2 only at e2 and a3 only
/// at e3, each with probability 0.4.
Environment make_three_task_bandit();

/// Starting behavior for the three-task bandit: e1 uniform, e2 (0.1, 0.8, 0.1),
/// e3 (0.1, 0.1, 0.8).
ConditionedPolicy three_task_initial_behavior(const Environment& env);

/// Two equal-prior tasks over a grid of actions on [0, 1]. Task success at
/// action x is height * exp(-(x - peak)^2 / (2 overlap^2)); peaks sit at
/// 0.5 -/+ peak_separation / 2. overlap = 0 gives point-mass profiles on the
/// grid action nearest each peak.
struct TwoTaskBanditSpec {
    int grid_size = 21;
    double peak_separation = 0.5;
    double overlap = 0.3;
    double height = 0.5;
    /// Width of the Gaussian starting behaviors around each peak.
    double behavior_width = 0.1;
    double discount = 0.9;
};

/// Throws InvalidInput for grid_size < 3 or identical task profiles.
Environment make_two_task_bandit(const TwoTaskBanditSpec& spec);
Environment make_two_task_bandit(int grid_size, double peak_separation, double overlap);
ConditionedPolicy two_task_initial_behavior(const TwoTaskBanditSpec& spec, const Environment& env);

enum class GridAction { Up = 0, Down = 1, Left = 2, Right = 3, Stay = 4 };

struct Cell {
    int x = 0;
    int y = 0;
    friend bool operator==(const Cell&, const Cell&) = default;
};

/// Gridworld with absorbing goal cells. A move succeeds with probability
/// 1 - slip; otherwise the action is replaced by one of the five actions
/// chosen uniformly. Moves into a wall leave the agent in place.
struct GridworldSpec {
    int width = 5;
    int height = 5;
    /// Goal cell of task i.
    std::vector<Cell> goals{{0, 0}, {4, 4}};
    /// Start cells, uniform over the list.
    std::vector<Cell> starts{{2, 2}};
    double slip = 0.02;
    /// Commanded prior over goals.
    std::vector<double> prior{0.9, 0.1};
    double discount = 0.95;
};

/// Throws InvalidInput for an invalid spec.
Environment make_two_goal_gridworld(const GridworldSpec& spec = {});

inline int grid_state(const GridworldSpec& spec, Cell c) { return c.y * spec.width + c.x; }

enum class LineLabeling { AllSuccess, WithFailure };

/// Chain of `length` states with actions {left, right}; the agent starts at
/// the center and both ends are absorbing. Outcomes are left, right and a
/// failure outcome with prior 0.
struct LineWorldSpec {
    int length = 15;
    LineLabeling labeling = LineLabeling::AllSuccess;
    double discount = 0.9;
};

struct LineWorld {
    Environment env;
    /// Evaluation reward for the left and right tasks: (1 - gamma) times the
    /// distance travelled past the center on that side over the half-length.
    std::vector<RewardTable> evaluation;
};

LineWorld make_line_world(const LineWorldSpec& spec = {});

/// Two outcomes e0 (index 0) and e1 (index 1) with L[s][e1] = r(s) and
/// L[s][e0] = 1 - r(s); only e1 is commanded. Throws InvalidInput when some
/// r(s) is outside (0, 1).
TaskSpace make_em_construction(const TabularMDP& mdp, const Eigen::VectorXd& reward);

struct EmObjectives {
    double ocbc = 0.0;
    double rwr = 0.0;
    double e0_term = 0.0;
};

/// The OCBC objective under the EM construction, the reward-weighted
/// regression objective sum d(s, a) Q(s, a) log pi(a | s, e1) with Q for
/// reward (1 - gamma) r(s), and the discarded e0 summand.
EmObjectives em_objective_equivalence(const TabularMDP& mdp, const Eigen::VectorXd& reward,
                                      const MarginalPolicy& behavior, const ConditionedPolicy& candidate);

struct RandomInstanceOptions {
    int min_states = 2;
    int max_states = 10;
    int min_actions = 1;
    int max_actions = 5;
    /// Commanded tasks; the null outcome, when enabled, comes on top.
    int min_tasks = 1;
    int max_tasks = 3;
    std::vector<double> discounts{0.0, 0.5, 0.9, 0.99};
    /// Append a null outcome with prior 0.
    bool null_outcome = true;
    /// Probability that a transition, label or policy entry is forced to zero.
    double sparsity = 0.3;
};

/// A random instance: a conditioned behavior with one policy per outcome and
/// an independent marginal behavior.
struct RandomInstance {
    TabularMDP mdp;
    TaskSpace tasks;
    ConditionedPolicy behavior;
    MarginalPolicy marginal;
};

RandomInstance make_random_instance(std::uint64_t seed, const RandomInstanceOptions& options = {});

}  // namespace ocbc
