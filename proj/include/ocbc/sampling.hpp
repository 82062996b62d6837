#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ocbc/mdp.hpp"
#include "ocbc/outcomes.hpp"
#include "ocbc/random.hpp"

namespace ocbc {

/// Sentinel for "no filtering".
inline constexpr double kInfiniteEpsilon = std::numeric_limits<double>::infinity();

struct Step {
    int state = 0;
    int action = 0;
    int next_state = 0;
    /// Outcome label drawn from L[state].
    int label = 0;
};

struct Trajectory {
    int commanded_task = 0;
    std::vector<Step> steps;
    int horizon = 0;
    /// True when the rollout stopped early after one step in an absorbing state.
    bool absorbed = false;
};

/// Rollout from p0 under policy(.|., task) for at most `horizon` steps. Stops
/// after the first step taken in an absorbing state; indices past the end are
/// then read as that state looping forever.
Trajectory sample_trajectory(const TabularMDP& mdp, const TaskSpace& tasks,
                             const ConditionedPolicy& policy, int task, int horizon,
                             std::uint64_t seed);

/// Smallest max_k with gamma^max_k < 1e-6 (0 when gamma is zero).
int default_max_k(double discount);

/// k with P(k = i) proportional to gamma^i (1 - gamma) on {0..max_k}; draws
/// past max_k are redrawn.
int geometric_index(double discount, int max_k, Rng& rng);
int geometric_index(double discount, int max_k, std::uint64_t seed);

/// prod_t beta(a_t | s_t, relabel) / beta(a_t | s_t, commanded), accumulated
/// in log space. Throws MalformedData when the commanded policy gives a taken
/// action zero probability.
double importance_product(std::span<const int> states, std::span<const int> actions, int commanded,
                          int relabel, const ConditionedPolicy& behavior);

/// |product - 1| <= epsilon; epsilon = infinity accepts everything.
bool filtered_accept(std::span<const int> states, std::span<const int> actions, int commanded,
                     int relabel, const ConditionedPolicy& behavior, double epsilon);

struct RelabeledEntry {
    int t = 0;
    int state = 0;
    int action = 0;
    int commanded_task = 0;
    int relabel_task = 0;
    int k = 0;
    double importance_product = 1.0;
    bool accepted = true;
};

struct RelabeledDataset {
    std::vector<RelabeledEntry> entries;
};

/// Relabels steps 0..num_sources-1 (clipped to the trajectory length) with the
/// label found k ~ Geom(1 - gamma) steps ahead. The trajectory must extend
/// max_k steps past the last source unless it was absorbed.
std::vector<RelabeledEntry> hindsight_relabel(const Trajectory& trajectory, const TaskSpace& tasks,
                                              double discount, const ConditionedPolicy& behavior,
                                              double epsilon, std::uint64_t seed, int num_sources,
                                              int max_k);

/// Streaming counts over relabeled pairs.
struct RelabelCounts {
    RelabelCounts(int num_states, int num_actions, int num_tasks);

    int num_states;
    int num_actions;
    int num_tasks;
    /// accepted[(e * S + s) * A + a]: accepted pairs relabeled with e.
    std::vector<double> accepted;
    /// relabeled[(e * S + s) * A + a]: all pairs relabeled with e.
    std::vector<double> relabeled;
    /// visits[s * A + a]: all relabeled pairs at (s, a).
    std::vector<double> visits;
    /// cross[((c * E + e) * S + s) * A + a]: accepted pairs commanded with c
    /// and relabeled with e.
    std::vector<double> cross;
    std::int64_t total_pairs = 0;
    std::int64_t accepted_pairs = 0;
    /// Pairs whose relabel target has positive prior, and how many of those passed.
    std::int64_t commanded_target_pairs = 0;
    std::int64_t commanded_target_accepted = 0;

    void add(const RelabeledEntry& entry, const TaskSpace& tasks);
    double acceptance_fraction() const;
};

RelabelCounts count_entries(const RelabeledDataset& dataset, const TaskSpace& tasks, int num_states,
                            int num_actions);

struct SamplingOptions {
    /// Relabel sources per trajectory; rollouts extend max_k beyond this.
    int horizon = 50;
    /// Total number of relabeled (s_t, a_t) pairs.
    std::int64_t sample_budget = 10000;
    double epsilon = kInfiniteEpsilon;
    std::uint64_t seed = 0;
    /// 0 selects default_max_k.
    int max_k = 0;
    bool keep_entries = false;
};

struct SampledData {
    RelabelCounts counts;
    /// Filled only when SamplingOptions::keep_entries is set.
    RelabeledDataset dataset;
    std::int64_t num_trajectories = 0;
};

/// Collects relabeled pairs: trajectory i commands e ~ prior and follows
/// behavior(.|., e); all randomness is derived from (seed, i).
SampledData collect_relabeled(const TabularMDP& mdp, const TaskSpace& tasks,
                              const ConditionedPolicy& behavior, const SamplingOptions& options);

/// Additive smoothing for the fitted policies.
struct Smoothing {
    enum class Kind { Fixed, Adaptive };
    Kind kind = Kind::Fixed;
    /// Used when kind == Fixed.
    double delta = 0.0;

    static Smoothing fixed(double delta) { return {Kind::Fixed, delta}; }
    /// delta = 1 / (n + A) with n the samples at the cell.
    static Smoothing adaptive() { return {Kind::Adaptive, 0.0}; }
    double at(double n, int num_actions) const {
        return kind == Kind::Fixed ? delta : 1.0 / (n + num_actions);
    }
};

struct FittedPolicy {
    ConditionedPolicy policy;
    /// empty[e][s]: no accepted data for the cell; the row is the fallback.
    std::vector<std::vector<bool>> empty;
};

/// (count(s, a, e) + delta) / (count(s, e) + delta * A) over accepted pairs.
/// Cells without accepted data take `fallback` rows, or
/// the uniform row when no fallback is given.
FittedPolicy fit_conditional_policy(const RelabelCounts& counts, Smoothing smoothing,
                                    const ConditionedPolicy* fallback = nullptr);
FittedPolicy fit_conditional_policy(const RelabeledDataset& dataset, const TaskSpace& tasks,
                                    int num_states, int num_actions, double delta);

/// Smoothed frequency of actions per state over all relabeled pairs.
MarginalPolicy fit_marginal_policy(const RelabelCounts& counts, Smoothing smoothing);

/// CSV with header t,s,a,commanded_e,relabel_e,k,importance_product,accepted.
std::string dataset_csv(const RelabeledDataset& dataset);

}  // namespace ocbc
