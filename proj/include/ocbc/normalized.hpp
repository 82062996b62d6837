#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ocbc/iterate.hpp"
#include "ocbc/sampling.hpp"

namespace ocbc {

enum class Mode { Exact, Sampled };

/// pi_N: in exact mode the averaged behavior (identical to average_policy).
MarginalPolicy marginal_clone(const TabularMDP& mdp, const TaskSpace& tasks,
                              const ConditionedPolicy& behavior);
/// pi_N in sampled mode: smoothed action frequencies of all relabeled pairs.
MarginalPolicy marginal_clone(const RelabelCounts& counts, Smoothing smoothing);

/// pi~[e][s][a] proportional to (pi_O[e][s][a] / pi_N[s][a]) * beta[e][s][a].
/// 0/0 counts as 0; a positive numerator over a zero clone probability throws
/// InvalidInput. Rows that vanish fall back to beta[e][s] and are flagged.
FlaggedPolicy ratio_reweight(const ConditionedPolicy& ocbc_policy, const MarginalPolicy& clone,
                             const ConditionedPolicy& behavior);

/// Exact pi~ with no filtering: pi_O from Bayes' rule on the averaged
/// behavior, pi_N the averaged behavior.
FlaggedPolicy normalized_policy_exact(const TabularMDP& mdp, const TaskSpace& tasks,
                                      const ConditionedPolicy& behavior);

struct RatioDraw {
    int action = 0;
    /// True when every candidate had weight zero and the pick was uniform.
    bool fallback = false;
};

/// Draws num_candidates actions from behavior(.|state, task) and resamples
/// one with weight pi_O(a|state, task) / pi_N(a|state).
RatioDraw ratio_policy_sample(int state, int task, const ConditionedPolicy& behavior,
                              const ConditionedPolicy& ocbc_policy, const MarginalPolicy& clone,
                              int num_candidates, Rng& rng);
RatioDraw ratio_policy_sample(int state, int task, const ConditionedPolicy& behavior,
                              const ConditionedPolicy& ocbc_policy, const MarginalPolicy& clone,
                              int num_candidates, std::uint64_t seed);

struct NormalizedOptions {
    double epsilon = kInfiniteEpsilon;
    Mode mode = Mode::Exact;
    /// Sampled mode: relabeled pairs per iteration.
    std::int64_t sample_budget = 10000;
    std::uint64_t seed = 0;
    /// Sampled mode: relabel sources per trajectory.
    int horizon = 50;
};

struct NormalizedIterateRecord {
    int iteration = 0;
    MarginalPolicy clone;
    ConditionedPolicy ocbc;
    /// The normalized iterate pi~.
    ConditionedPolicy policy;
    std::vector<double> returns;
    /// Accepted share of relabels whose target is a commanded task.
    double acceptance_fraction = 1.0;
    int fallback_rows = 0;
    /// max |Q^{beta_e}(s, a, e') - Q^{beta_e'}(s, a, e')| over accepted
    /// relabels (commanded e, commanded e' != e) that carry data.
    double premise_gap = 0.0;
};

/// One step of normalized OCBC on `behavior`.
///
/// Exact mode, epsilon = infinity: normalized_policy_exact.
/// Exact mode, finite epsilon: commanded-e data at (s, a) is relabeled to e'
/// only when |Q^{beta_e}(s, a, e') - Q^{beta_e'}(s, a, e')| <= epsilon; pi_O is
/// the Bayes clone of the accepted relabel mass and pi_N the clone of all data.
/// Sampled mode: relabeled pairs from collect_relabeled with the trajectory
/// filter, fit with smoothing 1 / (n + A); cells without accepted data fall
/// back to the behavior row.
NormalizedIterateRecord normalized_ocbc_iterate(const ConditionedPolicy& behavior, const TabularMDP& mdp,
                                                const TaskSpace& tasks, const NormalizedOptions& options);

/// Records 0..num_iters; record 0 is the initial behavior. Iteration k samples
/// with derive_seed(options.seed, k).
std::vector<NormalizedIterateRecord> iterate_normalized(const ConditionedPolicy& behavior,
                                                        const TabularMDP& mdp, const TaskSpace& tasks,
                                                        int num_iters, const NormalizedOptions& options);

/// 2 gamma epsilon / (1 - gamma)^2.
double suboptimality_bound(double discount, double epsilon);

/// Largest premise gap recorded in the transcript.
double effective_epsilon(const std::vector<NormalizedIterateRecord>& transcript);

struct SuboptimalityReport {
    double epsilon = 0.0;
    double bound = 0.0;
    /// max over commanded tasks and tail records of |E V* - E V^{pi_k}|.
    double tail_gap = 0.0;
    /// Largest premise gap over the transcript.
    double premise_gap = 0.0;
    std::vector<double> optimal_returns;
    int tail_start = 0;
    bool bound_holds = true;
    bool premise_holds = true;
};

/// Compares the tail of the transcript (the last `tail_fraction` of
/// iterations) with optimal returns from policy iteration.
SuboptimalityReport check_suboptimality(const TabularMDP& mdp, const TaskSpace& tasks,
                          const std::vector<NormalizedIterateRecord>& transcript, double epsilon,
                          double tail_fraction = 0.2);

/// CSV with header iteration,task,return,acceptance_fraction,bound_value,gap;
/// gap is the optimal return minus the iterate's return.
std::string transcript_csv(const std::vector<NormalizedIterateRecord>& transcript, const TaskSpace& tasks,
                           const SuboptimalityReport& report);

}  // namespace ocbc
