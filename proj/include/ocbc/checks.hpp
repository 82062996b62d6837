#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ocbc {

/// Pass/fail counts of a randomized property run. `worst` is the value
/// closest to (or furthest past) the property's threshold.
struct CheckSummary {
    std::string name;
    int passed = 0;
    int failed = 0;
    double worst = 0.0;

    bool ok() const { return failed == 0; }
};

/// max |F - Q_e| < 1e-9 on random instances (|S| <= 10, |A| <= 5, |E| <= 4,
/// gamma in {0, 0.5, 0.9, 0.99}). worst: largest discrepancy.
CheckSummary check_outcome_identity_random(int count, std::uint64_t seed);

/// sum_a pi_O Q^beta >= sum_a beta Q^beta - 1e-12 at every state for random
/// (MDP, marginal behavior, task) tuples. worst: smallest slack.
CheckSummary check_jensen_random(int count, std::uint64_t seed);

/// OCBC objective = RWR objective + e0 term within 1e-12 under the EM
/// construction. worst: largest discrepancy.
CheckSummary check_em_equivalence_random(int count, std::uint64_t seed);

/// Iterated OCBC with only e1 commanded never lowers the e1 return (tolerance
/// 1e-12). worst: most negative change between iterations.
CheckSummary check_em_monotone_random(int count, int iterations, std::uint64_t seed);

struct SuboptimalityCase {
    std::uint64_t seed = 0;
    double discount = 0.0;
    double epsilon = 0.0;
    double gap = 0.0;
    double bound = 0.0;
    double premise_gap = 0.0;
    bool holds = true;
};

struct SuboptimalitySuite {
    std::vector<SuboptimalityCase> cases;
    CheckSummary summary;
    /// Cases whose bound is below 1 (returns live in [0, 1]).
    int non_vacuous = 0;
};

/// Exact filtered normalized OCBC on random 6-state, 3-action, two-task
/// instances with gamma drawn from {0.1, 0.3, 0.5, 0.7, 0.9}; each case checks
/// the tail gap against 2 gamma eps / (1 - gamma)^2. worst: largest gap/bound.
SuboptimalitySuite check_suboptimality_random(int num_seeds, const std::vector<double>& epsilons, int iterations,
                                std::uint64_t seed);

}  // namespace ocbc
