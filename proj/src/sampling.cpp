#include "ocbc/sampling.hpp"

#include <cmath>
#include <sstream>

#include "ocbc/errors.hpp"
#include "text_io.hpp"

namespace ocbc {

namespace {

void check_policy(const TabularMDP& mdp, const TaskSpace& tasks, const ConditionedPolicy& policy) {
    if (policy.num_states() != mdp.num_states() || policy.num_actions() != mdp.num_actions()) {
        throw InvalidInput("conditioned policy shape does not match the MDP");
    }
    if (policy.num_tasks() != tasks.num_tasks()) {
        throw InvalidInput("conditioned policy must have one policy per outcome");
    }
}

// log of beta(a | s, relabel) / beta(a | s, commanded); sets `zero` when the
// numerator vanishes.
double log_ratio(int s, int a, int commanded, int relabel, const ConditionedPolicy& behavior, bool& zero) {
    const double den = behavior(commanded, s, a);
    if (!(den > 0.0)) {
        std::ostringstream msg;
        msg << "action " << a << " at state " << s << " has zero probability under commanded task "
            << commanded;
        throw MalformedData(msg.str());
    }
    const double num = behavior(relabel, s, a);
    zero = !(num > 0.0);
    return zero ? 0.0 : std::log(num) - std::log(den);
}

}  // namespace

Trajectory sample_trajectory(const TabularMDP& mdp, const TaskSpace& tasks,
                             const ConditionedPolicy& policy, int task, int horizon,
                             std::uint64_t seed) {
    check_policy(mdp, tasks, policy);
    if (horizon < 1) throw InvalidInput("horizon must be at least 1");
    if (task < 0 || task >= tasks.num_tasks()) throw InvalidInput("task index out of range");
    Rng rng(seed);
    Trajectory out;
    out.commanded_task = task;
    out.horizon = horizon;
    out.steps.reserve(static_cast<std::size_t>(std::min(horizon, 4096)));
    const auto p0 = std::span<const double>(mdp.initial_dist().data(), static_cast<std::size_t>(mdp.num_states()));
    int s = rng.categorical(p0);
    const MarginalPolicy& pi = policy.task(task);
    for (int t = 0; t < horizon; ++t) {
        Step step;
        step.state = s;
        step.label = rng.categorical(tasks.label_row(s));
        step.action = rng.categorical(pi.row(s));
        step.next_state = rng.categorical(mdp.successors(s, step.action));
        out.steps.push_back(step);
        if (mdp.is_absorbing(s)) {
            out.absorbed = true;
            break;
        }
        s = step.next_state;
    }
    return out;
}

int default_max_k(double discount) {
    if (discount <= 0.0) return 0;
    return truncation_horizon(discount, 1e-6);
}

int geometric_index(double discount, int max_k, Rng& rng) {
    if (!(discount >= 0.0 && discount < 1.0)) throw InvalidInput("discount outside [0, 1)");
    if (max_k < 0) throw InvalidInput("max_k must be nonnegative");
    if (discount == 0.0) return 0;
    const double log_gamma = std::log(discount);
    for (;;) {
        // P(k >= i) = P(u <= gamma^i) = gamma^i.
        const double k = std::floor(std::log(rng.uniform_pos()) / log_gamma);
        if (k <= max_k) return static_cast<int>(k);
    }
}

int geometric_index(double discount, int max_k, std::uint64_t seed) {
    Rng rng(seed);
    return geometric_index(discount, max_k, rng);
}

double importance_product(std::span<const int> states, std::span<const int> actions, int commanded,
                          int relabel, const ConditionedPolicy& behavior) {
    if (states.size() != actions.size()) throw InvalidInput("segment states and actions differ in length");
    double log_sum = 0.0;
    bool any_zero = false;
    for (std::size_t i = 0; i < states.size(); ++i) {
        bool zero = false;
        log_sum += log_ratio(states[i], actions[i], commanded, relabel, behavior, zero);
        any_zero = any_zero || zero;
    }
    return any_zero ? 0.0 : std::exp(log_sum);
}

bool filtered_accept(std::span<const int> states, std::span<const int> actions, int commanded,
                     int relabel, const ConditionedPolicy& behavior, double epsilon) {
    if (!(epsilon >= 0.0)) throw InvalidInput("epsilon must be nonnegative");
    const double product = importance_product(states, actions, commanded, relabel, behavior);
    return std::isinf(epsilon) || std::abs(product - 1.0) <= epsilon;
}

std::vector<RelabeledEntry> hindsight_relabel(const Trajectory& trajectory, const TaskSpace& tasks,
                                              double discount, const ConditionedPolicy& behavior,
                                              double epsilon, std::uint64_t seed, int num_sources,
                                              int max_k) {
    if (!(epsilon >= 0.0)) throw InvalidInput("epsilon must be nonnegative");
    const auto& steps = trajectory.steps;
    const int len = static_cast<int>(steps.size());
    const int E = tasks.num_tasks();
    const int c = trajectory.commanded_task;
    const int sources = std::min(num_sources, len);

    // Prefix sums of log ratios and of zero-ratio counts, per relabel target.
    std::vector<double> log_prefix(static_cast<std::size_t>(E) * (len + 1), 0.0);
    std::vector<int> zero_prefix(static_cast<std::size_t>(E) * (len + 1), 0);
    for (int e = 0; e < E; ++e) {
        const std::size_t base = static_cast<std::size_t>(e) * (len + 1);
        for (int j = 0; j < len; ++j) {
            bool zero = false;
            const double lr = log_ratio(steps[j].state, steps[j].action, c, e, behavior, zero);
            log_prefix[base + j + 1] = log_prefix[base + j] + lr;
            zero_prefix[base + j + 1] = zero_prefix[base + j] + (zero ? 1 : 0);
        }
    }

    Rng rng(seed);
    std::vector<RelabeledEntry> out;
    out.reserve(static_cast<std::size_t>(std::max(sources, 0)));
    for (int t = 0; t < sources; ++t) {
        const int k = geometric_index(discount, max_k, rng);
        const int j = t + k;
        int label;
        if (j < len) {
            label = steps[j].label;
        } else if (trajectory.absorbed) {
            label = rng.categorical(tasks.label_row(steps.back().state));
        } else {
            throw InvalidInput("trajectory is too short for the geometric tail");
        }
        RelabeledEntry entry;
        entry.t = t;
        entry.state = steps[t].state;
        entry.action = steps[t].action;
        entry.commanded_task = c;
        entry.relabel_task = label;
        entry.k = k;
        // Indices past an absorbed end contribute ratio 1.
        const int end = std::min(j, len - 1) + 1;
        const std::size_t base = static_cast<std::size_t>(label) * (len + 1);
        const bool zero = zero_prefix[base + end] - zero_prefix[base + t] > 0;
        entry.importance_product = zero ? 0.0 : std::exp(log_prefix[base + end] - log_prefix[base + t]);
        entry.accepted = std::isinf(epsilon) || std::abs(entry.importance_product - 1.0) <= epsilon;
        out.push_back(entry);
    }
    return out;
}

RelabelCounts::RelabelCounts(int S, int A, int E)
    : num_states(S), num_actions(A), num_tasks(E),
      accepted(static_cast<std::size_t>(E) * S * A, 0.0),
      relabeled(static_cast<std::size_t>(E) * S * A, 0.0),
      visits(static_cast<std::size_t>(S) * A, 0.0),
      cross(static_cast<std::size_t>(E) * E * S * A, 0.0) {}

void RelabelCounts::add(const RelabeledEntry& entry, const TaskSpace& tasks) {
    const std::size_t cell = static_cast<std::size_t>(entry.state) * num_actions + entry.action;
    const std::size_t idx = static_cast<std::size_t>(entry.relabel_task) * num_states * num_actions + cell;
    relabeled[idx] += 1.0;
    visits[cell] += 1.0;
    ++total_pairs;
    if (entry.accepted) {
        accepted[idx] += 1.0;
        cross[static_cast<std::size_t>(entry.commanded_task) * num_tasks * num_states * num_actions + idx] += 1.0;
        ++accepted_pairs;
    }
    if (tasks.prior(entry.relabel_task) > 0.0) {
        ++commanded_target_pairs;
        if (entry.accepted) ++commanded_target_accepted;
    }
}

double RelabelCounts::acceptance_fraction() const {
    if (commanded_target_pairs == 0) return 1.0;
    return static_cast<double>(commanded_target_accepted) / static_cast<double>(commanded_target_pairs);
}

RelabelCounts count_entries(const RelabeledDataset& dataset, const TaskSpace& tasks, int num_states,
                            int num_actions) {
    RelabelCounts counts(num_states, num_actions, tasks.num_tasks());
    for (const auto& entry : dataset.entries) counts.add(entry, tasks);
    return counts;
}

SampledData collect_relabeled(const TabularMDP& mdp, const TaskSpace& tasks,
                              const ConditionedPolicy& behavior, const SamplingOptions& options) {
    check_policy(mdp, tasks, behavior);
    if (options.horizon < 1) throw InvalidInput("horizon must be at least 1");
    if (options.sample_budget < 1) throw InvalidInput("sample budget must be at least 1");
    const int max_k = options.max_k > 0 ? options.max_k : default_max_k(mdp.discount());
    const auto prior = std::span<const double>(tasks.prior().data(), static_cast<std::size_t>(tasks.num_tasks()));
    SampledData out{RelabelCounts(mdp.num_states(), mdp.num_actions(), tasks.num_tasks()), {}, 0};
    std::int64_t remaining = options.sample_budget;
    for (std::uint64_t i = 0; remaining > 0; ++i) {
        Rng rng(derive_seed(options.seed, i));
        const int task = rng.categorical(prior);
        const std::uint64_t rollout_seed = rng.next();
        const std::uint64_t relabel_seed = rng.next();
        const Trajectory traj =
            sample_trajectory(mdp, tasks, behavior, task, options.horizon + max_k, rollout_seed);
        const int sources = static_cast<int>(std::min<std::int64_t>(options.horizon, remaining));
        const auto entries = hindsight_relabel(traj, tasks, mdp.discount(), behavior, options.epsilon,
                                               relabel_seed, sources, max_k);
        for (const auto& entry : entries) out.counts.add(entry, tasks);
        if (options.keep_entries) out.dataset.entries.insert(out.dataset.entries.end(), entries.begin(), entries.end());
        remaining -= static_cast<std::int64_t>(entries.size());
        ++out.num_trajectories;
    }
    return out;
}

FittedPolicy fit_conditional_policy(const RelabelCounts& counts, Smoothing smoothing,
                                    const ConditionedPolicy* fallback) {
    const int S = counts.num_states;
    const int A = counts.num_actions;
    const int E = counts.num_tasks;
    std::vector<MarginalPolicy> tables;
    std::vector<std::vector<bool>> empty(static_cast<std::size_t>(E), std::vector<bool>(static_cast<std::size_t>(S), false));
    for (int e = 0; e < E; ++e) {
        RowMatrix table(S, A);
        for (int s = 0; s < S; ++s) {
            const double* c = counts.accepted.data() + (static_cast<std::size_t>(e) * S + s) * A;
            double n = 0.0;
            for (int a = 0; a < A; ++a) n += c[a];
            if (n == 0.0) {
                empty[static_cast<std::size_t>(e)][static_cast<std::size_t>(s)] = true;
                if (fallback) {
                    table.row(s) = fallback->task(e).table().row(s);
                } else {
                    table.row(s).setConstant(1.0 / A);
                }
                continue;
            }
            const double delta = smoothing.at(n, A);
            const double denom = n + delta * A;
            for (int a = 0; a < A; ++a) table(s, a) = (c[a] + delta) / denom;
        }
        tables.emplace_back(std::move(table));
    }
    return FittedPolicy{ConditionedPolicy(std::move(tables)), std::move(empty)};
}

FittedPolicy fit_conditional_policy(const RelabeledDataset& dataset, const TaskSpace& tasks,
                                    int num_states, int num_actions, double delta) {
    if (dataset.entries.empty()) throw InvalidInput("dataset is empty");
    if (!(delta >= 0.0)) throw InvalidInput("smoothing must be nonnegative");
    return fit_conditional_policy(count_entries(dataset, tasks, num_states, num_actions), Smoothing::fixed(delta));
}

MarginalPolicy fit_marginal_policy(const RelabelCounts& counts, Smoothing smoothing) {
    const int S = counts.num_states;
    const int A = counts.num_actions;
    RowMatrix table(S, A);
    for (int s = 0; s < S; ++s) {
        const double* c = counts.visits.data() + static_cast<std::size_t>(s) * A;
        double n = 0.0;
        for (int a = 0; a < A; ++a) n += c[a];
        if (n == 0.0) {
            table.row(s).setConstant(1.0 / A);
            continue;
        }
        const double delta = smoothing.at(n, A);
        for (int a = 0; a < A; ++a) table(s, a) = (c[a] + delta) / (n + delta * A);
    }
    return MarginalPolicy(std::move(table));
}

std::string dataset_csv(const RelabeledDataset& dataset) {
    std::ostringstream out;
    out << "t,s,a,commanded_e,relabel_e,k,importance_product,accepted\n";
    for (const auto& e : dataset.entries) {
        out << e.t << ',' << e.state << ',' << e.action << ',' << e.commanded_task << ',' << e.relabel_task << ','
            << e.k << ',' << detail::format_double(e.importance_product) << ',' << (e.accepted ? 1 : 0) << '\n';
    }
    return out.str();
}

}  // namespace ocbc
