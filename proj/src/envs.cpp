#include "ocbc/envs.hpp"

#include <cmath>
#include <sstream>

#include "ocbc/errors.hpp"
#include "ocbc/iterate.hpp"
#include "ocbc/random.hpp"

namespace ocbc {

namespace {

MdpData blank_mdp(int S, int A, double discount) {
    MdpData d;
    d.num_states = S;
    d.num_actions = A;
    d.discount = discount;
    d.transition.assign(static_cast<std::size_t>(S),
                        std::vector<std::vector<double>>(static_cast<std::size_t>(A),
                                                         std::vector<double>(static_cast<std::size_t>(S), 0.0)));
    d.initial_dist.assign(static_cast<std::size_t>(S), 0.0);
    return d;
}

// Dirichlet(1, ..., 1) draw with entries zeroed at rate `sparsity`; at least
// one entry stays positive.
std::vector<double> random_simplex(Rng& rng, int n, double sparsity) {
    std::vector<double> out(static_cast<std::size_t>(n));
    double total = 0.0;
    for (auto& x : out) {
        x = rng.uniform() < sparsity ? 0.0 : -std::log(rng.uniform_pos());
        total += x;
    }
    if (total == 0.0) {
        out[static_cast<std::size_t>(rng.uniform_int(n))] = 1.0;
        total = 1.0;
    }
    for (auto& x : out) x /= total;
    return out;
}

RowMatrix random_policy_table(Rng& rng, int S, int A, double sparsity) {
    RowMatrix t(S, A);
    for (int s = 0; s < S; ++s) {
        const auto row = random_simplex(rng, A, sparsity);
        for (int a = 0; a < A; ++a) t(s, a) = row[static_cast<std::size_t>(a)];
    }
    return t;
}

}  // namespace

Environment make_bandit(const BanditSpec& spec) {
    const int A = static_cast<int>(spec.success.rows());
    const int E = static_cast<int>(spec.success.cols());
    if (A < 1 || E < 1) throw InvalidInput("bandit needs at least one action and one task");
    for (int a = 0; a < A; ++a) {
        const double sum = spec.success.row(a).sum();
        if (spec.success.row(a).minCoeff() < 0.0 || sum > 1.0 + kProbabilityTolerance) {
            throw InvalidInput("bandit success row " + std::to_string(a) + " is not a sub-distribution");
        }
    }
    const int S = A + 1;
    MdpData d = blank_mdp(S, A, spec.discount);
    for (int a = 0; a < A; ++a) {
        d.transition[0][static_cast<std::size_t>(a)][static_cast<std::size_t>(bandit_terminal(a))] = 1.0;
    }
    for (int s = 1; s < S; ++s) {
        for (int a = 0; a < A; ++a) d.transition[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)][static_cast<std::size_t>(s)] = 1.0;
    }
    d.initial_dist[0] = 1.0;

    RowMatrix labeler = RowMatrix::Zero(S, E + 1);
    labeler(0, E) = 1.0;
    for (int a = 0; a < A; ++a) {
        const int s = bandit_terminal(a);
        labeler.row(s).head(E) = spec.success.row(a);
        labeler(s, E) = std::max(0.0, 1.0 - spec.success.row(a).sum());
    }
    Eigen::VectorXd prior = Eigen::VectorXd::Zero(E + 1);
    if (spec.prior.size() == 0) {
        prior.head(E).setConstant(1.0 / E);
    } else if (spec.prior.size() == E) {
        prior.head(E) = spec.prior;
    } else {
        throw InvalidInput("bandit prior must have one entry per task");
    }
    std::vector<std::string> names = spec.task_names;
    if (names.empty()) {
        for (int e = 0; e < E; ++e) names.push_back("e" + std::to_string(e + 1));
    }
    if (static_cast<int>(names.size()) != E) throw InvalidInput("bandit task names must match the task count");
    names.emplace_back("none");
    return Environment{TabularMDP(d), TaskSpace(std::move(names), std::move(prior), std::move(labeler), E)};
}

Environment make_three_task_bandit() {
    BanditSpec spec;
    spec.success.resize(3, 3);
    spec.success << 0.3, 0.3, 0.3,
                    0.0, 0.4, 0.0,
                    0.0, 0.0, 0.4;
    spec.discount = 0.9;
    return make_bandit(spec);
}

ConditionedPolicy three_task_initial_behavior(const Environment& env) {
    const int S = env.mdp.num_states();
    const int A = env.mdp.num_actions();
    std::vector<MarginalPolicy> per_task;
    const double starts[4][3] = {{1.0 / 3, 1.0 / 3, 1.0 / 3}, {0.1, 0.8, 0.1}, {0.1, 0.1, 0.8}, {1.0 / 3, 1.0 / 3, 1.0 / 3}};
    for (int e = 0; e < env.tasks.num_tasks(); ++e) {
        RowMatrix t = RowMatrix::Constant(S, A, 1.0 / A);
        for (int a = 0; a < A; ++a) t(0, a) = starts[std::min(e, 3)][a];
        per_task.emplace_back(std::move(t));
    }
    return ConditionedPolicy(std::move(per_task));
}

Environment make_two_task_bandit(const TwoTaskBanditSpec& spec) {
    if (spec.grid_size < 3) throw InvalidInput("grid_size must be at least 3");
    if (!(spec.overlap >= 0.0)) throw InvalidInput("overlap must be nonnegative");
    if (!(spec.height > 0.0 && spec.height <= 1.0)) throw InvalidInput("height must be in (0, 1]");
    const int G = spec.grid_size;
    const double peaks[2] = {0.5 - spec.peak_separation / 2, 0.5 + spec.peak_separation / 2};
    RowMatrix success = RowMatrix::Zero(G, 2);
    for (int e = 0; e < 2; ++e) {
        if (spec.overlap == 0.0) {
            const int nearest = static_cast<int>(std::lround(std::clamp(peaks[e], 0.0, 1.0) * (G - 1)));
            success(nearest, e) = spec.height;
            continue;
        }
        for (int i = 0; i < G; ++i) {
            const double x = static_cast<double>(i) / (G - 1);
            const double z = (x - peaks[e]) / spec.overlap;
            success(i, e) = spec.height * std::exp(-0.5 * z * z);
        }
    }
    if ((success.col(0) - success.col(1)).cwiseAbs().maxCoeff() == 0.0) {
        throw InvalidInput("two-task bandit profiles are identical");
    }
    // Two tasks may both succeed at one action; keep each row a sub-distribution.
    for (int i = 0; i < G; ++i) {
        const double sum = success.row(i).sum();
        if (sum > 1.0) success.row(i) /= sum;
    }
    BanditSpec bandit;
    bandit.success = std::move(success);
    bandit.discount = spec.discount;
    bandit.task_names = {"left", "right"};
    return make_bandit(bandit);
}

Environment make_two_task_bandit(int grid_size, double peak_separation, double overlap) {
    TwoTaskBanditSpec spec;
    spec.grid_size = grid_size;
    spec.peak_separation = peak_separation;
    spec.overlap = overlap;
    return make_two_task_bandit(spec);
}

ConditionedPolicy two_task_initial_behavior(const TwoTaskBanditSpec& spec, const Environment& env) {
    const int S = env.mdp.num_states();
    const int A = env.mdp.num_actions();
    const double peaks[2] = {0.5 - spec.peak_separation / 2, 0.5 + spec.peak_separation / 2};
    std::vector<MarginalPolicy> per_task;
    for (int e = 0; e < env.tasks.num_tasks(); ++e) {
        RowMatrix t = RowMatrix::Constant(S, A, 1.0 / A);
        if (e < 2) {
            double total = 0.0;
            for (int a = 0; a < A; ++a) {
                const double x = static_cast<double>(a) / (A - 1);
                const double z = (x - peaks[e]) / spec.behavior_width;
                t(0, a) = std::exp(-0.5 * z * z);
                total += t(0, a);
            }
            t.row(0) /= total;
        }
        per_task.emplace_back(std::move(t));
    }
    return ConditionedPolicy(std::move(per_task));
}

Environment make_two_goal_gridworld(const GridworldSpec& spec) {
    const int W = spec.width;
    const int H = spec.height;
    if (W < 1 || H < 1) throw InvalidInput("grid dimensions must be positive");
    if (!(spec.slip >= 0.0 && spec.slip <= 1.0)) throw InvalidInput("slip must be in [0, 1]");
    if (spec.goals.empty()) throw InvalidInput("gridworld needs at least one goal");
    if (spec.prior.size() != spec.goals.size()) throw InvalidInput("prior must have one entry per goal");
    if (spec.starts.empty()) throw InvalidInput("gridworld needs a start cell");
    auto inside = [&](Cell c) { return c.x >= 0 && c.x < W && c.y >= 0 && c.y < H; };
    for (std::size_t i = 0; i < spec.goals.size(); ++i) {
        if (!inside(spec.goals[i])) throw InvalidInput("goal " + std::to_string(i) + " is outside the grid");
        for (std::size_t j = 0; j < i; ++j) {
            if (spec.goals[i] == spec.goals[j]) throw InvalidInput("goals must be distinct");
        }
    }
    for (const Cell& c : spec.starts) {
        if (!inside(c)) throw InvalidInput("start cell is outside the grid");
    }

    const int S = W * H;
    const int A = 5;
    const int moves[5][2] = {{0, -1}, {0, 1}, {-1, 0}, {1, 0}, {0, 0}};
    MdpData d = blank_mdp(S, A, spec.discount);
    std::vector<bool> goal(static_cast<std::size_t>(S), false);
    for (const Cell& g : spec.goals) goal[static_cast<std::size_t>(grid_state(spec, g))] = true;
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const int s = grid_state(spec, {x, y});
            for (int a = 0; a < A; ++a) {
                auto& row = d.transition[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)];
                if (goal[static_cast<std::size_t>(s)]) {
                    row[static_cast<std::size_t>(s)] = 1.0;
                    continue;
                }
                for (int b = 0; b < A; ++b) {
                    const double p = (b == a ? 1.0 - spec.slip : 0.0) + spec.slip / A;
                    if (p == 0.0) continue;
                    Cell next{x + moves[b][0], y + moves[b][1]};
                    if (!inside(next)) next = {x, y};
                    row[static_cast<std::size_t>(grid_state(spec, next))] += p;
                }
            }
        }
    }
    for (const Cell& c : spec.starts) {
        d.initial_dist[static_cast<std::size_t>(grid_state(spec, c))] += 1.0 / static_cast<double>(spec.starts.size());
    }

    const int E = static_cast<int>(spec.goals.size());
    RowMatrix labeler = RowMatrix::Zero(S, E + 1);
    labeler.col(E).setOnes();
    for (int e = 0; e < E; ++e) {
        const int s = grid_state(spec, spec.goals[static_cast<std::size_t>(e)]);
        labeler(s, E) = 0.0;
        labeler(s, e) = 1.0;
    }
    Eigen::VectorXd prior = Eigen::VectorXd::Zero(E + 1);
    for (int e = 0; e < E; ++e) prior(e) = spec.prior[static_cast<std::size_t>(e)];
    std::vector<std::string> names;
    for (int e = 0; e < E; ++e) names.push_back("goal" + std::to_string(e));
    names.emplace_back("none");
    return Environment{TabularMDP(d), TaskSpace(std::move(names), std::move(prior), std::move(labeler), E)};
}

LineWorld make_line_world(const LineWorldSpec& spec) {
    const int n = spec.length;
    if (n < 5 || n % 2 == 0) throw InvalidInput("line world length must be odd and at least 5");
    const int center = n / 2;
    const int half = center;
    MdpData d = blank_mdp(n, 2, spec.discount);
    for (int s = 0; s < n; ++s) {
        for (int a = 0; a < 2; ++a) {
            int next = s;
            if (s != 0 && s != n - 1) next = a == 0 ? s - 1 : s + 1;
            d.transition[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)][static_cast<std::size_t>(next)] = 1.0;
        }
    }
    d.initial_dist[static_cast<std::size_t>(center)] = 1.0;

    constexpr int kLeft = 0;
    constexpr int kRight = 1;
    constexpr int kFail = 2;
    RowMatrix labeler = RowMatrix::Zero(n, 3);
    for (int s = 0; s < n; ++s) {
        int label = kFail;
        if (spec.labeling == LineLabeling::AllSuccess) {
            if (s < center) label = kLeft;
            if (s > center) label = kRight;
        } else {
            if (s == 0) label = kLeft;
            if (s == n - 1) label = kRight;
        }
        labeler(s, label) = 1.0;
    }
    Eigen::VectorXd prior(3);
    prior << 0.5, 0.5, 0.0;
    TaskSpace tasks({"left", "right", "fail"}, std::move(prior), std::move(labeler), kFail);

    const double scale = 1.0 - spec.discount;
    std::vector<RewardTable> evaluation;
    for (int side = 0; side < 2; ++side) {
        RowMatrix r(n, 2);
        for (int s = 0; s < n; ++s) {
            const int past = side == kLeft ? center - s : s - center;
            r.row(s).setConstant(scale * std::max(0, past) / static_cast<double>(half));
        }
        evaluation.emplace_back(std::move(r), 0.0, scale);
    }
    return LineWorld{Environment{TabularMDP(d), std::move(tasks)}, std::move(evaluation)};
}

TaskSpace make_em_construction(const TabularMDP& mdp, const Eigen::VectorXd& reward) {
    const int S = mdp.num_states();
    if (reward.size() != S) throw InvalidInput("reward must have one entry per state");
    RowMatrix labeler(S, 2);
    for (int s = 0; s < S; ++s) {
        const double r = reward(s);
        if (!(r > 0.0 && r < 1.0)) {
            std::ostringstream msg;
            msg << "reward " << r << " at state " << s << " is outside (0, 1)";
            throw InvalidInput(msg.str());
        }
        labeler(s, 0) = 1.0 - r;
        labeler(s, 1) = r;
    }
    Eigen::VectorXd prior(2);
    prior << 0.0, 1.0;
    return TaskSpace({"e0", "e1"}, std::move(prior), std::move(labeler), 0);
}

EmObjectives em_objective_equivalence(const TabularMDP& mdp, const Eigen::VectorXd& reward,
                                      const MarginalPolicy& behavior, const ConditionedPolicy& candidate) {
    const TaskSpace tasks = make_em_construction(mdp, reward);
    if (candidate.num_tasks() != 2) throw InvalidInput("candidate must condition on e0 and e1");
    const int S = mdp.num_states();
    const int A = mdp.num_actions();
    RowMatrix r(S, A);
    for (int s = 0; s < S; ++s) r.row(s).setConstant((1.0 - mdp.discount()) * reward(s));
    const QTable q = exact_q(mdp, behavior, RewardTable(std::move(r), 0.0, 1.0 - mdp.discount()));
    const OccupancyTable d = discounted_occupancy(mdp, behavior);

    EmObjectives out;
    out.ocbc = ocbc_objective(candidate, mdp, tasks, behavior);
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            if (d(s, a) <= 0.0) continue;
            out.rwr += d(s, a) * q(s, a) * std::log(candidate(1, s, a));
            out.e0_term += d(s, a) * (1.0 - q(s, a)) * std::log(candidate(0, s, a));
        }
    }
    return out;
}

RandomInstance make_random_instance(std::uint64_t seed, const RandomInstanceOptions& options) {
    Rng rng(seed);
    auto pick = [&](int lo, int hi) { return lo + rng.uniform_int(hi - lo + 1); };
    const int S = pick(options.min_states, options.max_states);
    const int A = pick(options.min_actions, options.max_actions);
    const int E = pick(options.min_tasks, options.max_tasks);
    const double gamma = options.discounts[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(options.discounts.size())))];

    MdpData d = blank_mdp(S, A, gamma);
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            d.transition[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)] = random_simplex(rng, S, options.sparsity);
        }
    }
    d.initial_dist = random_simplex(rng, S, options.sparsity);
    TabularMDP mdp(d);

    const int outcomes = E + (options.null_outcome ? 1 : 0);
    RowMatrix labeler(S, outcomes);
    for (int s = 0; s < S; ++s) {
        const auto row = random_simplex(rng, outcomes, options.sparsity);
        for (int e = 0; e < outcomes; ++e) labeler(s, e) = row[static_cast<std::size_t>(e)];
    }
    Eigen::VectorXd prior = Eigen::VectorXd::Zero(outcomes);
    const auto p = random_simplex(rng, E, 0.0);
    for (int e = 0; e < E; ++e) prior(e) = p[static_cast<std::size_t>(e)];
    std::optional<int> null;
    if (options.null_outcome) null = E;
    TaskSpace tasks({}, std::move(prior), std::move(labeler), null);

    std::vector<MarginalPolicy> per_task;
    for (int e = 0; e < outcomes; ++e) per_task.emplace_back(random_policy_table(rng, S, A, options.sparsity));
    MarginalPolicy marginal(random_policy_table(rng, S, A, options.sparsity));
    return RandomInstance{std::move(mdp), std::move(tasks), ConditionedPolicy(std::move(per_task)), std::move(marginal)};
}

}  // namespace ocbc
