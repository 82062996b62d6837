#include "ocbc/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ocbc/errors.hpp"
#include "ocbc/random.hpp"

namespace ocbc {

namespace {

constexpr int kDenseLimit = 3000;
constexpr int kMaxValueIterations = 1000000;

std::string describe(const std::vector<Violation>& violations) {
    std::ostringstream out;
    out << "invalid MDP:";
    for (const auto& v : violations) out << "\n  " << v.message;
    return out.str();
}

void check_shape(const TabularMDP& mdp, const MarginalPolicy& policy) {
    if (policy.num_states() != mdp.num_states() || policy.num_actions() != mdp.num_actions()) {
        throw InvalidInput("policy shape does not match the MDP");
    }
}

void check_shape(const TabularMDP& mdp, const MarginalPolicy& policy, const RewardTable& reward) {
    check_shape(mdp, policy);
    if (reward.num_states() != mdp.num_states() || reward.num_actions() != mdp.num_actions()) {
        throw InvalidInput("reward shape does not match the MDP");
    }
}

// (P pi Q)[s*A + a] = sum_{s'} P[s][a][s'] sum_{a'} pi[s'][a'] Q[s'][a'].
Eigen::VectorXd backup(const TabularMDP& mdp, const MarginalPolicy& policy, const QTable& q) {
    const Eigen::VectorXd v = (policy.table().cwiseProduct(q)).rowwise().sum();
    return mdp.transition_matrix() * v;
}

QTable solve_dense(const TabularMDP& mdp, const MarginalPolicy& policy, const RewardTable& reward) {
    const int S = mdp.num_states();
    const int A = mdp.num_actions();
    const int n = S * A;
    const double gamma = mdp.discount();
    const RowMatrix& P = mdp.transition_matrix();
    const RowMatrix& pi = policy.table();

    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n);
    for (int i = 0; i < n; ++i) {
        for (int next = 0; next < S; ++next) {
            const double p = P(i, next);
            if (p == 0.0) continue;
            for (int b = 0; b < A; ++b) {
                system(i, next * A + b) -= gamma * p * pi(next, b);
            }
        }
    }
    const Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(reward.values().data(), n);
    const Eigen::VectorXd x = system.partialPivLu().solve(rhs);
    QTable q(S, A);
    Eigen::Map<Eigen::VectorXd>(q.data(), n) = x;
    return q;
}

QTable solve_iterative(const TabularMDP& mdp, const MarginalPolicy& policy,
                       const RewardTable& reward) {
    const int S = mdp.num_states();
    const int A = mdp.num_actions();
    QTable q = reward.values();
    for (int it = 0; it < kMaxValueIterations; ++it) {
        const Eigen::VectorXd b = backup(mdp, policy, q);
        QTable next = reward.values();
        Eigen::Map<Eigen::VectorXd>(next.data(), S * A) += mdp.discount() * b;
        const double change = (next - q).cwiseAbs().maxCoeff();
        q = std::move(next);
        if (change < 1e-12) return q;
    }
    throw SolverError("value iteration did not reach residual 1e-12");
}

}  // namespace

std::vector<Violation> validate_mdp(const MdpData& data) {
    std::vector<Violation> out;
    auto add = [&](Violation::Kind kind, int s, int a, std::string msg) {
        out.push_back(Violation{kind, s, a, std::move(msg)});
    };
    if (data.num_states <= 0 || data.num_actions <= 0) {
        add(Violation::Kind::Shape, -1, -1, "num_states and num_actions must be positive");
        return out;
    }
    if (!(data.discount >= 0.0 && data.discount < 1.0)) {
        std::ostringstream msg;
        msg << "discount " << data.discount << " outside [0, 1)";
        add(Violation::Kind::Discount, -1, -1, msg.str());
    }
    if (static_cast<int>(data.transition.size()) != data.num_states) {
        add(Violation::Kind::Shape, -1, -1, "transition must have num_states entries");
    } else {
        for (int s = 0; s < data.num_states; ++s) {
            const auto& rows = data.transition[static_cast<std::size_t>(s)];
            if (static_cast<int>(rows.size()) != data.num_actions) {
                add(Violation::Kind::Shape, s, -1,
                    "transition[" + std::to_string(s) + "] must have num_actions rows");
                continue;
            }
            for (int a = 0; a < data.num_actions; ++a) {
                const auto& row = rows[static_cast<std::size_t>(a)];
                const std::string where = "(s=" + std::to_string(s) + ", a=" + std::to_string(a) + ")";
                if (static_cast<int>(row.size()) != data.num_states) {
                    add(Violation::Kind::Shape, s, a, "transition row " + where + " has wrong length");
                    continue;
                }
                double sum = 0.0;
                bool negative = false;
                for (double p : row) {
                    if (!(p >= 0.0) || !std::isfinite(p)) negative = true;
                    sum += p;
                }
                if (negative) {
                    add(Violation::Kind::NegativeEntry, s, a,
                        "transition row " + where + " has a negative or non-finite entry");
                } else if (std::abs(sum - 1.0) > kProbabilityTolerance) {
                    std::ostringstream msg;
                    msg << "transition row " << where << " sums to " << sum;
                    add(Violation::Kind::RowSum, s, a, msg.str());
                }
            }
        }
    }
    if (static_cast<int>(data.initial_dist.size()) != data.num_states) {
        add(Violation::Kind::Shape, -1, -1, "initial_dist must have num_states entries");
    } else {
        double sum = 0.0;
        bool negative = false;
        for (double p : data.initial_dist) {
            if (!(p >= 0.0) || !std::isfinite(p)) negative = true;
            sum += p;
        }
        if (negative || std::abs(sum - 1.0) > kProbabilityTolerance) {
            std::ostringstream msg;
            msg << "initial_dist is not a distribution (sum " << sum << ")";
            add(Violation::Kind::InitialDist, -1, -1, msg.str());
        }
    }
    return out;
}

TabularMDP::TabularMDP(const MdpData& data)
    : num_states_(data.num_states), num_actions_(data.num_actions), discount_(data.discount) {
    const auto violations = validate_mdp(data);
    if (!violations.empty()) throw InvalidInput(describe(violations));
    transition_.resize(num_states_ * num_actions_, num_states_);
    for (int s = 0; s < num_states_; ++s) {
        for (int a = 0; a < num_actions_; ++a) {
            const auto& row = data.transition[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)];
            double sum = 0.0;
            for (double p : row) sum += p;
            for (int next = 0; next < num_states_; ++next) {
                transition_(index(s, a), next) = row[static_cast<std::size_t>(next)] / sum;
            }
        }
    }
    initial_.resize(num_states_);
    double sum = 0.0;
    for (double p : data.initial_dist) sum += p;
    for (int s = 0; s < num_states_; ++s) initial_(s) = data.initial_dist[static_cast<std::size_t>(s)] / sum;
    absorbing_.assign(static_cast<std::size_t>(num_states_), false);
    for (int s = 0; s < num_states_; ++s) {
        bool stays = true;
        for (int a = 0; a < num_actions_ && stays; ++a) stays = transition_(index(s, a), s) == 1.0;
        absorbing_[static_cast<std::size_t>(s)] = stays;
    }
}

MdpData TabularMDP::data() const {
    MdpData out;
    out.num_states = num_states_;
    out.num_actions = num_actions_;
    out.discount = discount_;
    out.transition.assign(static_cast<std::size_t>(num_states_),
                          std::vector<std::vector<double>>(static_cast<std::size_t>(num_actions_)));
    for (int s = 0; s < num_states_; ++s) {
        for (int a = 0; a < num_actions_; ++a) {
            const auto row = successors(s, a);
            out.transition[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)].assign(row.begin(), row.end());
        }
    }
    out.initial_dist.assign(initial_.data(), initial_.data() + num_states_);
    return out;
}

TabularMDP TabularMDP::with_initial_dist(const Eigen::VectorXd& initial) const {
    MdpData d = data();
    d.initial_dist.assign(initial.data(), initial.data() + initial.size());
    return TabularMDP(d);
}

MarginalPolicy::MarginalPolicy(RowMatrix table) : table_(std::move(table)) {
    if (table_.rows() == 0 || table_.cols() == 0) throw InvalidInput("policy table is empty");
    for (Eigen::Index s = 0; s < table_.rows(); ++s) {
        double sum = 0.0;
        for (Eigen::Index a = 0; a < table_.cols(); ++a) {
            const double p = table_(s, a);
            if (!(p >= 0.0) || !std::isfinite(p)) {
                throw InvalidInput("policy row " + std::to_string(s) + " has a negative or non-finite entry");
            }
            sum += p;
        }
        if (std::abs(sum - 1.0) > kProbabilityTolerance) {
            std::ostringstream msg;
            msg << "policy row " << s << " sums to " << sum;
            throw InvalidInput(msg.str());
        }
        table_.row(s) /= sum;
    }
}

MarginalPolicy MarginalPolicy::uniform(int num_states, int num_actions) {
    return MarginalPolicy(RowMatrix::Constant(num_states, num_actions, 1.0 / num_actions));
}

MarginalPolicy MarginalPolicy::deterministic(std::span<const int> actions, int num_actions) {
    RowMatrix t = RowMatrix::Zero(static_cast<Eigen::Index>(actions.size()), num_actions);
    for (std::size_t s = 0; s < actions.size(); ++s) {
        if (actions[s] < 0 || actions[s] >= num_actions) throw InvalidInput("action index out of range");
        t(static_cast<Eigen::Index>(s), actions[s]) = 1.0;
    }
    return MarginalPolicy(std::move(t));
}

ConditionedPolicy::ConditionedPolicy(std::vector<MarginalPolicy> per_task) : tasks_(std::move(per_task)) {
    if (tasks_.empty()) throw InvalidInput("conditioned policy needs at least one task");
    for (const auto& t : tasks_) {
        if (t.num_states() != tasks_.front().num_states() || t.num_actions() != tasks_.front().num_actions()) {
            throw InvalidInput("task policies have mismatched shapes");
        }
    }
}

ConditionedPolicy ConditionedPolicy::uniform(int num_tasks, int num_states, int num_actions) {
    return broadcast(MarginalPolicy::uniform(num_states, num_actions), num_tasks);
}

ConditionedPolicy ConditionedPolicy::broadcast(const MarginalPolicy& policy, int num_tasks) {
    return ConditionedPolicy(std::vector<MarginalPolicy>(static_cast<std::size_t>(num_tasks), policy));
}

RewardTable::RewardTable(RowMatrix values, double lo, double hi)
    : values_(std::move(values)), lo_(lo), hi_(hi) {
    if (!(lo_ <= hi_)) throw InvalidInput("reward range is empty");
    for (Eigen::Index i = 0; i < values_.size(); ++i) {
        const double r = values_.data()[i];
        if (!std::isfinite(r) || r < lo_ || r > hi_) {
            std::ostringstream msg;
            msg << "reward " << r << " outside declared range [" << lo_ << ", " << hi_ << "]";
            throw InvalidInput(msg.str());
        }
    }
}

RewardTable RewardTable::from_values(RowMatrix values) {
    const double lo = values.size() ? values.minCoeff() : 0.0;
    const double hi = values.size() ? values.maxCoeff() : 0.0;
    return RewardTable(std::move(values), lo, hi);
}

QTable exact_q(const TabularMDP& mdp, const MarginalPolicy& policy, const RewardTable& reward,
               SolveMethod method) {
    check_shape(mdp, policy, reward);
    if (method == SolveMethod::Auto) {
        method = mdp.num_states() * mdp.num_actions() <= kDenseLimit ? SolveMethod::DenseLU
                                                                      : SolveMethod::ValueIteration;
    }
    QTable q = method == SolveMethod::DenseLU ? solve_dense(mdp, policy, reward)
                                               : solve_iterative(mdp, policy, reward);
    if (!q.allFinite()) throw SolverError("Q solve produced non-finite values");
    const double residual = bellman_residual(mdp, policy, reward, q);
    if (residual > kDerivedTolerance) {
        std::ostringstream msg;
        msg << "Q solve residual " << residual << " exceeds tolerance";
        throw SolverError(msg.str());
    }
    return q;
}

double bellman_residual(const TabularMDP& mdp, const MarginalPolicy& policy,
                        const RewardTable& reward, const QTable& q) {
    const int n = mdp.num_states() * mdp.num_actions();
    const Eigen::VectorXd b = backup(mdp, policy, q);
    const Eigen::VectorXd lhs = Eigen::Map<const Eigen::VectorXd>(q.data(), n);
    const Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(reward.values().data(), n);
    return (lhs - r - mdp.discount() * b).cwiseAbs().maxCoeff();
}

ValueTable exact_v(const TabularMDP& mdp, const MarginalPolicy& policy, const RewardTable& reward) {
    const QTable q = exact_q(mdp, policy, reward);
    return (policy.table().cwiseProduct(q)).rowwise().sum();
}

double expected_return(const TabularMDP& mdp, const MarginalPolicy& policy,
                       const RewardTable& reward) {
    return mdp.initial_dist().dot(exact_v(mdp, policy, reward));
}

RowMatrix policy_transition(const TabularMDP& mdp, const MarginalPolicy& policy) {
    check_shape(mdp, policy);
    const int S = mdp.num_states();
    const int A = mdp.num_actions();
    RowMatrix out = RowMatrix::Zero(S, S);
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            const double p = policy(s, a);
            if (p != 0.0) out.row(s) += p * mdp.transition_matrix().row(mdp.index(s, a));
        }
    }
    return out;
}

Eigen::VectorXd state_occupancy(const TabularMDP& mdp, const MarginalPolicy& policy) {
    const int S = mdp.num_states();
    const double gamma = mdp.discount();
    const Eigen::MatrixXd system =
        (Eigen::MatrixXd::Identity(S, S) - gamma * Eigen::MatrixXd(policy_transition(mdp, policy))).transpose();
    Eigen::VectorXd rho = system.partialPivLu().solve((1.0 - gamma) * mdp.initial_dist());
    if (!rho.allFinite()) throw SolverError("occupancy solve produced non-finite values");
    rho = rho.cwiseMax(0.0);
    const double total = rho.sum();
    if (std::abs(total - 1.0) > kDerivedTolerance) throw SolverError("occupancy does not sum to one");
    return rho / total;
}

OccupancyTable discounted_occupancy(const TabularMDP& mdp, const MarginalPolicy& policy) {
    const Eigen::VectorXd rho = state_occupancy(mdp, policy);
    return rho.asDiagonal() * policy.table();
}

int truncation_horizon(double discount, double mass) {
    if (discount <= 0.0) return 1;
    int t = 0;
    double g = 1.0;
    while (g >= mass) {
        g *= discount;
        ++t;
    }
    return t;
}

MonteCarloEstimate monte_carlo_return(const TabularMDP& mdp, const MarginalPolicy& policy,
                                      const RewardTable& reward, int num_rollouts,
                                      std::uint64_t seed) {
    check_shape(mdp, policy, reward);
    if (num_rollouts < 1) throw InvalidInput("num_rollouts must be at least 1");
    const int horizon = truncation_horizon(mdp.discount(), 1e-9);
    const auto p0 = std::span<const double>(mdp.initial_dist().data(),
                                            static_cast<std::size_t>(mdp.num_states()));
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int i = 0; i < num_rollouts; ++i) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
        int s = rng.categorical(p0);
        double g = 1.0;
        double total = 0.0;
        for (int t = 0; t < horizon; ++t) {
            const int a = rng.categorical(policy.row(s));
            total += g * reward(s, a);
            g *= mdp.discount();
            s = rng.categorical(mdp.successors(s, a));
        }
        sum += total;
        sum_sq += total * total;
    }
    MonteCarloEstimate out;
    out.num_rollouts = num_rollouts;
    out.horizon = horizon;
    out.mean = sum / num_rollouts;
    if (num_rollouts > 1) {
        const double var = std::max(0.0, (sum_sq - num_rollouts * out.mean * out.mean) / (num_rollouts - 1));
        out.std_error = std::sqrt(var / num_rollouts);
    }
    return out;
}

OptimalSolution solve_optimal(const TabularMDP& mdp, const RewardTable& reward) {
    const int S = mdp.num_states();
    const int A = mdp.num_actions();
    std::vector<int> actions(static_cast<std::size_t>(S), 0);
    for (int round = 0; round < 10000; ++round) {
        const auto policy = MarginalPolicy::deterministic(actions, A);
        QTable q = exact_q(mdp, policy, reward);
        bool changed = false;
        for (int s = 0; s < S; ++s) {
            const int current = actions[static_cast<std::size_t>(s)];
            int best = current;
            for (int a = 0; a < A; ++a) {
                // Switch only on a clear gain so ties cannot cycle.
                if (q(s, a) > q(s, best) + 1e-13) best = a;
            }
            if (best != current) {
                actions[static_cast<std::size_t>(s)] = best;
                changed = true;
            }
        }
        if (!changed) {
            OptimalSolution out;
            out.values = q.rowwise().maxCoeff();
            out.actions = std::move(actions);
            out.expected_return = mdp.initial_dist().dot(out.values);
            out.q = std::move(q);
            return out;
        }
    }
    throw SolverError("policy iteration did not terminate");
}

double expected_steps_to(const TabularMDP& mdp, const MarginalPolicy& policy,
                         std::span<const int> targets, int horizon) {
    const int S = mdp.num_states();
    std::vector<bool> is_target(static_cast<std::size_t>(S), false);
    for (int t : targets) {
        if (t < 0 || t >= S) throw InvalidInput("target state out of range");
        is_target[static_cast<std::size_t>(t)] = true;
    }
    const RowMatrix Ppi = policy_transition(mdp, policy);
    Eigen::VectorXd h = Eigen::VectorXd::Zero(S);
    for (int n = 0; n < horizon; ++n) {
        Eigen::VectorXd next = Eigen::VectorXd::Ones(S) + Ppi * h;
        for (int s = 0; s < S; ++s) {
            if (is_target[static_cast<std::size_t>(s)]) next(s) = 0.0;
        }
        h = std::move(next);
    }
    return mdp.initial_dist().dot(h);
}

}  // namespace ocbc
