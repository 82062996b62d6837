#include "ocbc/normalized.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>
#include <sstream>

#include "ocbc/errors.hpp"
#include "text_io.hpp"

namespace ocbc {

namespace {

/// x as m / 10^d from its shortest round-trip decimal form, when that fits.
struct Decimal {
    std::int64_t m = 0;
    int d = 0;
};

__extension__ typedef __int128 i128;

std::optional<Decimal> as_decimal(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::fixed);
    if (res.ec != std::errc{}) return std::nullopt;
    Decimal out;
    bool frac = false;
    for (const char* c = buf; c != res.ptr; ++c) {
        if (*c == '.') {
            frac = true;
            continue;
        }
        if (out.m > (std::int64_t{1} << 53)) return std::nullopt;
        out.m = out.m * 10 + (*c - '0');
        if (frac) ++out.d;
    }
    return out;
}

i128 pow10(int d) {
    i128 p = 1;
    while (d-- > 0) p *= 10;
    return p;
}

struct Built {
    ConditionedPolicy ocbc;
    MarginalPolicy clone;
    FlaggedPolicy normalized;
    double acceptance = 1.0;
    double premise_gap = 0.0;
};

// Normalizes rows of `weights`; zero rows take the `fallback` row.
MarginalPolicy normalize_rows(RowMatrix weights, const RowMatrix& fallback) {
    for (Eigen::Index s = 0; s < weights.rows(); ++s) {
        const double z = weights.row(s).sum();
        if (z > 0.0) {
            weights.row(s) /= z;
        } else {
            weights.row(s) = fallback.row(s);
        }
    }
    return MarginalPolicy(std::move(weights));
}

// Q^{beta_e}(., ., t) for commanded e and every target t, plus Q^{beta_t}(., ., t).
struct CrossValues {
    std::vector<std::vector<QTable>> cross;  // [e][t], empty for uncommanded e
    std::vector<QTable> self;                // [t]
};

CrossValues cross_values(const TabularMDP& mdp, const TaskSpace& tasks, const ConditionedPolicy& behavior) {
    const int E = tasks.num_tasks();
    CrossValues out;
    out.cross.resize(static_cast<std::size_t>(E));
    std::vector<FutureOutcomeTable> f(static_cast<std::size_t>(E));
    for (int e = 0; e < E; ++e) f[static_cast<std::size_t>(e)] = future_outcome_distribution(mdp, tasks, behavior.task(e));
    for (int e : tasks.commanded_tasks()) out.cross[static_cast<std::size_t>(e)] = f[static_cast<std::size_t>(e)].tables;
    for (int t = 0; t < E; ++t) out.self.push_back(f[static_cast<std::size_t>(t)].task(t));
    return out;
}

// Data weight w(e, s, a) = p_e rho_e(s) beta_e(a | s) for commanded e.
std::vector<RowMatrix> data_weights(const TabularMDP& mdp, const TaskSpace& tasks, const ConditionedPolicy& behavior) {
    std::vector<RowMatrix> w(static_cast<std::size_t>(tasks.num_tasks()));
    for (int e : tasks.commanded_tasks()) {
        w[static_cast<std::size_t>(e)] = tasks.prior(e) * discounted_occupancy(mdp, behavior.task(e));
    }
    return w;
}

double premise_gap_exact(const TabularMDP& mdp, const TaskSpace& tasks, const CrossValues& q,
                         const std::vector<RowMatrix>& w, double epsilon) {
    double gap = 0.0;
    const auto commanded = tasks.commanded_tasks();
    for (int e : commanded) {
        for (int t : commanded) {
            if (t == e) continue;
            const QTable& qe = q.cross[static_cast<std::size_t>(e)][static_cast<std::size_t>(t)];
            const QTable& qt = q.self[static_cast<std::size_t>(t)];
            for (int s = 0; s < mdp.num_states(); ++s) {
                for (int a = 0; a < mdp.num_actions(); ++a) {
                    if (!(w[static_cast<std::size_t>(e)](s, a) > 0.0) || !(qe(s, a) > 0.0)) continue;
                    const double d = std::abs(qe(s, a) - qt(s, a));
                    if (d <= epsilon) gap = std::max(gap, d);
                }
            }
        }
    }
    return gap;
}

Built build_exact(const ConditionedPolicy& behavior, const TabularMDP& mdp, const TaskSpace& tasks, double epsilon) {
    const CrossValues q = cross_values(mdp, tasks, behavior);
    const auto w = data_weights(mdp, tasks, behavior);
    if (std::isinf(epsilon)) {
        MarginalPolicy clone = marginal_clone(mdp, tasks, behavior);
        FlaggedPolicy ocbc = bayes_ocbc_policy(mdp, tasks, clone);
        FlaggedPolicy normalized = ratio_reweight(ocbc.policy, clone, behavior);
        return Built{ocbc.policy, clone, normalized, 1.0, premise_gap_exact(mdp, tasks, q, w, epsilon)};
    }

    const int S = mdp.num_states();
    const int A = mdp.num_actions();
    const int E = tasks.num_tasks();
    const auto commanded = tasks.commanded_tasks();
    RowMatrix all = RowMatrix::Zero(S, A);
    for (int e : commanded) all += w[static_cast<std::size_t>(e)];

    double accepted_mass = 0.0;
    double total_mass = 0.0;
    std::vector<MarginalPolicy> ocbc_rows;
    std::vector<MarginalPolicy> normalized_rows;
    std::vector<std::vector<bool>> flags(static_cast<std::size_t>(E), std::vector<bool>(static_cast<std::size_t>(S), false));
    for (int t = 0; t < E; ++t) {
        const RowMatrix& beta_t = behavior.task(t).table();
        const QTable& q_tt = q.self[static_cast<std::size_t>(t)];
        RowMatrix relabeled = RowMatrix::Zero(S, A);
        for (int e : commanded) {
            const QTable& q_et = q.cross[static_cast<std::size_t>(e)][static_cast<std::size_t>(t)];
            const RowMatrix& w_e = w[static_cast<std::size_t>(e)];
            for (int s = 0; s < S; ++s) {
                for (int a = 0; a < A; ++a) {
                    const double mass = w_e(s, a) * q_et(s, a);
                    const bool accept = std::abs(q_et(s, a) - q_tt(s, a)) <= epsilon;
                    if (accept) relabeled(s, a) += mass;
                    if (tasks.prior(t) > 0.0) {
                        total_mass += mass;
                        if (accept) accepted_mass += mass;
                    }
                }
            }
        }
        // Row constants of pi_O and pi_N cancel after normalization, so the
        // reweighting uses the unnormalized masses directly.
        RowMatrix out(S, A);
        for (int s = 0; s < S; ++s) {
            for (int a = 0; a < A; ++a) {
                out(s, a) = all(s, a) > 0.0 ? relabeled(s, a) / all(s, a) * beta_t(s, a) : 0.0;
            }
            const double z = out.row(s).sum();
            if (z > 0.0) {
                out.row(s) /= z;
            } else {
                out.row(s) = beta_t.row(s);
                flags[static_cast<std::size_t>(t)][static_cast<std::size_t>(s)] = true;
            }
        }
        ocbc_rows.push_back(normalize_rows(relabeled, beta_t));
        normalized_rows.emplace_back(std::move(out));
    }
    RowMatrix prior_mix = RowMatrix::Zero(S, A);
    for (int e : commanded) prior_mix += tasks.prior(e) * behavior.task(e).table();
    MarginalPolicy clone = normalize_rows(all, prior_mix);
    Built built{ConditionedPolicy(std::move(ocbc_rows)), std::move(clone),
                FlaggedPolicy{ConditionedPolicy(std::move(normalized_rows)), std::move(flags)},
                total_mass > 0.0 ? accepted_mass / total_mass : 1.0, 0.0};
    built.premise_gap = premise_gap_exact(mdp, tasks, q, w, epsilon);
    return built;
}

Built build_sampled(const ConditionedPolicy& behavior, const TabularMDP& mdp, const TaskSpace& tasks,
                    const NormalizedOptions& options) {
    SamplingOptions sampling;
    sampling.horizon = options.horizon;
    sampling.sample_budget = options.sample_budget;
    sampling.epsilon = options.epsilon;
    sampling.seed = options.seed;
    const SampledData data = collect_relabeled(mdp, tasks, behavior, sampling);
    const RelabelCounts& counts = data.counts;

    FittedPolicy ocbc = fit_conditional_policy(counts, Smoothing::adaptive(), &behavior);
    MarginalPolicy clone = marginal_clone(counts, Smoothing::adaptive());
    FlaggedPolicy normalized = ratio_reweight(ocbc.policy, clone, behavior);
    std::vector<MarginalPolicy> rows = normalized.policy.tasks();
    for (std::size_t e = 0; e < ocbc.empty.size(); ++e) {
        RowMatrix table = rows[e].table();
        for (std::size_t s = 0; s < ocbc.empty[e].size(); ++s) {
            if (!ocbc.empty[e][s]) continue;
            table.row(static_cast<Eigen::Index>(s)) = behavior.task(static_cast<int>(e)).table().row(static_cast<Eigen::Index>(s));
            normalized.fallback[e][s] = true;
        }
        rows[e] = MarginalPolicy(std::move(table));
    }
    normalized.policy = ConditionedPolicy(std::move(rows));

    // Premise gap over the accepted cross-task relabels actually observed.
    const CrossValues q = cross_values(mdp, tasks, behavior);
    const int S = counts.num_states;
    const int A = counts.num_actions;
    const int E = counts.num_tasks;
    double gap = 0.0;
    for (int c : tasks.commanded_tasks()) {
        for (int e : tasks.commanded_tasks()) {
            if (e == c) continue;
            for (int s = 0; s < S; ++s) {
                for (int a = 0; a < A; ++a) {
                    const std::size_t idx = ((static_cast<std::size_t>(c) * E + e) * S + s) * A + a;
                    if (counts.cross[idx] == 0.0) continue;
                    const double d = std::abs(q.cross[static_cast<std::size_t>(c)][static_cast<std::size_t>(e)](s, a) -
                                              q.self[static_cast<std::size_t>(e)](s, a));
                    gap = std::max(gap, d);
                }
            }
        }
    }
    return Built{ocbc.policy, std::move(clone), std::move(normalized), counts.acceptance_fraction(), gap};
}

}  // namespace

MarginalPolicy marginal_clone(const TabularMDP& mdp, const TaskSpace& tasks, const ConditionedPolicy& behavior) {
    return average_policy(behavior, mdp, tasks);
}

MarginalPolicy marginal_clone(const RelabelCounts& counts, Smoothing smoothing) {
    return fit_marginal_policy(counts, smoothing);
}

FlaggedPolicy ratio_reweight(const ConditionedPolicy& ocbc_policy, const MarginalPolicy& clone,
                             const ConditionedPolicy& behavior) {
    const int S = behavior.num_states();
    const int A = behavior.num_actions();
    const int E = behavior.num_tasks();
    if (ocbc_policy.num_tasks() != E || clone.num_states() != S || clone.num_actions() != A) {
        throw InvalidInput("ratio reweighting inputs have mismatched shapes");
    }
    std::vector<MarginalPolicy> rows;
    std::vector<std::vector<bool>> flags(static_cast<std::size_t>(E), std::vector<bool>(static_cast<std::size_t>(S), false));
    for (int e = 0; e < E; ++e) {
        RowMatrix out(S, A);
        for (int s = 0; s < S; ++s) {
            for (int a = 0; a < A; ++a) {
                const double num = ocbc_policy(e, s, a);
                const double den = clone(s, a);
                if (den > 0.0) {
                    out(s, a) = num / den * behavior(e, s, a);
                } else if (num > 0.0 && behavior(e, s, a) > 0.0) {
                    std::ostringstream msg;
                    msg << "ratio undefined at (e=" << e << ", s=" << s << ", a=" << a
                        << "): the marginal clone is zero where the conditioned policy is not";
                    throw InvalidInput(msg.str());
                } else {
                    out(s, a) = 0.0;
                }
            }
            const double z = out.row(s).sum();
            if (z > 0.0) {
                out.row(s) /= z;
            } else {
                out.row(s) = behavior.task(e).table().row(s);
                flags[static_cast<std::size_t>(e)][static_cast<std::size_t>(s)] = true;
            }
        }
        rows.emplace_back(std::move(out));
    }
    return FlaggedPolicy{ConditionedPolicy(std::move(rows)), std::move(flags)};
}

FlaggedPolicy normalized_policy_exact(const TabularMDP& mdp, const TaskSpace& tasks,
                                      const ConditionedPolicy& behavior) {
    const MarginalPolicy clone = marginal_clone(mdp, tasks, behavior);
    const FlaggedPolicy ocbc = bayes_ocbc_policy(mdp, tasks, clone);
    return ratio_reweight(ocbc.policy, clone, behavior);
}

RatioDraw ratio_policy_sample(int state, int task, const ConditionedPolicy& behavior,
                              const ConditionedPolicy& ocbc_policy, const MarginalPolicy& clone,
                              int num_candidates, Rng& rng) {
    if (num_candidates < 1) throw InvalidInput("num_candidates must be at least 1");
    std::vector<int> candidates(static_cast<std::size_t>(num_candidates));
    std::vector<double> weights(static_cast<std::size_t>(num_candidates));
    const auto row = behavior.task(task).row(state);
    for (int i = 0; i < num_candidates; ++i) {
        const int a = rng.categorical(row);
        const double den = clone(state, a);
        if (!(den > 0.0)) throw InvalidInput("marginal clone is zero on the behavior's support");
        candidates[static_cast<std::size_t>(i)] = a;
        weights[static_cast<std::size_t>(i)] = ocbc_policy(task, state, a) / den;
    }
    if (num_candidates == 1) return RatioDraw{candidates.front(), false};
    const int pick = rng.categorical(weights);
    if (pick < 0) return RatioDraw{candidates[static_cast<std::size_t>(rng.uniform_int(num_candidates))], true};
    return RatioDraw{candidates[static_cast<std::size_t>(pick)], false};
}

RatioDraw ratio_policy_sample(int state, int task, const ConditionedPolicy& behavior,
                              const ConditionedPolicy& ocbc_policy, const MarginalPolicy& clone,
                              int num_candidates, std::uint64_t seed) {
    Rng rng(seed);
    return ratio_policy_sample(state, task, behavior, ocbc_policy, clone, num_candidates, rng);
}

NormalizedIterateRecord normalized_ocbc_iterate(const ConditionedPolicy& behavior, const TabularMDP& mdp,
                                                const TaskSpace& tasks, const NormalizedOptions& options) {
    if (!(options.epsilon >= 0.0)) throw InvalidInput("epsilon must be nonnegative");
    Built built = options.mode == Mode::Exact ? build_exact(behavior, mdp, tasks, options.epsilon)
                                              : build_sampled(behavior, mdp, tasks, options);
    NormalizedIterateRecord rec{1,
                                std::move(built.clone),
                                std::move(built.ocbc),
                                built.normalized.policy,
                                {},
                                built.acceptance,
                                built.normalized.fallback_count(),
                                built.premise_gap};
    rec.returns = task_returns(mdp, tasks, rec.policy);
    return rec;
}

std::vector<NormalizedIterateRecord> iterate_normalized(const ConditionedPolicy& behavior,
                                                        const TabularMDP& mdp, const TaskSpace& tasks,
                                                        int num_iters, const NormalizedOptions& options) {
    if (num_iters < 1) throw InvalidInput("num_iters must be at least 1");
    std::vector<NormalizedIterateRecord> out;
    out.push_back(NormalizedIterateRecord{0, marginal_clone(mdp, tasks, behavior), behavior, behavior,
                                          task_returns(mdp, tasks, behavior), 1.0, 0, 0.0});
    for (int k = 1; k <= num_iters; ++k) {
        NormalizedOptions step = options;
        step.seed = derive_seed(options.seed, static_cast<std::uint64_t>(k));
        NormalizedIterateRecord rec = normalized_ocbc_iterate(out.back().policy, mdp, tasks, step);
        rec.iteration = k;
        out.push_back(std::move(rec));
    }
    return out;
}

double suboptimality_bound(double discount, double epsilon) {
    if (!(discount >= 0.0 && discount < 1.0)) throw InvalidInput("discount outside [0, 1)");
    if (!(epsilon >= 0.0)) throw InvalidInput("epsilon must be nonnegative");
    if (epsilon == 0.0 || discount == 0.0) return 0.0;
    // Exact rational arithmetic on the decimal inputs, so that e.g. (0.9, 0.01)
    // gives the double nearest 1.8 rather than something a few ulps off.
    const auto g = as_decimal(discount);
    const auto e = as_decimal(epsilon);
    if (g && e && g->d <= 9 && e->d <= 9 && e->m < 1000000000000) {
        const i128 scale = pow10(g->d);
        const i128 q = scale - g->m;
        const i128 num = 2 * static_cast<i128>(g->m) * e->m * scale;
        const i128 den = pow10(e->d) * q * q;
        constexpr i128 exact = i128{1} << 53;
        if (num < exact && den < exact) return static_cast<double>(num) / static_cast<double>(den);
    }
    return 2.0 * discount * epsilon / ((1.0 - discount) * (1.0 - discount));
}

double effective_epsilon(const std::vector<NormalizedIterateRecord>& transcript) {
    double eps = 0.0;
    for (const auto& rec : transcript) eps = std::max(eps, rec.premise_gap);
    return eps;
}

SuboptimalityReport check_suboptimality(const TabularMDP& mdp, const TaskSpace& tasks,
                          const std::vector<NormalizedIterateRecord>& transcript, double epsilon,
                          double tail_fraction) {
    if (transcript.empty()) throw InvalidInput("transcript is empty");
    if (!(tail_fraction > 0.0 && tail_fraction <= 1.0)) throw InvalidInput("tail fraction outside (0, 1]");
    SuboptimalityReport report;
    report.epsilon = epsilon;
    report.bound = suboptimality_bound(mdp.discount(), epsilon);
    for (int e = 0; e < tasks.num_tasks(); ++e) {
        report.optimal_returns.push_back(tasks.prior(e) > 0.0
                                             ? solve_optimal(mdp, outcome_reward(tasks, mdp, e)).expected_return
                                             : 0.0);
    }
    const int last = transcript.back().iteration;
    report.tail_start = static_cast<int>(std::ceil(last * (1.0 - tail_fraction)));
    for (const auto& rec : transcript) {
        report.premise_gap = std::max(report.premise_gap, rec.premise_gap);
        if (rec.iteration < report.tail_start) continue;
        for (int e : tasks.commanded_tasks()) {
            const double gap = std::abs(report.optimal_returns[static_cast<std::size_t>(e)] -
                                        rec.returns[static_cast<std::size_t>(e)]);
            report.tail_gap = std::max(report.tail_gap, gap);
        }
    }
    report.bound_holds = report.tail_gap <= report.bound + 1e-9;
    report.premise_holds = report.premise_gap <= epsilon + 1e-9;
    return report;
}

std::string transcript_csv(const std::vector<NormalizedIterateRecord>& transcript, const TaskSpace& tasks,
                           const SuboptimalityReport& report) {
    std::ostringstream out;
    out << "iteration,task,return,acceptance_fraction,bound_value,gap\n";
    for (const auto& rec : transcript) {
        for (int e : tasks.commanded_tasks()) {
            const double ret = rec.returns[static_cast<std::size_t>(e)];
            out << rec.iteration << ',' << e << ',' << detail::format_double(ret) << ','
                << detail::format_double(rec.acceptance_fraction) << ',' << detail::format_double(report.bound)
                << ',' << detail::format_double(report.optimal_returns[static_cast<std::size_t>(e)] - ret) << '\n';
        }
    }
    return out.str();
}

}  // namespace ocbc
