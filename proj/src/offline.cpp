#include "acqlab/offline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "acqlab/errors.hpp"
#include "acqlab/kernels.hpp"
#include "acqlab/response.hpp"

namespace acqlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMuFloor = 1e-10;

std::vector<std::vector<double>> true_lambda(const GameInstance& g) {
    std::vector<std::vector<double>> L(g.n_agents, std::vector<double>(g.k * g.k));
    for (int i = 0; i < g.n_agents; ++i)
        for (int b = 0; b < g.k; ++b)
            for (int bp = 0; bp < g.k; ++bp)
                L[i][b * g.k + bp] = g.costs[i][b] - g.costs[i][bp];
    return L;
}

}  // namespace

std::pair<LinearProgram, LpMechanismVars> build_lp(const GameInstance& g,
                                                   const std::vector<std::vector<double>>& zeta,
                                                   const std::vector<std::vector<double>>& Lambda,
                                                   double eps, double M) {
    LpMechanismVars v;
    v.n = g.n_agents;
    v.k = g.k;
    v.l = g.l;
    v.m = g.m;
    v.d = g.d;
    v.B = g.num_profiles();
    v.S = g.num_signal_profiles();
    if (static_cast<long>(zeta.size()) != v.B)
        throw DimensionMismatch("build_lp: zeta must have one row per action profile");
    for (const auto& row : zeta)
        if (static_cast<long>(row.size()) != v.S * v.m)
            throw DimensionMismatch("build_lp: zeta rows must cover S x Theta");
    if (static_cast<int>(Lambda.size()) != v.n)
        throw DimensionMismatch("build_lp: Lambda must have one table per agent");
    for (const auto& t : Lambda)
        if (static_cast<long>(t.size()) != static_cast<long>(v.k) * v.k)
            throw DimensionMismatch("build_lp: Lambda tables must be k*k");
    if (eps < 0.0 || M <= 0.0) throw DimensionMismatch("build_lp: eps >= 0 and M > 0 required");

    LinearProgram lp;
    v.x0 = 0;
    for (long c = 0; c < static_cast<long>(v.n) * v.B * v.S * v.m; ++c) lp.add_var(0.0, M);
    v.y0 = lp.num_vars;
    for (long c = 0; c < v.B * v.S * v.d; ++c) lp.add_var(0.0, 1.0);
    v.z0 = lp.num_vars;
    for (long c = 0; c < static_cast<long>(v.n) * v.k * v.k * v.l; ++c) lp.add_var(0.0, M);
    v.mu0 = lp.num_vars;
    for (long c = 0; c < v.B; ++c) lp.add_var(0.0, 1.0);
    v.total = lp.num_vars;

    for (long b = 0; b < v.B; ++b)
        for (long s = 0; s < v.S; ++s) {
            for (int a = 0; a < v.d; ++a) {
                double c = 0.0;
                for (int t = 0; t < v.m; ++t) c += zeta[b][s * v.m + t] * g.util(a, t);
                lp.objective[v.y_index(b, s, a)] = c;
            }
            for (int i = 0; i < v.n; ++i)
                for (int t = 0; t < v.m; ++t)
                    lp.objective[v.x_index(i, b, s, t)] = -zeta[b][s * v.m + t];
        }

    const long ko = profile_count(v.n - 1, v.k);

    // no-profitable-deviation rows, diagonal pairs included
    for (int i = 0; i < v.n; ++i)
        for (int b_i = 0; b_i < v.k; ++b_i)
            for (int bp = 0; bp < v.k; ++bp) {
                std::vector<double> row(v.total, 0.0);
                for (long jo = 0; jo < ko; ++jo) {
                    long b = compose_profile(i, v.n, v.k, b_i, jo);
                    for (long s = 0; s < v.S; ++s)
                        for (int t = 0; t < v.m; ++t)
                            row[v.x_index(i, b, s, t)] += zeta[b][s * v.m + t];
                    row[v.mu_index(b)] -= Lambda[i][b_i * v.k + bp];
                }
                for (int s_i = 0; s_i < v.l; ++s_i) row[v.z_index(i, b_i, bp, s_i)] -= 1.0;
                lp.add_constraint(std::move(row), Sense::Ge, -eps);
            }

    // z upper-bounds every misreport's payoff under the deviating action:
    // the observed signal s_i indexes zeta, the reported s'_i indexes x
    const long so = profile_count(v.n - 1, v.l);
    for (int i = 0; i < v.n; ++i)
        for (int b_i = 0; b_i < v.k; ++b_i)
            for (int bp = 0; bp < v.k; ++bp)
                for (int s_i = 0; s_i < v.l; ++s_i)
                    for (int sp = 0; sp < v.l; ++sp) {
                        std::vector<double> row(v.total, 0.0);
                        row[v.z_index(i, b_i, bp, s_i)] = 1.0;
                        for (long jo = 0; jo < ko; ++jo) {
                            long b = compose_profile(i, v.n, v.k, b_i, jo);
                            long bdev = compose_profile(i, v.n, v.k, bp, jo);
                            for (long o = 0; o < so; ++o) {
                                long s_obs = compose_profile(i, v.n, v.l, s_i, o);
                                long s_rep = compose_profile(i, v.n, v.l, sp, o);
                                for (int t = 0; t < v.m; ++t)
                                    row[v.x_index(i, b, s_rep, t)] -=
                                        zeta[bdev][s_obs * v.m + t];
                            }
                        }
                        lp.add_constraint(std::move(row), Sense::Ge, 0.0);
                    }

    // decision mass: sum_a y[b,s,a] = mu[b]
    for (long b = 0; b < v.B; ++b)
        for (long s = 0; s < v.S; ++s) {
            std::vector<double> row(v.total, 0.0);
            for (int a = 0; a < v.d; ++a) row[v.y_index(b, s, a)] = 1.0;
            row[v.mu_index(b)] = -1.0;
            lp.add_constraint(std::move(row), Sense::Eq, 0.0);
        }

    // payment cap: x <= M mu[b]
    for (int i = 0; i < v.n; ++i)
        for (long b = 0; b < v.B; ++b)
            for (long s = 0; s < v.S; ++s)
                for (int t = 0; t < v.m; ++t) {
                    std::vector<double> row(v.total, 0.0);
                    row[v.x_index(i, b, s, t)] = 1.0;
                    row[v.mu_index(b)] = -M;
                    lp.add_constraint(std::move(row), Sense::Le, 0.0);
                }

    std::vector<double> simplex_row(v.total, 0.0);
    for (long b = 0; b < v.B; ++b) simplex_row[v.mu_index(b)] = 1.0;
    lp.add_constraint(std::move(simplex_row), Sense::Eq, 1.0);

    return {std::move(lp), v};
}

CorrelatedMechanism recover_mechanism(const LpSolution& sol, const LpMechanismVars& v,
                                      double M) {
    if (sol.status != LpStatus::Optimal)
        throw LpInfeasible("recover_mechanism: LP solution is not optimal");
    CorrelatedMechanism mech;
    mech.mu.resize(v.B);
    mech.gamma.assign(v.n, std::vector<double>(v.B * v.S * v.m, 0.0));
    mech.pi.assign(v.B * v.S * v.d, 0.0);
    for (long b = 0; b < v.B; ++b) {
        double mu = sol.x[v.mu_index(b)];
        mech.mu[b] = mu;
        if (mu > kMuFloor) {
            for (long s = 0; s < v.S; ++s) {
                double row_sum = 0.0;
                for (int a = 0; a < v.d; ++a) {
                    double val = sol.x[v.y_index(b, s, a)] / mu;
                    mech.pi[(b * v.S + s) * v.d + a] = val;
                    row_sum += val;
                }
                if (std::abs(row_sum - 1.0) > 1e-6)
                    throw NumericalFailure("recover_mechanism: pi row off simplex by " +
                                           std::to_string(std::abs(row_sum - 1.0)));
                for (int a = 0; a < v.d; ++a) mech.pi[(b * v.S + s) * v.d + a] /= row_sum;
            }
            for (int i = 0; i < v.n; ++i)
                for (long s = 0; s < v.S; ++s)
                    for (int t = 0; t < v.m; ++t) {
                        double val = sol.x[v.x_index(i, b, s, t)] / mu;
                        mech.gamma[i][(b * v.S + s) * v.m + t] =
                            std::min(std::max(val, 0.0), M);
                    }
        } else {
            for (long s = 0; s < v.S; ++s)
                for (int a = 0; a < v.d; ++a)
                    mech.pi[(b * v.S + s) * v.d + a] = 1.0 / v.d;
        }
    }
    return mech;
}

double principal_utility(const GameInstance& g, const CorrelatedMechanism& mech) {
    long B = g.num_profiles(), S = g.num_signal_profiles();
    double tot = 0.0;
    for (long b = 0; b < B; ++b) {
        if (mech.mu[b] == 0.0) continue;
        double inner = 0.0;
        for (long s = 0; s < S; ++s)
            for (int t = 0; t < g.m; ++t) {
                double p = g.joint_p(b, s, t);
                if (p == 0.0) continue;
                double dec = 0.0;
                for (int a = 0; a < g.d; ++a)
                    dec += mech.pi[(b * S + s) * g.d + a] * g.util(a, t);
                double pay = 0.0;
                for (int i = 0; i < g.n_agents; ++i)
                    pay += mech.gamma[i][(b * S + s) * g.m + t];
                inner += p * (dec - pay);
            }
        tot += mech.mu[b] * inner;
    }
    return tot;
}

double principal_utility_unc(const GameInstance& g, const UncorrelatedMechanism& mech) {
    return joint_best_response(g, mech).principal_value;
}

std::pair<CorrelatedMechanism, double> solve_offline_optimal(const GameInstance& g) {
    auto [lp, vars] = build_lp(g, g.joint, true_lambda(g), 0.0, g.budget);
    LpSolution sol = solve(lp);
    if (sol.status == LpStatus::Infeasible)
        throw LpInfeasible("mechanism LP infeasible");
    if (sol.status == LpStatus::Unbounded)
        throw NumericalFailure("mechanism LP unbounded despite variable bounds");
    CorrelatedMechanism mech = recover_mechanism(sol, vars, g.budget);
    return {std::move(mech), sol.objective};
}

namespace {

// Minimum expected truthful payment incentivizing action b_hat for agent i,
// or nullopt when no rule within [0, M] works.
std::optional<std::pair<std::vector<double>, double>> min_payment_rule(
    const GameInstance& g, const std::vector<std::vector<double>>& margs, int i, int b_hat) {
    const int k = g.k, l = g.l, m = g.m;
    const double M = g.budget;
    LinearProgram lp;
    for (int c = 0; c < l * m; ++c) lp.add_var(0.0, M);
    auto zind = [&](int bp, int s) {
        int off = bp < b_hat ? bp : bp - 1;
        return l * m + off * l + s;
    };
    for (int c = 0; c < (k - 1) * l; ++c) lp.add_var(0.0, M);
    const auto& mh = margs[b_hat];
    for (int c = 0; c < l * m; ++c) lp.objective[c] = -mh[c];  // maximize -payment

    // truthful reporting weakly optimal under b_hat
    for (int s = 0; s < l; ++s)
        for (int sp = 0; sp < l; ++sp) {
            if (sp == s) continue;
            std::vector<double> row(lp.num_vars, 0.0);
            for (int t = 0; t < m; ++t) {
                row[s * m + t] += mh[s * m + t];
                row[sp * m + t] -= mh[s * m + t];
            }
            lp.add_constraint(std::move(row), Sense::Ge, 0.0);
        }
    // z bounds every report's payoff after deviating to bp
    for (int bp = 0; bp < k; ++bp) {
        if (bp == b_hat) continue;
        for (int s = 0; s < l; ++s)
            for (int sp = 0; sp < l; ++sp) {
                std::vector<double> row(lp.num_vars, 0.0);
                row[zind(bp, s)] = 1.0;
                for (int t = 0; t < m; ++t) row[sp * m + t] -= margs[bp][s * m + t];
                lp.add_constraint(std::move(row), Sense::Ge, 0.0);
            }
    }
    // action IC: truthful value minus deviation bound covers the cost gap
    for (int bp = 0; bp < k; ++bp) {
        if (bp == b_hat) continue;
        std::vector<double> row(lp.num_vars, 0.0);
        for (int c = 0; c < l * m; ++c) row[c] = mh[c];
        for (int s = 0; s < l; ++s) row[zind(bp, s)] -= 1.0;
        lp.add_constraint(std::move(row), Sense::Ge, g.costs[i][b_hat] - g.costs[i][bp]);
    }

    LpSolution sol = solve(lp);
    if (sol.status != LpStatus::Optimal) return std::nullopt;
    std::vector<double> gamma(sol.x.begin(), sol.x.begin() + l * m);
    return std::make_pair(std::move(gamma), -sol.objective);
}

}  // namespace

std::pair<UncorrelatedMechanism, double> solve_optimal_uncorrelated(const GameInstance& g) {
    const int n = g.n_agents, m = g.m, d = g.d;
    long B = g.num_profiles(), S = g.num_signal_profiles();
    std::vector<std::vector<std::vector<double>>> margs(n);
    for (int i = 0; i < n; ++i) {
        margs[i].resize(g.k);
        for (int b = 0; b < g.k; ++b) margs[i][b] = marginal(g, i, b);
    }

    double best_val = -kInf;
    long best_b = -1;
    std::vector<std::vector<double>> best_gamma;
    for (long bt = 0; bt < B; ++bt) {
        std::vector<int> bd = profile_digits(bt, n, g.k);
        double pays = 0.0;
        std::vector<std::vector<double>> gams(n);
        bool ok = true;
        for (int i = 0; i < n; ++i) {
            auto res = min_payment_rule(g, margs[i], i, bd[i]);
            if (!res) {
                ok = false;
                break;
            }
            gams[i] = std::move(res->first);
            pays += res->second;
        }
        if (!ok) continue;
        double dec = 0.0;
        for (long s = 0; s < S; ++s) {
            double best_a = -kInf;
            for (int a = 0; a < d; ++a) {
                double va = 0.0;
                for (int t = 0; t < m; ++t) va += g.joint_p(bt, s, t) * g.util(a, t);
                best_a = std::max(best_a, va);
            }
            dec += best_a;
        }
        double val = dec - pays;
        if (val > best_val) {
            best_val = val;
            best_b = bt;
            best_gamma = std::move(gams);
        }
    }
    if (best_b < 0)
        throw AllProfilesInfeasible("no action profile can be incentivized within budget");

    UncorrelatedMechanism mech;
    mech.gamma = std::move(best_gamma);
    mech.pi.assign(S * d, 0.0);
    for (long s = 0; s < S; ++s) {
        int arg = 0;
        double best_a = -kInf;
        for (int a = 0; a < d; ++a) {
            double va = 0.0;
            for (int t = 0; t < m; ++t) va += g.joint_p(best_b, s, t) * g.util(a, t);
            if (va > best_a) {
                best_a = va;
                arg = a;
            }
        }
        mech.pi[s * d + arg] = 1.0;
    }
    return {std::move(mech), best_val};
}

UncorrelatedMechanism uncorrelate_pis(const GameInstance& g, const CorrelatedMechanism& corr) {
    const int n = g.n_agents, l = g.l, m = g.m, d = g.d;
    long B = g.num_profiles(), S = g.num_signal_profiles();

    // recover per-agent conditional signal kernels and check the product form
    std::vector<std::vector<std::vector<double>>> psi(n);
    for (int i = 0; i < n; ++i) {
        psi[i].resize(g.k);
        for (int b = 0; b < g.k; ++b) {
            std::vector<double> marg = marginal(g, i, b);
            psi[i][b].resize(static_cast<size_t>(l) * m);
            for (int s = 0; s < l; ++s)
                for (int t = 0; t < m; ++t)
                    psi[i][b][s * m + t] = g.prior[t] > 0.0
                                               ? marg[s * m + t] / g.prior[t]
                                               : 1.0 / l;
        }
    }
    double worst = 0.0;
    for (long b = 0; b < B; ++b) {
        std::vector<int> bd = profile_digits(b, n, g.k);
        for (long s = 0; s < S; ++s) {
            std::vector<int> sd = profile_digits(s, n, l);
            for (int t = 0; t < m; ++t) {
                double prod = g.prior[t];
                for (int j = 0; j < n; ++j) prod *= psi[j][bd[j]][sd[j] * m + t];
                worst = std::max(worst, std::abs(prod - g.joint_p(b, s, t)));
            }
        }
    }
    if (worst > 1e-8)
        throw NotProductForm("joint does not factor over agents; max residual " +
                             std::to_string(worst));

    double bestG = -kInf;
    long bbar = -1;
    for (long b = 0; b < B; ++b) {
        if (!(corr.mu[b] > kMuFloor)) continue;
        double G = 0.0;
        for (long s = 0; s < S; ++s)
            for (int t = 0; t < m; ++t) {
                double p = g.joint_p(b, s, t);
                if (p == 0.0) continue;
                double dec = 0.0;
                for (int a = 0; a < d; ++a) dec += corr.pi[(b * S + s) * d + a] * g.util(a, t);
                double pay = 0.0;
                for (int i = 0; i < n; ++i) pay += corr.gamma[i][(b * S + s) * m + t];
                G += p * (dec - pay);
            }
        if (G > bestG) {
            bestG = G;
            bbar = b;
        }
    }
    if (bbar < 0) throw InvalidInstance("uncorrelate_pis: mu has no supported profile");
    std::vector<int> bbar_d = profile_digits(bbar, n, g.k);

    UncorrelatedMechanism out;
    out.pi.assign(S * d, 0.0);
    for (long s = 0; s < S; ++s)
        for (int a = 0; a < d; ++a) out.pi[s * d + a] = corr.pi[(bbar * S + s) * d + a];

    const long ko = profile_count(n - 1, g.k);
    const long so = profile_count(n - 1, l);
    out.gamma.assign(n, std::vector<double>(static_cast<size_t>(l) * m, 0.0));
    for (int i = 0; i < n; ++i) {
        double W = 0.0;
        for (long jo = 0; jo < ko; ++jo)
            W += corr.mu[compose_profile(i, n, g.k, bbar_d[i], jo)];
        for (int s_i = 0; s_i < l; ++s_i)
            for (int t = 0; t < m; ++t) {
                double acc = 0.0;
                for (long jo = 0; jo < ko; ++jo) {
                    long b_full = compose_profile(i, n, g.k, bbar_d[i], jo);
                    double mu = corr.mu[b_full];
                    if (mu == 0.0) continue;
                    std::vector<int> bd = profile_digits(b_full, n, g.k);
                    for (long o = 0; o < so; ++o) {
                        long s_full = compose_profile(i, n, l, s_i, o);
                        std::vector<int> sd = profile_digits(s_full, n, l);
                        double prodpsi = 1.0;
                        for (int j = 0; j < n; ++j) {
                            if (j == i) continue;
                            prodpsi *= psi[j][bd[j]][sd[j] * m + t];
                        }
                        acc += mu * prodpsi * corr.gamma[i][(b_full * S + s_full) * m + t];
                    }
                }
                out.gamma[i][s_i * m + t] = acc / W;
            }
    }
    return out;
}

MarginRule solve_margin_rule(const GameInstance& g, int agent, int b_hat, double M) {
    const int k = g.k, l = g.l, m = g.m;
    if (agent < 0 || agent >= g.n_agents || b_hat < 0 || b_hat >= k)
        throw InvalidInstance("solve_margin_rule: agent or action out of range");
    if (!(M > 0.0)) throw InvalidInstance("solve_margin_rule: budget must be positive");
    std::vector<std::vector<double>> margs(k);
    for (int b = 0; b < k; ++b) margs[b] = marginal(g, agent, b);

    // Variables: the rule table gamma in [0, M], one z per (deviation
    // action, observed signal) majorizing the best-report payoff there, and
    // the margin r itself.
    LinearProgram lp;
    for (int c = 0; c < l * m; ++c) lp.add_var(0.0, M);
    auto zind = [&](int bp, int s) {
        int off = bp < b_hat ? bp : bp - 1;
        return l * m + off * l + s;
    };
    for (int c = 0; c < (k - 1) * l; ++c) lp.add_var(0.0, M);
    const int rv = lp.add_var(-(M + 2.0), M + 2.0);
    lp.objective[rv] = 1.0;
    const auto& mh = margs[b_hat];

    for (int bp = 0; bp < k; ++bp) {
        if (bp == b_hat) continue;
        std::vector<double> row(lp.num_vars, 0.0);
        for (int c = 0; c < l * m; ++c) row[c] = mh[c];
        for (int s = 0; s < l; ++s) row[zind(bp, s)] -= 1.0;
        row[rv] = -1.0;
        lp.add_constraint(std::move(row), Sense::Ge,
                          g.costs[agent][b_hat] - g.costs[agent][bp]);
        for (int s = 0; s < l; ++s)
            for (int sp = 0; sp < l; ++sp) {
                std::vector<double> zrow(lp.num_vars, 0.0);
                zrow[zind(bp, s)] = 1.0;
                for (int t = 0; t < m; ++t) zrow[sp * m + t] -= margs[bp][s * m + t];
                lp.add_constraint(std::move(zrow), Sense::Ge, 0.0);
            }
    }
    for (int s = 0; s < l; ++s)
        for (int sp = 0; sp < l; ++sp) {
            if (sp == s) continue;
            std::vector<double> row(lp.num_vars, 0.0);
            for (int t = 0; t < m; ++t) {
                row[s * m + t] += mh[s * m + t];
                row[sp * m + t] -= mh[s * m + t];
            }
            lp.add_constraint(std::move(row), Sense::Ge, 0.0);
        }

    LpSolution sol = solve(lp);
    if (sol.status != LpStatus::Optimal)
        throw NumericalFailure("incentivizing-rule LP did not solve");
    MarginRule out;
    out.margin = sol.objective;
    // The margin LP is degenerate in the payment level: adding a constant to
    // a rule leaves every margin constraint unchanged. Re-solve with the
    // margin pinned and minimize total payments so the returned rule does
    // not carry an arbitrary constant offset.
    {
        LinearProgram trim = lp;
        trim.objective.assign(trim.num_vars, 0.0);
        for (int c = 0; c < l * m; ++c) trim.objective[c] = -1.0;
        std::vector<double> pin(trim.num_vars, 0.0);
        pin[rv] = 1.0;
        trim.add_constraint(std::move(pin), Sense::Ge, sol.objective - 1e-9);
        LpSolution lean = solve(trim);
        if (lean.status == LpStatus::Optimal) sol = std::move(lean);
    }
    out.rule.assign(sol.x.begin(), sol.x.begin() + l * m);
    return out;
}

IncentivizingRules build_incentivizing_rules(const GameInstance& g, double M) {
    IncentivizingRules out;
    out.rules.assign(g.n_agents, std::vector<std::vector<double>>(g.k));
    out.margin = kInf;
    for (int i = 0; i < g.n_agents; ++i)
        for (int b_hat = 0; b_hat < g.k; ++b_hat) {
            MarginRule mr = solve_margin_rule(g, i, b_hat, M);
            if (mr.margin <= 1e-9)
                throw AssumptionFails("agent " + std::to_string(i) + " action " +
                                      std::to_string(b_hat) +
                                      " cannot be strictly incentivized (margin " +
                                      std::to_string(mr.margin) + ")");
            out.rules[i][b_hat] = std::move(mr.rule);
            out.margin = std::min(out.margin, mr.margin);
        }
    return out;
}

}  // namespace acqlab
