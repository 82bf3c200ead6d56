#include "acqlab/response.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "acqlab/errors.hpp"
#include "acqlab/kernels.hpp"

namespace acqlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// relative tolerance grouping near-optimal responses for PrincipalFavorable
constexpr double kPfTol = 1e-9;

// q[s*l + s'] = sum_theta marg[s,theta] * gamma[s',theta]: expected payment
// mass from observing s and reporting s'.
void fill_q(const std::vector<double>& marg, const double* gamma, int l, int m,
            std::vector<double>& q) {
    for (int s = 0; s < l; ++s)
        for (int sp = 0; sp < l; ++sp)
            q[s * l + sp] = kernels::dot(marg.data() + s * m, gamma + sp * m, m);
}

struct LexEval {
    double value = -kInf;
    int action = 0;
    std::vector<int> rep;
    bool tied = false;
};

// Smallest action, identity-preferring report, then smallest report index;
// all comparisons exact so the scan is fully deterministic.
void lex_eval(const GameInstance& g, int i, const double* gamma,
              const std::vector<std::vector<double>>& margs, LexEval& out,
              std::vector<double>& q, std::vector<int>& rep) {
    out.value = -kInf;
    out.tied = false;
    q.resize(static_cast<size_t>(g.l) * g.l);
    rep.resize(g.l);
    out.rep.resize(g.l);
    for (int b = 0; b < g.k; ++b) {
        fill_q(margs[b], gamma, g.l, g.m, q);
        double val = 0.0;
        bool row_tie = false;
        for (int s = 0; s < g.l; ++s) {
            double best = q[s * g.l];
            int arg = 0;
            int hits = 1;
            for (int sp = 1; sp < g.l; ++sp) {
                double v = q[s * g.l + sp];
                if (v > best) {
                    best = v;
                    arg = sp;
                    hits = 1;
                } else if (v == best) {
                    ++hits;
                }
            }
            if (q[s * g.l + s] == best) arg = s;
            if (hits > 1) row_tie = true;
            val += best;
            rep[s] = arg;
        }
        val -= g.costs[i][b];
        if (val > out.value) {
            out.value = val;
            out.action = b;
            std::copy(rep.begin(), rep.end(), out.rep.begin());
            out.tied = row_tie;
        } else if (val == out.value) {
            out.tied = true;
        }
    }
}

std::vector<std::vector<double>> all_marginals(const GameInstance& g, int i) {
    std::vector<std::vector<double>> margs(g.k);
    for (int b = 0; b < g.k; ++b) margs[b] = marginal(g, i, b);
    return margs;
}

struct Candidate {
    int action = 0;
    std::vector<int> rep;
    double value = 0.0;
};

// Every (action, report map) within kPfTol of agent j's optimum, in
// lexicographic order: action ascending, and per signal the truthful report
// ahead of the remaining tied reports ascending, so a fully indifferent
// agent resolves to truth-telling.
std::vector<Candidate> pf_candidates(const GameInstance& g, int j,
                                     const std::vector<double>& gamma) {
    auto margs = all_marginals(g, j);
    std::vector<std::vector<double>> qs(g.k, std::vector<double>(g.l * g.l));
    std::vector<double> act_val(g.k);
    std::vector<std::vector<std::vector<int>>> sets(g.k);
    for (int b = 0; b < g.k; ++b) {
        fill_q(margs[b], gamma.data(), g.l, g.m, qs[b]);
        sets[b].resize(g.l);
        double val = 0.0;
        for (int s = 0; s < g.l; ++s) {
            double best = -kInf;
            for (int sp = 0; sp < g.l; ++sp) best = std::max(best, qs[b][s * g.l + sp]);
            double tol = kPfTol * std::max(1.0, std::abs(best));
            for (int sp = 0; sp < g.l; ++sp)
                if (qs[b][s * g.l + sp] >= best - tol) sets[b][s].push_back(sp);
            auto& st = sets[b][s];
            auto truthful = std::find(st.begin(), st.end(), s);
            if (truthful != st.end()) {
                st.erase(truthful);
                st.insert(st.begin(), s);
            }
            val += best;
        }
        act_val[b] = val - g.costs[j][b];
    }
    double best_a = *std::max_element(act_val.begin(), act_val.end());
    double tol_a = kPfTol * std::max(1.0, std::abs(best_a));

    std::vector<Candidate> out;
    for (int b = 0; b < g.k; ++b) {
        if (act_val[b] < best_a - tol_a) continue;
        std::vector<size_t> pos(g.l, 0);
        while (true) {
            Candidate c;
            c.action = b;
            c.rep.resize(g.l);
            c.value = -g.costs[j][b];
            for (int s = 0; s < g.l; ++s) {
                c.rep[s] = sets[b][s][pos[s]];
                c.value += qs[b][s * g.l + c.rep[s]];
            }
            out.push_back(std::move(c));
            int s = g.l - 1;
            while (s >= 0 && ++pos[s] == sets[b][s].size()) {
                pos[s] = 0;
                --s;
            }
            if (s < 0) break;
        }
    }
    return out;
}

// Principal's net stage utility when agents play/report per `pick`.
double pf_joint_value(const GameInstance& g, const UncorrelatedMechanism& mech,
                      const std::vector<const Candidate*>& pick) {
    const int n = g.n_agents;
    std::vector<int> bd(n), rd(n);
    for (int j = 0; j < n; ++j) bd[j] = pick[j]->action;
    long b = profile_index(bd, g.k);
    long S = g.num_signal_profiles();
    double tot = 0.0;
    for (long s = 0; s < S; ++s) {
        std::vector<int> sd = profile_digits(s, n, g.l);
        for (int j = 0; j < n; ++j) rd[j] = pick[j]->rep[sd[j]];
        long srep = profile_index(rd, g.l);
        for (int t = 0; t < g.m; ++t) {
            double p = g.joint_p(b, s, t);
            if (p == 0.0) continue;
            double dec = 0.0;
            for (int a = 0; a < g.d; ++a) dec += mech.pi[srep * g.d + a] * g.util(a, t);
            double pay = 0.0;
            for (int j = 0; j < n; ++j) pay += mech.gamma[j][rd[j] * g.m + t];
            tot += p * (dec - pay);
        }
    }
    return tot;
}

void check_unc_shape(const GameInstance& g, const UncorrelatedMechanism& mech) {
    if (static_cast<int>(mech.gamma.size()) != g.n_agents)
        throw DimensionMismatch("uncorrelated mechanism: gamma agent count");
    for (const auto& gm : mech.gamma)
        if (static_cast<long>(gm.size()) != static_cast<long>(g.l) * g.m)
            throw DimensionMismatch("uncorrelated mechanism: gamma table shape");
    if (static_cast<long>(mech.pi.size()) != g.num_signal_profiles() * g.d)
        throw DimensionMismatch("uncorrelated mechanism: pi shape");
}

void check_corr_shape(const GameInstance& g, const CorrelatedMechanism& mech) {
    long B = g.num_profiles(), S = g.num_signal_profiles();
    if (static_cast<long>(mech.mu.size()) != B)
        throw DimensionMismatch("correlated mechanism: mu shape");
    if (static_cast<int>(mech.gamma.size()) != g.n_agents)
        throw DimensionMismatch("correlated mechanism: gamma agent count");
    for (const auto& gm : mech.gamma)
        if (static_cast<long>(gm.size()) != B * S * g.m)
            throw DimensionMismatch("correlated mechanism: gamma table shape");
    if (static_cast<long>(mech.pi.size()) != B * S * g.d)
        throw DimensionMismatch("correlated mechanism: pi shape");
}

}  // namespace

JointResponse joint_best_response(const GameInstance& g, const UncorrelatedMechanism& mech) {
    check_unc_shape(g, mech);
    const int n = g.n_agents;
    std::vector<std::vector<Candidate>> cand(n);
    for (int j = 0; j < n; ++j) cand[j] = pf_candidates(g, j, mech.gamma[j]);

    std::vector<size_t> pos(n, 0);
    std::vector<const Candidate*> pick(n);
    double best = -kInf;
    std::vector<size_t> best_pos(n, 0);
    while (true) {
        for (int j = 0; j < n; ++j) pick[j] = &cand[j][pos[j]];
        double v = pf_joint_value(g, mech, pick);
        if (v > best) {
            best = v;
            best_pos = pos;
        }
        int j = n - 1;
        while (j >= 0 && ++pos[j] == cand[j].size()) {
            pos[j] = 0;
            --j;
        }
        if (j < 0) break;
    }

    JointResponse out;
    out.principal_value = best;
    out.agents.resize(n);
    for (int j = 0; j < n; ++j) {
        const Candidate& c = cand[j][best_pos[j]];
        out.agents[j] = BestResponse{c.action, c.rep, c.value, cand[j].size() > 1};
    }
    return out;
}

BestResponse best_response(const GameInstance& g, int i, const std::vector<double>& gamma_i,
                           TieBreak tie_break, const UncorrelatedMechanism* mech) {
    if (static_cast<long>(gamma_i.size()) != static_cast<long>(g.l) * g.m)
        throw DimensionMismatch("best_response: gamma_i must be an l*m table");
    if (tie_break == TieBreak::PrincipalFavorable) {
        if (!mech)
            throw DimensionMismatch("best_response: PrincipalFavorable needs mechanism context");
        UncorrelatedMechanism ctx = *mech;
        ctx.gamma[i] = gamma_i;
        return joint_best_response(g, ctx).agents[i];
    }
    auto margs = all_marginals(g, i);
    LexEval e;
    std::vector<double> q;
    std::vector<int> rep;
    lex_eval(g, i, gamma_i.data(), margs, e, q, rep);
    return BestResponse{e.action, e.rep, e.value, e.tied};
}

double expected_payment(const GameInstance& g, const CorrelatedMechanism& mech, int i) {
    check_corr_shape(g, mech);
    long B = g.num_profiles(), S = g.num_signal_profiles();
    double tot = 0.0;
    for (long b = 0; b < B; ++b) {
        if (mech.mu[b] == 0.0) continue;
        double inner = 0.0;
        for (long s = 0; s < S; ++s)
            inner += kernels::dot(g.joint[b].data() + s * g.m,
                                  mech.gamma[i].data() + (b * S + s) * g.m, g.m);
        tot += mech.mu[b] * inner;
    }
    return tot;
}

double expected_payment_dev(const GameInstance& g, const CorrelatedMechanism& mech, int i,
                            const DeviationPolicy& dev) {
    check_corr_shape(g, mech);
    if (static_cast<int>(dev.action_map.size()) != g.k ||
        static_cast<long>(dev.report_map.size()) != static_cast<long>(g.k) * g.l)
        throw DimensionMismatch("expected_payment_dev: deviation shape");
    const int n = g.n_agents;
    long B = g.num_profiles(), S = g.num_signal_profiles();
    double tot = 0.0;
    for (long b = 0; b < B; ++b) {
        if (mech.mu[b] == 0.0) continue;
        int b_i = digit_of(b, i, n, g.k);
        long played = with_digit(b, i, n, g.k, dev.action_map[b_i]);
        double inner = 0.0;
        for (long s = 0; s < S; ++s) {
            int s_i = digit_of(s, i, n, g.l);
            long srep = with_digit(s, i, n, g.l, dev.report_map[b_i * g.l + s_i]);
            inner += kernels::dot(g.joint[played].data() + s * g.m,
                                  mech.gamma[i].data() + (b * S + srep) * g.m, g.m);
        }
        tot += mech.mu[b] * inner;
    }
    return tot;
}

std::pair<DeviationPolicy, double> best_deviation(const GameInstance& g,
                                                  const CorrelatedMechanism& mech, int i) {
    check_corr_shape(g, mech);
    const int n = g.n_agents, k = g.k, l = g.l, m = g.m;
    const long S = g.num_signal_profiles();
    const long ko = profile_count(n - 1, k);
    const long so = profile_count(n - 1, l);

    // w[b_i][b'][s_i][s']: expected payment mass from recommendation b_i when
    // playing b', observing s_i and reporting s', others truthful.
    auto wi = [k, l](int b_i, int bp, int s_i, int sp) {
        return ((static_cast<size_t>(b_i) * k + bp) * l + s_i) * l + sp;
    };
    std::vector<double> w(static_cast<size_t>(k) * k * l * l, 0.0);
    std::vector<double> mass(k, 0.0);
    for (int b_i = 0; b_i < k; ++b_i) {
        for (long jo = 0; jo < ko; ++jo) {
            long b_full = compose_profile(i, n, k, b_i, jo);
            double mu = mech.mu[b_full];
            if (mu == 0.0) continue;
            mass[b_i] += mu;
            for (int bp = 0; bp < k; ++bp) {
                long bp_full = compose_profile(i, n, k, bp, jo);
                for (int s_i = 0; s_i < l; ++s_i)
                    for (int sp = 0; sp < l; ++sp) {
                        double acc = 0.0;
                        for (long o = 0; o < so; ++o) {
                            long s_obs = compose_profile(i, n, l, s_i, o);
                            long s_rep = compose_profile(i, n, l, sp, o);
                            acc += kernels::dot(g.joint[bp_full].data() + s_obs * m,
                                                mech.gamma[i].data() + (b_full * S + s_rep) * m,
                                                m);
                        }
                        w[wi(b_i, bp, s_i, sp)] += mu * acc;
                    }
            }
        }
    }

    DeviationPolicy dev;
    dev.action_map.resize(k);
    dev.report_map.resize(static_cast<size_t>(k) * l);
    double total_best = 0.0, total_id = 0.0;
    std::vector<int> rep(l), best_rep(l);
    for (int b_i = 0; b_i < k; ++b_i) {
        double id_val = 0.0;
        for (int s_i = 0; s_i < l; ++s_i) id_val += w[wi(b_i, b_i, s_i, s_i)];
        // identity-initialized so exact ties keep truthful behavior
        double best_val = id_val;
        int best_bp = b_i;
        for (int s_i = 0; s_i < l; ++s_i) best_rep[s_i] = s_i;
        for (int bp = 0; bp < k; ++bp) {
            double v = mass[b_i] * (g.costs[i][b_i] - g.costs[i][bp]);
            for (int s_i = 0; s_i < l; ++s_i) {
                double qb = w[wi(b_i, bp, s_i, s_i)];
                int arg = s_i;
                for (int sp = 0; sp < l; ++sp)
                    if (w[wi(b_i, bp, s_i, sp)] > qb) {
                        qb = w[wi(b_i, bp, s_i, sp)];
                        arg = sp;
                    }
                v += qb;
                rep[s_i] = arg;
            }
            if (v > best_val) {
                best_val = v;
                best_bp = bp;
                best_rep = rep;
            }
        }
        total_best += best_val;
        total_id += id_val;
        dev.action_map[b_i] = best_bp;
        for (int s_i = 0; s_i < l; ++s_i) dev.report_map[b_i * l + s_i] = best_rep[s_i];
    }
    return {dev, total_best - total_id};
}

IcReport verify_ic(const GameInstance& g, const CorrelatedMechanism& mech) {
    IcReport rep;
    rep.min_slack = kInf;
    for (int i = 0; i < g.n_agents; ++i) {
        auto [dev, gain] = best_deviation(g, mech, i);
        rep.worst.push_back(std::move(dev));
        rep.slack.push_back(-gain);
        rep.min_slack = std::min(rep.min_slack, -gain);
    }
    return rep;
}

double f_circ(const GameInstance& g, int i, const std::vector<double>& gamma_i, int b_i) {
    if (static_cast<long>(gamma_i.size()) != static_cast<long>(g.l) * g.m)
        throw DimensionMismatch("f_circ: gamma_i must be an l*m table");
    if (b_i < 0 || b_i >= g.k) throw IndexOutOfRange("f_circ: b_i");
    std::vector<double> marg = marginal(g, i, b_i);
    double tot = 0.0;
    for (int s = 0; s < g.l; ++s) {
        double best = -kInf;
        for (int sp = 0; sp < g.l; ++sp)
            best = std::max(best, kernels::dot(marg.data() + s * g.m,
                                               gamma_i.data() + sp * g.m, g.m));
        tot += best;
    }
    return tot;
}

UncorrelatedMechanism make_truthful(const GameInstance& g, const UncorrelatedMechanism& mech) {
    JointResponse jr = joint_best_response(g, mech);
    UncorrelatedMechanism out = mech;
    const int n = g.n_agents;
    for (int j = 0; j < n; ++j)
        for (int s = 0; s < g.l; ++s) {
            int src = jr.agents[j].report_map[s];
            for (int t = 0; t < g.m; ++t) out.gamma[j][s * g.m + t] = mech.gamma[j][src * g.m + t];
        }
    long S = g.num_signal_profiles();
    std::vector<int> rd(n);
    for (long s = 0; s < S; ++s) {
        std::vector<int> sd = profile_digits(s, n, g.l);
        for (int j = 0; j < n; ++j) rd[j] = jr.agents[j].report_map[sd[j]];
        long srep = profile_index(rd, g.l);
        for (int a = 0; a < g.d; ++a) out.pi[s * g.d + a] = mech.pi[srep * g.d + a];
    }
    return out;
}

BrRegionCount count_br_regions(const GameInstance& g, int i, const std::vector<double>& gamma_a,
                               const std::vector<double>& gamma_b, int grid_size) {
    if (grid_size < 2) throw DimensionMismatch("count_br_regions: grid_size must be >= 2");
    long lm = static_cast<long>(g.l) * g.m;
    if (static_cast<long>(gamma_a.size()) != lm || static_cast<long>(gamma_b.size()) != lm)
        throw DimensionMismatch("count_br_regions: rule tables must be l*m");
    auto margs = all_marginals(g, i);
    std::vector<double> gam(lm);
    LexEval e;
    std::vector<double> q;
    std::vector<int> rep;
    std::set<long> seen;
    long prev = -1;
    int runs = 0;
    for (int j = 0; j < grid_size; ++j) {
        double alpha = static_cast<double>(j) / (grid_size - 1);
        for (long c = 0; c < lm; ++c) gam[c] = alpha * gamma_a[c] + (1.0 - alpha) * gamma_b[c];
        lex_eval(g, i, gam.data(), margs, e, q, rep);
        long key = e.action;
        for (int s = 0; s < g.l; ++s) key = key * g.l + e.rep[s];
        if (key != prev) {
            ++runs;
            prev = key;
        }
        seen.insert(key);
    }
    return {static_cast<int>(seen.size()), runs};
}

}  // namespace acqlab
