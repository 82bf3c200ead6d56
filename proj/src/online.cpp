#include "acqlab/online.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "acqlab/errors.hpp"
#include "acqlab/indexing.hpp"

namespace acqlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr long kNoLimit = std::numeric_limits<long>::max();

// internal signal for budgeted phases that ran out of rounds; never escapes
struct BudgetSignal {};

void check_rules(const GameInstance& g, const IncentivizingRules& rules) {
    if (static_cast<int>(rules.rules.size()) != g.n_agents)
        throw InvalidInstance("learner rules: expected one rule set per agent");
    for (const auto& per_agent : rules.rules) {
        if (static_cast<int>(per_agent.size()) != g.k)
            throw InvalidInstance("learner rules: expected one rule per action");
        for (const auto& rule : per_agent)
            if (rule.size() != static_cast<size_t>(g.l) * g.m)
                throw InvalidInstance("learner rules: rule tables must be l*m");
    }
    if (!(rules.margin > 0.0))
        throw InvalidInstance("learner rules: positive margin required");
}

// exploration commitment where only agent i faces a nonzero rule; decisions
// are drawn uniformly so the round reveals behavior, not decision quality
UncCommit prepare_probe(const Environment& env, int i, const std::vector<double>& rule) {
    const GameInstance& g = env.instance;
    UncorrelatedMechanism mech;
    mech.gamma.assign(g.n_agents, std::vector<double>(static_cast<size_t>(g.l) * g.m, 0.0));
    mech.gamma[i] = rule;
    mech.pi.assign(static_cast<size_t>(g.num_signal_profiles()) * g.d, 1.0 / g.d);
    return prepare_uncorrelated(env, mech);
}

// each agent gets the margin rule for their digit of the target profile
UncCommit prepare_profile_rules(const Environment& env, const IncentivizingRules& rules,
                                long btarget) {
    const GameInstance& g = env.instance;
    std::vector<int> bd = profile_digits(btarget, g.n_agents, g.k);
    UncorrelatedMechanism mech;
    mech.gamma.resize(g.n_agents);
    for (int i = 0; i < g.n_agents; ++i) mech.gamma[i] = rules.rules[i][bd[i]];
    mech.pi.assign(static_cast<size_t>(g.num_signal_profiles()) * g.d, 1.0 / g.d);
    return prepare_uncorrelated(env, mech);
}

RoundRecord probe_round(Environment& env, const UncCommit& com, Phase phase, Trace* trace) {
    RoundRecord rec = step_uncorrelated_prepared(env, com);
    rec.phase = phase;
    if (trace) {
        if (com.tie) trace->ties_observed++;
        trace->rounds.push_back(rec);
    }
    return rec;
}

struct ProbCounts {
    std::vector<std::vector<long>> zeta_cnt;   // [B][S*m]
    std::vector<long> t_profile;               // [B]
    std::vector<std::vector<long>> cell_cnt;   // [n][k*l]
    std::vector<std::vector<long>> theta_cnt;  // [n][(k*l)*m]
};

struct DigitCache {
    std::vector<std::vector<int>> bdig;  // [B] -> action digits
    std::vector<std::vector<int>> sdig;  // [S] -> signal digits
};

DigitCache make_digit_cache(const GameInstance& g) {
    DigitCache c;
    long B = g.num_profiles(), S = g.num_signal_profiles();
    c.bdig.reserve(B);
    for (long b = 0; b < B; ++b) c.bdig.push_back(profile_digits(b, g.n_agents, g.k));
    c.sdig.reserve(S);
    for (long s = 0; s < S; ++s) c.sdig.push_back(profile_digits(s, g.n_agents, g.l));
    return c;
}

// the learner sees played actions and reported signals, plus the state
void record_observation(const GameInstance& g, const DigitCache& dc, const RoundRecord& rec,
                        ProbCounts& c) {
    long b = rec.b_played, s = rec.s_reported;
    c.t_profile[b]++;
    c.zeta_cnt[b][s * g.m + rec.theta]++;
    for (int i = 0; i < g.n_agents; ++i) {
        long cell = static_cast<long>(dc.bdig[b][i]) * g.l + dc.sdig[s][i];
        c.cell_cnt[i][cell]++;
        c.theta_cnt[i][cell * g.m + rec.theta]++;
    }
}

void fill_cell_posterior(const ProbCounts& c, int i, long cell, int m, double* out) {
    long cnt = c.cell_cnt[i][cell];
    if (cnt == 0) {
        for (int t = 0; t < m; ++t) out[t] = 1.0 / m;
        return;
    }
    for (int t = 0; t < m; ++t)
        out[t] = static_cast<double>(c.theta_cnt[i][cell * m + t]) / static_cast<double>(cnt);
}

// rho_bar <= d_under / (13 m) over the scope's cells; an unobserved cell in
// scope keeps rho_bar infinite and blocks stopping
bool clause_holds(const GameInstance& g, const ProbCounts& c, double log_term, StopScope scope,
                  long btarget) {
    std::vector<std::pair<int, int>> rows;  // (agent, own action)
    if (scope == StopScope::PerProfile) {
        std::vector<int> bd = profile_digits(btarget, g.n_agents, g.k);
        for (int i = 0; i < g.n_agents; ++i) rows.emplace_back(i, bd[i]);
    } else {
        for (int i = 0; i < g.n_agents; ++i)
            for (int b_i = 0; b_i < g.k; ++b_i) rows.emplace_back(i, b_i);
    }
    double rho_bar = 0.0;
    for (auto [i, b_i] : rows) {
        for (int s_i = 0; s_i < g.l; ++s_i) {
            long cnt = c.cell_cnt[i][static_cast<long>(b_i) * g.l + s_i];
            if (cnt == 0) return false;
            rho_bar = std::max(rho_bar, std::sqrt(log_term / (2.0 * cnt)));
        }
    }
    double d_under = kInf;
    std::vector<double> xa(g.m), xb(g.m);
    for (auto [i, b_i] : rows) {
        for (int s = 0; s < g.l; ++s) {
            for (int sp = s + 1; sp < g.l; ++sp) {
                fill_cell_posterior(c, i, static_cast<long>(b_i) * g.l + s, g.m, xa.data());
                fill_cell_posterior(c, i, static_cast<long>(b_i) * g.l + sp, g.m, xb.data());
                double dist2 = 0.0;
                for (int t = 0; t < g.m; ++t) dist2 += (xa[t] - xb[t]) * (xa[t] - xb[t]);
                d_under = std::min(d_under, dist2);
            }
        }
    }
    return rho_bar <= d_under / (13.0 * g.m);
}

ProbEstimates estimate_prob_impl(Environment& env, const LearnerConfig& cfg, ProbStopMode mode,
                                 Trace* trace, long limit) {
    const GameInstance& g = env.instance;
    check_rules(g, cfg.rules);
    const int n = g.n_agents, k = g.k, l = g.l, m = g.m;
    const long B = g.num_profiles(), S = g.num_signal_profiles();
    DigitCache dc = make_digit_cache(g);

    ProbEstimates est;
    est.union_count = 6.0 * static_cast<double>(B) * static_cast<double>(cfg.T) *
                      static_cast<double>(S) * n * m;
    double log_term = std::log(2.0 * est.union_count / cfg.delta);

    ProbCounts c;
    c.zeta_cnt.assign(B, std::vector<long>(S * m, 0));
    c.t_profile.assign(B, 0);
    c.cell_cnt.assign(n, std::vector<long>(static_cast<long>(k) * l, 0));
    c.theta_cnt.assign(n, std::vector<long>(static_cast<long>(k) * l * m, 0));

    for (long bt = 0; bt < B && !est.truncated; ++bt) {
        UncCommit com = prepare_profile_rules(env, cfg.rules, bt);
        long devoted = 0;
        while (true) {
            bool more = devoted < cfg.N1;
            if (!more && mode == ProbStopMode::Faithful)
                more = !clause_holds(g, c, log_term, cfg.stop_scope, bt);
            if (!more) break;
            if (env.round >= limit) {
                if (mode == ProbStopMode::Faithful)
                    throw HorizonExhausted("estimate_prob: probability phase needs more than " +
                                           std::to_string(cfg.T) + " rounds");
                est.truncated = true;
                break;
            }
            if (mode == ProbStopMode::Faithful && devoted >= 50 * cfg.N1)
                throw HorizonExhausted("estimate_prob: stopping clause still unmet after " +
                                       std::to_string(devoted) + " rounds on profile " +
                                       std::to_string(bt));
            RoundRecord rec = probe_round(env, com, Phase::Prob, trace);
            record_observation(g, dc, rec, c);
            ++devoted;
        }
    }

    est.zeta.assign(B, std::vector<double>(S * m));
    est.nu_b.assign(B, 0.0);
    for (long b = 0; b < B; ++b) {
        long t = c.t_profile[b];
        if (t > 0) {
            for (long cell = 0; cell < S * m; ++cell)
                est.zeta[b][cell] = static_cast<double>(c.zeta_cnt[b][cell]) / t;
            est.nu_b[b] = std::sqrt(log_term / (2.0 * t));
        } else {
            std::fill(est.zeta[b].begin(), est.zeta[b].end(), 1.0 / (S * m));
            est.nu_b[b] = kInf;
        }
        est.nu = std::max(est.nu, est.nu_b[b]);
    }
    est.xi.assign(n, std::vector<double>(static_cast<long>(k) * l * m));
    est.rho_cell.assign(n, std::vector<double>(static_cast<long>(k) * l));
    for (int i = 0; i < n; ++i) {
        for (long cell = 0; cell < static_cast<long>(k) * l; ++cell) {
            fill_cell_posterior(c, i, cell, m, &est.xi[i][cell * m]);
            long cnt = c.cell_cnt[i][cell];
            est.rho_cell[i][cell] = cnt > 0 ? std::sqrt(log_term / (2.0 * cnt)) : kInf;
            est.rho = std::max(est.rho, est.rho_cell[i][cell]);
        }
    }
    est.t_profile = c.t_profile;
    est.t_cell = c.cell_cnt;
    est.clause_met.assign(B, 0);
    est.all_clauses_met = true;
    for (long b = 0; b < B; ++b) {
        est.clause_met[b] = clause_holds(g, c, log_term, cfg.stop_scope, b) ? 1 : 0;
        est.all_clauses_met = est.all_clauses_met && est.clause_met[b];
    }
    return est;
}

struct BsCtx {
    Environment& env;
    const GameInstance& g;
    const LearnerConfig& cfg;
    CostEstimates& memo;
    Trace* trace;
    long limit;
};

void ensure_cost_shape(CostEstimates& memo, int n, int k) {
    if (!memo.Lambda.empty()) return;
    long kk = static_cast<long>(k) * k;
    memo.Lambda.assign(n, std::vector<double>(kk, 0.0));
    memo.chi_table.assign(n, std::vector<double>(kk, 0.0));
    memo.visited.assign(n, std::vector<char>(kk, 0));
    memo.derived.assign(n, std::vector<char>(kk, 0));
    for (int i = 0; i < n; ++i)
        for (int b = 0; b < k; ++b) memo.visited[i][static_cast<long>(b) * k + b] = 1;
}

void store_result(CostEstimates& memo, int k, int i, int b, int bp, double L, double C,
                  bool from_split) {
    long f = static_cast<long>(b) * k + bp, r = static_cast<long>(bp) * k + b;
    memo.Lambda[i][f] = L;
    memo.chi_table[i][f] = C;
    memo.visited[i][f] = 1;
    memo.derived[i][f] = from_split;
    if (!memo.visited[i][r]) {
        memo.Lambda[i][r] = -L;
        memo.chi_table[i][r] = C;
        memo.visited[i][r] = 1;
        memo.derived[i][r] = 1;
    }
    memo.chi = std::max(memo.chi, C);
}

std::vector<double> blend_rules(const std::vector<double>& lo, const std::vector<double>& hi,
                                double t) {
    std::vector<double> out(lo.size());
    for (size_t j = 0; j < lo.size(); ++j) out[j] = (1.0 - t) * lo[j] + t * hi[j];
    return out;
}

int probe_response(BsCtx& ctx, int i, const std::vector<double>& rule) {
    if (ctx.env.round >= ctx.limit) throw BudgetSignal{};
    UncCommit com = prepare_probe(ctx.env, i, rule);
    RoundRecord rec = probe_round(ctx.env, com, Phase::Cost, ctx.trace);
    ctx.memo.rounds_used++;
    return digit_of(rec.b_played, i, ctx.g.n_agents, ctx.g.k);
}

double payment_average(BsCtx& ctx, int i, const std::vector<double>& rule) {
    UncCommit com = prepare_probe(ctx.env, i, rule);
    double sum = 0.0;
    for (long r = 0; r < ctx.cfg.N3; ++r) {
        if (ctx.env.round >= ctx.limit) throw BudgetSignal{};
        RoundRecord rec = probe_round(ctx.env, com, Phase::Cost, ctx.trace);
        ctx.memo.rounds_used++;
        sum += rec.payments[i];
    }
    return sum / static_cast<double>(ctx.cfg.N3);
}

// bisects between the two seed rules in t-space; t stays an exact dyadic so
// each step halves the interval width exactly
std::pair<double, double> bs_recurse(BsCtx& ctx, int i, int b, int bp,
                                     const std::vector<double>& seed_lo,
                                     const std::vector<double>& seed_hi, int depth) {
    const int k = ctx.g.k, l = ctx.g.l;
    if (depth > static_cast<long>(k) * l * l)
        throw RecursionOverflow("binary_search: split depth " + std::to_string(depth) +
                                " exceeds k*l^2 = " + std::to_string(static_cast<long>(k) * l * l));
    long f = static_cast<long>(b) * k + bp;
    if (ctx.memo.visited[i][f]) return {ctx.memo.Lambda[i][f], ctx.memo.chi_table[i][f]};

    double seed_gap = 0.0;
    for (size_t j = 0; j < seed_lo.size(); ++j)
        seed_gap = std::max(seed_gap, std::abs(seed_hi[j] - seed_lo[j]));

    double t_lo = 0.0, t_hi = 1.0;
    for (long step = 0; step < ctx.cfg.N2; ++step) {
        double t_mid = 0.5 * (t_lo + t_hi);
        std::vector<double> mid = blend_rules(seed_lo, seed_hi, t_mid);
        int resp = probe_response(ctx, i, mid);
        if (resp == b) {
            t_lo = t_mid;
        } else if (resp == bp) {
            t_hi = t_mid;
        } else {
            // a third action appeared: telescope C(b,bp) = C(b,a) + C(a,bp)
            ctx.memo.phase_log.push_back({i, b, bp, depth, true, t_hi - t_lo, seed_gap});
            std::vector<double> rule_lo = blend_rules(seed_lo, seed_hi, t_lo);
            std::vector<double> rule_hi = blend_rules(seed_lo, seed_hi, t_hi);
            auto [L1, C1] = bs_recurse(ctx, i, b, resp, rule_lo, mid, depth + 1);
            auto [L2, C2] = bs_recurse(ctx, i, resp, bp, mid, rule_hi, depth + 1);
            double L = L1 + L2, C = C1 + C2;
            store_result(ctx.memo, k, i, b, bp, L, C, true);
            return {L, C};
        }
    }
    ctx.memo.phase_log.push_back({i, b, bp, depth, false, t_hi - t_lo, seed_gap});
    std::vector<double> rule_lo = blend_rules(seed_lo, seed_hi, t_lo);
    std::vector<double> rule_hi = blend_rules(seed_lo, seed_hi, t_hi);
    double f_lo = payment_average(ctx, i, rule_lo);
    double f_hi = payment_average(ctx, i, rule_hi);
    double L = f_lo - f_hi;
    double C =
        2.0 * ctx.cfg.budget *
            std::sqrt(std::log(4.0 * ctx.g.n_agents * k * k / ctx.cfg.delta) /
                      (2.0 * static_cast<double>(ctx.cfg.N3))) +
        std::ldexp(ctx.cfg.budget, -static_cast<int>(ctx.cfg.N2));
    store_result(ctx.memo, k, i, b, bp, L, C, false);
    return {L, C};
}

CostEstimates estimate_costs_impl(Environment& env, const LearnerConfig& cfg, Trace* trace,
                                  long limit) {
    const GameInstance& g = env.instance;
    check_rules(g, cfg.rules);
    CostEstimates memo;
    ensure_cost_shape(memo, g.n_agents, g.k);
    BsCtx ctx{env, g, cfg, memo, trace, limit};
    try {
        for (int i = 0; i < g.n_agents; ++i)
            for (int b = 0; b < g.k; ++b)
                for (int bp = 0; bp < g.k; ++bp) {
                    if (b == bp || memo.visited[i][static_cast<long>(b) * g.k + bp]) continue;
                    bs_recurse(ctx, i, b, bp, cfg.rules.rules[i][b], cfg.rules.rules[i][bp], 0);
                }
    } catch (const BudgetSignal&) {
        memo.truncated = true;
    }
    return memo;
}

}  // namespace

LearnerConfig resolve_config(LearnerConfig cfg) {
    if (cfg.T < 1) throw InvalidInstance("learner config: T >= 1 required");
    if (!(cfg.delta > 0.0 && cfg.delta < 1.0))
        throw InvalidInstance("learner config: delta must lie in (0,1)");
    if (!(cfg.budget > 0.0)) throw InvalidInstance("learner config: budget must be positive");
    if (cfg.ic_tolerance < 0.0)
        throw InvalidInstance("learner config: ic_tolerance must be nonnegative");
    double T = static_cast<double>(cfg.T);
    if (cfg.N1 <= 0) cfg.N1 = static_cast<long>(std::ceil(std::pow(T, 2.0 / 3.0)));
    if (cfg.N3 <= 0) cfg.N3 = static_cast<long>(std::ceil(std::pow(T, 2.0 / 3.0)));
    if (cfg.N2 <= 0) cfg.N2 = std::max<long>(1, static_cast<long>(std::ceil(std::log2(T))));
    return cfg;
}

std::pair<LearnerConfig, std::uint64_t> config_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("learner config: ") + e.what());
    }
    if (!j.is_object()) throw ParseError("learner config: expected a JSON object");
    LearnerConfig cfg;
    std::uint64_t seed = 0;
    try {
        if (j.contains("T")) cfg.T = j.at("T").get<long>();
        if (j.contains("N1")) cfg.N1 = j.at("N1").get<long>();
        if (j.contains("N2")) cfg.N2 = j.at("N2").get<long>();
        if (j.contains("N3")) cfg.N3 = j.at("N3").get<long>();
        if (j.contains("delta")) cfg.delta = j.at("delta").get<double>();
        if (j.contains("ic_tolerance")) cfg.ic_tolerance = j.at("ic_tolerance").get<double>();
        if (j.contains("seed")) seed = j.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("learner config: ") + e.what());
    }
    return {cfg, seed};
}

double hoeffding_radius(long n_samples, double range_width, double delta_local) {
    if (n_samples < 1 || range_width < 0.0 || !(delta_local > 0.0))
        throw InvalidInstance("hoeffding_radius: need n >= 1, width >= 0, delta > 0");
    return range_width * std::sqrt(std::log(2.0 / delta_local) / (2.0 * n_samples));
}

ProbEstimates estimate_prob(Environment& env, const LearnerConfig& cfg0, ProbStopMode mode,
                            Trace* trace) {
    LearnerConfig cfg = resolve_config(cfg0);
    return estimate_prob_impl(env, cfg, mode, trace, cfg.T);
}

std::pair<double, double> binary_search(Environment& env, int i, int b, int bp,
                                        const std::vector<double>& gamma_lo,
                                        const std::vector<double>& gamma_hi,
                                        const LearnerConfig& cfg0, CostEstimates& memo,
                                        Trace* trace) {
    LearnerConfig cfg = resolve_config(cfg0);
    const GameInstance& g = env.instance;
    if (i < 0 || i >= g.n_agents || b < 0 || b >= g.k || bp < 0 || bp >= g.k || b == bp)
        throw IndexOutOfRange("binary_search: agent or action index out of range");
    if (gamma_lo.size() != static_cast<size_t>(g.l) * g.m ||
        gamma_hi.size() != static_cast<size_t>(g.l) * g.m)
        throw DimensionMismatch("binary_search: rule tables must be l*m");
    ensure_cost_shape(memo, g.n_agents, g.k);
    BsCtx ctx{env, g, cfg, memo, trace, kNoLimit};
    return bs_recurse(ctx, i, b, bp, gamma_lo, gamma_hi, 0);
}

CostEstimates estimate_costs(Environment& env, const LearnerConfig& cfg0, Trace* trace) {
    LearnerConfig cfg = resolve_config(cfg0);
    return estimate_costs_impl(env, cfg, trace, kNoLimit);
}

std::pair<CorrelatedMechanism, CommitArtifacts> build_commit_mechanism(
    const GameInstance& g, const ProbEstimates& prob, const CostEstimates& costs,
    const LearnerConfig& cfg0, bool clamp_alpha) {
    LearnerConfig cfg = resolve_config(cfg0);
    check_rules(g, cfg.rules);
    const int n = g.n_agents, k = g.k, l = g.l, m = g.m;
    const long B = g.num_profiles(), S = g.num_signal_profiles();
    if (static_cast<long>(prob.zeta.size()) != B || static_cast<int>(prob.xi.size()) != n ||
        static_cast<int>(costs.Lambda.size()) != n)
        throw DimensionMismatch("build_commit_mechanism: estimate tables have wrong shape");

    CommitArtifacts art;
    art.nu = prob.nu;
    art.chi = costs.chi;
    art.rho = prob.rho;
    double M = cfg.budget;
    art.eps = 2.0 * M * static_cast<double>(S) * m * prob.nu + costs.chi;
    art.lambda = 2.0 * M * static_cast<double>(S) * m * (k + 1) * (prob.nu + costs.chi);

    // smallest pairwise separation among the estimated posteriors
    double ell_hat = kInf;
    bool any_pair = false;
    for (int i = 0; i < n; ++i) {
        for (int b_i = 0; b_i < k; ++b_i) {
            for (int s = 0; s < l; ++s) {
                for (int sp = s + 1; sp < l; ++sp) {
                    const double* xa = &prob.xi[i][(static_cast<long>(b_i) * l + s) * m];
                    const double* xb = &prob.xi[i][(static_cast<long>(b_i) * l + sp) * m];
                    double dist2 = 0.0;
                    for (int t = 0; t < m; ++t) dist2 += (xa[t] - xb[t]) * (xa[t] - xb[t]);
                    ell_hat = std::min(ell_hat, dist2);
                    any_pair = true;
                }
            }
        }
    }
    if (!any_pair) ell_hat = 0.0;
    art.ell_hat = ell_hat;
    art.ell_bar = ell_hat + 4.0 * m * prob.rho;
    art.ell_under = ell_hat - 4.0 * m * prob.rho;

    double margin = cfg.rules.margin;
    art.beta = std::isfinite(art.ell_bar)
                   ? (45.0 + art.ell_bar) / (18.0 * margin + 45.0 + art.ell_bar)
                   : 1.0;
    art.alpha = margin * art.ell_under / (margin * art.ell_bar + 65.0 * art.lambda);
    if (!(art.ell_under > 0.0) || !std::isfinite(art.alpha) || art.alpha < 0.0) {
        if (!clamp_alpha)
            throw NonPositiveEllUnder("posterior separation lower bound " +
                                      std::to_string(art.ell_under) +
                                      " does not support a positive mixing weight");
        art.alpha = 0.0;
        art.alpha_clamped = true;
    }

    if (!std::isfinite(art.eps))
        throw NumericalFailure(
            "build_commit_mechanism: infinite estimate radius (unvisited profile or pair)");
    auto [lp, vars] = build_lp(g, prob.zeta, costs.Lambda, art.eps, M);
    LpSolution sol = solve(lp);
    if (sol.status == LpStatus::Infeasible)
        throw LpInfeasible("commit LP infeasible at slack " + std::to_string(art.eps));
    if (sol.status != LpStatus::Optimal)
        throw NumericalFailure("commit LP did not reach an optimum");
    CorrelatedMechanism tilde = recover_mechanism(sol, vars, M);

    art.H = 0.0;
    for (int i = 0; i < n; ++i) {
        for (long cell = 0; cell < static_cast<long>(k) * l; ++cell) {
            double sq = 0.0;
            for (int t = 0; t < m; ++t) sq += prob.xi[i][cell * m + t] * prob.xi[i][cell * m + t];
            art.H = std::max(art.H, 0.5 * sq);
        }
    }
    art.gamma_hat.assign(n, std::vector<double>(static_cast<long>(k) * l * m));
    for (int i = 0; i < n; ++i) {
        for (long cell = 0; cell < static_cast<long>(k) * l; ++cell) {
            double sq = 0.0;
            for (int t = 0; t < m; ++t) sq += prob.xi[i][cell * m + t] * prob.xi[i][cell * m + t];
            for (int t = 0; t < m; ++t)
                art.gamma_hat[i][cell * m + t] = prob.xi[i][cell * m + t] + art.H - 0.5 * sq;
        }
    }

    CorrelatedMechanism mech = tilde;  // mu and pi are kept as recovered
    for (long b = 0; b < B; ++b) {
        std::vector<int> bd = profile_digits(b, n, k);
        for (long s = 0; s < S; ++s) {
            std::vector<int> sd = profile_digits(s, n, l);
            for (int i = 0; i < n; ++i) {
                long cell = static_cast<long>(bd[i]) * l + sd[i];
                for (int t = 0; t < m; ++t) {
                    double mixed =
                        art.beta * cfg.rules.rules[i][bd[i]][static_cast<long>(sd[i]) * m + t] +
                        (1.0 - art.beta) * art.gamma_hat[i][cell * m + t];
                    long idx = (b * S + s) * m + t;
                    mech.gamma[i][idx] = art.alpha * tilde.gamma[i][idx] + (1.0 - art.alpha) * mixed;
                }
            }
        }
    }
    return {mech, art};
}

RunResult run(Environment& env, const LearnerConfig& cfg0) {
    LearnerConfig cfg = resolve_config(cfg0);
    check_rules(env.instance, cfg.rules);
    RunResult out;
    out.trace.offline_value = env.offline_value;
    const long start = env.round;
    const long limit = start + cfg.T;

    out.prob = estimate_prob_impl(env, cfg, ProbStopMode::Budgeted, &out.trace, limit);
    if (!out.prob.truncated) {
        out.costs = estimate_costs_impl(env, cfg, &out.trace, limit);
    } else {
        ensure_cost_shape(out.costs, env.instance.n_agents, env.instance.k);
        out.costs.truncated = true;
    }
    out.truncated = out.prob.truncated || out.costs.truncated;
    out.exploration_rounds = env.round - start;

    if (!out.truncated) {
        CorrelatedMechanism mech;
        std::tie(mech, out.artifacts) =
            build_commit_mechanism(env.instance, out.prob, out.costs, cfg, /*clamp_alpha=*/true);
        CorrCommit com = prepare_correlated(env, std::move(mech), cfg.strict_ic, cfg.ic_tolerance);
        out.ic_slack = com.min_slack;
        out.ic_pass = com.min_slack >= -cfg.ic_tolerance;
        out.committed = true;
        while (env.round < limit) {
            RoundRecord rec = step_correlated_prepared(env, com);
            rec.phase = Phase::Commit;
            out.trace.rounds.push_back(rec);
        }
    }
    return out;
}

double regret_bound(const GameInstance& g, const InstanceConstants& consts,
                    const LearnerConfig& cfg0) {
    LearnerConfig cfg = resolve_config(cfg0);
    if (!(consts.ell > 0.0) || !(consts.iota > 0.0) || !(cfg.rules.margin > 0.0)) return kInf;
    double B = static_cast<double>(g.num_profiles());
    double S = static_cast<double>(g.num_signal_profiles());
    double n = g.n_agents, k = g.k, l = g.l, m = g.m;
    double M = cfg.budget, T = static_cast<double>(cfg.T);
    double margin = cfg.rules.margin;
    double log_term = std::log(12.0 * B * T * S * n * m / cfg.delta);
    double kappa =
        144.5 * m * m * log_term / (consts.iota * consts.iota * consts.ell * consts.ell);
    double main = (1567.0 / (margin * consts.ell)) * M * M * M * B * S * m * n * k * k * k * l * l *
                  (std::sqrt(log_term) + 1.0) * std::max(std::pow(T, 2.0 / 3.0), kappa);
    return main + (n * M + 1.0) * std::log(T);
}

bool clean_event_prob(const GameInstance& g, const ProbEstimates& prob) {
    const int n = g.n_agents, k = g.k, l = g.l, m = g.m;
    const long B = g.num_profiles(), S = g.num_signal_profiles();
    if (static_cast<long>(prob.zeta.size()) != B || static_cast<int>(prob.xi.size()) != n)
        throw DimensionMismatch("clean_event_prob: estimate tables have wrong shape");
    for (long b = 0; b < B; ++b) {
        double r = prob.nu_b[b];
        for (long cell = 0; cell < S * m; ++cell)
            if (!(std::abs(prob.zeta[b][cell] - g.joint[b][cell]) <= r)) return false;
    }
    for (int i = 0; i < n; ++i) {
        for (int b_i = 0; b_i < k; ++b_i) {
            std::vector<double> marg = marginal(g, i, b_i);
            for (int s_i = 0; s_i < l; ++s_i) {
                long cell = static_cast<long>(b_i) * l + s_i;
                double mass = 0.0;
                for (int t = 0; t < m; ++t) mass += marg[static_cast<long>(s_i) * m + t];
                if (mass <= 0.0) continue;  // no posterior to compare against
                double r = prob.rho_cell[i][cell];
                if (!std::isfinite(r)) continue;  // unobserved cell, vacuous
                std::vector<double> post = posterior(g, i, b_i, s_i);
                for (int t = 0; t < m; ++t)
                    if (!(std::abs(prob.xi[i][cell * m + t] - post[t]) <= r)) return false;
            }
        }
    }
    return true;
}

bool clean_event_costs(const GameInstance& g, const CostEstimates& costs) {
    const int n = g.n_agents, k = g.k;
    if (static_cast<int>(costs.Lambda.size()) != n)
        throw DimensionMismatch("clean_event_costs: estimate tables have wrong shape");
    for (int i = 0; i < n; ++i) {
        for (int b = 0; b < k; ++b) {
            for (int bp = 0; bp < k; ++bp) {
                long idx = static_cast<long>(b) * k + bp;
                if (!costs.visited[i][idx]) continue;
                double truth = g.costs[i][b] - g.costs[i][bp];
                if (!(std::abs(costs.Lambda[i][idx] - truth) <= costs.chi_table[i][idx]))
                    return false;
            }
        }
    }
    return true;
}

}  // namespace acqlab
