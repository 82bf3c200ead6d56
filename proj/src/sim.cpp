#include "acqlab/sim.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "acqlab/errors.hpp"
#include "acqlab/offline.hpp"
#include "acqlab/rng.hpp"

namespace acqlab {

namespace {

std::string fmt_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string profile_field(long idx, int n, int radix) {
    if (idx < 0) return "";
    std::vector<int> d = profile_digits(idx, n, radix);
    std::string out;
    for (int i = 0; i < n; ++i) {
        if (i) out += ',';
        out += std::to_string(d[i]);
    }
    return out;
}

std::string csv_quote(const std::string& s) {
    bool needs = s.find_first_of(",\"\n") != std::string::npos;
    if (!needs) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

// draws a (signal profile, state) cell from the joint table of profile b
std::pair<long, int> draw_signal_state(const GameInstance& g, Rng& rng, long b) {
    int cell = rng.sample_discrete(g.joint[b].data(), static_cast<int>(g.joint[b].size()));
    return {cell / g.m, cell % g.m};
}

}  // namespace

const char* phase_name(Phase p) {
    switch (p) {
        case Phase::Prob: return "explore-prob";
        case Phase::Cost: return "explore-cost";
        case Phase::Commit: return "commit";
    }
    return "?";
}

Environment make_environment(GameInstance g, std::uint64_t seed) {
    Environment env;
    env.instance = std::move(g);
    env.seed = seed;
    env.offline_value = solve_offline_optimal(env.instance).second;
    return env;
}

UncCommit prepare_uncorrelated(const Environment& env, UncorrelatedMechanism mech) {
    const GameInstance& g = env.instance;
    UncCommit c;
    c.mech = std::move(mech);
    c.responses.reserve(g.n_agents);
    std::vector<int> bd(g.n_agents);
    for (int i = 0; i < g.n_agents; ++i) {
        c.responses.push_back(best_response(g, i, c.mech.gamma[i], TieBreak::Lexicographic));
        bd[i] = c.responses[i].action;
        c.tie = c.tie || c.responses[i].tied;
    }
    c.b_profile = profile_index(bd, g.k);

    // exact principal value under the simulated (Lexicographic) behavior
    long S = g.num_signal_profiles();
    double tot = 0.0;
    std::vector<int> rd(g.n_agents);
    for (long s = 0; s < S; ++s) {
        std::vector<int> sd = profile_digits(s, g.n_agents, g.l);
        for (int j = 0; j < g.n_agents; ++j) rd[j] = c.responses[j].report_map[sd[j]];
        long srep = profile_index(rd, g.l);
        for (int t = 0; t < g.m; ++t) {
            double p = g.joint_p(c.b_profile, s, t);
            if (p == 0.0) continue;
            double dec = 0.0;
            for (int a = 0; a < g.d; ++a) dec += c.mech.pi[srep * g.d + a] * g.util(a, t);
            double pay = 0.0;
            for (int j = 0; j < g.n_agents; ++j) pay += c.mech.gamma[j][rd[j] * g.m + t];
            tot += p * (dec - pay);
        }
    }
    c.exp_utility = tot;
    return c;
}

RoundRecord step_uncorrelated_prepared(Environment& env, const UncCommit& c) {
    const GameInstance& g = env.instance;
    long idx = env.round++;
    RoundRecord rec;
    rec.round = idx;
    rec.correlated = false;
    rec.b_recommended = -1;
    rec.b_played = c.b_profile;

    Rng rs = substream(env.seed, static_cast<uint64_t>(idx), 1);
    auto [s, theta] = draw_signal_state(g, rs, c.b_profile);
    rec.s_true = s;
    rec.theta = theta;

    std::vector<int> sd = profile_digits(s, g.n_agents, g.l);
    std::vector<int> rd(g.n_agents);
    for (int i = 0; i < g.n_agents; ++i) rd[i] = c.responses[i].report_map[sd[i]];
    rec.s_reported = profile_index(rd, g.l);

    Rng ra = substream(env.seed, static_cast<uint64_t>(idx), 2);
    rec.action = ra.sample_discrete(c.mech.pi.data() + rec.s_reported * g.d, g.d);

    rec.payments.resize(g.n_agents);
    for (int i = 0; i < g.n_agents; ++i)
        rec.payments[i] = c.mech.gamma[i][rd[i] * g.m + theta];
    rec.exp_utility = c.exp_utility;
    rec.exp_regret = env.offline_value - c.exp_utility;
    return rec;
}

RoundRecord step_uncorrelated(Environment& env, const UncorrelatedMechanism& mech) {
    return step_uncorrelated_prepared(env, prepare_uncorrelated(env, mech));
}

CorrCommit prepare_correlated(const Environment& env, CorrelatedMechanism mech, bool strict,
                              double ic_tolerance) {
    CorrCommit c;
    c.mech = std::move(mech);
    c.min_slack = verify_ic(env.instance, c.mech).min_slack;
    if (strict && c.min_slack < -ic_tolerance)
        throw NonIcMechanismCommitted("correlated mechanism min IC slack " +
                                      std::to_string(c.min_slack));
    c.exp_utility = principal_utility(env.instance, c.mech);
    return c;
}

RoundRecord step_correlated_prepared(Environment& env, const CorrCommit& c) {
    const GameInstance& g = env.instance;
    long S = g.num_signal_profiles();
    long idx = env.round++;
    RoundRecord rec;
    rec.round = idx;
    rec.correlated = true;

    Rng rb = substream(env.seed, static_cast<uint64_t>(idx), 0);
    long b = rb.sample_discrete(c.mech.mu.data(), static_cast<int>(c.mech.mu.size()));
    rec.b_recommended = b;
    rec.b_played = b;  // truthful agents

    Rng rs = substream(env.seed, static_cast<uint64_t>(idx), 1);
    auto [s, theta] = draw_signal_state(g, rs, b);
    rec.s_true = s;
    rec.s_reported = s;
    rec.theta = theta;

    Rng ra = substream(env.seed, static_cast<uint64_t>(idx), 2);
    rec.action = ra.sample_discrete(c.mech.pi.data() + (b * S + s) * g.d, g.d);

    rec.payments.resize(g.n_agents);
    for (int i = 0; i < g.n_agents; ++i)
        rec.payments[i] = c.mech.gamma[i][(b * S + s) * g.m + theta];
    rec.exp_utility = c.exp_utility;
    rec.exp_regret = env.offline_value - c.exp_utility;
    return rec;
}

RoundRecord step_correlated(Environment& env, const CorrelatedMechanism& mech, bool strict) {
    return step_correlated_prepared(env, prepare_correlated(env, mech, strict));
}

RegretSummary cumulative_regret(const Trace& trace) {
    RegretSummary s;
    s.cumulative.reserve(trace.rounds.size());
    for (const RoundRecord& r : trace.rounds) {
        s.total += r.exp_regret;
        if (r.phase == Phase::Commit)
            s.commit += r.exp_regret;
        else
            s.exploration += r.exp_regret;
        s.cumulative.push_back(s.total);
    }
    return s;
}

std::string trace_to_csv(const Trace& trace, const GameInstance& g) {
    std::ostringstream os;
    os << "round,phase,kind,b_rec,b_played,s_true,s_reported,theta,a";
    for (int i = 1; i <= g.n_agents; ++i) os << ",pay_" << i;
    os << ",exp_utility,exp_regret,cum_regret\n";
    double cum = 0.0;
    for (const RoundRecord& r : trace.rounds) {
        cum += r.exp_regret;
        os << r.round << ',' << phase_name(r.phase) << ','
           << (r.correlated ? "correlated" : "uncorrelated") << ','
           << csv_quote(profile_field(r.b_recommended, g.n_agents, g.k)) << ','
           << csv_quote(profile_field(r.b_played, g.n_agents, g.k)) << ','
           << csv_quote(profile_field(r.s_true, g.n_agents, g.l)) << ','
           << csv_quote(profile_field(r.s_reported, g.n_agents, g.l)) << ','
           << r.theta << ',' << r.action;
        for (double p : r.payments) os << ',' << fmt_full(p);
        os << ',' << fmt_full(r.exp_utility) << ',' << fmt_full(r.exp_regret) << ','
           << fmt_full(cum) << '\n';
    }
    return os.str();
}

void write_trace_csv(const Trace& trace, const GameInstance& g, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot open trace output path: " + path);
    f << trace_to_csv(trace, g);
}

}  // namespace acqlab
