#include "acqlab/game.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "acqlab/errors.hpp"
#include "acqlab/kernels.hpp"

namespace acqlab {

using nlohmann::json;

DeviationPolicy DeviationPolicy::identity(int k, int l) {
    DeviationPolicy dev;
    dev.action_map.resize(k);
    dev.report_map.resize(k * l);
    for (int b = 0; b < k; ++b) {
        dev.action_map[b] = b;
        for (int s = 0; s < l; ++s) dev.report_map[b * l + s] = s;
    }
    return dev;
}

bool DeviationPolicy::is_identity() const {
    int k = static_cast<int>(action_map.size());
    int l = k ? static_cast<int>(report_map.size()) / k : 0;
    for (int b = 0; b < k; ++b) {
        if (action_map[b] != b) return false;
        for (int s = 0; s < l; ++s)
            if (report_map[b * l + s] != s) return false;
    }
    return true;
}

bool ValidationReport::ok_except_peer_independence() const {
    for (const auto& iss : issues)
        if (iss.code != "peer_independence") return false;
    return true;
}

std::string ValidationReport::summary() const {
    if (ok()) return "pass";
    std::ostringstream os;
    os << issues.size() << " issue(s):";
    for (const auto& iss : issues)
        os << "\n  [" << iss.code << "] " << iss.detail << " (residual " << iss.residual << ")";
    return os.str();
}

namespace {

constexpr double kSumTol = 1e-12;
constexpr double kCrossTol = 1e-9;

// marginal table for agent i under profile b, flattened [l*m]
std::vector<double> marginal_at_profile(const GameInstance& g, int i, long b) {
    std::vector<double> out(static_cast<size_t>(g.l) * g.m, 0.0);
    long S = g.num_signal_profiles();
    for (long s = 0; s < S; ++s) {
        int s_i = digit_of(s, i, g.n_agents, g.l);
        for (int th = 0; th < g.m; ++th) out[s_i * g.m + th] += g.joint_p(b, s, th);
    }
    return out;
}

}  // namespace

ValidationReport validate(const GameInstance& g) {
    ValidationReport rep;
    auto add = [&rep](const std::string& code, const std::string& detail, double residual) {
        rep.issues.push_back({code, detail, residual});
    };

    if (g.n_agents < 1 || g.k < 1 || g.l < 1 || g.m < 1 || g.d < 1) {
        add("cardinality", "all of n_agents, k, l, m, d must be >= 1", 0.0);
        return rep;  // dependent checks are meaningless
    }
    long B = g.num_profiles();
    long S = g.num_signal_profiles();
    if (static_cast<long>(g.prior.size()) != g.m)
        add("shape", "prior has " + std::to_string(g.prior.size()) + " entries, expected m", 0.0);
    if (static_cast<long>(g.joint.size()) != B)
        add("shape", "joint has " + std::to_string(g.joint.size()) + " tables, expected |B|", 0.0);
    if (static_cast<long>(g.costs.size()) != g.n_agents)
        add("shape", "costs has " + std::to_string(g.costs.size()) + " rows, expected n_agents", 0.0);
    if (static_cast<long>(g.utility.size()) != static_cast<long>(g.d) * g.m)
        add("shape", "utility has " + std::to_string(g.utility.size()) + " entries, expected d*m", 0.0);
    if (!rep.ok()) return rep;

    double psum = kernels::sum(g.prior.data(), g.prior.size());
    if (std::abs(psum - 1.0) > kSumTol)
        add("prior_sum", "prior sums to " + std::to_string(psum), psum - 1.0);
    for (int th = 0; th < g.m; ++th)
        if (g.prior[th] < 0.0) add("prior_range", "prior[" + std::to_string(th) + "] negative", g.prior[th]);

    for (long b = 0; b < B; ++b) {
        if (static_cast<long>(g.joint[b].size()) != S * g.m) {
            add("shape", "joint table " + std::to_string(b) + " has wrong size", 0.0);
            continue;
        }
        double tsum = kernels::sum(g.joint[b].data(), g.joint[b].size());
        if (std::abs(tsum - 1.0) > kSumTol)
            add("joint_sum", "joint table b=" + std::to_string(b) + " sums to " + std::to_string(tsum),
                tsum - 1.0);
        for (size_t idx = 0; idx < g.joint[b].size(); ++idx)
            if (g.joint[b][idx] < 0.0) {
                add("joint_range", "joint[b=" + std::to_string(b) + "] entry " + std::to_string(idx) +
                                       " negative", g.joint[b][idx]);
                break;
            }
        // state marginal must reproduce the prior
        for (int th = 0; th < g.m; ++th) {
            double acc = 0.0;
            for (long s = 0; s < S; ++s) acc += g.joint_p(b, s, th);
            if (std::abs(acc - g.prior[th]) > kCrossTol)
                add("state_marginal",
                    "b=" + std::to_string(b) + " theta=" + std::to_string(th) + " marginal " +
                        std::to_string(acc) + " vs prior " + std::to_string(g.prior[th]),
                    acc - g.prior[th]);
        }
    }

    // peer-independence: agent i's (s_i, theta)-marginal may depend on b_i only
    long others = profile_count(g.n_agents - 1, g.k);
    for (int i = 0; i < g.n_agents; ++i) {
        for (int bi = 0; bi < g.k; ++bi) {
            std::vector<double> ref;
            long ref_b = -1;
            for (long o = 0; o < others; ++o) {
                long b = compose_profile(i, g.n_agents, g.k, bi, o);
                auto tab = marginal_at_profile(g, i, b);
                if (ref.empty()) {
                    ref = std::move(tab);
                    ref_b = b;
                    continue;
                }
                double worst = 0.0;
                size_t worst_idx = 0;
                for (size_t idx = 0; idx < tab.size(); ++idx) {
                    double diff = std::abs(tab[idx] - ref[idx]);
                    if (diff > worst) {
                        worst = diff;
                        worst_idx = idx;
                    }
                }
                if (worst > kCrossTol)
                    add("peer_independence",
                        "agent " + std::to_string(i) + " b_i=" + std::to_string(bi) + ": marginal under b=" +
                            std::to_string(b) + " differs from b=" + std::to_string(ref_b) + " at (s_i,theta)=(" +
                            std::to_string(worst_idx / g.m) + "," + std::to_string(worst_idx % g.m) + ")",
                        worst);
            }
        }
    }

    for (int i = 0; i < g.n_agents; ++i) {
        if (static_cast<int>(g.costs[i].size()) != g.k) {
            add("shape", "costs[" + std::to_string(i) + "] has wrong size", 0.0);
            continue;
        }
        for (int b = 0; b < g.k; ++b)
            if (g.costs[i][b] < 0.0 || g.costs[i][b] > 1.0)
                add("cost_range", "costs[" + std::to_string(i) + "][" + std::to_string(b) + "]",
                    g.costs[i][b]);
    }
    for (size_t idx = 0; idx < g.utility.size(); ++idx)
        if (g.utility[idx] < 0.0 || g.utility[idx] > 1.0) {
            add("utility_range", "utility entry " + std::to_string(idx), g.utility[idx]);
            break;
        }
    if (g.budget < 0.0) add("budget_range", "budget negative", g.budget);
    return rep;
}

std::vector<double> marginal(const GameInstance& g, int i, int b_i) {
    if (i < 0 || i >= g.n_agents || b_i < 0 || b_i >= g.k)
        throw IndexOutOfRange("marginal: agent " + std::to_string(i) + ", action " + std::to_string(b_i));
    long others = profile_count(g.n_agents - 1, g.k);
    std::vector<double> out(static_cast<size_t>(g.l) * g.m, 0.0);
    for (long o = 0; o < others; ++o) {
        long b = compose_profile(i, g.n_agents, g.k, b_i, o);
        auto tab = marginal_at_profile(g, i, b);
        kernels::axpy(1.0 / static_cast<double>(others), tab.data(), out.data(), out.size());
    }
    return out;
}

std::vector<double> posterior(const GameInstance& g, int i, int b_i, int s_i) {
    if (s_i < 0 || s_i >= g.l)
        throw IndexOutOfRange("posterior: signal " + std::to_string(s_i));
    auto marg = marginal(g, i, b_i);
    double denom = 0.0;
    for (int th = 0; th < g.m; ++th) denom += marg[s_i * g.m + th];
    if (denom <= 0.0)
        throw ZeroProbabilitySignal("agent " + std::to_string(i) + ", b_i=" + std::to_string(b_i) +
                                    ", s_i=" + std::to_string(s_i));
    std::vector<double> post(g.m);
    for (int th = 0; th < g.m; ++th) post[th] = marg[s_i * g.m + th] / denom;
    return post;
}

InstanceConstants constants(const GameInstance& g) {
    InstanceConstants c;
    c.cost_diffs.resize(g.n_agents);
    for (int i = 0; i < g.n_agents; ++i) {
        c.cost_diffs[i].resize(static_cast<size_t>(g.k) * g.k);
        for (int b = 0; b < g.k; ++b)
            for (int bp = 0; bp < g.k; ++bp)
                c.cost_diffs[i][b * g.k + bp] = g.costs[i][b] - g.costs[i][bp];
    }

    c.iota = 1.0;
    c.ell = std::numeric_limits<double>::infinity();
    bool any_pair = false;
    for (int i = 0; i < g.n_agents; ++i) {
        for (int bi = 0; bi < g.k; ++bi) {
            auto marg = marginal(g, i, bi);
            std::vector<double> sig_p(g.l, 0.0);
            for (int s = 0; s < g.l; ++s)
                for (int th = 0; th < g.m; ++th) sig_p[s] += marg[s * g.m + th];
            for (int s = 0; s < g.l; ++s) {
                c.iota = std::min(c.iota, sig_p[s]);
                if (sig_p[s] <= 0.0) c.zero_mass_signals.push_back({i, bi, s});
            }
            for (int s = 0; s < g.l; ++s) {
                if (sig_p[s] <= 0.0) continue;
                for (int sp = s + 1; sp < g.l; ++sp) {
                    if (sig_p[sp] <= 0.0) continue;
                    double gap = 0.0;
                    for (int th = 0; th < g.m; ++th) {
                        double diff = marg[s * g.m + th] / sig_p[s] - marg[sp * g.m + th] / sig_p[sp];
                        gap += diff * diff;
                    }
                    c.ell = std::min(c.ell, gap);
                    any_pair = true;
                }
            }
        }
    }
    if (!any_pair) c.ell = 0.0;
    return c;
}

namespace {

std::string profile_key(long b, int n, int radix) {
    auto digits = profile_digits(b, n, radix);
    std::string key;
    for (size_t j = 0; j < digits.size(); ++j) {
        if (j) key += ',';
        key += std::to_string(digits[j]);
    }
    return key;
}

json table_to_rows(const std::vector<double>& flat, long rows, int cols) {
    json out = json::array();
    for (long r = 0; r < rows; ++r) {
        json row = json::array();
        for (int c = 0; c < cols; ++c) row.push_back(flat[r * cols + c]);
        out.push_back(row);
    }
    return out;
}

std::vector<double> rows_to_table(const json& j, long rows, int cols, const std::string& field) {
    if (!j.is_array() || static_cast<long>(j.size()) != rows)
        throw ParseError(field + ": expected " + std::to_string(rows) + " rows");
    std::vector<double> flat(static_cast<size_t>(rows) * cols);
    for (long r = 0; r < rows; ++r) {
        if (!j[r].is_array() || static_cast<int>(j[r].size()) != cols)
            throw ParseError(field + " row " + std::to_string(r) + ": expected " + std::to_string(cols) +
                             " entries");
        for (int c = 0; c < cols; ++c) flat[r * cols + c] = j[r][c].get<double>();
    }
    return flat;
}

}  // namespace

std::string instance_to_json(const GameInstance& g) {
    json j;
    j["n_agents"] = g.n_agents;
    j["k"] = g.k;
    j["l"] = g.l;
    j["m"] = g.m;
    j["d"] = g.d;
    j["prior"] = g.prior;
    json jt = json::object();
    long B = g.num_profiles();
    long S = g.num_signal_profiles();
    for (long b = 0; b < B; ++b)
        jt[profile_key(b, g.n_agents, g.k)] = table_to_rows(g.joint[b], S, g.m);
    j["joint"] = jt;
    j["costs"] = g.costs;
    j["utility"] = table_to_rows(g.utility, g.d, g.m);
    j["budget"] = g.budget;
    return j.dump(2);
}

GameInstance instance_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("instance JSON: ") + e.what());
    }
    GameInstance g;
    for (const char* field : {"n_agents", "k", "l", "m", "d", "prior", "joint", "costs", "utility", "budget"})
        if (!j.contains(field)) throw ParseError(std::string("missing field \"") + field + "\"");
    try {
        g.n_agents = j["n_agents"].get<int>();
        g.k = j["k"].get<int>();
        g.l = j["l"].get<int>();
        g.m = j["m"].get<int>();
        g.d = j["d"].get<int>();
        g.prior = j["prior"].get<std::vector<double>>();
        g.budget = j["budget"].get<double>();
        g.costs = j["costs"].get<std::vector<std::vector<double>>>();
        g.utility = rows_to_table(j["utility"], g.d, g.m, "utility");
        long B = g.num_profiles();
        long S = g.num_signal_profiles();
        g.joint.resize(B);
        for (long b = 0; b < B; ++b) {
            std::string key = profile_key(b, g.n_agents, g.k);
            if (!j["joint"].contains(key)) throw ParseError("joint: missing profile \"" + key + "\"");
            g.joint[b] = rows_to_table(j["joint"][key], S, g.m, "joint[" + key + "]");
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("instance JSON: ") + e.what());
    }
    auto rep = validate(g);
    if (!rep.ok_except_peer_independence())
        throw InvalidInstance("loaded instance fails validation: " + rep.summary());
    return g;
}

void save(const GameInstance& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open for writing: " + path);
    out << instance_to_json(g) << "\n";
}

GameInstance load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return instance_from_json(ss.str());
}

std::string mechanism_to_json(const GameInstance& g, const CorrelatedMechanism& mech) {
    json j;
    j["type"] = "correlated";
    j["mu"] = mech.mu;
    long B = g.num_profiles();
    long S = g.num_signal_profiles();
    json jg = json::array();
    for (int i = 0; i < g.n_agents; ++i) {
        json per = json::object();
        for (long b = 0; b < B; ++b) {
            std::vector<double> tab(mech.gamma[i].begin() + b * S * g.m,
                                    mech.gamma[i].begin() + (b + 1) * S * g.m);
            per[profile_key(b, g.n_agents, g.k)] = table_to_rows(tab, S, g.m);
        }
        jg.push_back(per);
    }
    j["gamma"] = jg;
    json jp = json::object();
    for (long b = 0; b < B; ++b) {
        std::vector<double> tab(mech.pi.begin() + b * S * g.d, mech.pi.begin() + (b + 1) * S * g.d);
        jp[profile_key(b, g.n_agents, g.k)] = table_to_rows(tab, S, g.d);
    }
    j["pi"] = jp;
    return j.dump(2);
}

std::string mechanism_to_json(const GameInstance& g, const UncorrelatedMechanism& mech) {
    json j;
    j["type"] = "uncorrelated";
    json jg = json::array();
    for (int i = 0; i < g.n_agents; ++i) jg.push_back(table_to_rows(mech.gamma[i], g.l, g.m));
    j["gamma"] = jg;
    j["pi"] = table_to_rows(mech.pi, g.num_signal_profiles(), g.d);
    return j.dump(2);
}

CorrelatedMechanism mechanism_from_json(const GameInstance& g, const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("mechanism JSON: ") + e.what());
    }
    // accept both a bare mechanism and the solve output that wraps one
    if (j.is_object() && j.contains("mechanism")) j = j["mechanism"];
    long B = g.num_profiles();
    long S = g.num_signal_profiles();
    try {
        if (j.value("type", "") != std::string("correlated"))
            throw ParseError("mechanism JSON: expected type \"correlated\"");
        CorrelatedMechanism mech;
        mech.mu = j.at("mu").get<std::vector<double>>();
        if (static_cast<long>(mech.mu.size()) != B)
            throw ParseError("mechanism JSON: mu needs one entry per action profile");
        const json& jg = j.at("gamma");
        if (!jg.is_array() || static_cast<int>(jg.size()) != g.n_agents)
            throw ParseError("mechanism JSON: gamma needs one block per agent");
        mech.gamma.assign(g.n_agents, std::vector<double>(B * S * g.m));
        for (int i = 0; i < g.n_agents; ++i) {
            for (long b = 0; b < B; ++b) {
                std::vector<double> tab = rows_to_table(
                    jg[i].at(profile_key(b, g.n_agents, g.k)), S, g.m, "gamma");
                for (long c = 0; c < S * g.m; ++c) mech.gamma[i][b * S * g.m + c] = tab[c];
            }
        }
        const json& jp = j.at("pi");
        mech.pi.resize(B * S * g.d);
        for (long b = 0; b < B; ++b) {
            std::vector<double> tab =
                rows_to_table(jp.at(profile_key(b, g.n_agents, g.k)), S, g.d, "pi");
            for (long c = 0; c < S * g.d; ++c) mech.pi[b * S * g.d + c] = tab[c];
        }
        return mech;
    } catch (const json::exception& e) {
        throw ParseError(std::string("mechanism JSON: ") + e.what());
    }
}

}  // namespace acqlab
