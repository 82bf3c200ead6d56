#pragma once

#include <array>
#include <string>
#include <vector>

#include "acqlab/indexing.hpp"

namespace acqlab {

// Ground-truth model of the acquisition game. n_agents agents each pick one of
// k actions and observe one of l signals; the state takes one of m values; the
// principal picks one of d actions. All types in this header are treated as
// immutable once constructed.
//
// Layouts (flattened, row-major):
//   joint[b][s*m + theta]  with b over action profiles, s over signal profiles
//   utility[a*m + theta]
//   costs[i][b_i]
struct GameInstance {
    int n_agents = 0;
    int k = 0;  // actions per agent
    int l = 0;  // signals per agent
    int m = 0;  // states
    int d = 0;  // principal actions
    std::vector<double> prior;                 // [m]
    std::vector<std::vector<double>> joint;    // [B][S*m]
    std::vector<std::vector<double>> costs;    // [n_agents][k]
    std::vector<double> utility;               // [d*m]
    double budget = 1.0;                       // payment cap M

    long num_profiles() const { return profile_count(n_agents, k); }
    long num_signal_profiles() const { return profile_count(n_agents, l); }
    double joint_p(long b, long s, int theta) const { return joint[b][s * m + theta]; }
    double util(int a, int theta) const { return utility[a * m + theta]; }
};

// Minimum squared-L2 posterior gap (ell), minimum signal probability (iota),
// and the exact cost-difference tables C_i(b, b') = c_i(b) - c_i(b').
struct InstanceConstants {
    double ell = 0.0;
    double iota = 0.0;
    std::vector<std::vector<double>> cost_diffs;       // [n_agents][k*k], (b*k + b')
    std::vector<std::array<int, 3>> zero_mass_signals;  // (i, b_i, s_i) with P^(i)(s_i|b_i) = 0
    double cost_diff(int i, int b, int bp, int k) const { return cost_diffs[i][b * k + bp]; }
};

// Principal commitment with recommendations: mu over B, per-agent payment
// tables gamma_i[b][s][theta], decision rule pi[b][s][a].
struct CorrelatedMechanism {
    std::vector<double> mu;                   // [B]
    std::vector<std::vector<double>> gamma;   // [n_agents][B*S*m]
    std::vector<double> pi;                   // [B*S*d]
};

// Commitment without recommendations: gamma_i[s_i][theta], pi[s][a].
struct UncorrelatedMechanism {
    std::vector<std::vector<double>> gamma;   // [n_agents][l*m]
    std::vector<double> pi;                   // [S*d]
};

// A joint action/report deviation for one agent: action_map[b_i] is the action
// played when b_i is recommended, report_map[b_i*l + s_i] the signal reported.
struct DeviationPolicy {
    std::vector<int> action_map;   // [k]
    std::vector<int> report_map;   // [k*l]

    static DeviationPolicy identity(int k, int l);
    bool is_identity() const;
};

struct ValidationIssue {
    std::string code;     // "joint_sum", "state_marginal", "peer_independence", ...
    std::string detail;   // offending indices
    double residual = 0.0;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;
    bool ok() const { return issues.empty(); }
    // true when the only reported issues are peer-independence violations
    // (a model-assumption report; the tables are still a coherent law)
    bool ok_except_peer_independence() const;
    std::string summary() const;
};

ValidationReport validate(const GameInstance& g);

// Marginal P^(i)(s_i, theta | b_i), flattened [l*m]. Computed as the uniform
// average over b_{-i} of the joint summed over S_{-i}; on peer-independent
// instances every b_{-i} gives the same table, so this equals any fixed choice.
std::vector<double> marginal(const GameInstance& g, int i, int b_i);

// Bayes posterior over states given (b_i, s_i). Throws ZeroProbabilitySignal
// when the signal has zero marginal probability.
std::vector<double> posterior(const GameInstance& g, int i, int b_i, int s_i);

InstanceConstants constants(const GameInstance& g);

// JSON serialization. load() parses, checks shape and data integrity
// (normalization, ranges), and throws ParseError/InvalidInstance on failure;
// peer-independence violations are reported by validate() but do not block
// loading (the joint is still a coherent probability law).
void save(const GameInstance& g, const std::string& path);
GameInstance load(const std::string& path);
std::string instance_to_json(const GameInstance& g);
GameInstance instance_from_json(const std::string& text);

std::string mechanism_to_json(const GameInstance& g, const CorrelatedMechanism& mech);
std::string mechanism_to_json(const GameInstance& g, const UncorrelatedMechanism& mech);
CorrelatedMechanism mechanism_from_json(const GameInstance& g, const std::string& text);

}  // namespace acqlab
