#pragma once

#include <utility>
#include <vector>

#include "acqlab/game.hpp"

namespace acqlab {

// Lexicographic: smallest action index, then identity-preferring report, then
// smallest report index. Deterministic without any mechanism context.
// PrincipalFavorable: among each agent's set of value-maximizing responses,
// the joint profile maximizing the principal's net stage utility is selected
// (lexicographic among joint maximizers); requires the full uncorrelated
// mechanism for context.
enum class TieBreak { Lexicographic, PrincipalFavorable };

struct BestResponse {
    int action = 0;
    std::vector<int> report_map;  // [l], observed signal -> reported signal
    double agent_value = 0.0;     // expected payment minus action cost
    bool tied = false;            // another response attains the same value
};

// Agent i's best response to an uncorrelated scoring rule gamma_i [l*m].
// PrincipalFavorable requires mech (its pi and the other agents' rules).
BestResponse best_response(const GameInstance& g, int i, const std::vector<double>& gamma_i,
                           TieBreak tie_break = TieBreak::Lexicographic,
                           const UncorrelatedMechanism* mech = nullptr);

// All agents' responses under PrincipalFavorable ties, plus the principal's
// net stage utility at that joint response.
struct JointResponse {
    std::vector<BestResponse> agents;
    double principal_value = 0.0;
};
JointResponse joint_best_response(const GameInstance& g, const UncorrelatedMechanism& mech);

// F_i(mu, gamma): expected payment to agent i when everyone is truthful.
double expected_payment(const GameInstance& g, const CorrelatedMechanism& mech, int i);

// F_i^{phi,psi}: expected payment to agent i deviating per `dev`, others truthful.
double expected_payment_dev(const GameInstance& g, const CorrelatedMechanism& mech, int i,
                            const DeviationPolicy& dev);

// Maximizes payment plus cost savings over all deviations of agent i;
// gain = maximum minus the truthful value (identity kept on exact ties).
std::pair<DeviationPolicy, double> best_deviation(const GameInstance& g,
                                                  const CorrelatedMechanism& mech, int i);

struct IcReport {
    std::vector<DeviationPolicy> worst;  // [n_agents]
    std::vector<double> slack;           // [n_agents]; truthful minus best deviation value
    double min_slack = 0.0;
    bool ic(double tol = 1e-8) const { return min_slack >= -tol; }
};

IcReport verify_ic(const GameInstance& g, const CorrelatedMechanism& mech);

// F_circ_i(gamma_i | b_i): best expected payment reachable by reporting alone
// when playing b_i (signal-wise argmax over reports); costs excluded.
double f_circ(const GameInstance& g, int i, const std::vector<double>& gamma_i, int b_i);

// Absorbs each agent's optimal report map into gamma and pi so honest
// reporting becomes optimal; preserves the principal's value.
UncorrelatedMechanism make_truthful(const GameInstance& g, const UncorrelatedMechanism& mech);

struct BrRegionCount {
    int distinct = 0;  // distinct (action, report map) values seen on the grid
    int runs = 0;      // maximal constant blocks; equals distinct iff no revisits
};

// Scans alpha*gamma_a + (1-alpha)*gamma_b over a uniform grid on [0,1] with
// Lexicographic ties and counts best-response regions.
BrRegionCount count_br_regions(const GameInstance& g, int i, const std::vector<double>& gamma_a,
                               const std::vector<double>& gamma_b, int grid_size);

}  // namespace acqlab
