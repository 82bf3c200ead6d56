#pragma once

#include <utility>
#include <vector>

#include "acqlab/game.hpp"
#include "acqlab/lp.hpp"

namespace acqlab {

// Flat variable layout of the mechanism LP: x blocks (per agent, payments
// scaled by mu), then y (decision rule scaled by mu), then z (per-agent
// deviation upper bounds), then mu itself. The index maps are bijections onto
// disjoint ranges covering [0, total).
struct LpMechanismVars {
    int n = 0, k = 0, l = 0, m = 0, d = 0;
    long B = 0, S = 0;
    long x0 = 0, y0 = 0, z0 = 0, mu0 = 0, total = 0;

    long x_index(int i, long b, long s, int theta) const {
        return x0 + ((static_cast<long>(i) * B + b) * S + s) * m + theta;
    }
    long y_index(long b, long s, int a) const { return y0 + (b * S + s) * d + a; }
    long z_index(int i, int b_i, int bp_i, int s_i) const {
        return z0 + ((static_cast<long>(i) * k + b_i) * k + bp_i) * l + s_i;
    }
    long mu_index(long b) const { return mu0 + b; }
};

// Builds the mechanism LP for belief zeta (per-b distribution over S x Theta),
// cost-difference tables Lambda_i [k*k] and slack eps. Constraints: for every
// (i, b_i, b_i') a no-profitable-deviation row, the z upper-bound rows, the
// per-(b,s) decision-mass rows sum_a y = mu[b], the payment cap x <= M mu[b],
// and mu on the simplex; all variables nonnegative. The objective maximizes
// expected decision utility minus total expected payments.
std::pair<LinearProgram, LpMechanismVars> build_lp(const GameInstance& g,
                                                   const std::vector<std::vector<double>>& zeta,
                                                   const std::vector<std::vector<double>>& Lambda,
                                                   double eps, double M);

// Division recovery: gamma = x/mu and pi = y/mu where mu[b] > 1e-10, else
// gamma = 0 and pi uniform. Gamma is clamped to [0, M]; pi rows renormalized.
// Throws NumericalFailure when a recovered pi row is off sum 1 by > 1e-6.
CorrelatedMechanism recover_mechanism(const LpSolution& sol, const LpMechanismVars& vars,
                                      double M);

// U(mu, gamma, pi): expected decision utility minus total payments, truthful play.
double principal_utility(const GameInstance& g, const CorrelatedMechanism& mech);
// U°: principal value when agents best-respond (PrincipalFavorable ties).
double principal_utility_unc(const GameInstance& g, const UncorrelatedMechanism& mech);

// Optimal correlated mechanism from the LP with the true law and costs.
std::pair<CorrelatedMechanism, double> solve_offline_optimal(const GameInstance& g);

// Optimal uncorrelated benchmark: enumerates target action profiles; for each,
// per-agent minimum-payment LPs under truthful-reporting and action-IC
// constraints; decision rule fixed to the posterior-myopic argmax. Throws
// AllProfilesInfeasible when no profile can be incentivized within budget.
std::pair<UncorrelatedMechanism, double> solve_optimal_uncorrelated(const GameInstance& g);

// For product-form instances: collapses a correlated mechanism onto the best
// supported profile via conditional averaging over the other agents' signals.
// Throws NotProductForm when the joint does not factor within 1e-8.
UncorrelatedMechanism uncorrelate_pis(const GameInstance& g, const CorrelatedMechanism& corr);

// Per (i, b_i) scoring rules making b_i strictly optimal with margin r and
// truthful reporting weakly optimal; margin is the min over (i, b_i).
struct IncentivizingRules {
    std::vector<std::vector<std::vector<double>>> rules;  // [n][k] -> [l*m]
    double margin = 0.0;
};

// One agent-action margin solve: the rule making `b` optimal over every
// (action, report-map) deviation by the largest attainable margin, with
// payments in [0, M]. Payments are minimized at the optimal margin, so a
// pair whose best margin is zero gets the all-zero rule. Does not throw on
// a non-positive margin; callers decide whether that is acceptable.
struct MarginRule {
    std::vector<double> rule;  // l*m table
    double margin = 0.0;
};
MarginRule solve_margin_rule(const GameInstance& g, int agent, int b, double M);

// Margin-maximization LPs per (i, b_i); throws AssumptionFails when some
// action cannot be made strictly optimal (margin <= 1e-9).
IncentivizingRules build_incentivizing_rules(const GameInstance& g, double M);

}  // namespace acqlab
