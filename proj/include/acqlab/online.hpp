#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "acqlab/game.hpp"
#include "acqlab/offline.hpp"
#include "acqlab/sim.hpp"

namespace acqlab {

// Scope of the probability-phase stopping clause: PerProfile restricts the
// posterior-radius max and the posterior-gap min to the current target
// profile's per-agent cells; Global ranges over every (agent, action, signal).
enum class StopScope { PerProfile, Global };

// Faithful: keep sampling each profile until the count reaches N1 AND the
// posterior-gap clause holds; throws HorizonExhausted when a profile spins
// past 50*N1 rounds or the total would exceed T. Budgeted: spend exactly
// min(N1, remaining) rounds per profile and record whether the clause held.
enum class ProbStopMode { Faithful, Budgeted };

struct LearnerConfig {
    long T = 0;
    long N1 = 0, N2 = 0, N3 = 0;  // 0 -> N1 = N3 = ceil(T^(2/3)), N2 = ceil(log2 T)
    double delta = 0.1;
    double budget = 1.0;
    IncentivizingRules rules;
    double ic_tolerance = 1e-8;
    bool strict_ic = false;
    StopScope stop_scope = StopScope::PerProfile;
};

// Fills defaulted phase budgets from T and validates ranges.
LearnerConfig resolve_config(LearnerConfig cfg);

// Parses {"T","N1","N2","N3","delta","ic_tolerance","seed"}; missing fields
// keep defaults. Returns the config and the seed (0 when absent).
std::pair<LearnerConfig, std::uint64_t> config_from_json(const std::string& text);

// (range width) * sqrt(ln(2/delta) / (2 n)).
double hoeffding_radius(long n_samples, double range_width, double delta_local);

struct ProbEstimates {
    std::vector<std::vector<double>> zeta;      // [B][S*m] empirical joint per profile
    std::vector<double> nu_b;                   // [B] radius, +inf when unvisited
    double nu = 0.0;                            // max_b
    std::vector<std::vector<double>> xi;        // [n][k*l*m] empirical posteriors
    std::vector<std::vector<double>> rho_cell;  // [n][k*l], +inf when unobserved
    double rho = 0.0;                           // max cell radius
    std::vector<long> t_profile;                // [B] sample counts
    std::vector<std::vector<long>> t_cell;      // [n][k*l]
    double union_count = 0.0;                   // 6 |B| T |S| n m
    std::vector<char> clause_met;               // [B] posterior-gap clause status
    bool all_clauses_met = false;
    bool truncated = false;                     // Budgeted mode ran out of rounds
};

ProbEstimates estimate_prob(Environment& env, const LearnerConfig& cfg,
                            ProbStopMode mode = ProbStopMode::Faithful,
                            Trace* trace = nullptr);

// One completed search phase of the cost bisection. The certified rule gap of
// a non-split phase is width * seed_gap, exact in floating point because the
// interval width is a power of two.
struct BsPhaseLog {
    int agent = 0;
    int b = 0, bp = 0;
    int depth = 0;
    bool split = false;
    double width = 0.0;     // final t interval width, 2^-N2 when no split
    double seed_gap = 0.0;  // max-norm distance of this level's seed rules
};

struct CostEstimates {
    std::vector<std::vector<double>> Lambda;     // [n][k*k], diag 0
    std::vector<std::vector<double>> chi_table;  // [n][k*k] radii
    double chi = 0.0;                            // max entry
    std::vector<std::vector<char>> visited;      // [n][k*k]
    std::vector<std::vector<char>> derived;      // antisymmetry / split-telescoped
    std::vector<BsPhaseLog> phase_log;
    long rounds_used = 0;
    bool truncated = false;
};

// Bisection between two rules with observed responses b resp. bp; returns
// (Lambda, chi) and memoizes both directions. Splits recurse with fresh
// budgets; depth beyond k*l^2 throws RecursionOverflow.
std::pair<double, double> binary_search(Environment& env, int i, int b, int bp,
                                        const std::vector<double>& gamma_lo,
                                        const std::vector<double>& gamma_hi,
                                        const LearnerConfig& cfg, CostEstimates& memo,
                                        Trace* trace = nullptr);

CostEstimates estimate_costs(Environment& env, const LearnerConfig& cfg,
                             Trace* trace = nullptr);

struct CommitArtifacts {
    double eps = 0.0, lambda = 0.0;
    double ell_hat = 0.0, ell_bar = 0.0, ell_under = 0.0;
    double alpha = 0.0, beta = 0.0, H = 0.0;
    double nu = 0.0, chi = 0.0, rho = 0.0;
    std::vector<std::vector<double>> gamma_hat;  // [n][k*l*m] strictly-proper rules
    bool alpha_clamped = false;                  // run-internal fallback fired
};

// Solves the estimated LP at slack eps and blends the recovered payments with
// the margin rules and the quadratic-score rules. Standalone calls reject
// ell_under <= 0 (NonPositiveEllUnder); with clamp_alpha the mixing weight is
// floored at zero instead and flagged.
std::pair<CorrelatedMechanism, CommitArtifacts> build_commit_mechanism(
    const GameInstance& g, const ProbEstimates& prob, const CostEstimates& costs,
    const LearnerConfig& cfg, bool clamp_alpha = false);

struct RunResult {
    Trace trace;
    ProbEstimates prob;
    CostEstimates costs;
    CommitArtifacts artifacts;  // meaningful iff committed
    bool committed = false;
    bool truncated = false;  // exploration consumed the whole horizon
    double ic_slack = 0.0;   // committed mechanism vs the true instance
    bool ic_pass = false;
    long exploration_rounds = 0;
};

// Full explore-then-commit episode of exactly T rounds (fewer only never;
// truncation switches the tail into exploration rounds).
RunResult run(Environment& env, const LearnerConfig& cfg);

// Horizon-dependent regret bound from the instance constants; +inf when the
// posterior separation ell, the signal floor iota, or the margin is zero.
double regret_bound(const GameInstance& g, const InstanceConstants& consts,
                    const LearnerConfig& cfg);

// Confidence-interval checks against the true instance.
bool clean_event_prob(const GameInstance& g, const ProbEstimates& prob);
bool clean_event_costs(const GameInstance& g, const CostEstimates& costs);

}  // namespace acqlab
