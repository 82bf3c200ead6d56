#pragma once

#include <limits>
#include <string>
#include <vector>

namespace acqlab {

// Generic bounded-variable linear program, objective always maximized.
// Upper bounds may be +infinity; lower bounds must be finite.
enum class Sense { Le, Eq, Ge };

struct LinearProgram {
    int num_vars = 0;
    std::vector<double> lo;                       // [num_vars]
    std::vector<double> hi;                       // [num_vars], may be +inf
    std::vector<std::vector<double>> rows;        // dense coefficient rows
    std::vector<Sense> senses;
    std::vector<double> rhs;
    std::vector<double> objective;                // [num_vars]

    int add_var(double lo_v, double hi_v) {
        lo.push_back(lo_v);
        hi.push_back(hi_v);
        objective.push_back(0.0);
        return num_vars++;
    }
    void add_constraint(std::vector<double> row, Sense s, double b) {
        rows.push_back(std::move(row));
        senses.push_back(s);
        rhs.push_back(b);
    }
    static constexpr double inf() { return std::numeric_limits<double>::infinity(); }
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpSolution {
    LpStatus status = LpStatus::Infeasible;
    std::vector<double> x;
    double objective = 0.0;
};

// Solver backend interface; the built-in dense simplex is the reference
// implementation. An external solver can be substituted for cross-checking.
class LpBackend {
public:
    virtual ~LpBackend() = default;
    virtual LpSolution solve(const LinearProgram& lp) = 0;
};

// Two-phase dense simplex with explicit bound handling and Bland's pivoting
// rule. Deterministic: identical inputs produce bit-identical solutions.
// Tolerances: feasibility 1e-8, reduced-cost optimality 1e-9, pivot floor
// 1e-11 (NumericalFailure if every candidate pivot is below the floor).
class SimplexBackend : public LpBackend {
public:
    LpSolution solve(const LinearProgram& lp) override;
};

LpSolution solve(const LinearProgram& lp);

// Plain-text dump in CPLEX-LP style, for cross-checking with external tools.
std::string lp_to_text(const LinearProgram& lp);

}  // namespace acqlab
