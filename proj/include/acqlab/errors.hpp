#pragma once

#include <stdexcept>
#include <string>

namespace acqlab {

// Error codes double as CLI exit codes: 2 validation, 3 infeasible or
// assumption failure, 4 numerical failure.
enum class ErrCode {
    Validation = 2,
    Infeasible = 3,
    Numerical = 4,
};

class AcqError : public std::runtime_error {
public:
    AcqError(ErrCode code, std::string kind, const std::string& msg)
        : std::runtime_error(msg), code_(code), kind_(std::move(kind)) {}
    ErrCode code() const { return code_; }
    const std::string& kind() const { return kind_; }

private:
    ErrCode code_;
    std::string kind_;
};

#define ACQLAB_ERROR(NAME, CODE)                                   \
    class NAME : public AcqError {                                 \
    public:                                                        \
        explicit NAME(const std::string& msg)                      \
            : AcqError(ErrCode::CODE, #NAME, msg) {}               \
    }

ACQLAB_ERROR(ParseError, Validation);
ACQLAB_ERROR(DimensionMismatch, Validation);
ACQLAB_ERROR(IndexOutOfRange, Validation);
ACQLAB_ERROR(ZeroProbabilitySignal, Validation);
ACQLAB_ERROR(InvalidInstance, Validation);
ACQLAB_ERROR(NotProductForm, Validation);
ACQLAB_ERROR(GenerationTimeout, Validation);
ACQLAB_ERROR(AllProfilesInfeasible, Infeasible);
ACQLAB_ERROR(AssumptionFails, Infeasible);
ACQLAB_ERROR(LpInfeasible, Infeasible);
ACQLAB_ERROR(NumericalFailure, Numerical);
ACQLAB_ERROR(RecursionOverflow, Numerical);
ACQLAB_ERROR(HorizonExhausted, Numerical);
ACQLAB_ERROR(NonPositiveEllUnder, Numerical);
ACQLAB_ERROR(NonIcMechanismCommitted, Numerical);

#undef ACQLAB_ERROR

}  // namespace acqlab
