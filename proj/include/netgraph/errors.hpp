#pragma once

#include <stdexcept>
#include <string>

// Error taxonomy. Two families matter to callers: ValidationError (bad input,
// CLI exit code 2) and NumericalError (a solver or eigensolver gave up, CLI
// exit code 3). Every concrete type names the condition it reports.

namespace netgraph {

class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class ValidationError : public Error {
public:
  explicit ValidationError(const std::string& what) : Error(what) {}
};

class NumericalError : public Error {
public:
  explicit NumericalError(const std::string& what) : Error(what) {}
};

#define NETGRAPH_VALIDATION_ERROR(NAME)                                        \
  class NAME : public ValidationError {                                        \
  public:                                                                      \
    explicit NAME(const std::string& what = #NAME)                             \
        : ValidationError(std::string(#NAME) + ": " + what) {}                 \
  }

#define NETGRAPH_NUMERICAL_ERROR(NAME)                                         \
  class NAME : public NumericalError {                                         \
  public:                                                                      \
    explicit NAME(const std::string& what = #NAME)                             \
        : NumericalError(std::string(#NAME) + ": " + what) {}                  \
  }

// Graph construction and validation.
NETGRAPH_VALIDATION_ERROR(NotSimple);
NETGRAPH_VALIDATION_ERROR(Disconnected);
NETGRAPH_VALIDATION_ERROR(BadWeightRow);
NETGRAPH_VALIDATION_ERROR(WeightSupportMismatch);
NETGRAPH_VALIDATION_ERROR(MissingWeights);
NETGRAPH_VALIDATION_ERROR(HasSinkOrSource);

// Coefficients and grids.
NETGRAPH_VALIDATION_ERROR(NonPositiveCoefficient);
NETGRAPH_VALIDATION_ERROR(IncommensurableLengths);
NETGRAPH_VALIDATION_ERROR(NonGridTime);
NETGRAPH_VALIDATION_ERROR(ShapeMismatch);

// Boundary conditions and models.
NETGRAPH_VALIDATION_ERROR(SingularBoundaryRows);
NETGRAPH_VALIDATION_ERROR(NegativeBoundaryEntry);
NETGRAPH_VALIDATION_ERROR(NotColumnStochastic);
NETGRAPH_VALIDATION_ERROR(NegativeEntry);
NETGRAPH_VALIDATION_ERROR(SupportMismatch);
NETGRAPH_VALIDATION_ERROR(NotStronglyConnected);
NETGRAPH_VALIDATION_ERROR(NotNonnegative);
NETGRAPH_VALIDATION_ERROR(NotIrreducible);

// Scenario / IO.
NETGRAPH_VALIDATION_ERROR(ParseError);
NETGRAPH_VALIDATION_ERROR(SchemaError);
NETGRAPH_VALIDATION_ERROR(IoError);

// Numerical failures.
NETGRAPH_NUMERICAL_ERROR(EigensolverFailure);
NETGRAPH_NUMERICAL_ERROR(EigenFailure);
NETGRAPH_NUMERICAL_ERROR(LinearSolveFailure);
NETGRAPH_NUMERICAL_ERROR(KernelDimensionNotOne);
NETGRAPH_NUMERICAL_ERROR(CycleEnumerationOverflow);
NETGRAPH_NUMERICAL_ERROR(LdqFails);
NETGRAPH_NUMERICAL_ERROR(SemisimplicityFailure);

#undef NETGRAPH_VALIDATION_ERROR
#undef NETGRAPH_NUMERICAL_ERROR

}  // namespace netgraph
