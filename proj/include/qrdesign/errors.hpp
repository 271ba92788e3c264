#pragma once

#include <stdexcept>
#include <string>

namespace qrdesign {

/** Base class for all library errors. */
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/** A configuration value or function argument violates a documented precondition. */
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/** A basis function evaluated to NaN or infinity at a design point. */
class NonFiniteBasisValue : public Error {
public:
    using Error::Error;
};

/** Evaluation point lies outside the domain of a compactly supported basis. */
class OutOfDomain : public Error {
public:
    using Error::Error;
};

/** Base class for failures of a symmetric positive-definite inversion. */
class SingularMatrix : public Error {
public:
    using Error::Error;
};

/** The first-order weighted moment matrix of a design is singular or ill-conditioned. */
class SingularT01 : public SingularMatrix {
public:
    using SingularMatrix::SingularMatrix;
};

/** The variance-class moment matrix S1 is singular or ill-conditioned. */
class SingularS1 : public SingularMatrix {
public:
    using SingularMatrix::SingularMatrix;
};

/** The weighted information matrix P1 is singular or ill-conditioned. */
class SingularP1 : public SingularMatrix {
public:
    using SingularMatrix::SingularMatrix;
};

/** Neither ordering of the two max-eigenvalue branch terms could be certified. */
class BranchCheckFailed : public Error {
public:
    using Error::Error;
};

/** A derivative-free optimizer failed to converge from every start. */
class OptimizerStalled : public Error {
public:
    using Error::Error;
};

/** The quadratic-weight normal matrix is numerically degenerate. */
class DegeneratePencil : public Error {
public:
    using Error::Error;
};

/** A density-family search returned a candidate with non-positive total mass. */
class NonDensityResult : public Error {
public:
    using Error::Error;
};

/** A candidate support has fewer usable points than regression coefficients. */
class RankDeficientSupport : public Error {
public:
    using Error::Error;
};

/** Two basis peaks snapped to the same grid point and could not be separated. */
class DuplicateSnap : public Error {
public:
    using Error::Error;
};

/** The design space has no directions orthogonal to the regression basis. */
class NoComplement : public Error {
public:
    using Error::Error;
};

/** The regression design matrix does not have full column rank. */
class RankDeficient : public Error {
public:
    using Error::Error;
};

/** A linear-program edge walk found no blocking breakpoint (internal error). */
class Unbounded : public Error {
public:
    using Error::Error;
};

} // namespace qrdesign
