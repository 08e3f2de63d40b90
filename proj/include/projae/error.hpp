#pragma once

#include <stdexcept>
#include <string>

namespace projae {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class SingularMatrixError : public Error {
public:
    using Error::Error;
};

class RankDeficientError : public Error {
public:
    RankDeficientError(const std::string& what, long rank) : Error(what), rank_(rank) {}
    long rank() const { return rank_; }

private:
    long rank_;
};

class NotSpdError : public Error {
public:
    using Error::Error;
};

class NotHurwitzError : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public Error {
public:
    using Error::Error;
};

// Raised when a representative pair leaves D+ (det(psi^T phi) <= 0 or numerically singular).
class DomainError : public Error {
public:
    using Error::Error;
};

class BlowUpError : public Error {
public:
    BlowUpError(const std::string& what, double time) : Error(what), time_(time) {}
    double time() const { return time_; }

private:
    double time_;
};

class IllConditionedError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DivergedError : public Error {
public:
    using Error::Error;
};

class SparsificationError : public Error {
public:
    using Error::Error;
};

}  // namespace projae
