#ifndef MARKOVLM_ERROR_HPP
#define MARKOVLM_ERROR_HPP

#include <stdexcept>
#include <string>

namespace markovlm {

// Base of every error the library throws on purpose. The CLI maps the
// subclasses to distinct exit codes, so pick the subclass by what the caller
// has to fix, not by where the failure was detected.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input: shapes that do not match, probabilities that do not sum
// to one, unreadable files, unknown JSON fields.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Well-formed input on which the requested statistic is undefined: a node
// that is never visited, an observed path the target measure excludes,
// kernels that are not equivalent.
class PreconditionError : public Error {
public:
    using Error::Error;
};

// Argument outside the domain of an operation (confidence level outside
// (0,1), too few replicates).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

}  // namespace markovlm

#endif  // MARKOVLM_ERROR_HPP
