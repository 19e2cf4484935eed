#pragma once

#include <stdexcept>
#include <string>

namespace cbnkit {

/// Root of every error thrown by the library. Callers that only need to
/// distinguish "our failure" from anything else catch this.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input files, header mismatches, out-of-range source values.
class DataError : public Error {
public:
    using Error::Error;
};

/// Unknown nodes, invalid edge insertions, cyclic input where a DAG is required.
class GraphError : public Error {
public:
    using Error::Error;
};

/// A partially directed graph admits no DAG with the same skeleton and
/// v-structures (typically conflicting colliders from a constraint learner).
class NoConsistentExtension : public GraphError {
public:
    using GraphError::GraphError;
};

/// Query evidence has probability zero under the (possibly mutilated) network.
class ZeroProbabilityEvidence : public Error {
public:
    using Error::Error;
};

/// Invalid query or configuration arguments (overlapping sets, bad states...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

}  // namespace cbnkit
