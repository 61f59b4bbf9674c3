#pragma once

#include <stdexcept>
#include <string>

namespace plcrnn {

// Base of every error the library throws. The CLI maps the subclasses onto
// its exit-code contract (see tools/cli.cpp).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Tensor shapes or axis arguments do not line up.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Caller violated an operation's contract (non-scalar loss, wrong list length).
class ContractError : public Error {
public:
    using Error::Error;
};

// Object used in a state that does not support the call (e.g. BN eval
// before running statistics exist).
class StateError : public Error {
public:
    using Error::Error;
};

// NaN/Inf where finite values are required.
class NumericError : public Error {
public:
    using Error::Error;
};

// Bad user-supplied data: zero-power signals, wrong sample rates, mismatched
// spectrogram dimensions.
class InputError : public Error {
public:
    using Error::Error;
};

// File-system or file-format problems.
class IoError : public Error {
public:
    using Error::Error;
};

// A declarative layer graph is internally inconsistent. The message names
// the offending layer.
class SpecError : public Error {
public:
    using Error::Error;
};

// A checkpoint cannot be loaded, or does not match the requested structure.
class CheckpointError : public Error {
public:
    using Error::Error;
};

}  // namespace plcrnn
