// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace promptseg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// The NIfTI file uses a feature outside the supported subset. `field()` names
/// the offending header field.
class UnsupportedNiftiError : public Error {
public:
    UnsupportedNiftiError(std::string field, const std::string& detail);
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class DimensionMismatchError : public Error {
public:
    using Error::Error;
};

class BoundsError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class EmptyMaskError : public Error {
public:
    using Error::Error;
};

class DegenerateInputError : public Error {
public:
    using Error::Error;
};

class MalformedRleError : public Error {
public:
    using Error::Error;
};

class StatsError : public Error {
public:
    using Error::Error;
};

/// Any failure while obtaining a prediction from a segmenter backend.
class BackendError : public Error {
public:
    using Error::Error;
};

/// The backend could not be reached or did not answer in time.
class TransportError : public BackendError {
public:
    using BackendError::BackendError;
};

class TimeoutError : public TransportError {
public:
    using TransportError::TransportError;
};

/// The backend answered, but the answer violates the wire contract.
class ProtocolError : public BackendError {
public:
    using BackendError::BackendError;
};

/// Unknown session, case or slice.
class NotFoundError : public Error {
public:
    using Error::Error;
};

/// Mutation of a finalized slice.
class ConflictError : public Error {
public:
    using Error::Error;
};

/// A prompt that cannot be applied to the slice it targets.
class InvalidPromptError : public Error {
public:
    using Error::Error;
};

}  // namespace promptseg
