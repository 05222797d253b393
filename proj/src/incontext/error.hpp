// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace incontext {

enum class ErrorCode {
    InvalidArgument = 1,
    Shape = 2,
    OutOfRange = 3,
    Io = 4,
    Format = 5,
    Digest = 6,
    Version = 7,
    Numeric = 8,
    Precondition = 9,
    EmptyMask = 10,
};

/// Base class for every error raised by the library. `module()` names the
/// subsystem that raised it so front ends can print module-qualified messages.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string module, const std::string& what)
        : std::runtime_error(module + ": " + what), code_(code), module_(std::move(module)) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& module() const noexcept { return module_; }

private:
    ErrorCode code_;
    std::string module_;
};

class ShapeError : public Error {
public:
    ShapeError(std::string module, const std::string& what) : Error(ErrorCode::Shape, std::move(module), what) {}
};

class RangeError : public Error {
public:
    RangeError(std::string module, const std::string& what) : Error(ErrorCode::OutOfRange, std::move(module), what) {}
};

class IoError : public Error {
public:
    IoError(std::string module, const std::string& what) : Error(ErrorCode::Io, std::move(module), what) {}
};

class FormatError : public Error {
public:
    FormatError(std::string module, const std::string& what) : Error(ErrorCode::Format, std::move(module), what) {}
};

class DigestError : public Error {
public:
    DigestError(std::string module, const std::string& what) : Error(ErrorCode::Digest, std::move(module), what) {}
};

class VersionError : public Error {
public:
    VersionError(std::string module, const std::string& what) : Error(ErrorCode::Version, std::move(module), what) {}
};

class NumericError : public Error {
public:
    NumericError(std::string module, const std::string& what) : Error(ErrorCode::Numeric, std::move(module), what) {}
};

class PreconditionError : public Error {
public:
    PreconditionError(std::string module, const std::string& what)
        : Error(ErrorCode::Precondition, std::move(module), what) {}
};

class EmptyMaskError : public Error {
public:
    EmptyMaskError(std::string module, const std::string& what) : Error(ErrorCode::EmptyMask, std::move(module), what) {}
};

class InvalidArgument : public Error {
public:
    InvalidArgument(std::string module, const std::string& what)
        : Error(ErrorCode::InvalidArgument, std::move(module), what) {}
};

}  // namespace incontext
