// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace guipra {

// Root of every error this library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// core-transcript
class IndexMismatchError : public Error {
public:
    using Error::Error;
};

class InvariantError : public Error {
public:
    using Error::Error;
};

class ActionParseError : public Error {
public:
    using Error::Error;
};

class ActionSchemaError : public Error {
public:
    using Error::Error;
};

// model-gateway
class BackendUnreachableError : public Error {
public:
    using Error::Error;
};

class ReplyTruncatedError : public Error {
public:
    using Error::Error;
};

// perception
class ToolUnreachableError : public Error {
public:
    using Error::Error;
};

class CoordinateRangeError : public Error {
public:
    using Error::Error;
};

// env-sim
class InvalidGraphError : public Error {
public:
    using Error::Error;
};

class AlreadyTerminatedError : public Error {
public:
    using Error::Error;
};

class NotTerminatedError : public Error {
public:
    using Error::Error;
};

// harness
class EmptyInputError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace guipra
