// Copyright (c) 2026 The geomark authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace geomark {

// Base class for all toolkit errors. Subtypes distinguish the failure
// classes surfaced by library contracts and mapped to CLI exit codes
// (I/O -> 2, everything else -> 1).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input file syntax; message carries the locus (byte/record).
class ParseError : public Error {
public:
    using Error::Error;
};

// Structurally valid input that violates the landmark schema
// (missing/unknown landmark names, wrong arity).
class SchemaError : public Error {
public:
    using Error::Error;
};

// Value-level invariant violations (non-positive spacing, out-of-bounds
// annotation coordinates, invalid generator parameters).
class ValidationError : public Error {
public:
    using Error::Error;
};

// Bad scalar arguments to numeric operations (T <= 0, sigma <= 0, ...).
class ParameterError : public Error {
public:
    using Error::Error;
};

// Shape or arity mismatch between containers.
class DimensionError : public Error {
public:
    using Error::Error;
};

// A point group admits no well-defined line direction (isotropic or
// zero-spread second moments).
class DegenerateDirectionError : public Error {
public:
    using Error::Error;
};

// Prediction/ground-truth corpora whose image ids do not align.
class PairingError : public Error {
public:
    using Error::Error;
};

// Filesystem-level read/write failure.
class IoError : public Error {
public:
    using Error::Error;
};

// Training loss became non-finite; message reports the last finite epoch.
class DivergenceError : public Error {
public:
    using Error::Error;
};

}  // namespace geomark
