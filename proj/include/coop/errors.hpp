// Copyright 2026 The coop_predict Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef COOP__ERRORS_HPP_
#define COOP__ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace coop
{
/// Base class for every error raised by the library.
class CoopError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Input data is malformed (missing fields, bad references, invalid values).
class DataError : public CoopError
{
public:
  using CoopError::CoopError;
};

class SchemaError : public DataError
{
public:
  using DataError::DataError;
};

class ReferenceError : public DataError
{
public:
  using DataError::DataError;
};

class ValueError : public DataError
{
public:
  using DataError::DataError;
};

class EmptyFuture : public DataError
{
public:
  using DataError::DataError;
};

class MissingFuture : public DataError
{
public:
  using DataError::DataError;
};

class NoValidGroundTruth : public DataError
{
public:
  using DataError::DataError;
};

class DegenerateHistory : public DataError
{
public:
  using DataError::DataError;
};

/// Numeric failures: shape errors, non-finite values, missing weights.
class NumericError : public CoopError
{
public:
  using CoopError::CoopError;
};

class ShapeMismatch : public NumericError
{
public:
  using NumericError::NumericError;
};

class NonFiniteDetected : public NumericError
{
public:
  using NumericError::NumericError;
};

class NotScalar : public NumericError
{
public:
  using NumericError::NumericError;
};

class MissingWeight : public NumericError
{
public:
  using NumericError::NumericError;
};

class HeadDivisibility : public NumericError
{
public:
  using NumericError::NumericError;
};

/// Configuration or argument errors (bad K, out-of-range fractions).
class ConfigError : public CoopError
{
public:
  using CoopError::CoopError;
};

class InvalidK : public ConfigError
{
public:
  using ConfigError::ConfigError;
};

class EmptyInput : public ConfigError
{
public:
  using ConfigError::ConfigError;
};

class FormatVersionError : public CoopError
{
public:
  using CoopError::CoopError;
};

class CorruptionError : public CoopError
{
public:
  using CoopError::CoopError;
};

}  // namespace coop

#endif  // COOP__ERRORS_HPP_
