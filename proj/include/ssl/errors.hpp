/*
 * Copyright 2026 The sslstm Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace ssl {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input files, malformed datasets, inconsistent shapes.
class DataError : public Error {
 public:
  using Error::Error;
};

// Dimension mismatch at an operation boundary.
class ShapeError : public DataError {
 public:
  using DataError::DataError;
};

// Numerical failure: non-PD covariance, divergence, non-finite values.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Every particle weight became zero at step `step`.
class ParticleCollapse : public NumericalError {
 public:
  ParticleCollapse(int step, const std::string& detail)
      : NumericalError("particle collapse at t=" + std::to_string(step) +
                       (detail.empty() ? "" : ": " + detail)),
        step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

}  // namespace ssl
