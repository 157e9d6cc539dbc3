// Copyright 2026 The LF2L Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Exception hierarchy shared by every module. The CLI maps the three
// top-level families onto process exit codes (config 2, protocol 3, data 4).

#ifndef LF2L_ERROR_HPP_
#define LF2L_ERROR_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lf2l {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid hyperparameters, architectures or experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Dimension mismatch between tensors, parameters or aligned arrays.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Federated protocol violations: handshake, round ordering, disconnects.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Malformed binary parameter payload.
class CodecError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

// Anything wrong with the data itself.
class DataError : public Error {
 public:
  using Error::Error;
};

class EncodingError : public DataError {
 public:
  using DataError::DataError;
};

class StratificationError : public DataError {
 public:
  using DataError::DataError;
};

class GenerationError : public DataError {
 public:
  using DataError::DataError;
};

class IngestionError : public DataError {
 public:
  IngestionError(std::size_t row, const std::string& what)
      : DataError("row " + std::to_string(row) + ": " + what), row_(row) {}
  explicit IngestionError(const std::string& what) : DataError(what) {}

  // 1-based data row (header excluded); 0 when the error is not row-specific.
  std::size_t row() const { return row_; }

 private:
  std::size_t row_ = 0;
};

class GroupingError : public DataError {
 public:
  using DataError::DataError;
};

class SchemaConflictError : public GroupingError {
 public:
  using GroupingError::GroupingError;
};

// A metric is undefined for the given labels (e.g. a single class).
class MetricError : public Error {
 public:
  using Error::Error;
};

class ReportError : public Error {
 public:
  using Error::Error;
};

}  // namespace lf2l

#endif  // LF2L_ERROR_HPP_
