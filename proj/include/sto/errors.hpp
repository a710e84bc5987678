#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sto {

/// Base for every error raised by the library. Callers that only need a
/// message can catch this; the CLI and service map subclasses to exit
/// codes and HTTP statuses.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class EmptyInput : public Error {
public:
  using Error::Error;
};

class InvalidArgument : public Error {
public:
  using Error::Error;
};

class PartitionError : public Error {
public:
  using Error::Error;
};

class ClusteringError : public Error {
public:
  using Error::Error;
};

/// Malformed row/column data while loading a dataset. `row` is the 1-based
/// data record number (the header is row 0).
class ParseError : public Error {
public:
  ParseError(std::string message, std::size_t row, std::string column)
      : Error(std::move(message)), row_(row), column_(std::move(column)) {}

  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

private:
  std::size_t row_;
  std::string column_;
};

/// Run configuration or optimizer configuration failed validation. `path`
/// is a JSON-pointer-like location such as `$.optimizer.grid.uniform`.
class ConfigError : public Error {
public:
  ConfigError(std::string path, const std::string& message)
      : Error(path + ": " + message), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

private:
  std::string path_;
};

class ReportError : public Error {
public:
  using Error::Error;
};

}  // namespace sto
