#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>

namespace bsord {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Array dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A state index, state count or bit code outside its legal domain.
class InvalidStateError : public Error {
 public:
  using Error::Error;
};

/// Input data is unusable (empty, non-finite, too few rows, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A file is structurally wrong: missing column, feature count mismatch,
/// malformed model document.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// A cell could not be parsed as a number.
class ParseError : public DataError {
 public:
  ParseError(const std::string& msg, std::size_t row, std::size_t column)
      : DataError(msg), row_(row), column_(column) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

/// A target value that does not appear in the explicit label order, or a
/// target that cannot be ranked.
class LabelError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or command usage.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The training loss became non-finite.
class TrainingDivergedError : public Error {
 public:
  TrainingDivergedError(const std::string& msg, std::size_t epoch)
      : Error(msg), epoch_(epoch) {}

  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

using WarningSink = std::function<void(std::string_view)>;

/// Process-wide destination for non-fatal warnings. Defaults to stderr.
inline WarningSink& warning_sink() {
  static WarningSink sink = [](std::string_view msg) {
    std::cerr << "warning: " << msg << '\n';
  };
  return sink;
}

inline void warn(std::string_view msg) {
  static std::mutex mutex;
  std::lock_guard lock(mutex);
  if (auto& sink = warning_sink()) sink(msg);
}

}  // namespace bsord
