#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace srctrace {

// Every data-level failure raised by the library derives from Error.
// The CLI maps Error to exit status 2; usage problems are handled separately.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SRCTRACE_DEFINE_ERROR(Name)             \
  class Name : public Error {                   \
   public:                                      \
    using Error::Error;                         \
  }

SRCTRACE_DEFINE_ERROR(IoError);
SRCTRACE_DEFINE_ERROR(FormatError);
SRCTRACE_DEFINE_ERROR(TruncationError);
SRCTRACE_DEFINE_ERROR(DataError);
SRCTRACE_DEFINE_ERROR(AlignmentError);
SRCTRACE_DEFINE_ERROR(LabelError);
SRCTRACE_DEFINE_ERROR(EmptySupportError);
SRCTRACE_DEFINE_ERROR(DimError);
SRCTRACE_DEFINE_ERROR(RangeError);
SRCTRACE_DEFINE_ERROR(StratumError);
SRCTRACE_DEFINE_ERROR(CalibrationError);
SRCTRACE_DEFINE_ERROR(CoverageError);

#undef SRCTRACE_DEFINE_ERROR

// Errors tied to a line of a text input (manifest, relabel map, split file).
// line() is 1-based.
class LineError : public Error {
 public:
  LineError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class SchemaError : public LineError {
 public:
  using LineError::LineError;
};

class DuplicateError : public LineError {
 public:
  using LineError::LineError;
};

}  // namespace srctrace
