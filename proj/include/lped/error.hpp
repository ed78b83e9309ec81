#pragma once

#include <stdexcept>
#include <string>

namespace lped {

// Error categories. The C API maps each one onto a stable status code and the
// CLI maps config/data categories onto its exit codes.
enum class ErrorKind {
  Shape,      // tensor shapes or channel counts disagree
  Dimension,  // a spatial axis has the wrong parity or size
  Value,      // argument outside its valid range
  Config,     // configuration is inconsistent or incomplete
  Data,       // dataset missing, empty or unreadable
  Format,     // file is not in the expected container format
  Version,    // container format version not supported
  State,      // object used before it is ready (e.g. no model loaded)
  Io,         // filesystem failure
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace lped
