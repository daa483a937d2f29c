#pragma once

#include <stdexcept>
#include <string>

namespace st1::io {

// Malformed configuration or data files; maps to the data-error exit code.
class DataError : public std::runtime_error {
 public:
  DataError(const std::string& source, int line, const std::string& message)
      : std::runtime_error(format(source, line, message)), source_(source), line_(line) {}
  explicit DataError(const std::string& message) : std::runtime_error(message), line_(0) {}

  const std::string& source() const { return source_; }
  int line() const { return line_; }

 private:
  static std::string format(const std::string& source, int line, const std::string& message) {
    std::string s = source.empty() ? std::string("<input>") : source;
    if (line > 0) s += ":" + std::to_string(line);
    return s + ": " + message;
  }

  std::string source_;
  int line_;
};

}  // namespace st1::io
