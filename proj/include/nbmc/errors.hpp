#pragma once

#include <stdexcept>
#include <string>

namespace nbmc {

// A requested sum would exceed the hard cap on the number of terms
// (kMaxSumTerms in specfun.hpp). Raised instead of silently running.
class term_cap_error : public std::runtime_error {
 public:
  explicit term_cap_error(const std::string& what) : std::runtime_error(what) {}
};

// The planning target cannot be met (e.g. no N below the scan cap works).
class unachievable_error : public std::runtime_error {
 public:
  explicit unachievable_error(const std::string& what) : std::runtime_error(what) {}
};

// A replayed/streamed trial file contains a line that is not "0", "1",
// blank or a '#' comment. Carries the 1-based offending line number.
class stream_format_error : public std::runtime_error {
 public:
  stream_format_error(long long line, const std::string& what)
      : std::runtime_error(what), line_(line) {}
  long long line() const { return line_; }

 private:
  long long line_;
};

}  // namespace nbmc
