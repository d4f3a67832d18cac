#pragma once

#include <stdexcept>
#include <string>

namespace imap {

/// Input violates a documented precondition (bad spec, config, index).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical routine met data outside its contract (e.g. a non-PSD Gram).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The request is well-formed but outside what this library computes.
class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Prefixes a module tag so orchestrated failures say where they came from.
template <class E>
[[noreturn]] void fail(const char* module, const std::string& what) {
  throw E(std::string("[") + module + "] " + what);
}

}  // namespace imap
