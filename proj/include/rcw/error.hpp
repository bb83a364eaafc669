#pragma once

#include <stdexcept>
#include <string>

namespace rcw {

enum class ErrorCode {
  InvalidArgument,  // bad configuration or precondition violation
  Data,             // unreadable or malformed input data
  Singular,         // a matrix that must be inverted is numerically singular
  Unsupported,      // valid request outside what the library implements
  Degenerate,       // a Monte Carlo run produced no usable draws
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string stage = {})
      : std::runtime_error(message), code_(code), stage_(std::move(stage)) {}

  ErrorCode code() const noexcept { return code_; }

  // Pipeline stage that raised the error ("reduced_form", "estimate", ...).
  // Empty when raised outside a staged pipeline.
  const std::string& stage() const noexcept { return stage_; }

  Error with_stage(std::string stage) const {
    return Error(code_, what(), stage_.empty() ? std::move(stage) : stage_);
  }

 private:
  ErrorCode code_;
  std::string stage_;
};

// Runs fn, attaching `stage` to any rcw::Error that escapes without one.
template <typename Fn>
decltype(auto) staged(const char* stage, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw e.with_stage(stage);
  }
}

}  // namespace rcw
