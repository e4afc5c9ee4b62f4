#include "segvirt/errors.hpp"

#include <cstdio>

namespace segvirt {

namespace {

std::string violation_message(Bytes gpa) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "DS-n violation at gpa 0x%llx",
                static_cast<unsigned long long>(gpa));
  return buf;
}

std::string parse_message(std::size_t line, const std::string& reason) {
  if (line == 0) return reason;
  return "line " + std::to_string(line) + ": " + reason;
}

}  // namespace

DsnViolation::DsnViolation(Bytes gpa) : Error(violation_message(gpa)), gpa_(gpa) {}

ParseError::ParseError(std::size_t line, const std::string& reason)
    : Error(parse_message(line, reason)), line_(line), reason_(reason) {}

}  // namespace segvirt
