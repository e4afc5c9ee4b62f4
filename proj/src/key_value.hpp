#pragma once

// `name = number` line files shared by the register and counter readers.

#include <cstddef>
#include <iosfwd>
#include <map>
#include <string>

namespace segvirt::detail {

struct KeyValueEntry {
  std::string text;
  std::size_t line = 0;
};

/// Parses `name = value` lines. '#' starts a comment, blank lines are
/// skipped, duplicate keys are a ParseError.
std::map<std::string, KeyValueEntry> read_key_values(std::istream& in);

/// Decimal or 0x-prefixed hexadecimal unsigned integer.
unsigned long long parse_unsigned(const KeyValueEntry& entry, const std::string& key);

/// Finite floating-point number (decimal, exponent allowed).
double parse_number(const KeyValueEntry& entry, const std::string& key);

}  // namespace segvirt::detail
