#include "key_value.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <istream>

#include "segvirt/errors.hpp"

namespace segvirt::detail {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

}  // namespace

std::map<std::string, KeyValueEntry> read_key_values(std::istream& in) {
  std::map<std::string, KeyValueEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "expected 'name = value'");
    std::string key = trim(std::string_view(body).substr(0, eq));
    std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty() || value.empty()) throw ParseError(line_no, "expected 'name = value'");
    if (out.contains(key)) throw ParseError(line_no, "duplicate key '" + key + "'");
    out.emplace(std::move(key), KeyValueEntry{std::move(value), line_no});
  }
  return out;
}

unsigned long long parse_unsigned(const KeyValueEntry& entry, const std::string& key) {
  std::string_view text = entry.text;
  int base = 10;
  if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) {
    text.remove_prefix(2);
    base = 16;
  }
  std::string digits;
  for (char c : text) {
    if (c != '_') digits.push_back(c);
  }
  unsigned long long value = 0;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value, base);
  if (ec != std::errc{} || ptr != digits.data() + digits.size() || digits.empty()) {
    throw ParseError(entry.line, "'" + key + "' is not an unsigned integer: " + entry.text);
  }
  return value;
}

double parse_number(const KeyValueEntry& entry, const std::string& key) {
  const char* begin = entry.text.c_str();
  char* end = nullptr;
  const double value = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || !std::isfinite(value)) {
    throw ParseError(entry.line, "'" + key + "' is not a number: " + entry.text);
  }
  return value;
}

}  // namespace segvirt::detail
