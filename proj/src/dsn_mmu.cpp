#include "segvirt/dsn_mmu.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>

#include "key_value.hpp"
#include "segvirt/errors.hpp"

namespace segvirt {

Bytes DsnRegisterFile::segment_size(std::size_t i) const {
  if (i + 1 < k()) return guest_base[i] - guest_start(i);
  return limit - host_base[i];
}

Bytes DsnRegisterFile::guest_size() const {
  if (host_base.empty()) return 0;
  return guest_start(k() - 1) + segment_size(k() - 1);
}

void DsnRegisterFile::validate() const {
  if (n < 1 || n > kMaxDsnSegments) throw InconsistencyError("n must be in [1, 8]");
  if (k() < 1 || k() > n) throw InconsistencyError("active segment count must be in [1, n]");
  if (guest_base.size() + 1 != k()) {
    throw InconsistencyError("need exactly k-1 guest base registers");
  }
  for (std::size_t i = 0; i < guest_base.size(); ++i) {
    if (guest_base[i] <= guest_start(i)) {
      throw InconsistencyError("guest base registers must be positive and strictly increasing");
    }
  }
  if (limit <= host_base.back()) throw InconsistencyError("limit must exceed the last host base");

  struct Range {
    Bytes base, limit;
  };
  std::vector<Range> host;
  for (std::size_t i = 0; i < k(); ++i) {
    const Bytes size = segment_size(i);
    if (host_base[i] > ~Bytes{0} - size) throw InconsistencyError("host segment overflows");
    host.push_back({host_base[i], host_base[i] + size});
  }
  std::sort(host.begin(), host.end(), [](auto a, auto b) { return a.base < b.base; });
  for (std::size_t i = 1; i < host.size(); ++i) {
    if (host[i - 1].limit > host[i].base) throw InconsistencyError("host segments overlap");
  }
}

std::optional<DsnRegisterFile> build_register_file(const VMAllocation& allocation,
                                                   Bytes guest_mem_bytes, unsigned n) {
  if (n < 1 || n > kMaxDsnSegments) throw PreconditionError("n must be in [1, 8]");
  if (allocation.segments.empty()) throw PreconditionError("allocation has no segments");

  std::vector<SegmentDescriptor> host = allocation.segments;
  std::sort(host.begin(), host.end(), [](const auto& a, const auto& b) { return a.base < b.base; });
  Bytes total = 0;
  for (std::size_t i = 0; i < host.size(); ++i) {
    if (host[i].base >= host[i].limit) throw InconsistencyError("empty host segment");
    if (i > 0 && host[i - 1].limit > host[i].base) {
      throw InconsistencyError("host segments overlap");
    }
    total += host[i].size();
  }
  if (total != guest_mem_bytes) {
    throw InconsistencyError("granted segments cover " + std::to_string(total) +
                             " bytes but guest memory is " + std::to_string(guest_mem_bytes));
  }
  if (host.size() > n) return std::nullopt;

  DsnRegisterFile regs;
  regs.n = n;
  Bytes guest_cursor = 0;
  for (std::size_t i = 0; i < host.size(); ++i) {
    if (i > 0) regs.guest_base.push_back(guest_cursor);
    regs.host_base.push_back(host[i].base);
    guest_cursor += host[i].size();
  }
  regs.limit = host.back().limit;
  return regs;
}

std::optional<Bytes> try_translate(const DsnRegisterFile& regs, Bytes gpa) noexcept {
  // Linear comparator scan: largest i with GBReg_i <= gpa.
  for (std::size_t i = regs.k(); i-- > 0;) {
    const Bytes start = regs.guest_start(i);
    if (gpa < start) continue;
    const Bytes offset = gpa - start;
    if (offset >= regs.segment_size(i)) return std::nullopt;
    return regs.host_base[i] + offset;
  }
  return std::nullopt;
}

Bytes translate_gpa(const DsnRegisterFile& regs, Bytes gpa) {
  if (auto hpa = try_translate(regs, gpa)) return *hpa;
  throw DsnViolation(gpa);
}

DsnRegisterFile read_register_file(std::istream& in) {
  auto entries = detail::read_key_values(in);
  DsnRegisterFile regs;

  auto take = [&](const std::string& key) -> std::optional<Bytes> {
    auto it = entries.find(key);
    if (it == entries.end()) return std::nullopt;
    const Bytes value = detail::parse_unsigned(it->second, key);
    entries.erase(it);
    return value;
  };

  const auto n = take("n");
  if (!n) throw ParseError(0, "missing key 'n'");
  if (*n < 1 || *n > kMaxDsnSegments) throw ParseError(0, "'n' must be in [1, 8]");
  regs.n = static_cast<unsigned>(*n);
  const auto limit = take("limit");
  if (!limit) throw ParseError(0, "missing key 'limit'");
  regs.limit = *limit;

  for (unsigned i = 0; i < kMaxDsnSegments; ++i) {
    auto hb = take("hb" + std::to_string(i));
    if (!hb) break;
    regs.host_base.push_back(*hb);
    if (i > 0) {
      auto gb = take("gb" + std::to_string(i));
      if (!gb) throw ParseError(0, "missing key 'gb" + std::to_string(i) + "'");
      regs.guest_base.push_back(*gb);
    }
  }
  if (regs.host_base.empty()) throw ParseError(0, "missing key 'hb0'");
  if (!entries.empty()) {
    const auto& [key, entry] = *entries.begin();
    throw ParseError(entry.line, "unexpected key '" + key + "'");
  }
  try {
    regs.validate();
  } catch (const InconsistencyError& e) {
    throw ParseError(0, e.what());
  }
  return regs;
}

void write_register_file(std::ostream& out, const DsnRegisterFile& regs) {
  char buf[64];
  auto hex = [&](Bytes v) {
    std::snprintf(buf, sizeof(buf), "0x%llx", static_cast<unsigned long long>(v));
    return std::string(buf);
  };
  out << "n = " << regs.n << '\n';
  for (std::size_t i = 0; i < regs.k(); ++i) {
    if (i > 0) out << "gb" << i << " = " << hex(regs.guest_base[i - 1]) << '\n';
    out << "hb" << i << " = " << hex(regs.host_base[i]) << '\n';
  }
  out << "limit = " << hex(regs.limit) << '\n';
}

}  // namespace segvirt
