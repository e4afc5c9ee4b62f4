#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "segvirt/segment_allocator.hpp"
#include "segvirt/units.hpp"

namespace segvirt {

/// Largest n the register model supports.
inline constexpr unsigned kMaxDsnSegments = 8;

/// DS-n translation registers of one VM.
///
/// Guest segment i covers [GBReg_i, GBReg_{i+1}) with GBReg_0 = 0 implicit, and
/// maps onto host segment [HBReg_i, HBReg_i + size_i). The last guest segment
/// ends where the host range [HBReg_{k-1}, limit) ends.
struct DsnRegisterFile {
  unsigned n = 1;
  std::vector<Bytes> guest_base;  // GBReg_1 .. GBReg_{k-1}
  std::vector<Bytes> host_base;   // HBReg_0 .. HBReg_{k-1}
  Bytes limit = 0;                // exclusive end of the last host segment

  std::size_t k() const noexcept { return host_base.size(); }

  /// Start of guest segment i (GBReg_i, 0 for i == 0).
  Bytes guest_start(std::size_t i) const { return i == 0 ? 0 : guest_base[i - 1]; }
  /// Size of guest/host segment i.
  Bytes segment_size(std::size_t i) const;
  /// Total mapped guest-physical bytes.
  Bytes guest_size() const;

  /// Throws InconsistencyError if the file violates its structural invariants.
  void validate() const;

  bool operator==(const DsnRegisterFile&) const = default;
};

/// Lays the guest-physical space [0, guest_mem_bytes) over the granted host
/// segments in ascending host address order. Returns nullopt when k > n (the
/// VM falls back to EPT or shadow paging). Throws InconsistencyError if the
/// segment sizes do not add up to guest_mem_bytes or segments overlap, and
/// PreconditionError for n outside [1, kMaxDsnSegments] or no segments.
std::optional<DsnRegisterFile> build_register_file(const VMAllocation& allocation,
                                                   Bytes guest_mem_bytes, unsigned n);

/// hpa = HBReg_i + (gpa - GBReg_i) for the guest segment holding gpa, or
/// nullopt on a boundary violation.
std::optional<Bytes> try_translate(const DsnRegisterFile& regs, Bytes gpa) noexcept;

/// As try_translate, but throws DsnViolation.
Bytes translate_gpa(const DsnRegisterFile& regs, Bytes gpa);

/// Reads a register file from `name = value` lines:
///   n = 3
///   hb0 = 0x100000000
///   gb1 = 0x80000000
///   hb1 = 0x300000000
///   limit = 0x380000000
/// Values are decimal or 0x-prefixed hex; '#' starts a comment. k is the
/// number of hbN keys. Throws ParseError.
DsnRegisterFile read_register_file(std::istream& in);
void write_register_file(std::ostream& out, const DsnRegisterFile& regs);

}  // namespace segvirt
