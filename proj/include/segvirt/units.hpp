#pragma once

#include <cstdint>
#include <string>

namespace segvirt {

/// Byte counts and byte addresses (host- or guest-physical).
using Bytes = std::uint64_t;

/// Simulated time, in whole seconds.
using Timestamp = std::int64_t;

using MachineId = std::uint32_t;
using VmId = std::string;

inline constexpr Bytes KiB = Bytes{1} << 10;
inline constexpr Bytes MiB = Bytes{1} << 20;
inline constexpr Bytes GiB = Bytes{1} << 30;

inline constexpr Bytes kPageSize = 4 * KiB;

inline constexpr Timestamp kSecondsPerHour = 3600;
inline constexpr Timestamp kSecondsPerWeek = 7 * 24 * kSecondsPerHour;

}  // namespace segvirt
