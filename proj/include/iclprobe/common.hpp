// Shared vocabulary types, the error type, and small formatting helpers.
#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>

namespace iclprobe {

using TokenId = std::int32_t;

enum class ErrorCode {
  Malformed,
  DuplicateId,
  DuplicateString,
  NonDenseIds,
  InvalidRange,
  EmptyPool,
  PoolTooSmall,
  InvalidConfig,
  InsufficientData,
  UnknownSymbol,
  BackendUnreachable,
  VocabMismatch,
  ProtocolViolation,
  BackendError,
  ShapeMismatch,
  EmptySuite,
  EmptyInput,
  DuplicateCell,
  DegenerateVariance,
  MismatchedGrid,
  SingularMatrix,
  InsufficientLength,
  NonPositiveInput,
  Divergence,
  NonFinite,
  DimensionMismatch,
  OutOfRange,
  UndefinedIou,
  EmptyStore,
  Io,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Malformed: return "Malformed";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::DuplicateString: return "DuplicateString";
    case ErrorCode::NonDenseIds: return "NonDenseIds";
    case ErrorCode::InvalidRange: return "InvalidRange";
    case ErrorCode::EmptyPool: return "EmptyPool";
    case ErrorCode::PoolTooSmall: return "PoolTooSmall";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::UnknownSymbol: return "UnknownSymbol";
    case ErrorCode::BackendUnreachable: return "BackendUnreachable";
    case ErrorCode::VocabMismatch: return "VocabMismatch";
    case ErrorCode::ProtocolViolation: return "ProtocolViolation";
    case ErrorCode::BackendError: return "BackendError";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptySuite: return "EmptySuite";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DuplicateCell: return "DuplicateCell";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::MismatchedGrid: return "MismatchedGrid";
    case ErrorCode::SingularMatrix: return "SingularMatrix";
    case ErrorCode::InsufficientLength: return "InsufficientLength";
    case ErrorCode::NonPositiveInput: return "NonPositiveInput";
    case ErrorCode::Divergence: return "Divergence";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::UndefinedIou: return "UndefinedIou";
    case ErrorCode::EmptyStore: return "EmptyStore";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and tests) can tell error kinds apart without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

/// 64-bit FNV-1a.
constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t hash = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

inline std::string hex64(std::uint64_t value) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[value & 0xF];
    value >>= 4;
  }
  return out;
}

/// Shortest round-trip decimal form; "nan", "inf" and "-inf" for non-finite values.
inline std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) return "nan";
  return std::string(buf.data(), ptr);
}

}  // namespace iclprobe
