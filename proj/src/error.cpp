#include "sinterp/error.hpp"

#include <string>

namespace sinterp {

const char* to_string(FormatErrorCode code) noexcept
{
    switch (code) {
    case FormatErrorCode::BadMagic: return "bad-magic";
    case FormatErrorCode::UnsupportedVersion: return "unsupported-version";
    case FormatErrorCode::Truncated: return "truncated";
    case FormatErrorCode::DimOverflow: return "dim-overflow";
    case FormatErrorCode::BadField: return "bad-field";
    case FormatErrorCode::LengthMismatch: return "length-mismatch";
    case FormatErrorCode::NegativeValue: return "negative-value";
    case FormatErrorCode::ShapeMismatch: return "shape-mismatch";
    }
    return "unknown";
}

FormatError::FormatError(FormatErrorCode code, std::uint64_t offset, const std::string& what)
    : Error(std::string(to_string(code)) + " at byte " + std::to_string(offset) + ": " + what),
      code_(code),
      offset_(offset)
{
}

} // namespace sinterp
