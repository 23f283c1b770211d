#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sinterp {

/// Base of every error the library raises on purpose. Anything else escaping
/// the library is a bug.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "error"; }
};

/// Tensor extents that do not fit the operation.
class ShapeError : public Error
{
public:
    using Error::Error;
    const char* kind() const noexcept override { return "shape"; }
};

/// Inputs that are well-formed but violate a documented precondition.
class ValidationError : public Error
{
public:
    using Error::Error;
    const char* kind() const noexcept override { return "validation"; }
};

class IoError : public Error
{
public:
    IoError(const std::string& path, const std::string& what)
        : Error(path + ": " + what), path_(path)
    {
    }
    const char* kind() const noexcept override { return "io"; }
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

enum class FormatErrorCode
{
    BadMagic,
    UnsupportedVersion,
    Truncated,
    DimOverflow,
    BadField,
    LengthMismatch,
    NegativeValue,
    ShapeMismatch,
};

const char* to_string(FormatErrorCode code) noexcept;

/// Malformed file contents. `offset` is the byte position where decoding
/// stopped.
class FormatError : public Error
{
public:
    FormatError(FormatErrorCode code, std::uint64_t offset, const std::string& what);
    const char* kind() const noexcept override { return "format"; }
    FormatErrorCode code() const noexcept { return code_; }
    std::uint64_t offset() const noexcept { return offset_; }

private:
    FormatErrorCode code_;
    std::uint64_t offset_;
};

} // namespace sinterp
