#pragma once

#include <stdexcept>
#include <string>

namespace fgrec {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ZeroVector : Error { using Error::Error; };
struct ShapeMismatch : Error { using Error::Error; };
struct InvalidLabel : Error { using Error::Error; };
struct BadArchitecture : Error { using Error::Error; };
struct StaleCache : Error { using Error::Error; };
struct BatchTooSmall : Error { using Error::Error; };
struct CropTooLarge : Error { using Error::Error; };
struct OutOfRange : Error { using Error::Error; };
struct ConfigInvalid : Error { using Error::Error; };
struct DataEmpty : Error { using Error::Error; };
struct ClassCountMismatch : Error { using Error::Error; };
struct MemberMismatch : Error { using Error::Error; };
struct LengthMismatch : Error { using Error::Error; };
struct DegenerateInput : Error { using Error::Error; };
struct CorruptFile : Error { using Error::Error; };
struct VersionUnsupported : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct HeaderMismatch : Error { using Error::Error; };
struct SpecInvalid : Error { using Error::Error; };

} // namespace fgrec
