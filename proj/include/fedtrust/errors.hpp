#pragma once

#include <stdexcept>
#include <string>

namespace fedtrust {

// Root of the project's exception hierarchy. Callers that need to distinguish
// failure classes catch the derived types; everything is catchable as Error.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// crypto
struct InvalidSeedError : Error { using Error::Error; };
struct DecryptionFailureError : Error { using Error::Error; };

// encoding / wire formats
struct EncodingError : Error { using Error::Error; };

// messaging: signature rejected (or sender binding broken) vs. undecryptable.
struct IntegrityError : Error { using Error::Error; };
struct ConfidentialityError : Error { using Error::Error; };
struct UnsupportedTypeError : Error { using Error::Error; };

// identity / registry
struct NotFoundError : Error { using Error::Error; };
struct CorruptDocumentError : Error { using Error::Error; };
struct ConflictError : Error { using Error::Error; };

// credentials
struct SchemaViolationError : Error { using Error::Error; };
struct CannotSatisfyError : Error { using Error::Error; };

// fedlearn
struct ShapeError : Error { using Error::Error; };
struct DivergenceError : Error { using Error::Error; };

// configuration / transport / flow control
struct ConfigError : Error { using Error::Error; };
struct DeliveryError : Error { using Error::Error; };
struct TimeoutError : Error { using Error::Error; };

}  // namespace fedtrust
