#pragma once

#include <stdexcept>
#include <string>

namespace bas {

/// Base of every error raised by the library. `code()` is the short
/// machine-readable name that also travels over the learner wire protocol.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    [[nodiscard]] const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

#define BAS_DEFINE_ERROR(Name, Code)                                         \
    class Name : public Error {                                              \
    public:                                                                  \
        explicit Name(const std::string& message) : Error(Code, message) {} \
    }

BAS_DEFINE_ERROR(ParseError, "parse");
BAS_DEFINE_ERROR(ValidationError, "validation");
BAS_DEFINE_ERROR(ConfigError, "config");
BAS_DEFINE_ERROR(InvalidAcquisition, "invalid_acquisition");
BAS_DEFINE_ERROR(MissingLabel, "missing_label");
BAS_DEFINE_ERROR(ArityError, "arity");
BAS_DEFINE_ERROR(ContractError, "contract");
BAS_DEFINE_ERROR(ProtocolError, "protocol");
BAS_DEFINE_ERROR(TransportError, "transport");
BAS_DEFINE_ERROR(CalibrationError, "calibration");
BAS_DEFINE_ERROR(DomainError, "domain");
BAS_DEFINE_ERROR(IoError, "io");

#undef BAS_DEFINE_ERROR

}  // namespace bas
