#ifndef BCH_ERROR_HPP
#define BCH_ERROR_HPP

#include <stdexcept>
#include <string>
#include <utility>

namespace bch {

/// Broad failure category; the CLI maps each one to an exit status.
enum class ErrorKind { config, data, estimation, invariant };

inline const char* to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::data: return "data";
    case ErrorKind::estimation: return "estimation";
    case ErrorKind::invariant: return "invariant";
    }
    return "unknown";
}

/**
 * Base for every error raised by the library.
 *
 * Carries the module and operation that failed plus an optional hint the
 * CLI prints as remediation advice.
 */
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string module, std::string operation, const std::string& message,
          std::string hint = {})
        : std::runtime_error(message),
          m_kind(kind),
          m_module(std::move(module)),
          m_operation(std::move(operation)),
          m_hint(std::move(hint))
    {
    }

    ErrorKind kind() const noexcept { return m_kind; }
    const std::string& module() const noexcept { return m_module; }
    const std::string& operation() const noexcept { return m_operation; }
    const std::string& hint() const noexcept { return m_hint; }

private:
    ErrorKind m_kind;
    std::string m_module;
    std::string m_operation;
    std::string m_hint;
};

#define BCH_DEFINE_ERROR(Name, Kind)                                                              \
    class Name : public Error {                                                                   \
    public:                                                                                       \
        Name(std::string module, std::string operation, const std::string& message,               \
             std::string hint = {})                                                               \
            : Error(ErrorKind::Kind, std::move(module), std::move(operation), message,            \
                    std::move(hint))                                                              \
        {                                                                                         \
        }                                                                                         \
    };

BCH_DEFINE_ERROR(ConfigError, config)
BCH_DEFINE_ERROR(LookupError, config)
BCH_DEFINE_ERROR(PreconditionError, config)
BCH_DEFINE_ERROR(ParseError, data)
BCH_DEFINE_ERROR(SchemaError, data)
BCH_DEFINE_ERROR(DegenerateVariableError, data)
BCH_DEFINE_ERROR(InsufficientDataError, data)
BCH_DEFINE_ERROR(DegenerateGeometryError, estimation)
BCH_DEFINE_ERROR(StationarityError, config)
BCH_DEFINE_ERROR(InstabilityError, estimation)
BCH_DEFINE_ERROR(OracleDegenerateError, estimation)
BCH_DEFINE_ERROR(ContractViolation, invariant)

#undef BCH_DEFINE_ERROR

} // namespace bch

#endif
