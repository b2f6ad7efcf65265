#pragma once

#include <stdexcept>
#include <string>

namespace rcml {

/// Process exit codes used by the command-line tool.
enum class ExitCode : int {
    success = 0,
    usage = 1,
    data = 2,
    numeric = 3,
};

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what, ExitCode code = ExitCode::usage)
        : std::runtime_error(what), code_(code) {}

    ExitCode exit_code() const noexcept { return code_; }

private:
    ExitCode code_;
};

#define RCML_DEFINE_ERROR(Name, Code)                                        \
    class Name : public Error {                                              \
    public:                                                                  \
        explicit Name(const std::string& what) : Error(what, Code) {}        \
    }

// Shapes and numerics.
RCML_DEFINE_ERROR(DimensionError, ExitCode::numeric);
RCML_DEFINE_ERROR(NumericError, ExitCode::numeric);
RCML_DEFINE_ERROR(DegenerateVectorError, ExitCode::numeric);
RCML_DEFINE_ERROR(DeterminismError, ExitCode::numeric);
RCML_DEFINE_ERROR(BoundsError, ExitCode::numeric);
RCML_DEFINE_ERROR(ContractError, ExitCode::numeric);

// Inputs and data files.
RCML_DEFINE_ERROR(VocabularyError, ExitCode::data);
RCML_DEFINE_ERROR(FormatError, ExitCode::data);
RCML_DEFINE_ERROR(ParseError, ExitCode::data);
RCML_DEFINE_ERROR(IntegrityError, ExitCode::data);

// Configuration and usage.
RCML_DEFINE_ERROR(ConfigError, ExitCode::usage);

#undef RCML_DEFINE_ERROR

}  // namespace rcml
