#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace orcha {

enum class Errc {
    // recipe_graph
    ParseError,
    UnknownDevice,
    DanglingReference,
    CycleError,
    InvalidRecipe,
    // annotation_parser
    SyntaxError,
    DuplicateArgument,
    UnknownSourceKind,
    UnterminatedBlock,
    UnknownVariable,
    ExpressionError,
    // planner
    MissingRoutineSpec,
    DeviceVariantUnavailable,
    ConflictingScratchExtents,
    ConflictingExternalKind,
    UnsupportedTopology,
    // macroprocessor
    Undefined,
    Ambiguous,
    SelfReference,
    ArityMismatch,
    MacroSyntax,
    InheritanceError,
    RecursionLimit,
    // codegen
    MissingTemplate,
    UnboundSlot,
    TemplateError,
    // packet_layout
    ZeroVariables,
    BlockOutOfRange,
    Unsupported,
    // runtime / kernels
    InvalidConfig,
    MissingKernel,
    KernelPanic,
    Deadlock,
    HaloTooThin,
    NonPositiveState,
    NewtonNoConvergence,
    IoError,
};

std::string_view to_string(Errc code);

/// True for failures that happen while executing work (CLI exit code 2), as
/// opposed to rejected inputs (exit code 1).
bool is_runtime_failure(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace orcha
