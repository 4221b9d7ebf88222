#include "orcha/error.hpp"

namespace orcha {

std::string_view to_string(Errc code) {
    switch (code) {
        case Errc::ParseError: return "ParseError";
        case Errc::UnknownDevice: return "UnknownDevice";
        case Errc::DanglingReference: return "DanglingReference";
        case Errc::CycleError: return "CycleError";
        case Errc::InvalidRecipe: return "InvalidRecipe";
        case Errc::SyntaxError: return "SyntaxError";
        case Errc::DuplicateArgument: return "DuplicateArgument";
        case Errc::UnknownSourceKind: return "UnknownSourceKind";
        case Errc::UnterminatedBlock: return "UnterminatedBlock";
        case Errc::UnknownVariable: return "UnknownVariable";
        case Errc::ExpressionError: return "ExpressionError";
        case Errc::MissingRoutineSpec: return "MissingRoutineSpec";
        case Errc::DeviceVariantUnavailable: return "DeviceVariantUnavailable";
        case Errc::ConflictingScratchExtents: return "ConflictingScratchExtents";
        case Errc::ConflictingExternalKind: return "ConflictingExternalKind";
        case Errc::UnsupportedTopology: return "UnsupportedTopology";
        case Errc::Undefined: return "Undefined";
        case Errc::Ambiguous: return "Ambiguous";
        case Errc::SelfReference: return "SelfReference";
        case Errc::ArityMismatch: return "ArityMismatch";
        case Errc::MacroSyntax: return "MacroSyntax";
        case Errc::InheritanceError: return "InheritanceError";
        case Errc::RecursionLimit: return "RecursionLimit";
        case Errc::MissingTemplate: return "MissingTemplate";
        case Errc::UnboundSlot: return "UnboundSlot";
        case Errc::TemplateError: return "TemplateError";
        case Errc::ZeroVariables: return "ZeroVariables";
        case Errc::BlockOutOfRange: return "BlockOutOfRange";
        case Errc::Unsupported: return "Unsupported";
        case Errc::InvalidConfig: return "InvalidConfig";
        case Errc::MissingKernel: return "MissingKernel";
        case Errc::KernelPanic: return "KernelPanic";
        case Errc::Deadlock: return "Deadlock";
        case Errc::HaloTooThin: return "HaloTooThin";
        case Errc::NonPositiveState: return "NonPositiveState";
        case Errc::NewtonNoConvergence: return "NewtonNoConvergence";
        case Errc::IoError: return "IoError";
    }
    return "UnknownError";
}

bool is_runtime_failure(Errc code) {
    switch (code) {
        case Errc::KernelPanic:
        case Errc::Deadlock:
        case Errc::HaloTooThin:
        case Errc::NonPositiveState:
        case Errc::NewtonNoConvergence:
        case Errc::IoError:
        case Errc::RecursionLimit:
            return true;
        default:
            return false;
    }
}

}  // namespace orcha
