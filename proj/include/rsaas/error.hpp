#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rsaas {

enum class Errc {
    // platform
    InvalidPlatform,
    // sim engine
    PastEvent,
    // hypervisor
    UnknownVcpu,
    InvalidParams,
    // guest
    UnknownTask,
    UnlockNotOwner,
    InvalidTask,
    // 2oo2 protocol
    DuplicateSeq,
    UnknownSeq,
    // design of experiments
    EmptyFactorList,
    EmptyLevels,
    DuplicateLevel,
    IncompatiblePlatform,
    InvalidExperiment,
    // statistics
    TooFewSamples,
    ZeroVariance,
    NonPositiveBase,
    InvalidDf,
    // reporting
    ConfigParse,
    MissingArm,
    BadSampleFile,
};

constexpr std::string_view to_string(Errc e) {
    switch (e) {
        case Errc::InvalidPlatform: return "InvalidPlatform";
        case Errc::PastEvent: return "PastEvent";
        case Errc::UnknownVcpu: return "UnknownVcpu";
        case Errc::InvalidParams: return "InvalidParams";
        case Errc::UnknownTask: return "UnknownTask";
        case Errc::UnlockNotOwner: return "UnlockNotOwner";
        case Errc::InvalidTask: return "InvalidTask";
        case Errc::DuplicateSeq: return "DuplicateSeq";
        case Errc::UnknownSeq: return "UnknownSeq";
        case Errc::EmptyFactorList: return "EmptyFactorList";
        case Errc::EmptyLevels: return "EmptyLevels";
        case Errc::DuplicateLevel: return "DuplicateLevel";
        case Errc::IncompatiblePlatform: return "IncompatiblePlatform";
        case Errc::InvalidExperiment: return "InvalidExperiment";
        case Errc::TooFewSamples: return "TooFewSamples";
        case Errc::ZeroVariance: return "ZeroVariance";
        case Errc::NonPositiveBase: return "NonPositiveBase";
        case Errc::InvalidDf: return "InvalidDf";
        case Errc::ConfigParse: return "ConfigParse";
        case Errc::MissingArm: return "MissingArm";
        case Errc::BadSampleFile: return "BadSampleFile";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace rsaas
