#pragma once

#include <stdexcept>
#include <string>

namespace pavetex {

// Base type for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConstantMapError : Error {
    using Error::Error;
};
struct ParseError : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};
struct RowOutOfRangeError : Error {
    using Error::Error;
};
struct InvalidWindowError : Error {
    using Error::Error;
};
struct ShapeMismatchError : Error {
    using Error::Error;
};
struct DegenerateInputError : Error {
    using Error::Error;
};
struct NoConsensusError : Error {
    using Error::Error;
};
struct TooFewSamplesError : Error {
    using Error::Error;
};
struct ThresholdOutOfRangeError : Error {
    using Error::Error;
};
struct EmptySetError : Error {
    using Error::Error;
};
struct EmptyParticleSetError : Error {
    using Error::Error;
};
struct TooFewParticlesError : Error {
    using Error::Error;
};
struct ZeroVarianceError : Error {
    using Error::Error;
};
struct StratumTooSmallError : Error {
    using Error::Error;
};
struct RankDeficientError : Error {
    using Error::Error;
};
struct InvalidHyperparameterError : Error {
    using Error::Error;
};
struct ConstantLabelsError : Error {
    using Error::Error;
};
struct PlacementFailureError : Error {
    using Error::Error;
};
struct VersionMismatchError : Error {
    using Error::Error;
};
struct FeatureMismatchError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace pavetex
