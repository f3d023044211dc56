#include "idl/errors.hpp"

namespace idl {

const char* to_string(Err e) {
  switch (e) {
    case Err::NonConvergence: return "NonConvergence";
    case Err::NegativeEntry: return "NegativeEntry";
    case Err::IllPosed: return "IllPosed";
    case Err::NotTriangular: return "NotTriangular";
    case Err::DiagonalNotWellPosed: return "DiagonalNotWellPosed";
    case Err::VersionMismatch: return "VersionMismatch";
    case Err::MalformedFile: return "MalformedFile";
    case Err::NonFiniteEntry: return "NonFiniteEntry";
    case Err::DimMismatch: return "DimMismatch";
    case Err::NonzeroFeedthrough: return "NonzeroFeedthrough";
    case Err::ShapeChain: return "ShapeChain";
    case Err::NotAPartition: return "NotAPartition";
    case Err::NonPositiveVariance: return "NonPositiveVariance";
    case Err::NotSimplex: return "NotSimplex";
    case Err::LPInfeasible: return "LPInfeasible";
    case Err::NegativeState: return "NegativeState";
    case Err::NotHomogeneous: return "NotHomogeneous";
    case Err::BlockwiseActivation: return "BlockwiseActivation";
    case Err::ParseError: return "ParseError";
    case Err::MissingLabel: return "MissingLabel";
    case Err::Unsupported: return "Unsupported";
    case Err::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(Err code, const std::string& msg)
    : std::runtime_error(std::string(to_string(code)) + ": " + msg), code_(code) {}

void fail(Err code, const std::string& msg) { throw Error(code, msg); }

}  // namespace idl
