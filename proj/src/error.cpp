//
// Copyright 2026 The dualtrace Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "dualtrace/error.hpp"

namespace dualtrace {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::DegenerateKernel: return "DegenerateKernel";
    case Errc::BadGeometry: return "BadGeometry";
    case Errc::BadChannels: return "BadChannels";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::ConfigError: return "ConfigError";
    case Errc::InvalidThreshold: return "InvalidThreshold";
    case Errc::InvalidHyper: return "InvalidHyper";
    case Errc::NoCheckpoint: return "NoCheckpoint";
    case Errc::NoPositives: return "NoPositives";
    case Errc::DegenerateLabels: return "DegenerateLabels";
    case Errc::MissingFile: return "MissingFile";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::DuplicatePath: return "DuplicatePath";
    case Errc::BadSplitTag: return "BadSplitTag";
    case Errc::DecodeError: return "DecodeError";
    case Errc::IoError: return "IoError";
    case Errc::DataError: return "DataError";
    case Errc::NumericalDivergence: return "NumericalDivergence";
    case Errc::SchemaVersionMismatch: return "SchemaVersionMismatch";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

void fail(Errc code, const std::string& message) { throw Error(code, message); }

}  // namespace dualtrace
