// Copyright 2026 The dlslab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dlslab {

enum class Errc {
  InvalidParameters,
  UnknownTechnique,
  ProfileMissing,
  MidFlightChange,
  KernelPanic,
  EmptyInput,
  ZeroMean,
  SinkUnwritable,
  ConfigError,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidParameters: return "InvalidParameters";
    case Errc::UnknownTechnique: return "UnknownTechnique";
    case Errc::ProfileMissing: return "ProfileMissing";
    case Errc::MidFlightChange: return "MidFlightChange";
    case Errc::KernelPanic: return "KernelPanic";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::ZeroMean: return "ZeroMean";
    case Errc::SinkUnwritable: return "SinkUnwritable";
    case Errc::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// All library failures are reported as `dlslab::Error`; `code()` tells them apart.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace dlslab
