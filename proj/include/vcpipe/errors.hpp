// Copyright (c) 2026 vcpipe authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace vcpipe {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unreadable / unwritable / malformed files.
struct IoError : Error {
  using Error::Error;
};

// Zero-length audio or empty feature streams.
struct EmptyInputError : Error {
  using Error::Error;
};

// Violated preconditions: shape mismatches, bad dimensions, invalid ranges.
struct ContractError : Error {
  using Error::Error;
};

// Missing or misconfigured external adapters and run-config problems.
struct ConfigError : Error {
  using Error::Error;
};

// Aborted training (non-finite losses and similar).
struct TrainError : Error {
  using Error::Error;
};

}  // namespace vcpipe
