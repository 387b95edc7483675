// Copyright 2026 The hptmt Authors.
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

#pragma once

#include "hptmt/error.hpp"

namespace hptmt::detail {

/// Raised in every rank once some rank of an InProc world has failed.
class WorldAborted : public TransportError {
 public:
  explicit WorldAborted(const std::string& why) : TransportError("world aborted: " + why) {}
};

}  // namespace hptmt::detail
