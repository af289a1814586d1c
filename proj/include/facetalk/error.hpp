// Copyright 2026 FaceTalk Authors
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

#include <stdexcept>
#include <string>

namespace facetalk {

// Error with a stable machine-readable code; the CLI serializes the code and
// message as JSON on stderr.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

#define FACETALK_DEFINE_ERROR(Name)                                  \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& message) : Error(#Name, message) {} \
  }

FACETALK_DEFINE_ERROR(ZeroQuaternion);
FACETALK_DEFINE_ERROR(NotNormalized);
FACETALK_DEFINE_ERROR(DegenerateConfiguration);
FACETALK_DEFINE_ERROR(ShapeMismatch);
FACETALK_DEFINE_ERROR(TooShort);
FACETALK_DEFINE_ERROR(BatchMismatch);
FACETALK_DEFINE_ERROR(EmptyCorpus);
FACETALK_DEFINE_ERROR(EmptyText);
FACETALK_DEFINE_ERROR(UnknownToken);
FACETALK_DEFINE_ERROR(BadShape);
FACETALK_DEFINE_ERROR(LengthMismatch);
FACETALK_DEFINE_ERROR(MissingPrerequisite);
FACETALK_DEFINE_ERROR(CorpusNotFound);
FACETALK_DEFINE_ERROR(ConfigError);
FACETALK_DEFINE_ERROR(IoError);

#undef FACETALK_DEFINE_ERROR

}  // namespace facetalk
