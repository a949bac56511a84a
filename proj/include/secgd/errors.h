//
// Copyright 2026 The SecGD Authors
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
//

#ifndef SECGD_ERRORS_H_
#define SECGD_ERRORS_H_

#include <stdexcept>
#include <string>

namespace secgd {

// Root of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Mismatched or out-of-range parameters.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Malformed bytes on decode.
class FormatError : public Error {
 public:
  using Error::Error;
};

// A documented precondition of the callee does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Input data is unusable, e.g. a non-finite gradient.
class DataError : public Error {
 public:
  using Error::Error;
};

// Solver or experiment instance exceeds the exhaustive-search guard.
class SizeError : public Error {
 public:
  using Error::Error;
};

// The client refused to take part in a round.
class ProtocolAbort : public Error {
 public:
  enum class Reason { kEquivocation, kTimeout, kPolicy, kRetriesExhausted };

  ProtocolAbort(Reason reason, const std::string& what)
      : Error(what), reason_(reason) {}

  Reason reason() const { return reason_; }

 private:
  Reason reason_;
};

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

class ReconstructionFailed : public Error {
 public:
  using Error::Error;
};

}  // namespace secgd

#endif  // SECGD_ERRORS_H_
