// Copyright 2026 The intrinsic-flow Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef IFLOW_ERRORS_H_
#define IFLOW_ERRORS_H_

#include <stdexcept>
#include <string>

namespace iflow {

// Shape or dimension mismatch between operands.
class ShapeError : public std::invalid_argument {
 public:
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

// A numerical precondition failed at run time: non-finite values, an
// indefinite matrix where a definite one is required, an iteration that did
// not converge, an infeasible initialization.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace iflow

#endif  // IFLOW_ERRORS_H_
