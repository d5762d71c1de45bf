/* Copyright 2026 The rtvc Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <stdexcept>

namespace rtvc {

// Tensor geometry disagreement (channel counts, divisibility, kernel shape).
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent external data: files, containers, bitstreams.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TruncatedStream : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace rtvc
