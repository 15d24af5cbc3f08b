/*
 * Copyright 2026 The HELD Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef HELD_SRC_HE_BACKEND_IMPL_HPP_
#define HELD_SRC_HE_BACKEND_IMPL_HPP_

#include <memory>

#include "held/he_backend/backend.hpp"

namespace held::he::internal {

std::unique_ptr<Backend> MakeCkksBackend(const EncryptionParams& params);
std::unique_ptr<Backend> MakeMockBackend(const EncryptionParams& params);

}  // namespace held::he::internal

#endif  // HELD_SRC_HE_BACKEND_IMPL_HPP_
