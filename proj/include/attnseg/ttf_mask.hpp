/**
 * Copyright 2026 The attnseg Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <cstddef>

#include "attnseg/model.hpp"

namespace attnseg {

/// Per class: 0.5 * (origin + hflip(flipped)). `flipped` holds scores computed
/// on the mirrored image. Throws when class lists or plane shapes differ.
ScoreStack ttf_merge(const ScoreStack& origin, const ScoreStack& flipped);

/// Resize scores to (rows, cols), then label each pixel with the 1-based index
/// of its best class, or 0 when that best score is below `alpha`. Ties go to
/// the lowest class index.
LabelMask labelize(const ScoreStack& scores, double alpha, std::size_t rows,
                   std::size_t cols);

}  // namespace attnseg
