#pragma once

#include <cstddef>
#include <vector>

#include "plcrnn/rng.hpp"

namespace plcrnn::train {

/// Splits indices 0..n-1 into consecutive batches of `batch` (the last one
/// may be smaller), after a Fisher-Yates shuffle drawn from `rng` when
/// given. Padding and frame masks are built per batch by targets::collate.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch, Rng* rng = nullptr);

}  // namespace plcrnn::train
