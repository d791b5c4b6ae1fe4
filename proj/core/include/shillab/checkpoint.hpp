#pragma once

#include <string>
#include <utility>
#include <vector>

#include "shillab/tensor.hpp"

namespace shillab {

// Plain text container for named tensors:
//   line 1: "shillab-checkpoint 1"
//   line 2: entry count
//   then per entry: "<name> <rows> <cols>" followed by one line of
//   space-separated values in row-major order, printed with %.17g so a
//   save/load round trip is bit-exact.
void save_checkpoint(
    const std::string& path,
    const std::vector<std::pair<std::string, const num::Tensor*>>& entries);

std::vector<std::pair<std::string, num::Tensor>> load_checkpoint(
    const std::string& path);

// Lookup helper; throws LookupError when the name is absent.
const num::Tensor& checkpoint_get(
    const std::vector<std::pair<std::string, num::Tensor>>& entries,
    const std::string& name);

}  // namespace shillab
