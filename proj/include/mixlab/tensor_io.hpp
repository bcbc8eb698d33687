#pragma once

// Flat tensor container: <stem>.bin holds raw little-endian float64 data, and
// <stem>.manifest is a text index with one line per tensor:
//
//   # mixlab-tensors v1
//   <name> <rows> <cols> <byte_offset>
//
// Tensors are stored row-major and packed back to back in manifest order. Names
// may not contain whitespace.

#include "mixlab/blocks.hpp"
#include "mixlab/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace mixlab {

struct NamedTensor {
  std::string name;
  Matrix value;
};

std::filesystem::path manifest_path(const std::filesystem::path& stem);
std::filesystem::path data_path(const std::filesystem::path& stem);

/// Throws IoError (with the path) on any filesystem failure.
void save_tensors(const std::filesystem::path& stem, const std::vector<NamedTensor>& tensors);
/// Throws IoError on missing files, malformed manifest lines, or truncated data.
std::vector<NamedTensor> load_tensors(const std::filesystem::path& stem);

/// Looks up `name`; throws IoError naming the tensor when absent.
const Matrix& find_tensor(const std::vector<NamedTensor>& tensors, const std::string& name);

std::vector<NamedTensor> flatten_stack(const std::vector<DcHydraBlock>& blocks);
std::vector<DcHydraBlock> unflatten_stack(const std::vector<NamedTensor>& tensors,
                                          const BlockStackConfig& cfg);

}  // namespace mixlab
