#pragma once

#include <filesystem>

#include "gelgt/tensor.hpp"

namespace gelgt {

// Writes <stem>.json (manifest of {name, shape, offset}) and <stem>.bin
// (little-endian float64 values, concatenated in manifest order; offset is
// in bytes).
void save_checkpoint(const std::filesystem::path& stem, const ParameterSet& params);

// Loads values by name into an existing set. Every parameter in the set must
// appear in the manifest with the same shape.
void load_checkpoint(const std::filesystem::path& stem, ParameterSet& params);

}  // namespace gelgt
