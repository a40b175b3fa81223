#pragma once

#include <string>
#include <utility>
#include <vector>

#include "xflowdg/tensor.hpp"

namespace xflowdg {

/// Ordered named-tensor table, the unit of checkpoint I/O ("XFC1" format:
/// magic, u32 count, then per entry u16 name-length, name, u32 rank, dims,
/// little-endian f64 payload). Round-trips are bit-exact; arbitrary 64-bit
/// payloads (e.g. rng words) survive unchanged.
using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

void save_checkpoint(const std::string& path, const NamedTensors& entries);
NamedTensors load_checkpoint(const std::string& path);

/// First entry with the given name; throws StateError when absent.
const Tensor& find_entry(const NamedTensors& entries, const std::string& name);
bool has_entry(const NamedTensors& entries, const std::string& name);

}  // namespace xflowdg
