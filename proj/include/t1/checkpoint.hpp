#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "t1/tensor.hpp"

namespace t1 {

// Container layout, all integers little-endian:
//   "T1CP" | u32 version | u64 config_len | config bytes
//   | u64 tensor_count | per tensor: u32 name_len, name, u8 dtype, u32 rank,
//     u64 dims..., payload | u32 crc32 of everything before it
struct Checkpoint {
    std::string config_text;
    std::vector<std::pair<std::string, Tensor>> tensors;  // order is preserved on disk
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

uint32_t crc32(const void* data, size_t n, uint32_t crc = 0);

}  // namespace t1
