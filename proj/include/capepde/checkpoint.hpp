#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "capepde/tensor.hpp"

namespace capepde {

/// NNCK1 container, little-endian: magic "NNCK1\0" (6 bytes); u16 version=1;
/// u32 n_tensors; per tensor: u32 name_len, UTF-8 name, u32 rank, u64
/// dims[rank], f64 data[numel]; then u32 json_len + UTF-8 JSON config block.
struct Checkpoint {
    std::vector<std::pair<std::string, Tensor>> tensors;
    nlohmann::json meta;

    Tensor tensor(const std::string& name) const;
    bool has(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace capepde
