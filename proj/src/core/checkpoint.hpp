#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "core/tensor.hpp"

namespace sitcom {

// On-disk layout:
//
//   SITCOM-CHECKPOINT v1\n
//   dtype float64-le\n
//   meta <key> <value>\n          (zero or more; value runs to end of line)
//   array <name> <rank> <d0> ...\n (one per array, in blob order)
//   end\n
//   <raw little-endian float64 data of every array, concatenated>
struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, Tensor>> arrays;

  const Tensor& array(const std::string& name) const;
  const std::string& meta_value(const std::string& key) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& bytes);

}  // namespace sitcom
