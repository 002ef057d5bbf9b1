#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "futurelm/optim.hpp"
#include "futurelm/tape.hpp"

namespace flm {

// Binary checkpoint layout (little-endian):
//   magic "FLMCKPT\0", u32 version,
//   u64 metadata length, metadata as UTF-8 JSON,
//   u64 tensor count, per tensor: u32 name length, name, u32 ndim, u64 dims[ndim],
//     f64 payload (row-major),
//   u8 has optimizer; if set: u64 step, f64 lr, beta1, beta2, eps, u64 moment count,
//     per moment: u32 name length, name, u32 ndim, u64 dims[ndim], f64 first[], f64 second[].
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<std::pair<std::string, Tensor>> tensors;
  std::optional<AdamState> optimizer;

  const Tensor& tensor(std::string_view name) const;
  // Copies matching tensors into `params`; every parameter must be present
  // with the same shape.
  void load_into(ParameterSet& params, std::string_view prefix = {}) const;
  void add_parameters(const ParameterSet& params, std::string_view prefix = {});
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Hex SHA-256 of a byte string / of a file's contents.
std::string sha256_hex(std::string_view bytes);
std::string file_sha256(const std::filesystem::path& path);

}  // namespace flm
