#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hdiff/grad/adam.hpp"
#include "hdiff/grad/tape.hpp"

namespace hdiff::grad {

// IDCK layout (little-endian):
//   "IDCK" | u32 version | u32 count | count x tensor
//   | u32 optimizer_flag | [u32 step | count x tensor (m) | count x tensor (v)]
//   | u32 metadata_bytes | metadata
// tensor = u32 name_len | name | u32 rank | u32 dims[rank] | f32 data
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::vector<std::pair<std::string, Mat>> params;
  std::optional<AdamState> optimizer;
  std::string metadata;
};

void write_checkpoint(std::ostream& os, const ParamStore& params, const AdamState* optimizer,
                      const std::string& metadata);
void write_checkpoint(const std::string& path, const ParamStore& params, const AdamState* optimizer,
                      const std::string& metadata);
Checkpoint read_checkpoint(std::istream& is);
Checkpoint read_checkpoint(const std::string& path);

/// Copies checkpoint tensors into `store`. Names and shapes must match exactly.
void load_params(ParamStore& store, const Checkpoint& ckpt);

/// Rounds every parameter to float32 precision, the checkpoint storage type.
void round_to_f32(ParamStore& store);

}  // namespace hdiff::grad
