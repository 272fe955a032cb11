#pragma once

#include <cstdint>
#include <filesystem>

#include "lom/numkit/mlp.hpp"

// One network per file, little-endian:
//   "LOMC" | u32 version | u32 kind | u32 M | u32 state_dim | u32 action_dim |
//   u32 activation | u32 layer count L | u32 widths[L] | u64 param count |
//   f64 params (layer order: W_0, b_0, W_1, b_1, ...)
namespace lom::checkpoint {

inline constexpr std::uint32_t kVersion = 1;

enum class NetKind : std::uint32_t { mdn = 1, q = 2, q_target = 3, hyperq = 4, policy = 5 };

const char* to_string(NetKind kind);

struct Header {
  NetKind kind = NetKind::policy;
  std::uint32_t num_modes = 0;
  std::uint32_t state_dim = 0;
  std::uint32_t action_dim = 0;
};

struct Loaded {
  Header header;
  numkit::MlpNet net;
};

// Writes to a sibling temp file and renames it into place, so an interrupted
// write never replaces a good checkpoint.
void save(const std::filesystem::path& path, const Header& header, const numkit::MlpNet& net);
Loaded load(const std::filesystem::path& path);

}  // namespace lom::checkpoint
