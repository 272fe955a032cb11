#include "lom/checkpoint.hpp"

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "lom/binio.hpp"
#include "lom/errors.hpp"

namespace lom::checkpoint {

namespace {

std::uint32_t activation_code(numkit::Activation a) {
  switch (a) {
    case numkit::Activation::relu: return 0;
    case numkit::Activation::tanh: return 1;
    case numkit::Activation::identity: return 2;
  }
  return 0;
}

numkit::Activation activation_from_code(std::uint32_t c) {
  switch (c) {
    case 0: return numkit::Activation::relu;
    case 1: return numkit::Activation::tanh;
    case 2: return numkit::Activation::identity;
    default: throw FormatError("checkpoint: unknown activation code " + std::to_string(c));
  }
}

}  // namespace

const char* to_string(NetKind kind) {
  switch (kind) {
    case NetKind::mdn: return "mdn";
    case NetKind::q: return "q";
    case NetKind::q_target: return "q_target";
    case NetKind::hyperq: return "hyperq";
    case NetKind::policy: return "policy";
  }
  return "unknown";
}

void save(const std::filesystem::path& path, const Header& header, const numkit::MlpNet& net) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot open '" + tmp.string() + "' for writing");
    os.write("LOMC", 4);
    binio::put_u32(os, kVersion);
    binio::put_u32(os, static_cast<std::uint32_t>(header.kind));
    binio::put_u32(os, header.num_modes);
    binio::put_u32(os, header.state_dim);
    binio::put_u32(os, header.action_dim);
    binio::put_u32(os, activation_code(net.hidden_activation()));
    binio::put_u32(os, static_cast<std::uint32_t>(net.widths().size()));
    for (std::size_t w : net.widths()) binio::put_u32(os, static_cast<std::uint32_t>(w));
    binio::put_u64(os, net.num_params());
    for (double p : net.params()) binio::put_f64(os, p);
    if (!os) throw Error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

Loaded load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint '" + path.string() + "'");
  char magic[4];
  if (!is.read(magic, 4) || std::string_view(magic, 4) != "LOMC")
    throw FormatError("'" + path.string() + "' is not a checkpoint (bad magic)");
  std::uint32_t version = 0;
  if (!binio::get_u32(is, version)) throw FormatError("checkpoint header truncated");
  if (version != kVersion)
    throw UnsupportedVersionError("unsupported checkpoint version " + std::to_string(version));

  Loaded out;
  std::uint32_t kind = 0, act = 0, n_widths = 0;
  if (!binio::get_u32(is, kind) || !binio::get_u32(is, out.header.num_modes) ||
      !binio::get_u32(is, out.header.state_dim) || !binio::get_u32(is, out.header.action_dim) ||
      !binio::get_u32(is, act) || !binio::get_u32(is, n_widths))
    throw FormatError("checkpoint header truncated");
  if (kind < 1 || kind > 5) throw FormatError("checkpoint: unknown network kind " + std::to_string(kind));
  out.header.kind = static_cast<NetKind>(kind);
  if (n_widths < 2 || n_widths > 64) throw FormatError("checkpoint: implausible layer count");
  std::vector<std::size_t> widths(n_widths);
  for (auto& w : widths) {
    std::uint32_t v = 0;
    if (!binio::get_u32(is, v)) throw FormatError("checkpoint header truncated");
    w = v;
  }
  try {
    out.net = numkit::MlpNet(widths, activation_from_code(act));
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  std::uint64_t n_params = 0;
  if (!binio::get_u64(is, n_params) || n_params != out.net.num_params())
    throw FormatError("checkpoint: parameter count does not match layer widths");
  for (double& p : out.net.params()) {
    if (!binio::get_f64(is, p)) throw FormatError("checkpoint: parameters truncated");
    if (!std::isfinite(p)) throw ModelCorruptError("checkpoint '" + path.string() + "' holds a non-finite parameter");
  }
  if (is.peek() != std::char_traits<char>::eof())
    throw FormatError("checkpoint '" + path.string() + "' has trailing bytes");
  return out;
}

}  // namespace lom::checkpoint
