#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "dve/encoders.hpp"
#include "dve/errors.hpp"

namespace dve {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

// Binary model snapshot.
// Layout: "DVECKPT1" magic, then little-endian fields
//   u32 version (1), u32 variant, u32 fusion, u32 gcn_layers,
//   u64 num_nodes, u64 feature_dim, u64 hidden_dim, u64 latent_dim,
//   u64 init_seed, u32 n_params,
// followed by each parameter as u64 rows, u64 cols, rows*cols f64 values.
// Parameter order is EncoderWeights::all_params order.
inline constexpr char kCheckpointMagic[8] = {'D', 'V', 'E', 'C', 'K', 'P', 'T', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in, const char* what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ValidationError(std::string("checkpoint: truncated reading ") + what);
  return v;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const EncoderWeights& w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put<std::uint32_t>(out, kCheckpointVersion);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(w.variant));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(w.fusion));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(w.gcn_layers));
  detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(w.num_nodes));
  detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(w.feature_dim));
  detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(w.hidden_dim));
  detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(w.latent_dim));
  detail::put<std::uint64_t>(out, w.init_seed);
  const auto params = w.all_params();
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const Tensor* p : params) {
    detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(p->rows));
    detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(p->cols));
    out.write(reinterpret_cast<const char*>(p->data.data()),
              static_cast<std::streamsize>(p->data.size() * sizeof(double)));
  }
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

inline EncoderWeights load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw ValidationError("checkpoint: bad magic in " + path);
  }
  const auto version = detail::get<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) {
    throw ValidationError("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto variant_raw = detail::get<std::uint32_t>(in, "variant");
  if (variant_raw > static_cast<std::uint32_t>(Variant::mf)) {
    throw ValidationError("checkpoint: bad variant tag");
  }
  const auto fusion_raw = detail::get<std::uint32_t>(in, "fusion");
  if (fusion_raw > static_cast<std::uint32_t>(Fusion::elementwise_product_mlp)) {
    throw ValidationError("checkpoint: bad fusion tag");
  }
  EncoderWeights w;
  w.variant = static_cast<Variant>(variant_raw);
  w.fusion = static_cast<Fusion>(fusion_raw);
  w.gcn_layers = static_cast<int>(detail::get<std::uint32_t>(in, "gcn_layers"));
  w.num_nodes = static_cast<std::int64_t>(detail::get<std::uint64_t>(in, "num_nodes"));
  w.feature_dim = static_cast<std::int64_t>(detail::get<std::uint64_t>(in, "feature_dim"));
  w.hidden_dim = static_cast<std::int64_t>(detail::get<std::uint64_t>(in, "hidden_dim"));
  w.latent_dim = static_cast<std::int64_t>(detail::get<std::uint64_t>(in, "latent_dim"));
  w.init_seed = detail::get<std::uint64_t>(in, "init_seed");
  if (w.gcn_layers < 1 || w.gcn_layers > 4 || w.num_nodes < 1 || w.hidden_dim < 1 ||
      w.latent_dim < 1) {
    throw ValidationError("checkpoint: implausible header dimensions");
  }
  w.allocate();
  auto params = w.all_params();
  const auto n_params = detail::get<std::uint32_t>(in, "param count");
  if (n_params != params.size()) {
    throw ValidationError("checkpoint: expected " + std::to_string(params.size()) +
                          " parameters, file has " + std::to_string(n_params));
  }
  for (Tensor* p : params) {
    const auto rows = detail::get<std::uint64_t>(in, "parameter rows");
    const auto cols = detail::get<std::uint64_t>(in, "parameter cols");
    if (rows != static_cast<std::uint64_t>(p->rows) ||
        cols != static_cast<std::uint64_t>(p->cols)) {
      throw ValidationError("checkpoint: parameter shape mismatch");
    }
    in.read(reinterpret_cast<char*>(p->data.data()),
            static_cast<std::streamsize>(p->data.size() * sizeof(double)));
    if (!in) throw ValidationError("checkpoint: truncated parameter data");
  }
  return w;
}

}  // namespace dve
