#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "devinr/errors.hpp"
#include "devinr/latent.hpp"
#include "devinr/network.hpp"

namespace devinr {

// --- INRCKPT1 checkpoint format -------------------------------------------
//
//   magic          8 bytes  "INRCKPT1"
//   d              u8
//   latent_dim     u32      little-endian (all integers below likewise)
//   hidden_dim     u32
//   layer_count    u32
//   omega0, s0     f32
//   parameters     for i = 1..N: u_weights row-major, u_bias, v_weights,
//                  v_bias, each as raw f32
//   keying_mode    u8       0 = per scan, 1 = per subject
//   entry_count    u32
//   entries        per entry: u32 key length, UTF-8 key bytes, latent_dim f32
//                  (sorted by key)
//   global_latent  latent_dim f32
//
// Round trips are bit-exact.

namespace detail {
inline constexpr char kCkptMagic[8] = {'I', 'N', 'R', 'C', 'K', 'P', 'T', '1'};

inline void ck_write(std::ofstream& f, const void* p, std::size_t n) {
  f.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void ck_read(std::ifstream& f, void* p, std::size_t n, const char* what) {
  f.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(f.gcount()) != n)
    throw DataError(std::string("checkpoint: truncated while reading ") + what);
}
}  // namespace detail

inline void save_checkpoint(const InrNetwork& net, const LatentTable& latents,
                            const std::string& path) {
  latents.validate();
  if (latents.latent_dim != net.config.latent_dim)
    throw DataError("checkpoint: latent table dimension does not match network");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open for writing: " + path);
  detail::ck_write(f, detail::kCkptMagic, sizeof(detail::kCkptMagic));
  const auto& cfg = net.config;
  const std::uint8_t d = static_cast<std::uint8_t>(cfg.spatial_dims);
  const std::uint32_t lam = cfg.latent_dim, hid = cfg.hidden_dim,
                      nl = cfg.layer_count;
  detail::ck_write(f, &d, 1);
  detail::ck_write(f, &lam, 4);
  detail::ck_write(f, &hid, 4);
  detail::ck_write(f, &nl, 4);
  detail::ck_write(f, &cfg.omega0, 4);
  detail::ck_write(f, &cfg.s0, 4);
  for (const auto& L : net.layers) {
    detail::ck_write(f, L.u_w.data(), 4 * L.u_w.size());
    detail::ck_write(f, L.u_b.data(), 4 * L.u_b.size());
    detail::ck_write(f, L.v_w.data(), 4 * L.v_w.size());
    detail::ck_write(f, L.v_b.data(), 4 * L.v_b.size());
  }
  const std::uint8_t mode = latents.per_subject ? 1 : 0;
  const auto count = static_cast<std::uint32_t>(latents.entries.size());
  detail::ck_write(f, &mode, 1);
  detail::ck_write(f, &count, 4);
  for (const auto& [key, vec] : latents.entries) {
    const auto len = static_cast<std::uint32_t>(key.size());
    detail::ck_write(f, &len, 4);
    detail::ck_write(f, key.data(), key.size());
    detail::ck_write(f, vec.data(), 4 * vec.size());
  }
  detail::ck_write(f, latents.global.data(), 4 * latents.global.size());
  if (!f) throw DataError("write failed: " + path);
}

struct Checkpoint {
  InrNetwork net;
  LatentTable latents;
};

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint: " + path);
  char magic[8];
  detail::ck_read(f, magic, sizeof(magic), "magic");
  if (std::memcmp(magic, detail::kCkptMagic, 7) != 0)
    throw DataError("checkpoint: bad magic in " + path);
  if (magic[7] != detail::kCkptMagic[7])
    throw DataError("checkpoint: unsupported version in " + path);
  Checkpoint ck;
  NetworkConfig cfg;
  std::uint8_t d = 0;
  std::uint32_t lam = 0, hid = 0, nl = 0;
  detail::ck_read(f, &d, 1, "spatial dims");
  detail::ck_read(f, &lam, 4, "latent dim");
  detail::ck_read(f, &hid, 4, "hidden dim");
  detail::ck_read(f, &nl, 4, "layer count");
  detail::ck_read(f, &cfg.omega0, 4, "omega0");
  detail::ck_read(f, &cfg.s0, 4, "s0");
  cfg.spatial_dims = d;
  cfg.latent_dim = static_cast<int>(lam);
  cfg.hidden_dim = static_cast<int>(hid);
  cfg.layer_count = static_cast<int>(nl);
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint: invalid config: ") + e.what());
  }
  ck.net.config = cfg;
  ck.net.layers.resize(cfg.layer_count);
  for (int i = 0; i < cfg.layer_count; ++i) {
    auto& L = ck.net.layers[i];
    L.resize(cfg.layer_in(i), cfg.layer_out(i));
    detail::ck_read(f, L.u_w.data(), 4 * L.u_w.size(), "u weights");
    detail::ck_read(f, L.u_b.data(), 4 * L.u_b.size(), "u bias");
    detail::ck_read(f, L.v_w.data(), 4 * L.v_w.size(), "v weights");
    detail::ck_read(f, L.v_b.data(), 4 * L.v_b.size(), "v bias");
  }
  std::uint8_t mode = 0;
  std::uint32_t count = 0;
  detail::ck_read(f, &mode, 1, "latent keying mode");
  detail::ck_read(f, &count, 4, "latent entry count");
  ck.latents = LatentTable(cfg.latent_dim, mode == 1);
  for (std::uint32_t e = 0; e < count; ++e) {
    std::uint32_t len = 0;
    detail::ck_read(f, &len, 4, "latent key length");
    std::string key(len, '\0');
    detail::ck_read(f, key.data(), len, "latent key");
    std::vector<float> vec(cfg.latent_dim);
    detail::ck_read(f, vec.data(), 4 * vec.size(), "latent vector");
    ck.latents.entries.emplace(std::move(key), std::move(vec));
  }
  detail::ck_read(f, ck.latents.global.data(), 4 * ck.latents.global.size(),
                  "global latent");
  return ck;
}

}  // namespace devinr
