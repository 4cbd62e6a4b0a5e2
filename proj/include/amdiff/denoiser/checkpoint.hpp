#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "amdiff/core/error.hpp"
#include "amdiff/denoiser/params.hpp"

namespace amdiff::denoiser {

inline constexpr char kCheckpointMagic[8] = {'A', 'M', 'D', 'I', 'F', 'F', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline nlohmann::json config_to_json(const DenoiserConfig& c) {
  return {{"hidden", c.hidden}, {"layers", c.layers},   {"k", c.k},
          {"n_types", c.n_types}, {"vocab", c.vocab}, {"cond_dim", c.cond_dim},
          {"rbf", c.rbf},       {"time_dim", c.time_dim}, {"rbf_cutoff", c.rbf_cutoff},
          {"time_steps", c.time_steps}};
}

inline DenoiserConfig config_from_json(const nlohmann::json& j) {
  DenoiserConfig c;
  try {
    c.hidden = j.at("hidden").get<std::size_t>();
    c.layers = j.at("layers").get<std::size_t>();
    c.k = j.at("k").get<std::size_t>();
    c.n_types = j.at("n_types").get<std::size_t>();
    c.vocab = j.at("vocab").get<std::size_t>();
    c.cond_dim = j.at("cond_dim").get<std::size_t>();
    c.rbf = j.at("rbf").get<std::size_t>();
    c.time_dim = j.at("time_dim").get<std::size_t>();
    c.rbf_cutoff = j.at("rbf_cutoff").get<double>();
    c.time_steps = j.at("time_steps").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad denoiser config: ") + e.what());
  }
  c.validate();
  return c;
}

struct Checkpoint {
  DenoiserParams params;
  nlohmann::json metadata;  // caller-defined; the model shape is stored under "model"
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

struct Reader {
  std::string_view data;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (data.size() - pos < n) throw ParseError("checkpoint truncated");
  }
  std::uint64_t uint(int bytes) {
    need(static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int b = 0; b < bytes; ++b)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[pos + static_cast<std::size_t>(b)])) << (8 * b);
    pos += static_cast<std::size_t>(bytes);
    return v;
  }
};

}  // namespace detail

// Layout: magic, version, H, L, V, W, T (u32 each), metadata length (u32)
// and JSON text, parameter count (u64), then every parameter as a
// little-endian float32 in block order.
inline std::string encode_checkpoint(const DenoiserParams& params, nlohmann::json metadata = nlohmann::json::object()) {
  const auto& c = params.config();
  metadata["model"] = config_to_json(c);
  metadata["blocks"] = nlohmann::json::array();
  for (const auto& b : params.blocks()) metadata["blocks"].push_back({b.name, b.rows, b.cols});
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put_u32(out, kCheckpointVersion);
  for (std::size_t v : {c.hidden, c.layers, c.n_types, c.vocab, c.time_steps}) detail::put_u32(out, static_cast<std::uint32_t>(v));
  const std::string meta = metadata.dump();
  detail::put_u32(out, static_cast<std::uint32_t>(meta.size()));
  out += meta;
  detail::put_u64(out, params.size());
  for (double v : params.values()) {
    const float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof(bits));
    detail::put_u32(out, bits);
  }
  return out;
}

inline Checkpoint decode_checkpoint(std::string_view bytes) {
  detail::Reader r{bytes};
  r.need(sizeof(kCheckpointMagic));
  if (std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
    throw ParseError("not a checkpoint (bad magic)");
  r.pos = sizeof(kCheckpointMagic);
  const auto version = r.uint(4);
  if (version != kCheckpointVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(version));
  std::uint64_t header[5];
  for (auto& h : header) h = r.uint(4);
  const auto meta_len = static_cast<std::size_t>(r.uint(4));
  r.need(meta_len);
  Checkpoint ck;
  try {
    ck.metadata = nlohmann::json::parse(bytes.substr(r.pos, meta_len));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint metadata: ") + e.what());
  }
  r.pos += meta_len;
  if (!ck.metadata.contains("model")) throw ParseError("checkpoint metadata lacks the model shape");
  const auto cfg = config_from_json(ck.metadata["model"]);
  const std::uint64_t want[5] = {cfg.hidden, cfg.layers, cfg.n_types, cfg.vocab, cfg.time_steps};
  for (int i = 0; i < 5; ++i)
    if (header[i] != want[i]) throw ParseError("checkpoint header disagrees with its metadata");
  ck.params = DenoiserParams(cfg);
  const auto count = r.uint(8);
  if (count != ck.params.size()) throw ParseError("checkpoint parameter count mismatch");
  r.need(4 * count);
  for (auto& v : ck.params.values()) {
    const auto bits = static_cast<std::uint32_t>(r.uint(4));
    float f;
    std::memcpy(&f, &bits, sizeof(f));
    v = static_cast<double>(f);
  }
  if (r.pos != bytes.size()) throw ParseError("trailing bytes after checkpoint");
  if (!ck.params.all_finite()) throw ParseError("checkpoint holds non-finite parameters");
  return ck;
}

}  // namespace amdiff::denoiser
