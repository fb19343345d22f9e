#pragma once

// Binary network checkpoints. Byte layout (little-endian throughout, floats
// IEEE-754 binary64):
//
//   magic "VNCK" (4 bytes) | format version u32 | layer count u32
//   per layer:
//     d u32 | m u32 (0 = no interface dictionary) | K u32
//     lambda f64 | beta_td f64
//     k_top u32 (0 = unset) | activation u8 (0 identity, 1 relu)
//     has_eta u8 [| eta f64] | has_eta_bottom u8 [| eta_bottom f64]
//     S payload: d*K f64, row-major
//     U payload: m*K f64, row-major (present iff m > 0)
//   has_optimizer u8
//   per layer, iff has_optimizer:
//     step u64
//     m_s, v_s payloads (d*K f64 each, row-major)
//     m_u, v_u payloads (m*K f64 each, row-major, present iff m > 0)
//
// The optimizer section stores moments and step count only; the dead-atom
// usage window and re-init stream are not persisted.

#include "vn/inference.hpp"
#include "vn/learning.hpp"

#include <cstring>
#include <fstream>

namespace vn::io {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[4] = {'V', 'N', 'C', 'K'};

namespace detail {

inline void put_bytes(std::string& out, const void* p, std::size_t n) {
  out.append(static_cast<const char*>(p), n);
}

inline void put_u32(std::string& out, std::uint32_t v) { put_bytes(out, &v, 4); }
inline void put_u64(std::string& out, std::uint64_t v) { put_bytes(out, &v, 8); }
inline void put_u8(std::string& out, std::uint8_t v) { put_bytes(out, &v, 1); }
inline void put_f64(std::string& out, double v) { put_bytes(out, &v, 8); }

inline void put_matrix(std::string& out, const Mat& m) {
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) put_f64(out, m(r, c));
}

struct Reader {
  const std::string& buf;
  std::size_t at = 0;

  void take(void* p, std::size_t n, const char* what) {
    require(at + n <= buf.size(), "checkpoint: truncated while reading ", what, " at offset ",
            at, " (file has ", buf.size(), " bytes)");
    std::memcpy(p, buf.data() + at, n);
    at += n;
  }

  std::uint32_t u32(const char* what) {
    std::uint32_t v;
    take(&v, 4, what);
    return v;
  }
  std::uint64_t u64(const char* what) {
    std::uint64_t v;
    take(&v, 8, what);
    return v;
  }
  std::uint8_t u8(const char* what) {
    std::uint8_t v;
    take(&v, 1, what);
    return v;
  }
  double f64(const char* what) {
    double v;
    take(&v, 8, what);
    return v;
  }
  Mat matrix(Index rows, Index cols, const char* what) {
    Mat m(rows, cols);
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) m(r, c) = f64(what);
    return m;
  }
};

}  // namespace detail

inline std::string encode_checkpoint(const NetworkParams& net,
                                     const std::vector<OptimizerState>* opt = nullptr) {
  net.validate();
  if (opt)
    require(static_cast<Index>(opt->size()) == net.depth(),
            "checkpoint: optimizer has ", opt->size(), " layer states, network has ",
            net.depth());

  std::string out;
  detail::put_bytes(out, kCheckpointMagic, 4);
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(net.depth()));

  for (const auto& p : net.layers) {
    detail::put_u32(out, static_cast<std::uint32_t>(p.dims.d));
    detail::put_u32(out, static_cast<std::uint32_t>(p.U ? p.dims.m : 0));
    detail::put_u32(out, static_cast<std::uint32_t>(p.dims.K));
    detail::put_f64(out, p.lambda);
    detail::put_f64(out, p.beta_td);
    detail::put_u32(out, static_cast<std::uint32_t>(p.k_top.value_or(0)));
    detail::put_u8(out, p.activation == Activation::Relu ? 1 : 0);
    detail::put_u8(out, p.eta.has_value() ? 1 : 0);
    if (p.eta) detail::put_f64(out, *p.eta);
    detail::put_u8(out, p.eta_bottom.has_value() ? 1 : 0);
    if (p.eta_bottom) detail::put_f64(out, *p.eta_bottom);
    detail::put_matrix(out, p.S);
    if (p.U) detail::put_matrix(out, *p.U);
  }

  detail::put_u8(out, opt ? 1 : 0);
  if (opt)
    for (const auto& st : *opt) {
      detail::put_u64(out, static_cast<std::uint64_t>(st.step));
      detail::put_matrix(out, st.m_s);
      detail::put_matrix(out, st.v_s);
      if (st.m_u) detail::put_matrix(out, *st.m_u);
      if (st.v_u) detail::put_matrix(out, *st.v_u);
    }
  return out;
}

struct Checkpoint {
  NetworkParams net;
  std::optional<std::vector<OptimizerState>> opt;
};

inline Checkpoint decode_checkpoint(const std::string& buf) {
  detail::Reader r{buf};
  char magic[4];
  r.take(magic, 4, "magic");
  require(std::memcmp(magic, kCheckpointMagic, 4) == 0,
          "checkpoint: bad magic at offset 0; expected \"VNCK\"");
  const std::uint32_t version = r.u32("format version");
  require(version == kCheckpointVersion, "checkpoint: format version ", version,
          " is not supported (this build reads version ", kCheckpointVersion, ")");

  Checkpoint ck;
  const std::uint32_t n_layers = r.u32("layer count");
  require(n_layers >= 1 && n_layers <= 1024, "checkpoint: implausible layer count ", n_layers);

  for (std::uint32_t l = 0; l < n_layers; ++l) {
    LayerParams p;
    const auto d = r.u32("layer d");
    const auto m = r.u32("layer m");
    const auto K = r.u32("layer K");
    p.dims = {static_cast<Index>(d), static_cast<Index>(m), static_cast<Index>(K)};
    p.lambda = r.f64("lambda");
    p.beta_td = r.f64("beta_td");
    const auto k_top = r.u32("k_top");
    if (k_top > 0) p.k_top = static_cast<Index>(k_top);
    const auto act = r.u8("activation");
    require(act <= 1, "checkpoint: unknown activation tag ", static_cast<int>(act));
    p.activation = act == 1 ? Activation::Relu : Activation::Identity;
    if (r.u8("eta flag")) p.eta = r.f64("eta");
    if (r.u8("eta_bottom flag")) p.eta_bottom = r.f64("eta_bottom");
    p.S = r.matrix(p.dims.d, p.dims.K, "S payload");
    if (m > 0) p.U = r.matrix(p.dims.m, p.dims.K, "U payload");
    ck.net.layers.push_back(std::move(p));
  }

  if (r.u8("optimizer flag")) {
    ck.opt.emplace();
    for (std::uint32_t l = 0; l < n_layers; ++l) {
      const auto& p = ck.net.layers[l];
      OptimizerState st;
      st.step = static_cast<std::int64_t>(r.u64("optimizer step"));
      st.m_s = r.matrix(p.dims.d, p.dims.K, "m_s payload");
      st.v_s = r.matrix(p.dims.d, p.dims.K, "v_s payload");
      if (p.U) {
        st.m_u = r.matrix(p.dims.m, p.dims.K, "m_u payload");
        st.v_u = r.matrix(p.dims.m, p.dims.K, "v_u payload");
      }
      ck.opt->push_back(std::move(st));
    }
  }
  require(r.at == buf.size(), "checkpoint: ", buf.size() - r.at,
          " trailing bytes after offset ", r.at);
  ck.net.validate();
  return ck;
}

inline void save_checkpoint(const std::string& path, const NetworkParams& net,
                            const std::vector<OptimizerState>* opt = nullptr) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require(f.good(), "checkpoint: cannot open ", path, " for writing");
  const std::string bytes = encode_checkpoint(net, opt);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(f.good(), "checkpoint: short write to ", path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), "checkpoint: cannot open ", path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(buf);
}

}  // namespace vn::io
