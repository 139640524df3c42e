#include "vqa/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace vqa {

namespace {

constexpr char kMagic[4] = {'V', 'Q', 'C', 'P'};
constexpr uint32_t kVersion = 1;
constexpr uint8_t kDtypeF32 = 0;

void put_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {(unsigned char)(v), (unsigned char)(v >> 8), (unsigned char)(v >> 16),
                        (unsigned char)(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                     const ModelParams<float>& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write checkpoint: " + path.string());
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  out.put(char(kDtypeF32));
  put_u32(out, uint32_t(cfg.embed_dim));
  put_u32(out, uint32_t(cfg.video_dim));
  put_u32(out, uint32_t(cfg.hidden));
  put_u32(out, uint32_t(cfg.attn_hidden));
  put_u32(out, uint32_t(cfg.n_max));
  auto tensors = params.tensors();
  put_u32(out, uint32_t(tensors.size()));
  for (const auto& [name, m] : tensors) {
    put_u32(out, uint32_t(name.size()));
    out.write(name.data(), std::streamsize(name.size()));
    put_u32(out, uint32_t(m->rows()));
    put_u32(out, uint32_t(m->cols()));
    for (size_t i = 0; i < m->size(); ++i) put_u32(out, std::bit_cast<uint32_t>(m->data()[i]));
  }
  if (!out) throw io_error("write failed: " + path.string());
}

std::pair<ModelConfig, ModelParams<float>> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open checkpoint: " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw io_error("not a checkpoint file: " + path.string());
  const uint32_t version = get_u32(in);
  if (version != kVersion)
    throw io_error("unsupported checkpoint version " + std::to_string(version));
  const int dtype = in.get();
  if (dtype != kDtypeF32) throw io_error("unsupported checkpoint dtype");
  ModelConfig cfg;
  cfg.embed_dim = int(get_u32(in));
  cfg.video_dim = int(get_u32(in));
  cfg.hidden = int(get_u32(in));
  cfg.attn_hidden = int(get_u32(in));
  cfg.n_max = int(get_u32(in));
  validate_config(cfg);
  ModelParams<float> params = init_params<float>(cfg, 0);  // shapes only; overwritten below
  auto tensors = params.tensors();
  const uint32_t count = get_u32(in);
  if (count != tensors.size())
    throw io_error("checkpoint tensor count mismatch: " + std::to_string(count));
  for (auto& [name, m] : tensors) {
    const uint32_t name_len = get_u32(in);
    std::string fname(name_len, '\0');
    in.read(fname.data(), name_len);
    if (fname != name) throw io_error("checkpoint tensor order mismatch at \"" + fname + "\"");
    const uint32_t rows = get_u32(in);
    const uint32_t cols = get_u32(in);
    if (int(rows) != m->rows() || int(cols) != m->cols())
      throw io_error("checkpoint tensor \"" + name + "\" has unexpected shape");
    for (size_t i = 0; i < m->size(); ++i) m->data()[i] = std::bit_cast<float>(get_u32(in));
  }
  if (!in) throw io_error("truncated checkpoint: " + path.string());
  return {cfg, std::move(params)};
}

}  // namespace vqa
