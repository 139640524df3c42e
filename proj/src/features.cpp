#include "vqa/features.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>
#include <vector>

#include "vqa/rng.hpp"

namespace vqa {

namespace {

constexpr char kMagic[4] = {'V', 'Q', 'F', 'T'};
constexpr uint32_t kVersion = 1;

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

void put_f32(std::ostream& out, float v) { put_u32(out, std::bit_cast<uint32_t>(v)); }

float get_f32(std::istream& in) { return std::bit_cast<float>(get_u32(in)); }

void write_matrix(std::ostream& out, const Matrix<float>& m) {
  for (size_t i = 0; i < m.size(); ++i) put_f32(out, m.data()[i]);
}

void read_matrix(std::istream& in, Matrix<float>& m) {
  for (size_t i = 0; i < m.size(); ++i) m.data()[i] = get_f32(in);
}

}  // namespace

void validate_features(const ClipFeatures& cf) {
  if (cf.appearance.rows() < 1)
    throw validation_error("features \"" + cf.clip_id + "\": frame count must be >= 1");
  if (cf.appearance.rows() != cf.motion.rows())
    throw validation_error("features \"" + cf.clip_id +
                           "\": appearance and motion frame counts differ");
  if (!cf.appearance.all_finite() || !cf.motion.all_finite())
    throw numeric_error("features \"" + cf.clip_id + "\": non-finite entries");
}

void save_features(const ClipFeatures& cf, const std::filesystem::path& path) {
  validate_features(cf);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write features: " + path.string());
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, uint32_t(cf.frames()));
  put_u32(out, uint32_t(cf.appearance.cols()));
  put_u32(out, uint32_t(cf.motion.cols()));
  write_matrix(out, cf.appearance);
  write_matrix(out, cf.motion);
  if (!out) throw io_error("write failed: " + path.string());
}

ClipFeatures load_features(const std::filesystem::path& path, std::string clip_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open features: " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw io_error("not a feature file: " + path.string());
  const uint32_t version = get_u32(in);
  if (version != kVersion)
    throw io_error("unsupported feature file version " + std::to_string(version) + ": " +
                   path.string());
  const uint32_t n = get_u32(in);
  const uint32_t d_a = get_u32(in);
  const uint32_t d_m = get_u32(in);
  if (!in || n < 1) throw io_error("corrupt feature header: " + path.string());
  ClipFeatures cf;
  cf.clip_id = std::move(clip_id);
  cf.appearance = Matrix<float>(int(n), int(d_a));
  cf.motion = Matrix<float>(int(n), int(d_m));
  read_matrix(in, cf.appearance);
  read_matrix(in, cf.motion);
  if (!in) throw io_error("truncated feature file: " + path.string());
  validate_features(cf);
  return cf;
}

Matrix<float> concat_features(const ClipFeatures& cf) {
  const int n = cf.frames();
  const int d_a = cf.appearance.cols();
  const int d_m = cf.motion.cols();
  Matrix<float> out(n, d_a + d_m);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d_a; ++j) out(i, j) = cf.appearance(i, j);
    for (int j = 0; j < d_m; ++j) out(i, d_a + j) = cf.motion(i, j);
  }
  return out;
}

ClipFeatures subsample_frames(const ClipFeatures& cf, int n_max) {
  if (n_max < 1) throw validation_error("subsample_frames: n_max must be >= 1");
  const int n = cf.frames();
  if (n <= n_max) return cf;
  std::vector<int> idx(static_cast<size_t>(n_max));
  if (n_max == 1) {
    idx[0] = 0;
  } else {
    // round(i * (n-1) / (n_max-1)) in exact integer arithmetic
    for (int i = 0; i < n_max; ++i)
      idx[size_t(i)] = int((2LL * i * (n - 1) + (n_max - 1)) / (2LL * (n_max - 1)));
  }
  ClipFeatures out;
  out.clip_id = cf.clip_id;
  out.appearance = Matrix<float>(n_max, cf.appearance.cols());
  out.motion = Matrix<float>(n_max, cf.motion.cols());
  for (int i = 0; i < n_max; ++i) {
    for (int j = 0; j < cf.appearance.cols(); ++j) out.appearance(i, j) = cf.appearance(idx[size_t(i)], j);
    for (int j = 0; j < cf.motion.cols(); ++j) out.motion(i, j) = cf.motion(idx[size_t(i)], j);
  }
  return out;
}

namespace {

std::vector<int> column_permutation(int d, uint64_t seed) {
  std::vector<int> perm(static_cast<size_t>(d));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  rng.shuffle(perm);
  return perm;
}

Matrix<float> permute_columns(const Matrix<float>& m, const std::vector<int>& perm) {
  Matrix<float> out(m.rows(), m.cols());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) out(i, j) = m(i, perm[size_t(j)]);
  return out;
}

}  // namespace

ClipFeatures flip_columns_surrogate(const ClipFeatures& cf, uint64_t seed) {
  ClipFeatures out;
  out.clip_id = cf.clip_id + kHflipSuffix;
  out.appearance =
      permute_columns(cf.appearance, column_permutation(cf.appearance.cols(),
                                                        stream_seed(seed, "hflip.appearance")));
  out.motion = permute_columns(
      cf.motion, column_permutation(cf.motion.cols(), stream_seed(seed, "hflip.motion")));
  return out;
}

ClipFeatures synth_features(const std::string& clip_id, int frames, int d_a, int d_m,
                            uint64_t seed) {
  if (frames < 1) throw validation_error("synth_features: frame count must be >= 1");
  Rng rng(stream_seed(seed, clip_id));
  ClipFeatures cf;
  cf.clip_id = clip_id;
  cf.appearance = Matrix<float>(frames, d_a);
  cf.motion = Matrix<float>(frames, d_m);
  for (size_t i = 0; i < cf.appearance.size(); ++i)
    cf.appearance.data()[i] = float(rng.uniform(-1.0, 1.0));
  for (size_t i = 0; i < cf.motion.size(); ++i)
    cf.motion.data()[i] = float(rng.uniform(-1.0, 1.0));
  return cf;
}

FeatureStore FeatureStore::open_dir(const std::filesystem::path& root, uint64_t surrogate_seed) {
  if (!std::filesystem::is_directory(root))
    throw io_error("feature directory does not exist: " + root.string());
  FeatureStore store;
  store.root_ = root;
  store.disk_ = true;
  store.surrogate_seed_ = surrogate_seed;
  for (const auto& entry : std::filesystem::directory_iterator(root)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".feat") continue;
    store.index_[entry.path().stem().string()] = entry.path();
  }
  return store;
}

FeatureStore FeatureStore::in_memory(uint64_t surrogate_seed) {
  FeatureStore store;
  store.disk_ = false;
  store.surrogate_seed_ = surrogate_seed;
  return store;
}

bool FeatureStore::contains(const std::string& clip_id) const {
  return cache_.count(clip_id) > 0 || index_.count(clip_id) > 0;
}

void FeatureStore::check_dims(const ClipFeatures& cf) const {
  if (d_a_ < 0) {
    d_a_ = cf.appearance.cols();
    d_m_ = cf.motion.cols();
    return;
  }
  if (cf.appearance.cols() != d_a_ || cf.motion.cols() != d_m_)
    throw io_error("features \"" + cf.clip_id + "\": dims (" +
                   std::to_string(cf.appearance.cols()) + "," + std::to_string(cf.motion.cols()) +
                   ") do not match store dims (" + std::to_string(d_a_) + "," +
                   std::to_string(d_m_) + ")");
}

const ClipFeatures& FeatureStore::load(const std::string& clip_id) const {
  auto it = cache_.find(clip_id);
  if (it != cache_.end()) return it->second;
  auto fit = index_.find(clip_id);
  if (fit == index_.end()) throw io_error("missing clip \"" + clip_id + "\" in feature store");
  ClipFeatures cf = load_features(fit->second, clip_id);
  check_dims(cf);
  return cache_.emplace(clip_id, std::move(cf)).first->second;
}

void FeatureStore::add(const ClipFeatures& cf) {
  validate_features(cf);
  check_dims(cf);
  if (disk_) {
    const auto path = root_ / (cf.clip_id + ".feat");
    save_features(cf, path);
    index_[cf.clip_id] = path;
  }
  cache_[cf.clip_id] = cf;
}

ClipFeatures FeatureStore::flipped(const std::string& clip_id) const {
  const std::string flip_id = clip_id + kHflipSuffix;
  if (contains(flip_id)) return load(flip_id);
  return flip_columns_surrogate(load(clip_id), surrogate_seed_);
}

std::vector<std::string> FeatureStore::clip_ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : index_) out.push_back(id);
  for (const auto& [id, _] : cache_) {
    if (!index_.count(id)) out.push_back(id);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace vqa
