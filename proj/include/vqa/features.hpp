#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vqa/common.hpp"
#include "vqa/matrix.hpp"

namespace vqa {

inline constexpr const char* kHflipSuffix = "__hflip";

// Per-clip appearance (N × D_a) and motion (N × D_m) feature matrices.
struct ClipFeatures {
  std::string clip_id;
  Matrix<float> appearance;
  Matrix<float> motion;

  int frames() const { return appearance.rows(); }
};

// Same frame count on both matrices, all entries finite, N >= 1.
void validate_features(const ClipFeatures& cf);

// Binary `.feat` container, little-endian:
//   magic "VQFT", u32 version, u32 N, u32 D_a, u32 D_m,
//   N*D_a f32 appearance row-major, N*D_m f32 motion row-major.
void save_features(const ClipFeatures& cf, const std::filesystem::path& path);
ClipFeatures load_features(const std::filesystem::path& path, std::string clip_id);

// Row i = [appearance_i ; motion_i], shape N × (D_a + D_m).
Matrix<float> concat_features(const ClipFeatures& cf);

// Uniform temporal subsampling down to n_max frames (no-op when N <= n_max).
ClipFeatures subsample_frames(const ClipFeatures& cf, int n_max);

// Stand-in for features of the horizontally flipped clip: a fixed seeded
// permutation of the feature columns. Keeps flipped clips distinct and
// deterministic without rerunning any backbone; not visually faithful.
ClipFeatures flip_columns_surrogate(const ClipFeatures& cf, uint64_t seed);

// Deterministic pseudo-random features with entries in [-1, 1], keyed by
// (clip_id, seed).
ClipFeatures synth_features(const std::string& clip_id, int frames, int d_a, int d_m,
                            uint64_t seed);

// Directory of `<clip_id>.feat` files, or a purely in-memory map for tests
// and synthetic runs. Loaded clips are cached; all entries share (D_a, D_m).
class FeatureStore {
 public:
  static FeatureStore open_dir(const std::filesystem::path& root, uint64_t surrogate_seed = 0);
  static FeatureStore in_memory(uint64_t surrogate_seed = 0);

  bool contains(const std::string& clip_id) const;
  const ClipFeatures& load(const std::string& clip_id) const;

  // Registers (and persists, when directory-backed) a new clip.
  void add(const ClipFeatures& cf);

  // Features for the flipped clip: the precomputed `<clip_id>__hflip` entry
  // when the store has one, otherwise the column-permutation surrogate.
  ClipFeatures flipped(const std::string& clip_id) const;

  int d_a() const { return d_a_; }
  int d_m() const { return d_m_; }
  int feature_dim() const { return d_a_ + d_m_; }
  uint64_t surrogate_seed() const { return surrogate_seed_; }
  std::vector<std::string> clip_ids() const;
  const std::filesystem::path& root() const { return root_; }
  bool disk_backed() const { return disk_; }

 private:
  FeatureStore() = default;
  void check_dims(const ClipFeatures& cf) const;

  std::filesystem::path root_;
  bool disk_ = false;
  mutable int d_a_ = -1, d_m_ = -1;  // fixed by the first entry seen
  std::map<std::string, std::filesystem::path> index_;
  mutable std::map<std::string, ClipFeatures> cache_;
  uint64_t surrogate_seed_ = 0;
};

}  // namespace vqa
