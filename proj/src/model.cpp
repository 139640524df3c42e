#include "vqa/model.hpp"

namespace vqa {

void validate_config(const ModelConfig& cfg) {
  if (cfg.embed_dim < 1 || cfg.video_dim < 1 || cfg.hidden < 1 || cfg.attn_hidden < 1 ||
      cfg.n_max < 1)
    throw validation_error("model config: all dimensions must be >= 1");
  if (cfg.hidden % 2 != 0)
    throw validation_error("model config: hidden width must be even (two stacked layers)");
}

}  // namespace vqa
