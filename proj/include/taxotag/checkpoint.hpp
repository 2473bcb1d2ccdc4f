#ifndef TAXOTAG_CHECKPOINT_HPP
#define TAXOTAG_CHECKPOINT_HPP

#include <string>

#include "taxotag/model.hpp"
#include "taxotag/nn.hpp"

namespace taxotag {

// Binary tensor container, magic "TXK1": u64 count, then per tensor
// u32 name length + name bytes, u32 rank, u64 extents, little-endian f64
// payload. Matrices are written rank 2 (rows, cols).
void save_tensors(const ParameterStore& params, const std::string& path);
void load_tensors(ParameterStore& params, const std::string& path);

// Full model checkpoint: tensors at `path`, everything else (config, vocab,
// taxonomy edges, category embeddings) in a JSON sidecar at `path`.meta.json.
void save_checkpoint(TaggerModel& model, const std::string& path);
TaggerModel load_checkpoint(const std::string& path);

}  // namespace taxotag

#endif  // TAXOTAG_CHECKPOINT_HPP
