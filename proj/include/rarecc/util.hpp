#ifndef RARECC_UTIL_HPP
#define RARECC_UTIL_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace rarecc {

// ---------------------------------------------------------------------------
// Counter-based randomness.
//
// All sampling in the project goes through these mixers so that sample i of a
// stream is reproducible independently of how many samples are drawn, which
// thread draws it, or the platform's <random> implementation.
// ---------------------------------------------------------------------------

uint64_t splitmix64(uint64_t x);

// Derives an independent substream seed from (seed, stream tag).
uint64_t derive_seed(uint64_t seed, uint64_t stream);

// Stateless counter RNG: n-th draw of the stream identified by `state0`.
class CounterRng {
 public:
  explicit CounterRng(uint64_t state0) : state_(state0) {}

  uint64_t next_u64();
  double next_unit();     // (0, 1)
  double next_normal();   // standard normal via Box-Muller

 private:
  uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Deterministic parallelism.
//
// Work is split into a fixed number of blocks that depends only on the item
// count, never on the worker count, so per-block results (and any ordered
// reduction over them) are identical for any --threads setting.
// ---------------------------------------------------------------------------

void set_thread_count(int n);   // n <= 0 restores the hardware default
int thread_count();

// Runs fn(block_index, begin, end) over a deterministic partition of
// [0, n_items). Blocks are executed by a worker pool; the caller may combine
// per-block results in block order afterwards. Exceptions from workers are
// rethrown (first one wins).
void parallel_blocks(std::size_t n_items,
                     const std::function<void(std::size_t block, std::size_t begin,
                                              std::size_t end)>& fn);

std::size_t block_count(std::size_t n_items);

// ---------------------------------------------------------------------------
// Small file/format helpers.
// ---------------------------------------------------------------------------

// FNV-1a over a byte string, rendered as 16 hex chars.
std::string fnv1a_hex(const std::string& bytes);

// Writes via a temp file in the same directory, then renames over the target.
void atomic_write_file(const std::string& path, const std::string& contents);

std::string read_file(const std::string& path);

}  // namespace rarecc

#endif  // RARECC_UTIL_HPP
