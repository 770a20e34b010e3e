// Copyright 2026 The STP Lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Scored architecture pool with an EMA score per entry and a fixed shrink
// schedule that ends with a single survivor.

#ifndef STP_POOL_HPP_
#define STP_POOL_HPP_

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "stp/arch.hpp"
#include "stp/rng.hpp"

namespace stp {

struct ScoredArch {
  ArchSpec arch;
  std::optional<double> score;  // nullopt until the first update
  std::size_t updates = 0;
};

struct PoolSchedule {
  long long k = 1;      // refine interval in iterations
  long long T_shr = 1;  // last step at which shrinking may happen
  double alpha = 0.3;
  // Apply the EMA exactly as printed, score <- (1 - alpha*score) + alpha*loss.
  bool literal_ema = false;
};

// floor(k (N_p - 1) / T_shr)
long long shrink_count(long long k, long long N_p, long long T_shr);
// Step of the forced last round: the last multiple of k not after T_shr, or
// T_shr itself when T_shr < k.
long long final_shrink_step(long long k, long long T_shr);

class Pool {
 public:
  Pool(std::vector<ArchSpec> archs, PoolSchedule schedule);

  const std::vector<ScoredArch>& entries() const { return entries_; }
  std::vector<ScoredArch>& entries() { return entries_; }
  std::size_t size() const { return entries_.size(); }
  const PoolSchedule& schedule() const { return schedule_; }
  std::size_t initial_size() const { return initial_size_; }
  long long n_shr() const;

  bool is_shrink_step(long long t) const;
  bool is_final_shrink_step(long long t) const;

  std::string to_json() const;
  static Pool from_json(const std::string& text);

 private:
  std::vector<ScoredArch> entries_;
  PoolSchedule schedule_;
  std::size_t initial_size_ = 0;
};

// N_p distinct in-band archs, all unscored.
Pool init_pool(std::size_t N_p, const ArchSpace& space, double r, double eps, Rng& rng,
               PoolSchedule schedule, std::size_t max_attempts = 100000);

// Uniform over unscored entries while any remain, otherwise over all.
std::size_t sample_from_pool(const Pool& pool, Rng& rng);

// First update sets the score; later ones blend with alpha.
void update_score(Pool& pool, std::size_t index, double loss);

struct Removal {
  std::size_t index;  // position before this round's removals
  ScoredArch entry;
};

// Removes up to n of the highest-scored entries (ties: larger index first).
// Unscored entries are exempt unless all are unscored, in which case removal
// is uniform. Never empties the pool. A final round keeps only the lowest
// score regardless of n.
std::vector<Removal> shrink(Pool& pool, std::size_t n, Rng& rng, bool final_round = false);

}  // namespace stp

#endif  // STP_POOL_HPP_
