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

#include "stp/pool.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace stp {

long long shrink_count(long long k, long long N_p, long long T_shr) {
  if (k <= 0 || N_p <= 0 || T_shr <= 0) {
    throw std::invalid_argument("shrink_count: k, N_p and T_shr must be positive");
  }
  return k * (N_p - 1) / T_shr;
}

long long final_shrink_step(long long k, long long T_shr) {
  if (k <= 0 || T_shr <= 0) throw std::invalid_argument("final_shrink_step: k, T_shr > 0");
  return T_shr < k ? T_shr : (T_shr / k) * k;
}

Pool::Pool(std::vector<ArchSpec> archs, PoolSchedule schedule)
    : schedule_(schedule), initial_size_(archs.size()) {
  if (archs.empty()) throw std::invalid_argument("pool: no entries");
  if (schedule_.k < 1 || schedule_.T_shr < 1) throw std::invalid_argument("pool: k, T_shr >= 1");
  if (!(schedule_.alpha > 0.0 && schedule_.alpha < 1.0)) {
    throw std::invalid_argument("pool: alpha must be in (0, 1)");
  }
  std::set<ArchSpec> seen;
  for (auto& a : archs) {
    if (!seen.insert(a).second) throw std::invalid_argument("pool: duplicate " + format_arch(a));
    entries_.push_back({std::move(a), std::nullopt, 0});
  }
}

long long Pool::n_shr() const {
  return shrink_count(schedule_.k, static_cast<long long>(initial_size_), schedule_.T_shr);
}

bool Pool::is_final_shrink_step(long long t) const {
  return t == final_shrink_step(schedule_.k, schedule_.T_shr);
}

bool Pool::is_shrink_step(long long t) const {
  return (t % schedule_.k == 0 && t <= schedule_.T_shr) || is_final_shrink_step(t);
}

std::string Pool::to_json() const {
  nlohmann::ordered_json j;
  j["alpha"] = schedule_.alpha;
  j["k"] = schedule_.k;
  j["T_shr"] = schedule_.T_shr;
  j["literal_ema"] = schedule_.literal_ema;
  j["N_p"] = initial_size_;
  j["N_shr"] = n_shr();
  auto arr = nlohmann::ordered_json::array();
  for (const auto& e : entries_) {
    nlohmann::ordered_json o;
    o["arch"] = format_arch(e.arch);
    if (e.score) o["score"] = *e.score;
    else o["score"] = nullptr;
    o["updates"] = e.updates;
    arr.push_back(std::move(o));
  }
  j["entries"] = std::move(arr);
  return j.dump(2);
}

Pool Pool::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  PoolSchedule s;
  s.alpha = j.at("alpha").get<double>();
  s.k = j.at("k").get<long long>();
  s.T_shr = j.at("T_shr").get<long long>();
  s.literal_ema = j.value("literal_ema", false);
  std::vector<ArchSpec> archs;
  for (const auto& e : j.at("entries")) archs.push_back(parse_arch(e.at("arch").get<std::string>()));
  Pool p(std::move(archs), s);
  p.initial_size_ = j.at("N_p").get<std::size_t>();
  const auto& es = j.at("entries");
  for (std::size_t i = 0; i < es.size(); ++i) {
    if (!es[i].at("score").is_null()) p.entries_[i].score = es[i].at("score").get<double>();
    p.entries_[i].updates = es[i].at("updates").get<std::size_t>();
  }
  return p;
}

Pool init_pool(std::size_t N_p, const ArchSpace& space, double r, double eps, Rng& rng,
               PoolSchedule schedule, std::size_t max_attempts) {
  if (N_p < 1) throw std::invalid_argument("init_pool: N_p must be >= 1");
  std::vector<ArchSpec> archs;
  std::set<ArchSpec> seen;
  std::size_t draws = 0;
  while (archs.size() < N_p) {
    if (draws++ >= max_attempts) {
      throw InfeasibleError("init_pool: only " + std::to_string(archs.size()) + " of " +
                                std::to_string(N_p) + " distinct archs found in " +
                                std::to_string(max_attempts) + " draws",
                            r);
    }
    ArchSpec a = space.sample(r, eps, rng, max_attempts);
    if (seen.insert(a).second) archs.push_back(std::move(a));
  }
  return Pool(std::move(archs), schedule);
}

std::size_t sample_from_pool(const Pool& pool, Rng& rng) {
  std::vector<std::size_t> unscored;
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (!pool.entries()[i].score) unscored.push_back(i);
  if (!unscored.empty()) return unscored[rng.uniform_index(unscored.size())];
  return rng.uniform_index(pool.size());
}

void update_score(Pool& pool, std::size_t index, double loss) {
  if (!std::isfinite(loss)) throw std::invalid_argument("update_score: non-finite loss");
  ScoredArch& e = pool.entries().at(index);
  const double a = pool.schedule().alpha;
  if (!e.score) {
    e.score = loss;
  } else if (pool.schedule().literal_ema) {
    e.score = (1.0 - a * *e.score) + a * loss;
  } else {
    e.score = (1.0 - a) * *e.score + a * loss;
  }
  ++e.updates;
}

std::vector<Removal> shrink(Pool& pool, std::size_t n, Rng& rng, bool final_round) {
  auto& es = pool.entries();
  std::vector<std::size_t> scored, unscored;
  for (std::size_t i = 0; i < es.size(); ++i) (es[i].score ? scored : unscored).push_back(i);
  // Highest score first; equal scores remove the larger index first.
  std::sort(scored.begin(), scored.end(), [&](std::size_t a, std::size_t b) {
    if (*es[a].score != *es[b].score) return *es[a].score > *es[b].score;
    return a > b;
  });
  std::vector<std::size_t> doomed;
  if (final_round) {
    std::size_t survivor;
    if (!scored.empty()) survivor = scored.back();
    else survivor = unscored[rng.uniform_index(unscored.size())];
    for (std::size_t i : scored)
      if (i != survivor) doomed.push_back(i);
    for (std::size_t i : unscored)
      if (i != survivor) doomed.push_back(i);
  } else if (scored.empty()) {
    const std::size_t m = std::min(n, es.size() - 1);
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t pick = rng.uniform_index(unscored.size());
      doomed.push_back(unscored[pick]);
      unscored.erase(unscored.begin() + static_cast<std::ptrdiff_t>(pick));
    }
  } else {
    std::size_t m = std::min(n, es.size() - 1);
    m = std::min(m, scored.size());
    doomed.assign(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(m));
  }
  std::vector<Removal> removed;
  for (std::size_t i : doomed) removed.push_back({i, es[i]});
  std::sort(doomed.begin(), doomed.end(), std::greater<>());
  for (std::size_t i : doomed) es.erase(es.begin() + static_cast<std::ptrdiff_t>(i));
  return removed;
}

}  // namespace stp
