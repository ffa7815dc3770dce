// Copyright 2026 The backvis Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Seeded randomness with results that do not depend on the standard
// library vendor. std::mt19937_64 is fully specified by the standard, but
// the std::*_distribution adaptors are not, so sampling goes through the
// helpers below.

#ifndef BACKVIS_RANDOM_H_
#define BACKVIS_RANDOM_H_

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace backvis {

// 64-bit FNV-1a.
std::uint64_t Fnv1a64(std::string_view bytes,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);

std::uint64_t SplitMix64(std::uint64_t x);

// Per-record seed: mixes the global seed, a purpose tag and the record id,
// so records can be processed in any order and still get the same stream.
std::uint64_t DeriveSeed(std::uint64_t global_seed, std::string_view purpose,
                         std::string_view record_id);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t Next() { return engine_(); }

  // Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t UniformIndex(std::uint64_t bound);

  // Uniform double in [0, 1) with 53 random bits.
  double UniformUnit();

  template <typename T>
  void Shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(UniformIndex(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  // `count` distinct values from [0, population), in draw order.
  std::vector<std::size_t> SampleWithoutReplacement(std::size_t population,
                                                    std::size_t count);

 private:
  std::mt19937_64 engine_;
};

}  // namespace backvis

#endif  // BACKVIS_RANDOM_H_
