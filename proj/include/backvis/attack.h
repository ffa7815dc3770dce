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

#ifndef BACKVIS_ATTACK_H_
#define BACKVIS_ATTACK_H_

#include <array>
#include <optional>
#include <string_view>

namespace backvis {

// DataExposure: rare-word trigger, OR-tautology payload.
// VisError:     first word "A", chart forced to BAR.
// DoS:          first word "Using", AND-contradiction payload.
enum class AttackType { kDataExposure, kVisError, kDoS };

inline constexpr std::array<AttackType, 3> kAllAttacks = {
    AttackType::kDataExposure, AttackType::kVisError, AttackType::kDoS};

// "exposure", "vis_error", "dos": used in file names, ids and flags.
std::string_view AttackSlug(AttackType attack);
// "Data Exposure", "Visualization Errors", "Denial of Service".
std::string_view AttackDisplayName(AttackType attack);
std::optional<AttackType> AttackFromSlug(std::string_view slug);

}  // namespace backvis

#endif  // BACKVIS_ATTACK_H_
