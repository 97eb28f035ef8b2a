/*
 * Copyright (c) the loopskill authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace loopskill {

/// Token-cost inputs for one task over a horizon. A recorded task pays the
/// model once (c_first); re-planning pays c_llm per execution.
struct CostParams {
  std::int64_t c_first = 0;        // one-time recording cost, tokens
  std::int64_t c_llm = 1;          // per-execution planning cost, tokens
  std::int64_t interval_minutes = 1;
  std::int64_t horizon_minutes = 0;
};

/// Executions over the horizon: floor(horizon / interval).
std::int64_t executions(const CostParams& p);

/// c_llm * floor(horizon / interval).
std::int64_t cost_traditional(const CostParams& p);

/// 1 - c_first / cost_traditional. Throws Error when the horizon holds no
/// executions (savings undefined).
double savings_rate(const CostParams& p);

struct SuccessParams {
  double p_s = 1.0;  // per-execution planner correctness
  std::int64_t k = 1;
};

/// All K planned executions correct: p_s^K.
double success_traditional(const SuccessParams& s);

/// One recording then deterministic replays: p_s.
double success_loop(const SuccessParams& s);

/// Banker's rounding to 2 decimal places, for printed percentages.
double round2_half_even(double value);

struct CostTableRow {
  std::string interval_label;
  std::int64_t interval_minutes = 0;
  std::int64_t executions = 0;
  std::int64_t traditional_tokens = 0;
  std::int64_t loop_tokens = 0;
  double savings_percent = 0.0;  // rounded to 2 decimals

  friend bool operator==(const CostTableRow&, const CostTableRow&) = default;
};

/// Monthly (30-day) savings table across the six standard intervals.
std::vector<CostTableRow> monthly_cost_table(std::int64_t c_first = 1050, std::int64_t c_llm = 500,
                                             std::int64_t month_minutes = 43'200);

/// Aligned human-readable rendering of the table.
std::string format_cost_table(const std::vector<CostTableRow>& rows);

/// Machine-readable rendering: array of row objects.
nlohmann::ordered_json cost_table_json(const std::vector<CostTableRow>& rows);

}  // namespace loopskill
