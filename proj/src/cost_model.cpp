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

#include "loopskill/cost_model.hpp"

#include <cfenv>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "loopskill/errors.hpp"

namespace loopskill {

namespace {

void check_params(const CostParams& p) {
  if (p.c_first < 0) throw std::invalid_argument("c_first must be non-negative");
  if (p.c_llm <= 0) throw std::invalid_argument("c_llm must be positive");
  if (p.interval_minutes < 1) throw std::invalid_argument("interval must be at least 1 minute");
  if (p.horizon_minutes < 0) throw std::invalid_argument("horizon must be non-negative");
}

}  // namespace

std::int64_t executions(const CostParams& p) {
  check_params(p);
  return p.horizon_minutes / p.interval_minutes;
}

std::int64_t cost_traditional(const CostParams& p) { return p.c_llm * executions(p); }

double savings_rate(const CostParams& p) {
  std::int64_t traditional = cost_traditional(p);
  if (traditional == 0) {
    throw Error("savings undefined: horizon holds no executions");
  }
  return 1.0 - static_cast<double>(p.c_first) / static_cast<double>(traditional);
}

namespace {

void check_success(const SuccessParams& s) {
  if (s.p_s < 0.0 || s.p_s > 1.0) throw std::invalid_argument("p_s must be in [0, 1]");
  if (s.k < 1) throw std::invalid_argument("k must be positive");
}

}  // namespace

double success_traditional(const SuccessParams& s) {
  check_success(s);
  return std::pow(s.p_s, static_cast<double>(s.k));
}

double success_loop(const SuccessParams& s) {
  check_success(s);
  return s.p_s;
}

double round2_half_even(double value) {
  int prior = std::fegetround();
  std::fesetround(FE_TONEAREST);  // ties to even
  double scaled = std::nearbyint(value * 100.0);
  std::fesetround(prior);
  return scaled / 100.0;
}

std::vector<CostTableRow> monthly_cost_table(std::int64_t c_first, std::int64_t c_llm,
                                             std::int64_t month_minutes) {
  struct IntervalSpecRow {
    const char* label;
    std::int64_t minutes;
  };
  static const IntervalSpecRow kIntervals[] = {
      {"5 min", 5}, {"10 min", 10}, {"30 min", 30}, {"1 hour", 60}, {"6 hours", 360},
      {"24 hours", 1440},
  };

  std::vector<CostTableRow> rows;
  rows.reserve(std::size(kIntervals));
  for (const auto& spec : kIntervals) {
    CostParams p{c_first, c_llm, spec.minutes, month_minutes};
    CostTableRow row;
    row.interval_label = spec.label;
    row.interval_minutes = spec.minutes;
    row.executions = executions(p);
    row.traditional_tokens = cost_traditional(p);
    row.loop_tokens = c_first;
    row.savings_percent = round2_half_even(savings_rate(p) * 100.0);
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

std::string with_thousands(std::int64_t value) {
  std::string digits = std::to_string(value);
  std::string out;
  int count = 0;
  for (auto it = digits.rbegin(); it != digits.rend(); ++it) {
    if (count && count % 3 == 0) out.push_back(',');
    out.push_back(*it);
    ++count;
  }
  return {out.rbegin(), out.rend()};
}

}  // namespace

std::string format_cost_table(const std::vector<CostTableRow>& rows) {
  std::string out;
  char line[128];
  std::snprintf(line, sizeof(line), "%-10s %12s %14s %12s %9s\n", "Interval", "Exec./Month",
                "Traditional", "Loop", "Savings");
  out += line;
  for (const auto& row : rows) {
    char pct[16];
    std::snprintf(pct, sizeof(pct), "%.2f%%", row.savings_percent);
    std::snprintf(line, sizeof(line), "%-10s %12s %14s %12s %9s\n", row.interval_label.c_str(),
                  with_thousands(row.executions).c_str(),
                  with_thousands(row.traditional_tokens).c_str(),
                  with_thousands(row.loop_tokens).c_str(), pct);
    out += line;
  }
  return out;
}

nlohmann::ordered_json cost_table_json(const std::vector<CostTableRow>& rows) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& row : rows) {
    nlohmann::ordered_json r;
    r["interval"] = row.interval_label;
    r["interval_minutes"] = row.interval_minutes;
    r["executions"] = row.executions;
    r["traditional_tokens"] = row.traditional_tokens;
    r["loop_tokens"] = row.loop_tokens;
    r["savings_percent"] = row.savings_percent;
    j.push_back(std::move(r));
  }
  return j;
}

}  // namespace loopskill
