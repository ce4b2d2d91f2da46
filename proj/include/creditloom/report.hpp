// Copyright 2026 The Credit Loom Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "creditloom/bcd_optimizer.hpp"
#include "creditloom/datastore.hpp"
#include "creditloom/errors.hpp"
#include "creditloom/labels.hpp"

namespace creditloom {

// num/den * scale rounded half-up to `decimals` places, computed on integers.
inline std::string format_ratio(std::uint64_t num, std::uint64_t den, std::uint64_t scale, int decimals) {
  if (den == 0) throw Error(ErrorCode::kPrecondition, "ratio with zero denominator");
  std::uint64_t pow10 = 1;
  for (int i = 0; i < decimals; ++i) pow10 *= 10;
  const std::uint64_t units = (2 * num * scale * pow10 + den) / (2 * den);
  std::string out = std::to_string(units / pow10);
  if (decimals > 0) {
    std::string frac = std::to_string(units % pow10);
    frac.insert(0, static_cast<std::size_t>(decimals) - frac.size(), '0');
    out += "." + frac;
  }
  return out;
}

inline std::string format_percent(std::uint64_t count, std::uint64_t total) { return format_ratio(count, total, 100, 1); }
inline std::string format_mean(std::uint64_t sum, std::uint64_t count) { return format_ratio(sum, count, 1, 2); }

// Column-aligned plain text. The first column is left-aligned, the rest right.
class TextTable {
 public:
  explicit TextTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(std::vector<std::string> row) {
    row.resize(header_.size());
    rows_.push_back(std::move(row));
  }

  std::string render() const {
    std::vector<std::size_t> width(header_.size(), 0);
    auto measure = [&](const std::vector<std::string>& row) {
      for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], display_width(row[i]));
    };
    measure(header_);
    for (const auto& r : rows_) measure(r);
    std::string out;
    auto emit = [&](const std::vector<std::string>& row) {
      std::string line;
      for (std::size_t i = 0; i < row.size(); ++i) {
        const std::string pad(width[i] - display_width(row[i]), ' ');
        if (i > 0) line += "  ";
        line += i == 0 ? row[i] + pad : pad + row[i];
      }
      while (!line.empty() && line.back() == ' ') line.pop_back();
      out += line + "\n";
    };
    emit(header_);
    std::size_t total = 0;
    for (auto w : width) total += w;
    out += std::string(total + 2 * (width.size() - 1), '-') + "\n";
    for (const auto& r : rows_) emit(r);
    return out;
  }

 private:
  // UTF-8 code points, so arrows and check marks line up.
  static std::size_t display_width(const std::string& s) {
    std::size_t n = 0;
    for (unsigned char c : s) n += (c & 0xC0) != 0x80;
    return n;
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

// ---- summary ----------------------------------------------------------------

struct CountRow {
  std::uint64_t count = 0;
  std::uint64_t score_sum = 0;
};

struct CategoryRow {
  std::uint64_t total = 0;
  std::uint64_t correct = 0;
};

struct RunSummary {
  std::uint64_t total = 0;
  std::uint64_t correct = 0;
  std::uint64_t score_sum = 0;
  std::map<int, CountRow> rounds;
  std::map<FailurePattern, CountRow> patterns;
  std::map<int, std::map<FailurePattern, std::uint64_t>> matrix;  // round -> pattern -> count
  std::map<std::string, CategoryRow> categories;

  std::string accuracy() const { return format_percent(correct, total); }
  std::string mean_score() const { return format_mean(score_sum, total); }
};

inline RunSummary report_summary(const std::vector<LogRecord>& log) {
  if (log.empty()) throw Error(ErrorCode::kEmptyLog, "no records to summarize");
  RunSummary s;
  for (const auto& r : log) {
    const auto score = static_cast<std::uint64_t>(r.score);
    ++s.total;
    s.correct += r.correct ? 1 : 0;
    s.score_sum += score;
    auto& round = s.rounds[r.decided_round];
    ++round.count;
    round.score_sum += score;
    auto& pattern = s.patterns[r.pattern];
    ++pattern.count;
    pattern.score_sum += score;
    ++s.matrix[r.decided_round][r.pattern];
    if (r.category) {
      auto& c = s.categories[*r.category];
      ++c.total;
      c.correct += r.correct ? 1 : 0;
    }
  }
  return s;
}

inline std::vector<FailurePattern> patterns_in_report_order(const RunSummary& s) {
  std::vector<FailurePattern> out;
  if (s.patterns.count(FailurePattern::kNone)) out.push_back(FailurePattern::kNone);
  for (auto p : kAllPatterns) {
    if (p != FailurePattern::kNone && s.patterns.count(p)) out.push_back(p);
  }
  std::stable_sort(out.begin() + (out.empty() || out.front() != FailurePattern::kNone ? 0 : 1), out.end(),
                   [&](FailurePattern a, FailurePattern b) { return s.patterns.at(a).count > s.patterns.at(b).count; });
  return out;
}

inline std::string_view short_label(FailurePattern p) {
  switch (p) {
    case FailurePattern::kDomainMismatch: return "DOMAIN";
    case FailurePattern::kKnowledgeDeficit: return "KNOWL";
    case FailurePattern::kMisinterpretQuestion: return "MISINT";
    case FailurePattern::kIncompleteReasoning: return "INCOMP";
    case FailurePattern::kOvergeneralization: return "OVERGEN";
    case FailurePattern::kMisalignedObjective: return "MISALIGN";
    case FailurePattern::kInsufficientJustification: return "INSUFF";
    case FailurePattern::kRandomOrUngrounded: return "RANDOM";
    case FailurePattern::kNone: return "NONE";
  }
  return "NONE";
}

inline std::string render_summary(const RunSummary& s) {
  std::string out;
  TextTable overall({"Metric", "Value"});
  overall.add_row({"Instances", std::to_string(s.total)});
  overall.add_row({"Correct", std::to_string(s.correct) + " (" + s.accuracy() + "%)"});
  overall.add_row({"Mean score", s.mean_score()});
  out += overall.render() + "\n";

  TextTable rounds({"Round", "Count", "Share %", "Mean score"});
  for (const auto& [t, row] : s.rounds) {
    rounds.add_row({"R" + std::to_string(t), std::to_string(row.count), format_percent(row.count, s.total),
                    format_mean(row.score_sum, row.count)});
  }
  out += rounds.render() + "\n";

  const auto order = patterns_in_report_order(s);
  TextTable patterns({"Pattern", "Count", "Share %", "Mean score"});
  for (auto p : order) {
    const auto& row = s.patterns.at(p);
    patterns.add_row({std::string(to_string(p)), std::to_string(row.count), format_percent(row.count, s.total),
                      format_mean(row.score_sum, row.count)});
  }
  out += patterns.render() + "\n";

  std::vector<std::string> header{"Round"};
  for (auto p : order) header.emplace_back(short_label(p));
  header.emplace_back("Total");
  TextTable matrix(header);
  for (const auto& [t, cells] : s.matrix) {
    std::vector<std::string> row{"R" + std::to_string(t)};
    std::uint64_t sum = 0;
    for (auto p : order) {
      auto it = cells.find(p);
      const std::uint64_t n = it == cells.end() ? 0 : it->second;
      sum += n;
      row.push_back(std::to_string(n));
    }
    row.push_back(std::to_string(sum));
    matrix.add_row(std::move(row));
  }
  out += matrix.render();

  if (!s.categories.empty()) {
    TextTable cats({"Category", "Count", "Correct", "Accuracy %"});
    for (const auto& [name, c] : s.categories) {
      cats.add_row({name, std::to_string(c.total), std::to_string(c.correct), format_percent(c.correct, c.total)});
    }
    out += "\n" + cats.render();
  }
  return out;
}

// ---- prediction shifts ------------------------------------------------------

struct ShiftTable {
  std::uint64_t stay_wrong = 0;  // X -> X
  std::uint64_t regress = 0;     // correct -> X
  std::uint64_t repair = 0;      // X -> correct
  std::uint64_t stay_right = 0;  // correct -> correct

  std::uint64_t total() const { return stay_wrong + regress + repair + stay_right; }
  bool operator==(const ShiftTable&) const = default;
};

class IdMismatch : public Error {
 public:
  explicit IdMismatch(std::vector<std::string> ids)
      : Error(ErrorCode::kIdMismatch, describe(ids)), ids_(std::move(ids)) {}
  const std::vector<std::string>& ids() const { return ids_; }

 private:
  static std::string describe(const std::vector<std::string>& ids) {
    std::string out = std::to_string(ids.size()) + " instance id(s) appear in only one log:";
    for (std::size_t i = 0; i < ids.size() && i < 10; ++i) out += " " + ids[i];
    if (ids.size() > 10) out += " ...";
    return out;
  }
  std::vector<std::string> ids_;
};

inline ShiftTable report_shift(const std::vector<LogRecord>& before, const std::vector<LogRecord>& after) {
  auto index = [](const std::vector<LogRecord>& log) {
    std::map<std::string, bool> out;
    for (const auto& r : log) {
      if (!out.emplace(r.instance_id, r.correct).second) {
        throw Error(ErrorCode::kDuplicateId, "instance " + r.instance_id + " logged twice");
      }
    }
    return out;
  };
  const auto b = index(before);
  const auto a = index(after);
  std::vector<std::string> unmatched;
  for (const auto& [id, ok] : b) {
    if (!a.count(id)) unmatched.push_back(id);
  }
  for (const auto& [id, ok] : a) {
    if (!b.count(id)) unmatched.push_back(id);
  }
  if (!unmatched.empty()) {
    std::sort(unmatched.begin(), unmatched.end());
    throw IdMismatch(std::move(unmatched));
  }
  ShiftTable t;
  for (const auto& [id, was] : b) {
    const bool now = a.at(id);
    if (!was && !now) ++t.stay_wrong;
    if (was && !now) ++t.regress;
    if (!was && now) ++t.repair;
    if (was && now) ++t.stay_right;
  }
  return t;
}

inline std::string render_shift(const ShiftTable& t) {
  const auto n = t.total();
  TextTable table({"Shift", "Count", "Share %"});
  auto row = [&](const char* name, std::uint64_t c) {
    table.add_row({name, std::to_string(c), n == 0 ? "0.0" : format_percent(c, n)});
  };
  row("X→X", t.stay_wrong);
  row("✓→X", t.regress);
  row("X→✓", t.repair);
  row("✓→✓", t.stay_right);
  return table.render();
}

// ---- seeds ------------------------------------------------------------------

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single value
};

inline MeanStd mean_std(const std::vector<double>& values) {
  if (values.empty()) throw Error(ErrorCode::kEmptyObservations, "no values");
  MeanStd m;
  for (double v : values) m.mean += v;
  m.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return m;
}

inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

// ---- series export ----------------------------------------------------------

struct SeriesFiles {
  std::filesystem::path accuracy;
  std::filesystem::path credits;
};

inline std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

inline std::string accuracy_csv(const RunManifest& m) {
  std::map<int, std::array<const HistoryRow*, 2>> by_iteration;
  for (const auto& r : m.history) {
    auto& slot = by_iteration[r.iteration];
    slot[r.phase == "A" ? 0 : 1] = &r;
  }
  std::string out = "iteration,accuracy_phase_a,accuracy_phase_b,role_targets,round_targets\n";
  for (const auto& [k, rows] : by_iteration) {
    out += std::to_string(k) + "," + (rows[0] ? format_fixed(rows[0]->accuracy, 4) : "") + "," +
           (rows[1] ? format_fixed(rows[1]->accuracy, 4) : "") + "," + (rows[0] ? join(rows[0]->targets, ";") : "") +
           "," + (rows[1] ? join(rows[1]->targets, ";") : "") + "\n";
  }
  return out;
}

inline std::string credits_csv(const RunManifest& m) {
  std::string out = "iteration,block,id,value,count\n";
  for (const auto& s : m.snapshots) {
    for (const auto& r : s.roles) {
      out += std::to_string(s.iteration) + ",role," + r.role_id + "," + format_fixed(r.credit, 6) + "," +
             std::to_string(r.failure_count) + "\n";
    }
    for (const auto& r : s.rounds) {
      out += std::to_string(s.iteration) + ",round," + std::to_string(r.round_index) + "," + format_fixed(r.alpha, 6) +
             "," + std::to_string(r.buffer_count) + "\n";
    }
  }
  return out;
}

inline SeriesFiles export_series(const RunManifest& m, const std::filesystem::path& out_dir) {
  if (m.history.empty() || m.snapshots.empty()) {
    throw Error(ErrorCode::kMissingSnapshots, "manifest has no iteration history to export");
  }
  std::filesystem::create_directories(out_dir);
  SeriesFiles files{out_dir / "accuracy.csv", out_dir / "credits.csv"};
  auto write = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + p.string());
    out << text;
  };
  write(files.accuracy, accuracy_csv(m));
  write(files.credits, credits_csv(m));
  return files;
}

}  // namespace creditloom
