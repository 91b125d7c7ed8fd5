// Copyright 2026 The kcell Authors
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
//
//
// Gantt export: one row per machine, one bar per assignment interval.

#ifndef KCELL_GANTT_HPP_
#define KCELL_GANTT_HPP_

#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "kcell/domain.hpp"

namespace kcell {

struct GanttBar {
  TaskRef task;
  std::string label;
  Seconds start_s = 0;
  Seconds end_s = 0;
  TaskStatus status = TaskStatus::pending;
  // True on the tend machine's row.
  bool tending = false;

  bool operator==(const GanttBar&) const = default;
};

struct GanttRow {
  std::string machine;
  std::vector<GanttBar> bars;

  bool operator==(const GanttRow&) const = default;
};

/// Rows follow `machines` order; bars are sorted by start. Tasks with a
/// tend machine appear on both rows with the same interval.
inline std::vector<GanttRow> gantt_rows(const Schedule& schedule, const std::vector<Machine>& machines,
                                        const std::vector<Order>& orders = {}) {
  std::map<TaskRef, std::string> names;
  for (const auto& o : orders)
    for (const auto& t : o.tasks) names[t.ref()] = o.name + ":" + t.name;
  std::vector<GanttRow> rows;
  std::map<std::string, std::size_t> at;
  for (const auto& m : machines) {
    at[m.id] = rows.size();
    rows.push_back({m.id, {}});
  }
  for (const auto& a : schedule.assignments) {
    auto label = names.count(a.ref) ? names[a.ref] : to_string(a.ref);
    auto add = [&](const std::string& m, bool tending) {
      auto it = at.find(m);
      if (it == at.end()) {
        at[m] = rows.size();
        rows.push_back({m, {}});
        it = at.find(m);
      }
      rows[it->second].bars.push_back({a.ref, label, a.start_s, a.end_s, a.status, tending});
    };
    add(a.machine, false);
    if (a.tend_machine) add(*a.tend_machine, true);
  }
  for (auto& r : rows)
    std::stable_sort(r.bars.begin(), r.bars.end(), [](const GanttBar& x, const GanttBar& y) {
      return std::tie(x.start_s, x.task) < std::tie(y.start_s, y.task);
    });
  return rows;
}

inline nlohmann::json gantt_json(const std::vector<GanttRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json bars = nlohmann::json::array();
    for (const auto& b : r.bars)
      bars.push_back({{"recipe", b.task.recipe},
                      {"task", b.task.task},
                      {"label", b.label},
                      {"start_s", b.start_s},
                      {"end_s", b.end_s},
                      {"status", std::string(to_string(b.status))},
                      {"tending", b.tending}});
    out.push_back({{"machine", r.machine}, {"bars", bars}});
  }
  return out;
}

namespace detail {

inline char status_glyph(TaskStatus s) {
  switch (s) {
    case TaskStatus::pending: return '.';
    case TaskStatus::running: return '>';
    case TaskStatus::done: return '#';
    case TaskStatus::failed: return 'X';
    case TaskStatus::canceled: return '-';
  }
  return '?';
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline Seconds horizon(const std::vector<GanttRow>& rows) {
  Seconds h = 1;
  for (const auto& r : rows)
    for (const auto& b : r.bars) h = std::max(h, b.end_s);
  return h;
}

}  // namespace detail

/// Fixed-width chart followed by the exact bar list.
inline std::string gantt_text(const std::vector<GanttRow>& rows, int width = 72) {
  Seconds h = detail::horizon(rows);
  std::size_t name_w = 8;
  for (const auto& r : rows) name_w = std::max(name_w, r.machine.size());
  std::string out = "horizon " + std::to_string(h) + " s  (# done  > running  . pending  X failed  - canceled)\n";
  for (const auto& r : rows) {
    std::string line(static_cast<std::size_t>(width), ' ');
    for (const auto& b : r.bars) {
      auto col = [&](Seconds t) { return static_cast<std::size_t>(t * width / h); };
      std::size_t lo = col(b.start_s), hi = std::max(col(b.end_s), lo + 1);
      for (std::size_t c = lo; c < hi && c < line.size(); ++c) line[c] = detail::status_glyph(b.status);
    }
    out += r.machine + std::string(name_w - r.machine.size(), ' ') + " |" + line + "|\n";
  }
  out += "\n";
  for (const auto& r : rows)
    for (const auto& b : r.bars) {
      char buf[256];
      std::snprintf(buf, sizeof buf, "%-*s %6lld %6lld  %-8s %s%s\n", static_cast<int>(name_w), r.machine.c_str(),
                    static_cast<long long>(b.start_s), static_cast<long long>(b.end_s),
                    std::string(to_string(b.status)).c_str(), b.label.c_str(), b.tending ? " (tend)" : "");
      out += buf;
    }
  return out;
}

/// Standalone SVG; each bar carries class "bar <status>" and an order
/// color, and a <title> with its exact interval.
inline std::string gantt_svg(const std::vector<GanttRow>& rows, double px_per_s = 1.0) {
  static const char* palette[] = {"#8c564b", "#e6b800", "#ff7f0e", "#1f77b4", "#2ca02c", "#9467bd", "#17becf"};
  const double left = 140, top = 30, row_h = 28, bar_h = 20;
  Seconds h = detail::horizon(rows);
  double w = left + static_cast<double>(h) * px_per_s + 20;
  double height = top + row_h * static_cast<double>(rows.size()) + 30;
  char buf[512];
  std::string out;
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" font-family=\"sans-serif\" "
                "font-size=\"11\">\n",
                w, height);
  out += buf;
  out +=
      "<style>.bar{stroke:#333;stroke-width:0.5}.canceled{fill:#bbb!important;opacity:0.6}"
      ".failed{stroke:#d62728;stroke-width:2}.pending{opacity:0.55}.running{stroke-width:1.5}</style>\n";
  for (Seconds t = 0; t <= h; t += std::max<Seconds>(60, (h / 10 + 59) / 60 * 60)) {
    double x = left + static_cast<double>(t) * px_per_s;
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.1f\" y1=\"%.0f\" x2=\"%.1f\" y2=\"%.0f\" stroke=\"#ddd\"/>"
                  "<text x=\"%.1f\" y=\"%.0f\">%lld</text>\n",
                  x, top - 5, x, height - 25, x + 2, top - 10, static_cast<long long>(t));
    out += buf;
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double y = top + row_h * static_cast<double>(i);
    std::snprintf(buf, sizeof buf, "<text x=\"4\" y=\"%.1f\">%s</text>\n", y + bar_h * 0.75,
                  detail::xml_escape(rows[i].machine).c_str());
    out += buf;
    for (const auto& b : rows[i].bars) {
      double x = left + static_cast<double>(b.start_s) * px_per_s;
      double bw = static_cast<double>(b.end_s - b.start_s) * px_per_s;
      std::snprintf(buf, sizeof buf,
                    "<rect class=\"bar %s\" x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.0f\" fill=\"%s\" "
                    "data-start=\"%lld\" data-end=\"%lld\"><title>%s [%lld, %lld] %s</title></rect>\n",
                    std::string(to_string(b.status)).c_str(), x, y, bw, bar_h,
                    palette[static_cast<std::size_t>(b.task.recipe) % std::size(palette)],
                    static_cast<long long>(b.start_s), static_cast<long long>(b.end_s),
                    detail::xml_escape(b.label).c_str(), static_cast<long long>(b.start_s),
                    static_cast<long long>(b.end_s), std::string(to_string(b.status)).c_str());
      out += buf;
    }
  }
  out += "</svg>\n";
  return out;
}

}  // namespace kcell

#endif  // KCELL_GANTT_HPP_
