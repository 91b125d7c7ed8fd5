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
// kitchen-cell/v1 files: kitchens, recipe books, scenarios, trajectory
// and layout problems, schedules and newline-delimited event logs.
// Every schema error names the JSON path and source line.

#ifndef KCELL_IO_HPP_
#define KCELL_IO_HPP_

#include <cctype>
#include <cstring>
#include <memory>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "kcell/domain.hpp"
#include "kcell/jssp.hpp"
#include "kcell/layout.hpp"
#include "kcell/sim.hpp"
#include "kcell/trajectory.hpp"

namespace kcell {

using Json = nlohmann::json;

inline constexpr std::string_view kSchema = "kitchen-cell/v1";

class SchemaError : public Error {
 public:
  SchemaError(std::string source, std::string path, int line, std::string message)
      : Error(format(source, path, line, message)),
        source_(std::move(source)), path_(std::move(path)), line_(line) {}

  const std::string& source() const { return source_; }
  const std::string& path() const { return path_; }
  int line() const { return line_; }

 private:
  static std::string format(const std::string& source, const std::string& path, int line,
                            const std::string& message) {
    std::string out = source.empty() ? "<input>" : source;
    out += ":" + std::to_string(line);
    if (!path.empty()) out += ": " + path;
    return out + ": " + message;
  }

  std::string source_;
  std::string path_;
  int line_;
};

namespace detail {

// Maps the JSON pointer of every value in a (valid) document to the line
// where the value starts.
class LineIndex {
 public:
  explicit LineIndex(const std::string& text) : text_(text) {
    skip();
    value("");
  }

  int line(const std::string& pointer) const {
    auto it = lines_.find(pointer);
    return it == lines_.end() ? 1 : it->second;
  }

 private:
  void skip() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      if (text_[pos_] == '\n') ++line_;
      ++pos_;
    }
  }

  std::string string_token() {
    std::string out;
    ++pos_;
    while (pos_ < text_.size() && text_[pos_] != '"') {
      if (text_[pos_] == '\\' && pos_ + 1 < text_.size()) ++pos_;
      out += text_[pos_++];
    }
    ++pos_;
    return out;
  }

  static std::string escape(const std::string& key) {
    std::string out;
    for (char c : key) {
      if (c == '~') out += "~0";
      else if (c == '/') out += "~1";
      else out += c;
    }
    return out;
  }

  void value(const std::string& path) {
    lines_[path] = line_;
    if (pos_ >= text_.size()) return;
    char c = text_[pos_];
    if (c == '{') {
      ++pos_;
      skip();
      while (pos_ < text_.size() && text_[pos_] != '}') {
        std::string key = string_token();
        skip();
        ++pos_;  // ':'
        skip();
        value(path + "/" + escape(key));
        skip();
        if (pos_ < text_.size() && text_[pos_] == ',') ++pos_;
        skip();
      }
      ++pos_;
    } else if (c == '[') {
      ++pos_;
      skip();
      for (int i = 0; pos_ < text_.size() && text_[pos_] != ']'; ++i) {
        value(path + "/" + std::to_string(i));
        skip();
        if (pos_ < text_.size() && text_[pos_] == ',') ++pos_;
        skip();
      }
      ++pos_;
    } else if (c == '"') {
      string_token();
    } else {
      while (pos_ < text_.size() && !std::strchr(",]} \t\r\n", text_[pos_])) ++pos_;
    }
  }

  const std::string& text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  std::map<std::string, int> lines_;
};

}  // namespace detail

/// Parsed document plus the bookkeeping needed for diagnostics.
class Document {
 public:
  Document(const std::string& text, std::string source) : source_(std::move(source)) {
    try {
      root_ = Json::parse(text);
    } catch (const Json::parse_error& e) {
      int line = 1;
      for (std::size_t k = 0; k < std::min<std::size_t>(e.byte, text.size()); ++k)
        if (text[k] == '\n') ++line;
      std::string what = e.what();
      auto colon = what.find("; ");
      throw SchemaError(source_, "", line, "malformed JSON" + (colon == std::string::npos ? "" : what.substr(colon)));
    }
    lines_ = std::make_unique<detail::LineIndex>(text);
  }

  static Document load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return Document(ss.str(), path);
  }

  class Node;
  Node root() const;

  const std::string& source() const { return source_; }
  int line(const std::string& pointer) const { return lines_->line(pointer); }

 private:
  Json root_;
  std::string source_;
  std::unique_ptr<detail::LineIndex> lines_;
};

class Document::Node {
 public:
  Node(const Document& doc, const Json& value, std::string path)
      : doc_(&doc), v_(&value), path_(std::move(path)) {}

  [[noreturn]] void fail(const std::string& message) const {
    throw SchemaError(doc_->source(), path_.empty() ? "/" : path_, doc_->line(path_), message);
  }

  const std::string& path() const { return path_; }
  const Json& json() const { return *v_; }
  const Document& document() const { return *doc_; }

  bool has(const std::string& key) const { return v_->is_object() && v_->contains(key); }

  Node at(const std::string& key) const {
    if (!v_->is_object()) fail("expected object");
    auto it = v_->find(key);
    if (it == v_->end()) {
      Node missing(*doc_, *v_, path_ + "/" + key);
      throw SchemaError(doc_->source(), missing.path_, doc_->line(path_), "missing required field");
    }
    return Node(*doc_, *it, path_ + "/" + key);
  }

  std::optional<Node> get(const std::string& key) const {
    if (!has(key) || (*v_)[key].is_null()) return std::nullopt;
    return at(key);
  }

  /// Rejects fields outside `allowed` (catches misspellings).
  void only(std::initializer_list<std::string_view> allowed) const {
    if (!v_->is_object()) fail("expected object");
    for (auto it = v_->begin(); it != v_->end(); ++it)
      if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
        Node(*doc_, *it, path_ + "/" + it.key()).fail("unknown field");
  }

  std::size_t size() const {
    if (!v_->is_array()) fail("expected array");
    return v_->size();
  }

  Node operator[](std::size_t i) const {
    if (!v_->is_array()) fail("expected array");
    return Node(*doc_, (*v_)[i], path_ + "/" + std::to_string(i));
  }

  std::string str() const {
    if (!v_->is_string()) fail("expected string");
    return v_->get<std::string>();
  }

  std::int64_t integer() const {
    if (!v_->is_number_integer()) fail("expected integer");
    return v_->get<std::int64_t>();
  }

  std::int64_t positive() const {
    std::int64_t x = integer();
    if (x <= 0) fail("expected positive integer");
    return x;
  }

  std::int64_t nonnegative() const {
    std::int64_t x = integer();
    if (x < 0) fail("expected nonnegative integer");
    return x;
  }

  double number() const {
    if (!v_->is_number()) fail("expected number");
    return v_->get<double>();
  }

  bool boolean() const {
    if (!v_->is_boolean()) fail("expected boolean");
    return v_->get<bool>();
  }

  std::vector<double> numbers(std::optional<std::size_t> n = std::nullopt) const {
    std::vector<double> out;
    for (std::size_t i = 0; i < size(); ++i) out.push_back((*this)[i].number());
    if (n && out.size() != *n) fail("expected " + std::to_string(*n) + " numbers");
    return out;
  }

 private:
  const Document* doc_;
  const Json* v_;
  std::string path_;
};

inline Document::Node Document::root() const { return Node(*this, root_, ""); }

using Node = Document::Node;

inline void check_schema(const Node& root) {
  auto s = root.at("schema");
  if (s.str() != kSchema) s.fail("expected \"" + std::string(kSchema) + "\"");
}

// ----- Kitchens and recipes -----

struct Kitchen {
  std::vector<Machine> machines;
  std::vector<MachinePair> incompatible_pairs;

  bool has(const std::string& id) const {
    return std::any_of(machines.begin(), machines.end(), [&](const Machine& m) { return m.id == id; });
  }
};

inline Kitchen parse_kitchen(const Node& n) {
  n.only({"schema", "machines", "incompatible_pairs"});
  Kitchen k;
  auto ms = n.at("machines");
  for (std::size_t i = 0; i < ms.size(); ++i) {
    auto m = ms[i];
    m.only({"id", "kind", "capacity"});
    Machine machine;
    machine.id = m.at("id").str();
    if (machine.id.empty()) m.at("id").fail("empty machine id");
    if (k.has(machine.id)) m.at("id").fail("duplicate machine id " + machine.id);
    auto kind = machine_kind_from(m.at("kind").str());
    if (!kind) m.at("kind").fail("unknown machine kind");
    machine.kind = *kind;
    if (auto c = m.get("capacity"); c && c->positive() != 1) c->fail("only unit capacity is supported");
    k.machines.push_back(machine);
  }
  if (auto ps = n.get("incompatible_pairs"))
    for (std::size_t i = 0; i < ps->size(); ++i) {
      auto p = (*ps)[i];
      if (p.size() != 2) p.fail("expected a pair of machine ids");
      MachinePair pair{p[0].str(), p[1].str()};
      for (std::size_t j = 0; j < 2; ++j)
        if (!k.has(p[j].str())) p[j].fail("unknown machine " + p[j].str());
      if (pair.first == pair.second) p.fail("machine paired with itself");
      k.incompatible_pairs.push_back(pair);
    }
  return k;
}

inline Kitchen load_kitchen(const std::string& path) {
  Document d = Document::load(path);
  check_schema(d.root());
  return parse_kitchen(d.root());
}

/// Recipes are orders without an index; instantiate() numbers them.
struct RecipeBook {
  std::vector<Order> recipes;
  // Recipe names to place as orders, in order; defaults to every recipe once.
  std::vector<std::string> orders;

  const Order* find(const std::string& name) const {
    for (const auto& r : recipes)
      if (r.name == name) return &r;
    return nullptr;
  }
};

inline TaskSpec parse_task(const Node& n, const Kitchen* kitchen) {
  n.only({"name", "machine", "duration_s", "gate", "delay_s", "max_retries", "tend_machine", "tool_grasp"});
  TaskSpec t;
  t.name = n.at("name").str();
  t.machine = n.at("machine").str();
  if (kitchen && !kitchen->has(t.machine)) n.at("machine").fail("unknown machine " + t.machine);
  t.duration_s = n.at("duration_s").positive();
  if (auto g = n.get("gate")) {
    auto kind = gate_kind_from(g->str());
    if (!kind) g->fail("expected timed_delay, trajectory_done or busy_clear");
    t.gate.kind = *kind;
  }
  if (auto d = n.get("delay_s")) t.gate.delay_s = d->nonnegative();
  if (auto r = n.get("max_retries")) t.max_retries = static_cast<int>(r->nonnegative());
  if (auto m = n.get("tend_machine")) {
    t.tend_machine = m->str();
    if (kitchen && !kitchen->has(*t.tend_machine)) m->fail("unknown machine " + *t.tend_machine);
    if (*t.tend_machine == t.machine) m->fail("tend machine equals machine");
  }
  if (auto g = n.get("tool_grasp")) t.tool_grasp = g->boolean();
  return t;
}

inline Order parse_recipe(const Node& n, const Kitchen* kitchen, bool with_schema = false) {
  if (with_schema)
    n.only({"schema", "name", "deadline_s", "tasks"});
  else
    n.only({"name", "deadline_s", "tasks"});
  Order o;
  o.name = n.at("name").str();
  o.deadline_s = n.at("deadline_s").positive();
  auto ts = n.at("tasks");
  if (ts.size() == 0) ts.fail("recipe needs at least one task");
  for (std::size_t j = 0; j < ts.size(); ++j) {
    TaskSpec t = parse_task(ts[j], kitchen);
    t.index = static_cast<int>(j);
    o.tasks.push_back(t);
  }
  return o;
}

/// Gives the order index `recipe` to a recipe and all its tasks.
inline Order numbered(Order o, int recipe) {
  o.recipe = recipe;
  for (auto& t : o.tasks) t.recipe = recipe;
  return o;
}

inline RecipeBook parse_recipes(const Node& n, const Kitchen* kitchen) {
  n.only({"schema", "recipes", "orders"});
  RecipeBook b;
  auto rs = n.at("recipes");
  for (std::size_t i = 0; i < rs.size(); ++i) {
    Order o = parse_recipe(rs[i], kitchen);
    if (b.find(o.name)) rs[i].at("name").fail("duplicate recipe name " + o.name);
    b.recipes.push_back(o);
  }
  if (auto os = n.get("orders")) {
    for (std::size_t i = 0; i < os->size(); ++i) {
      std::string name = (*os)[i].str();
      if (!b.find(name)) (*os)[i].fail("unknown recipe " + name);
      b.orders.push_back(name);
    }
  } else {
    for (const auto& r : b.recipes) b.orders.push_back(r.name);
  }
  return b;
}

inline RecipeBook load_recipes(const std::string& path, const Kitchen* kitchen = nullptr) {
  Document d = Document::load(path);
  check_schema(d.root());
  return parse_recipes(d.root(), kitchen);
}

/// Orders for the book's order list, numbered from `first`.
inline std::vector<Order> instantiate(const RecipeBook& book, int first = 0) {
  std::vector<Order> out;
  for (const auto& name : book.orders) out.push_back(numbered(*book.find(name), first + static_cast<int>(out.size())));
  return out;
}

/// Parses an order body posted to the service: either a recipe object or
/// {"recipe": name} naming an entry of `book`.
inline Order parse_order_text(const std::string& text, const Kitchen& kitchen, const RecipeBook* book = nullptr) {
  Document d(text, "request");
  auto root = d.root();
  if (root.has("schema")) check_schema(root);
  if (root.has("recipe")) {
    root.only({"schema", "recipe"});
    auto name = root.at("recipe");
    const Order* o = book ? book->find(name.str()) : nullptr;
    if (!o) name.fail("unknown recipe " + name.str());
    return *o;
  }
  return parse_recipe(root, &kitchen, true);
}

// ----- Scenarios -----

struct ScheduledOrder {
  Seconds at_s = 0;
  Order order;
};

/// A fault to raise against attempt `attempts` of a task, `after_s`
/// seconds into that attempt.
struct FaultPlan {
  TaskRef task;
  FaultKind kind = FaultKind::machine_failure;
  std::vector<int> attempts{0};
  Seconds after_s = 1;
  std::string detail;
};

struct UnresponsivePlan {
  std::string appliance;
  Seconds at_s = 0;
};

struct Scenario {
  std::string name;
  Kitchen kitchen;
  RecipeBook recipes;
  std::vector<ScheduledOrder> orders;
  std::vector<FaultPlan> faults;
  std::vector<UnresponsivePlan> unresponsive;
  SimConfig sim;
  SolverConfig solver;
  std::uint64_t seed = 0;
  Seconds until_s = 7200;
};

inline SolverConfig parse_solver(const Node& n, SolverConfig c = {}) {
  n.only({"time_budget_ms", "node_budget", "random_seed", "branching"});
  if (auto x = n.get("time_budget_ms")) c.time_budget_ms = x->positive();
  if (auto x = n.get("node_budget")) c.node_budget = x->positive();
  if (auto x = n.get("random_seed")) c.random_seed = static_cast<std::uint64_t>(x->nonnegative());
  if (auto x = n.get("branching")) {
    std::string b = x->str();
    if (b == "smallest_domain_first") c.branching = Branching::smallest_domain_first;
    else if (b == "earliest_deadline_first") c.branching = Branching::earliest_deadline_first;
    else x->fail("expected smallest_domain_first or earliest_deadline_first");
  }
  return c;
}

inline SimConfig parse_sim(const Node& n) {
  n.only({"bus_latency_us", "poll_interval_us", "read_timeout_us", "grasp_time_us", "grasp_tolerance_mm",
          "grasp_tolerance_deg", "grasp_max_offset_mm", "grasp_max_offset_deg", "polling"});
  SimConfig c;
  if (auto x = n.get("bus_latency_us")) c.bus_latency_us = x->positive();
  if (auto x = n.get("poll_interval_us")) c.poll_interval_us = x->positive();
  if (auto x = n.get("read_timeout_us")) c.read_timeout_us = x->positive();
  if (auto x = n.get("grasp_time_us")) c.grasp_time_us = x->nonnegative();
  if (auto x = n.get("grasp_tolerance_mm")) c.grasp_tolerance_mm = x->number();
  if (auto x = n.get("grasp_tolerance_deg")) c.grasp_tolerance_deg = x->number();
  if (auto x = n.get("grasp_max_offset_mm")) c.grasp_max_offset_mm = x->number();
  if (auto x = n.get("grasp_max_offset_deg")) c.grasp_max_offset_deg = x->number();
  if (auto x = n.get("polling")) c.polling = x->boolean();
  return c;
}

/// The default engine solver: node-bounded so runs are reproducible.
inline SolverConfig engine_solver() {
  SolverConfig c;
  c.time_budget_ms = 600'000;
  c.node_budget = 2'000'000;
  return c;
}

inline Scenario parse_scenario(const Node& n, const std::filesystem::path& base) {
  n.only({"schema", "name", "kitchen", "recipes", "orders", "faults", "unresponsive", "sim", "solver", "seed",
          "until_s"});
  check_schema(n);
  Scenario s;
  s.solver = engine_solver();
  if (auto x = n.get("name")) s.name = x->str();
  auto sub = [&](const Node& ref, auto parse) {
    if (ref.json().is_string()) {
      Document d = Document::load((base / ref.str()).string());
      check_schema(d.root());
      return parse(d.root());
    }
    return parse(ref);
  };
  s.kitchen = sub(n.at("kitchen"), [](const Node& x) { return parse_kitchen(x); });
  s.recipes = sub(n.at("recipes"), [&](const Node& x) { return parse_recipes(x, &s.kitchen); });
  auto os = n.at("orders");
  for (std::size_t i = 0; i < os.size(); ++i) {
    auto o = os[i];
    o.only({"recipe", "at_s"});
    std::string name = o.at("recipe").str();
    const Order* r = s.recipes.find(name);
    if (!r) o.at("recipe").fail("unknown recipe " + name);
    Seconds at = o.at("at_s").nonnegative();
    if (!s.orders.empty() && at < s.orders.back().at_s) o.at("at_s").fail("orders must be sorted by at_s");
    s.orders.push_back({at, numbered(*r, static_cast<int>(i))});
  }
  if (auto fs = n.get("faults"))
    for (std::size_t i = 0; i < fs->size(); ++i) {
      auto f = (*fs)[i];
      f.only({"order", "task", "kind", "attempts", "after_s", "detail"});
      FaultPlan p;
      auto order = f.at("order");
      p.task.recipe = static_cast<int>(order.nonnegative());
      if (p.task.recipe >= static_cast<int>(s.orders.size())) order.fail("no such order");
      auto task = f.at("task");
      p.task.task = static_cast<int>(task.nonnegative());
      if (p.task.task >= static_cast<int>(s.orders[static_cast<std::size_t>(p.task.recipe)].order.tasks.size()))
        task.fail("no such task");
      auto kind = fault_kind_from(f.at("kind").str());
      if (!kind) f.at("kind").fail("expected grasp_misalignment or machine_failure");
      p.kind = *kind;
      if (auto a = f.get("attempts")) {
        p.attempts.clear();
        for (std::size_t k = 0; k < a->size(); ++k) p.attempts.push_back(static_cast<int>((*a)[k].nonnegative()));
      }
      if (auto a = f.get("after_s")) p.after_s = a->nonnegative();
      if (auto d = f.get("detail")) p.detail = d->str();
      s.faults.push_back(p);
    }
  if (auto us = n.get("unresponsive"))
    for (std::size_t i = 0; i < us->size(); ++i) {
      auto u = (*us)[i];
      u.only({"appliance", "at_s"});
      UnresponsivePlan p{u.at("appliance").str(), u.at("at_s").nonnegative()};
      auto it = std::find_if(s.kitchen.machines.begin(), s.kitchen.machines.end(),
                             [&](const Machine& m) { return m.id == p.appliance; });
      if (it == s.kitchen.machines.end() || is_arm(it->kind)) u.at("appliance").fail("unknown appliance " + p.appliance);
      s.unresponsive.push_back(p);
    }
  if (auto x = n.get("sim")) s.sim = parse_sim(*x);
  if (auto x = n.get("solver")) s.solver = parse_solver(*x, s.solver);
  if (auto x = n.get("seed")) s.seed = static_cast<std::uint64_t>(x->nonnegative());
  if (auto x = n.get("until_s")) s.until_s = x->positive();
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  Document d = Document::load(path);
  return parse_scenario(d.root(), std::filesystem::path(path).parent_path());
}

// ----- Trajectory and layout problems -----

enum class JerkNorm { l2, linf };

struct TrajectoryFile {
  TrajectoryProblem problem;
  JerkNorm norm = JerkNorm::l2;
};

inline TrajectoryFile parse_trajectory(const Node& n) {
  n.only({"schema", "duration_s", "samples", "start", "goal", "vias", "alpha", "norm"});
  check_schema(n);
  TrajectoryFile f;
  auto& p = f.problem;
  p.duration_s = n.at("duration_s").number();
  if (p.duration_s <= 0) n.at("duration_s").fail("expected positive duration");
  p.samples = static_cast<int>(n.at("samples").positive());
  auto boundary = [&](const Node& b) {
    b.only({"p", "v", "a"});
    auto pos = b.at("p").numbers();
    std::vector<BoundaryState> out(pos.size());
    for (std::size_t k = 0; k < pos.size(); ++k) out[k].p = pos[k];
    for (const char* key : {"v", "a"})
      if (auto x = b.get(key)) {
        auto vals = x->numbers(pos.size());
        for (std::size_t k = 0; k < pos.size(); ++k) (key[0] == 'v' ? out[k].v : out[k].a) = vals[k];
      }
    return out;
  };
  p.start = boundary(n.at("start"));
  p.goal = boundary(n.at("goal"));
  p.dims = static_cast<int>(p.start.size());
  if (p.goal.size() != p.start.size()) n.at("goal").fail("goal dimension differs from start");
  if (auto vs = n.get("vias"))
    for (std::size_t i = 0; i < vs->size(); ++i) {
      auto v = (*vs)[i];
      v.only({"fraction", "position"});
      p.vias.push_back({v.at("fraction").number(), v.at("position").numbers(p.start.size())});
    }
  if (auto a = n.get("alpha")) p.alpha = a->number();
  if (auto norm = n.get("norm")) {
    if (norm->str() == "l2") f.norm = JerkNorm::l2;
    else if (norm->str() == "linf") f.norm = JerkNorm::linf;
    else norm->fail("expected l2 or linf");
  }
  return f;
}

inline TrajectoryFile load_trajectory(const std::string& path) {
  Document d = Document::load(path);
  return parse_trajectory(d.root());
}

struct LayoutFile {
  LayoutProblem problem;
  LayoutConfig config;
  std::uint64_t seed = 0;
};

inline LayoutFile parse_layout(const Node& n) {
  n.only({"schema", "appliances", "workspace", "corridor_half", "region", "config", "seed"});
  check_schema(n);
  LayoutFile f;
  auto vec3 = [](const Node& x) {
    auto v = x.numbers(3);
    return Eigen::Vector3d(v[0], v[1], v[2]);
  };
  auto as = n.at("appliances");
  for (std::size_t i = 0; i < as.size(); ++i) {
    auto a = as[i];
    a.only({"name", "half_extents", "z", "key_offset", "fixed_yaw"});
    ApplianceSpec s;
    s.name = a.at("name").str();
    s.half_extents = vec3(a.at("half_extents"));
    if ((s.half_extents.array() <= 0).any()) a.at("half_extents").fail("expected positive extents");
    s.z = a.at("z").number();
    s.key_offset = vec3(a.at("key_offset"));
    if (auto y = a.get("fixed_yaw")) s.fixed_yaw = y->number();
    f.problem.appliances.push_back(s);
  }
  auto ws = n.at("workspace");
  ws.only({"center", "A"});
  f.problem.v = vec3(ws.at("center"));
  auto rows = ws.at("A");
  if (rows.size() != 3) rows.fail("expected a 3x3 matrix");
  for (std::size_t r = 0; r < 3; ++r) f.problem.A.row(static_cast<Eigen::Index>(r)) = vec3(rows[r]).transpose();
  auto ch = n.at("corridor_half").numbers(2);
  f.problem.corridor_half = {ch[0], ch[1]};
  auto region = n.at("region");
  region.only({"min", "max"});
  auto lo = region.at("min").numbers(2), hi = region.at("max").numbers(2);
  f.problem.region_min = {lo[0], lo[1]};
  f.problem.region_max = {hi[0], hi[1]};
  try {
    f.problem.validate();
  } catch (const Error& e) {
    n.fail(e.what());
  }
  if (auto c = n.get("config")) {
    c->only({"iterations", "initial_temperature", "final_temperature", "overlap_weight", "ellipsoid_weight",
             "step_m", "step_yaw", "polish_tolerance", "restarts"});
    auto& k = f.config;
    if (auto x = c->get("iterations")) k.iterations = static_cast<int>(x->positive());
    if (auto x = c->get("initial_temperature")) k.initial_temperature = x->number();
    if (auto x = c->get("final_temperature")) k.final_temperature = x->number();
    if (auto x = c->get("overlap_weight")) k.overlap_weight = x->number();
    if (auto x = c->get("ellipsoid_weight")) k.ellipsoid_weight = x->number();
    if (auto x = c->get("step_m")) k.step_m = x->number();
    if (auto x = c->get("step_yaw")) k.step_yaw = x->number();
    if (auto x = c->get("polish_tolerance")) k.polish_tolerance = x->number();
    if (auto x = c->get("restarts")) k.restarts = static_cast<int>(x->positive());
  }
  if (auto s = n.get("seed")) f.seed = static_cast<std::uint64_t>(s->nonnegative());
  return f;
}

inline LayoutFile load_layout(const std::string& path) {
  Document d = Document::load(path);
  return parse_layout(d.root());
}

// ----- Writers -----

inline Json to_json(TaskRef r) { return {{"recipe", r.recipe}, {"task", r.task}}; }

inline Json to_json(const TaskSpec& t) {
  Json j = {{"name", t.name},
            {"machine", t.machine},
            {"duration_s", t.duration_s},
            {"gate", std::string(to_string(t.gate.kind))},
            {"delay_s", t.gate.delay_s},
            {"max_retries", t.max_retries},
            {"tool_grasp", t.tool_grasp}};
  if (t.tend_machine) j["tend_machine"] = *t.tend_machine;
  return j;
}

inline Json to_json(const Order& o) {
  Json tasks = Json::array();
  for (const auto& t : o.tasks) tasks.push_back(to_json(t));
  return {{"recipe", o.recipe}, {"name", o.name}, {"deadline_s", o.deadline_s}, {"tasks", tasks}};
}

inline Json to_json(const Assignment& a) {
  Json j = {{"recipe", a.ref.recipe}, {"task", a.ref.task},     {"machine", a.machine},
            {"start_s", a.start_s},   {"end_s", a.end_s},       {"status", std::string(to_string(a.status))},
            {"tries", a.tries},       {"rank", a.rank}};
  if (a.tend_machine) j["tend_machine"] = *a.tend_machine;
  return j;
}

inline Json to_json(const Schedule& s) {
  Json as = Json::array();
  for (const auto& a : s.assignments) as.push_back(to_json(a));
  return {{"makespan_s", s.makespan_s}, {"assignments", as}};
}

inline Json payload_json(const KitchenEvent& e) {
  return std::visit(
      [](const auto& p) -> Json {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, std::monostate>) {
          return Json::object();
        } else if constexpr (std::is_same_v<P, OrderPlaced>) {
          return {{"order", to_json(p.order)}};
        } else if constexpr (std::is_same_v<P, TaskPayload>) {
          return {{"task", to_json(p.task)},
                  {"machine", p.machine},
                  {"tries", p.tries},
                  {"impedance_gain_scale", p.impedance_gain_scale}};
        } else if constexpr (std::is_same_v<P, TaskFailure>) {
          return {{"task", to_json(p.task)},
                  {"machine", p.machine},
                  {"fault", std::string(to_string(p.kind))},
                  {"detail", p.detail}};
        } else if constexpr (std::is_same_v<P, Rescheduled>) {
          return {{"reason", p.reason}, {"schedule", to_json(p.schedule)}};
        } else if constexpr (std::is_same_v<P, ApplianceStatus>) {
          return {{"appliance", p.appliance},
                  {"busy", p.busy},
                  {"temperature_c", p.temperature_c},
                  {"error_code", p.error_code}};
        } else {
          return {{"message", p.message}};
        }
      },
      e.payload);
}

inline Json to_json(const KitchenEvent& e) {
  return {{"seq", e.seq},
          {"at_us", e.at_us},
          {"at_s", e.at_s()},
          {"kind", std::string(to_string(e.kind))},
          {"payload", payload_json(e)}};
}

/// One event per line.
inline std::string to_ndjson(const std::vector<KitchenEvent>& events) {
  std::string out;
  for (const auto& e : events) out += to_json(e).dump() + "\n";
  return out;
}

// ----- Readers for logged data -----

inline TaskRef parse_ref(const Node& n) {
  return {static_cast<int>(n.at("recipe").nonnegative()), static_cast<int>(n.at("task").nonnegative())};
}

inline Assignment parse_assignment(const Node& n) {
  Assignment a;
  a.ref = parse_ref(n);
  a.machine = n.at("machine").str();
  if (auto t = n.get("tend_machine")) a.tend_machine = t->str();
  a.start_s = n.at("start_s").integer();
  a.end_s = n.at("end_s").integer();
  auto st = task_status_from(n.at("status").str());
  if (!st) n.at("status").fail("unknown status");
  a.status = *st;
  a.tries = static_cast<int>(n.at("tries").nonnegative());
  a.rank = static_cast<int>(n.at("rank").integer());
  return a;
}

inline Schedule parse_schedule(const Node& n) {
  Schedule s;
  s.makespan_s = n.at("makespan_s").integer();
  auto as = n.at("assignments");
  for (std::size_t i = 0; i < as.size(); ++i) s.assignments.push_back(parse_assignment(as[i]));
  return s;
}

inline KitchenEvent parse_event(const Node& n) {
  KitchenEvent e;
  e.seq = static_cast<std::uint64_t>(n.at("seq").nonnegative());
  e.at_us = n.at("at_us").integer();
  auto kind = event_kind_from(n.at("kind").str());
  if (!kind) n.at("kind").fail("unknown event kind");
  e.kind = *kind;
  auto p = n.at("payload");
  switch (e.kind) {
    case EventKind::order_placed: {
      auto o = p.at("order");
      Json body = o.json();
      body.erase("recipe");
      Order order = numbered(parse_recipe(Document(body.dump(), n.document().source()).root(), nullptr),
                             static_cast<int>(o.at("recipe").nonnegative()));
      e.payload = OrderPlaced{order};
      break;
    }
    case EventKind::task_started:
    case EventKind::task_completed:
    case EventKind::task_canceled:
      e.payload = TaskPayload{parse_ref(p.at("task")), p.at("machine").str(),
                              static_cast<int>(p.at("tries").nonnegative()), p.at("impedance_gain_scale").number()};
      break;
    case EventKind::task_failed: {
      auto k = fault_kind_from(p.at("fault").str());
      if (!k) p.at("fault").fail("unknown fault kind");
      e.payload = TaskFailure{parse_ref(p.at("task")), p.at("machine").str(), *k, p.at("detail").str()};
      break;
    }
    case EventKind::reschedule:
      e.payload = Rescheduled{parse_schedule(p.at("schedule")), p.at("reason").str()};
      break;
    case EventKind::appliance_status:
      e.payload = ApplianceStatus{p.at("appliance").str(), p.at("busy").boolean(), p.at("temperature_c").number(),
                                  static_cast<int>(p.at("error_code").integer())};
      break;
    case EventKind::operator_alert:
      e.payload = Alert{p.at("message").str()};
      break;
  }
  return e;
}

inline std::vector<KitchenEvent> parse_ndjson(const std::string& text, const std::string& source = "log") {
  std::vector<KitchenEvent> out;
  std::istringstream in(text);
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    if (line.empty()) continue;
    try {
      Document d(line, source);
      out.push_back(parse_event(d.root()));
    } catch (const SchemaError& e) {
      std::string what = e.what();
      throw SchemaError(source, e.path(), n, "invalid event record (" + what.substr(what.rfind(": ") + 2) + ")");
    }
  }
  return out;
}

}  // namespace kcell

#endif  // KCELL_IO_HPP_
