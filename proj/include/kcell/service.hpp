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

// Long-running engine session behind an HTTP surface. One engine thread
// owns the Engine; request handlers post closures to it and read
// immutable snapshots.

#pragma once

#include <httplib.h>
// resolv.h (pulled in by httplib) defines _res, which Eigen uses as a name.
#ifdef _res
#undef _res
#endif

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "kcell/engine.hpp"
#include "kcell/gantt.hpp"
#include "kcell/io.hpp"

namespace kcell {

struct ServiceConfig {
  /// Sim seconds per wall-clock second.
  double rate = 1.0;
  bool start_running = true;
  /// Append-only NDJSON copy of the event log; empty to disable.
  std::string events_out;
};

struct Snapshot {
  std::uint64_t seq = 0;
  Seconds clock_s = 0;
  bool running = false;
  double rate = 1.0;
  Json schedule;
  Json gantt;
  Json machines;
};

struct ListenAddress {
  std::string host = "127.0.0.1";
  int port = 8080;
};

/// Parses "host:port", ":port" or "host"; unset or empty gives the default.
inline ListenAddress parse_listen(const char* text) {
  ListenAddress a;
  if (!text || !*text) return a;
  std::string s = text;
  auto colon = s.rfind(':');
  if (colon == std::string::npos) {
    a.host = s;
    return a;
  }
  if (colon > 0) a.host = s.substr(0, colon);
  try {
    std::size_t used = 0;
    a.port = std::stoi(s.substr(colon + 1), &used);
    if (used != s.size() - colon - 1 || a.port < 0 || a.port > 65535) throw Error("");
  } catch (const std::exception&) {
    throw Error("bad listen address " + s);
  }
  return a;
}

inline ListenAddress listen_from_env() { return parse_listen(std::getenv("KCELL_LISTEN")); }

/// One server-sent event frame.
inline std::string sse_frame(const KitchenEvent& e) {
  return "id: " + std::to_string(e.seq) + "\nevent: " + std::string(to_string(e.kind)) + "\ndata: " +
         to_json(e).dump() + "\n\n";
}

class Service {
 public:
  Service(Engine engine, std::optional<RecipeBook> book = std::nullopt, ServiceConfig config = {})
      : engine_(std::move(engine)), book_(std::move(book)), config_(std::move(config)) {
    if (!(config_.rate > 0)) throw Error("rate must be positive");
    running_ = config_.start_running;
    if (!config_.events_out.empty()) {
      out_.open(config_.events_out, std::ios::app);
      if (!out_) throw Error("cannot open " + config_.events_out);
    }
    events_ = engine_.log();
    engine_.on_event = [this](const KitchenEvent& e) { publish(e); };
    publish_snapshot();
    routes();
  }

  ~Service() { stop(); }

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Starts the engine thread and binds; port 0 picks a free port.
  /// Returns the bound port.
  int bind(const ListenAddress& at) {
    int port = at.port == 0 ? server_.bind_to_any_port(at.host) : (server_.bind_to_port(at.host, at.port) ? at.port : -1);
    if (port < 0) throw Error("cannot listen on " + at.host + ":" + std::to_string(at.port));
    if (!thread_.joinable()) thread_ = std::thread([this] { loop(); });
    return port;
  }

  /// Serves until stop(); call after bind().
  void serve() { server_.listen_after_bind(); }

  void stop() {
    {
      std::lock_guard lk(mu_);
      if (quit_) return;
      quit_ = true;
    }
    cv_.notify_all();
    events_cv_.notify_all();
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  std::shared_ptr<const Snapshot> snapshot() const {
    std::lock_guard lk(snap_mu_);
    return snapshot_;
  }

  /// Events with seq > `after`, waiting up to `wait` for at least one.
  std::vector<KitchenEvent> events_after(std::uint64_t after, std::chrono::milliseconds wait = {}) const {
    std::unique_lock lk(events_mu_);
    events_cv_.wait_for(lk, wait, [&] { return quit_ || (!events_.empty() && events_.back().seq > after); });
    std::vector<KitchenEvent> out;
    for (auto it = events_.rbegin(); it != events_.rend() && it->seq > after; ++it) out.push_back(*it);
    return {out.rbegin(), out.rend()};
  }

  std::uint64_t head_seq() const {
    std::lock_guard lk(events_mu_);
    return events_.empty() ? 0 : events_.back().seq;
  }

  /// Runs `f` on the engine thread and returns its result.
  template <typename F>
  auto call(F f) -> decltype(f(std::declval<Engine&>())) {
    using R = decltype(f(std::declval<Engine&>()));
    auto done = std::make_shared<std::promise<R>>();
    auto result = done->get_future();
    {
      std::lock_guard lk(mu_);
      if (quit_) throw Error("service stopped");
      commands_.push_back([done, f = std::move(f)](Engine& e) mutable {
        try {
          if constexpr (std::is_void_v<R>) {
            f(e);
            done->set_value();
          } else {
            done->set_value(f(e));
          }
        } catch (...) {
          done->set_exception(std::current_exception());
        }
      });
    }
    cv_.notify_all();
    return result.get();
  }

 private:
  using Clock = std::chrono::steady_clock;

  void publish(const KitchenEvent& e) {
    if (out_.is_open()) out_ << to_json(e).dump() << '\n' << std::flush;
    {
      std::lock_guard lk(events_mu_);
      events_.push_back(e);
    }
    events_cv_.notify_all();
  }

  // Engine thread only.
  void publish_snapshot() {
    auto s = std::make_shared<Snapshot>();
    const PlannerState& st = engine_.state();
    s->seq = engine_.log().empty() ? 0 : engine_.log().back().seq;
    s->clock_s = engine_.clock();
    s->running = running_;
    s->rate = config_.rate;
    s->schedule = to_json(st.schedule);
    s->gantt = gantt_json(gantt_rows(st.schedule, st.machines, st.orders));
    s->machines = Json::array();
    for (const auto& v : engine_.sim().view()) {
      Json m{{"id", v.id},
             {"kind", to_string(v.kind)},
             {"available", !st.unavailable.count(v.id)},
             {"task", v.task ? to_json(*v.task) : Json()}};
      if (v.image)
        m["appliance"] = {{"mcu_id", v.image->mcu_id},
                          {"opcode", to_string(v.image->opcode)},
                          {"busy", v.image->busy},
                          {"temperature_c", v.image->temperature_c},
                          {"error_code", v.image->error_code},
                          {"update", v.image->update},
                          {"responsive", v.image->responsive}};
      s->machines.push_back(std::move(m));
    }
    std::lock_guard lk(snap_mu_);
    snapshot_ = std::move(s);
  }

  void loop() {
    auto last = Clock::now();
    for (;;) {
      std::deque<std::function<void(Engine&)>> batch;
      bool step = false;
      {
        std::unique_lock lk(mu_);
        auto ready = [&] { return quit_ || !commands_.empty(); };
        if (running_) {
          auto due = last + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(1.0 / config_.rate));
          cv_.wait_until(lk, due, ready);
          if (!quit_ && commands_.empty() && Clock::now() >= due) {
            step = true;
            // Never burst to catch up after a stall.
            last = std::max(due, Clock::now() - std::chrono::milliseconds(100));
          }
        } else {
          cv_.wait(lk, ready);
          last = Clock::now();
        }
        if (quit_) break;
        batch.swap(commands_);
      }
      for (auto& c : batch) c(engine_);
      if (step) engine_.step();
      publish_snapshot();
    }
    // Release callers still waiting on queued commands.
    std::lock_guard lk(mu_);
    commands_.clear();
  }

  static void reply(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void error(httplib::Response& res, int status, const std::string& message, Json extra = Json::object()) {
    extra["error"] = message;
    reply(res, status, extra);
  }

  static void schema_error(httplib::Response& res, const SchemaError& e) {
    error(res, 400, e.what(), {{"path", e.path()}, {"line", e.line()}});
  }

  void routes() {
    server_.Get("/schedule", [this](const httplib::Request&, httplib::Response& res) {
      auto s = snapshot();
      reply(res, 200, {{"seq", s->seq}, {"clock_s", s->clock_s}, {"schedule", s->schedule}, {"gantt", s->gantt}});
    });

    server_.Get("/machines", [this](const httplib::Request&, httplib::Response& res) {
      reply(res, 200, {{"machines", snapshot()->machines}});
    });

    server_.Post("/orders", [this](const httplib::Request& req, httplib::Response& res) {
      Order order;
      try {
        order = parse_order_text(req.body, engine_.kitchen(), book_ ? &*book_ : nullptr);
      } catch (const SchemaError& e) {
        return schema_error(res, e);
      }
      struct Outcome {
        std::optional<std::string> rejected;
        int id = -1;
        Seconds at_s = 0;
      };
      Outcome o = call([&order](Engine& e) {
        Outcome out;
        out.rejected = e.check_order(order);
        if (!out.rejected) {
          out.at_s = e.clock();
          out.id = e.place_order(order);
        }
        return out;
      });
      if (o.rejected) return error(res, 422, "order infeasible", {{"diagnosis", *o.rejected}});
      reply(res, 201, {{"order_id", o.id}, {"at_s", o.at_s}});
    });

    server_.Post("/faults", [this](const httplib::Request& req, httplib::Response& res) {
      std::string machine, detail;
      FaultKind kind = FaultKind::machine_failure;
      Seconds after_s = 0;
      try {
        Document d(req.body, "request");
        auto root = d.root();
        root.only({"machine", "kind", "detail", "after_s"});
        auto m = root.at("machine");
        machine = m.str();
        if (!engine_.kitchen().has(machine)) m.fail("unknown machine " + machine);
        if (auto k = root.get("kind")) {
          auto parsed = fault_kind_from(k->str());
          if (!parsed) k->fail("expected grasp_misalignment or machine_failure");
          kind = *parsed;
        }
        if (auto x = root.get("detail")) detail = x->str();
        if (auto x = root.get("after_s")) after_s = x->nonnegative();
      } catch (const SchemaError& e) {
        return schema_error(res, e);
      }
      auto outcome = call([&](Engine& e) -> std::variant<TaskRef, std::string> {
        if (!running_) return std::string("simulation not running");
        try {
          return e.inject_fault(machine, kind, detail, after_s);
        } catch (const Error& err) {
          return std::string(err.what());
        }
      });
      if (auto* msg = std::get_if<std::string>(&outcome)) return error(res, 409, *msg);
      reply(res, 202, {{"task", to_json(std::get<TaskRef>(outcome))}});
    });

    server_.Post("/sim/start", [this](const httplib::Request&, httplib::Response& res) {
      reply(res, 200, call([this](Engine& e) {
              running_ = true;
              return status(e);
            }));
    });

    server_.Post("/sim/pause", [this](const httplib::Request&, httplib::Response& res) {
      reply(res, 200, call([this](Engine& e) {
              running_ = false;
              return status(e);
            }));
    });

    server_.Post("/sim/rate", [this](const httplib::Request& req, httplib::Response& res) {
      double rate = 0;
      try {
        Document d(req.body, "request");
        auto root = d.root();
        root.only({"rate"});
        auto r = root.at("rate");
        rate = r.number();
        if (!(rate > 0) || rate > 1e6) r.fail("expected rate in (0, 1e6]");
      } catch (const SchemaError& e) {
        return schema_error(res, e);
      }
      reply(res, 200, call([this, rate](Engine& e) {
              config_.rate = rate;
              return status(e);
            }));
    });

    server_.Get("/events", [this](const httplib::Request& req, httplib::Response& res) {
      std::uint64_t cursor = 0;
      try {
        if (req.has_param("since"))
          cursor = std::stoull(req.get_param_value("since"));
        else if (req.has_header("Last-Event-ID"))
          cursor = std::stoull(req.get_header_value("Last-Event-ID"));
      } catch (const std::exception&) {
        return error(res, 400, "bad cursor");
      }
      if (cursor > head_seq()) return error(res, 409, "cursor ahead of log; resync from /schedule");
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider("text/event-stream", [this, cursor](std::size_t, httplib::DataSink& sink) mutable {
        auto batch = events_after(cursor, std::chrono::milliseconds(500));
        if (quit_) {
          sink.done();
          return true;
        }
        std::string chunk;
        for (const auto& e : batch) {
          chunk += sse_frame(e);
          cursor = e.seq;
        }
        // Comment frames keep idle streams alive and expose closed sockets.
        if (chunk.empty()) chunk = ": idle\n\n";
        return sink.write(chunk.data(), chunk.size());
      });
    });
  }

  // Engine thread only.
  Json status(const Engine& e) const {
    return {{"running", running_.load()}, {"rate", config_.rate}, {"clock_s", e.clock()}};
  }

  Engine engine_;
  std::optional<RecipeBook> book_;
  ServiceConfig config_;
  std::ofstream out_;
  httplib::Server server_;
  std::thread thread_;

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::function<void(Engine&)>> commands_;
  std::atomic<bool> running_{false};
  std::atomic<bool> quit_{false};

  mutable std::mutex snap_mu_;
  std::shared_ptr<const Snapshot> snapshot_;

  mutable std::mutex events_mu_;
  mutable std::condition_variable events_cv_;
  std::vector<KitchenEvent> events_;
};

}  // namespace kcell
