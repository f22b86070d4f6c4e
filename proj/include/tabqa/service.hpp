#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <string>

#include "json.hpp"
#include "tabqa/neural.hpp"
#include "tabqa/pipeline.hpp"
#include "tabqa/schema.hpp"
// After Eigen: <resolv.h> (pulled in by httplib) defines a `_res` macro.
#include "httplib.h"

namespace tabqa::service {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

inline constexpr const char* kVersion = "1.0.0";

struct Config {
  int port = 8080;
  std::string host = "127.0.0.1";
  std::size_t max_upload = 10u << 20;
  std::chrono::seconds ttl{3600};
  std::chrono::milliseconds deadline{5000};
  std::size_t beam_width = 5;
  std::string cors_origin = "*";
  std::optional<std::filesystem::path> spill_dir;

  /// Overrides from TABQA_PORT, TABQA_MAX_UPLOAD, TABQA_TTL (seconds),
  /// TABQA_BEAM and TABQA_SPILL_DIR.
  static Config from_env() { return from_env(Config()); }
  static Config from_env(Config c) {
    auto get = [](const char* k) -> std::optional<std::string> {
      const char* v = std::getenv(k);
      if (!v || !*v) return std::nullopt;
      return std::string(v);
    };
    try {
      if (auto v = get("TABQA_PORT")) c.port = std::stoi(*v);
      if (auto v = get("TABQA_MAX_UPLOAD")) c.max_upload = std::stoull(*v);
      if (auto v = get("TABQA_TTL")) c.ttl = std::chrono::seconds(std::stoll(*v));
      if (auto v = get("TABQA_BEAM")) c.beam_width = std::stoull(*v);
    } catch (const std::exception&) {
      throw PreconditionError("malformed TABQA_* environment value");
    }
    if (auto v = get("TABQA_SPILL_DIR")) c.spill_dir = *v;
    return c;
  }
};

struct Response {
  int status = 200;
  json body;
};

// ---------------------------------------------------------------------------
// Session store

struct Session {
  std::string id;
  std::shared_ptr<const DataTable> table;
  std::shared_ptr<const SimilarityProvider> provider;
  Clock::time_point created_at;
  std::chrono::seconds ttl;
};

/// In-memory table sessions with TTL eviction and an optional spill
/// directory holding one canonical CSV per live table.
class SessionStore {
public:
  explicit SessionStore(std::chrono::seconds ttl, std::optional<std::filesystem::path> spill = std::nullopt,
                        std::function<Clock::time_point()> now = [] { return Clock::now(); })
      : ttl_(ttl), spill_(std::move(spill)), now_(std::move(now)), rng_(std::random_device{}()) {
    if (spill_) std::filesystem::create_directories(*spill_);
  }

  std::shared_ptr<const Session> insert(DataTable t) {
    auto s = std::make_shared<Session>();
    auto table = std::make_shared<const DataTable>(std::move(t));
    s->provider = make_reference_provider(*table);
    s->table = table;
    s->ttl = ttl_;
    std::unique_lock lock(mu_);
    evict_locked();
    s->created_at = now_();
    do {
      s->id = make_id_locked();
    } while (sessions_.count(s->id));
    sessions_[s->id] = s;
    if (spill_) {
      std::ofstream out(*spill_ / (s->id + ".csv"), std::ios::binary);
      out << s->table->to_csv();
    }
    return s;
  }

  std::shared_ptr<const Session> find(const std::string& id) {
    {
      std::unique_lock lock(mu_);
      evict_locked();
      auto it = sessions_.find(id);
      if (it != sessions_.end()) return it->second;
    }
    return restore(id);
  }

  std::size_t size() {
    std::unique_lock lock(mu_);
    evict_locked();
    return sessions_.size();
  }

private:
  std::string make_id_locked() {
    static const char* hex = "0123456789abcdef";
    std::string id = "t";
    auto v = rng_();
    for (int i = 0; i < 16; ++i, v >>= 4) id.push_back(hex[v & 15]);
    return id;
  }

  void evict_locked() {
    auto now = now_();
    for (auto it = sessions_.begin(); it != sessions_.end();) {
      if (now - it->second->created_at >= it->second->ttl) {
        if (spill_) std::filesystem::remove(*spill_ / (it->first + ".csv"));
        it = sessions_.erase(it);
      } else {
        ++it;
      }
    }
  }

  /// A spilled table (e.g. from before a restart) comes back with a fresh TTL.
  std::shared_ptr<const Session> restore(const std::string& id) {
    if (!spill_ || id.find_first_of("/\\.") != std::string::npos) return nullptr;
    auto path = *spill_ / (id + ".csv");
    if (!std::filesystem::exists(path)) return nullptr;
    auto table = std::make_shared<const DataTable>(load_table_file(path));
    auto s = std::make_shared<Session>();
    s->id = id;
    s->table = table;
    s->provider = make_reference_provider(*table);
    s->ttl = ttl_;
    std::unique_lock lock(mu_);
    s->created_at = now_();
    sessions_[id] = s;
    return s;
  }

  std::chrono::seconds ttl_;
  std::optional<std::filesystem::path> spill_;
  std::function<Clock::time_point()> now_;
  std::mt19937_64 rng_;
  std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<const Session>> sessions_;
};

// ---------------------------------------------------------------------------
// Handlers

inline json error_body(const Error& e) {
  json j = {{"error", e.kind()}, {"message", e.what()}};
  if (auto* p = dynamic_cast<const ParseError*>(&e)) j["row"] = p->row();
  if (auto* u = dynamic_cast<const Unanswerable*>(&e)) j["reasons"] = u->reasons();
  return j;
}

inline int status_of(const Error& e) {
  const auto& k = e.kind();
  if (k == "ParseError" || k == "EmptyInput" || k == "PreconditionError" || k == "LengthError") return 400;
  if (k == "DeadlineExceeded") return 504;
  return 422;
}

/// Transport-independent request handling; the HTTP server delegates here.
class Service {
public:
  explicit Service(Config cfg = {}, std::function<Clock::time_point()> now = [] { return Clock::now(); })
      : cfg_(std::move(cfg)), store_(cfg_.ttl, cfg_.spill_dir, std::move(now)) {}

  void set_neural(std::shared_ptr<const neural::NeuralDecomposer> d) { neural_ = std::move(d); }
  const Config& config() const { return cfg_; }
  SessionStore& store() { return store_; }

  Response upload(const std::string& body, const std::string& name = "table") {
    if (body.size() > cfg_.max_upload)
      return {413, {{"error", "PayloadTooLarge"}, {"message", "upload exceeds " + std::to_string(cfg_.max_upload) + " bytes"}}};
    return guard([&] {
      auto s = store_.insert(load_table(body, name));
      return Response{200, {{"table_id", s->id}, {"schema", s->table->schema_json()}}};
    });
  }

  Response suggestions(const std::string& id, const std::optional<std::string>& column) {
    auto s = store_.find(id);
    if (!s) return not_found(id);
    return guard([&] { return Response{200, json(tabqa::suggestions(*s->table, column))}; });
  }

  Response ask(const std::string& id, const std::string& body) {
    auto s = store_.find(id);
    if (!s) return not_found(id);
    return guard([&] {
      auto req = parse_body(body);
      auto q = req.value("question", std::string());
      AskOptions opt;
      opt.search.beam_width = req.value("beam_width", cfg_.beam_width);
      opt.deadline = cfg_.deadline;
      opt.backend = backend(req.value("backend", std::string("rule")));
      return Response{200, to_json(tabqa::ask(q, *s->table, opt, s->provider))};
    });
  }

  Response decompose(const std::string& body) {
    return guard([&] {
      auto req = parse_body(body);
      auto id = req.value("table_id", std::string());
      auto s = store_.find(id);
      if (!s) return not_found(id);
      ResolveOptions ro;
      ro.provider = s->provider;
      ro.backend = backend(req.value("backend", std::string("rule")));
      auto q = req.value("question", std::string());
      return Response{200, to_json(resolve(q, *s->table, ro))};
    });
  }

  Response health() { return {200, {{"status", "ok"}, {"version", kVersion}, {"sessions", store_.size()}}}; }

  Response schemas(const std::optional<std::string>& name = std::nullopt) {
    return guard([&] { return Response{200, name ? schema::get(*name) : schema::all()}; });
  }

private:
  template <class F>
  Response guard(F&& f) {
    try {
      return f();
    } catch (const Error& e) {
      return {status_of(e), error_body(e)};
    } catch (const json::exception& e) {
      return {400, {{"error", "BadRequest"}, {"message", e.what()}}};
    } catch (const std::exception& e) {
      return {500, {{"error", "Internal"}, {"message", e.what()}}};
    }
  }

  static json parse_body(const std::string& body) {
    auto j = json::parse(body);
    if (!j.is_object()) throw PreconditionError("request body must be a JSON object");
    return j;
  }

  static Response not_found(const std::string& id) {
    return {404, {{"error", "NotFound"}, {"message", "unknown table id '" + id + "'"}}};
  }

  const Decomposer* backend(const std::string& name) const {
    if (name == "rule") return nullptr;
    if (name == "neural") {
      if (!neural_) throw PreconditionError("no neural model loaded");
      return neural_.get();
    }
    throw PreconditionError("unknown backend '" + name + "'");
  }

  Config cfg_;
  SessionStore store_;
  std::shared_ptr<const neural::NeuralDecomposer> neural_;
};

// ---------------------------------------------------------------------------
// HTTP binding

inline void reply(httplib::Response& res, const Response& r) {
  res.status = r.status;
  res.set_content(r.body.dump(), "application/json");
}

/// Registers every route on `srv`. The Service must outlive the server.
inline void bind(httplib::Server& srv, Service& svc) {
  const auto origin = svc.config().cors_origin;
  srv.set_payload_max_length(svc.config().max_upload + 1);
  srv.set_post_routing_handler([origin](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", origin);
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
  });
  srv.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  srv.Post("/api/tables", [&svc](const httplib::Request& req, httplib::Response& res) {
    std::string name = req.has_param("name") ? req.get_param_value("name") : "table";
    reply(res, svc.upload(req.body, name));
  });
  srv.Get(R"(/api/tables/([^/]+)/suggestions)", [&svc](const httplib::Request& req, httplib::Response& res) {
    std::optional<std::string> column;
    if (req.has_param("column")) column = req.get_param_value("column");
    reply(res, svc.suggestions(req.matches[1], column));
  });
  srv.Post(R"(/api/tables/([^/]+)/ask)", [&svc](const httplib::Request& req, httplib::Response& res) {
    reply(res, svc.ask(req.matches[1], req.body));
  });
  srv.Post("/api/decompose", [&svc](const httplib::Request& req, httplib::Response& res) {
    reply(res, svc.decompose(req.body));
  });
  srv.Get("/api/health", [&svc](const httplib::Request&, httplib::Response& res) { reply(res, svc.health()); });
  srv.Get("/api/schema", [&svc](const httplib::Request&, httplib::Response& res) { reply(res, svc.schemas()); });
  srv.Get(R"(/api/schema/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    reply(res, svc.schemas(std::string(req.matches[1])));
  });
}

} // namespace tabqa::service
