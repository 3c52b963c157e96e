// Copyright 2026 The fbmine Authors.
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

#ifndef FBMINE_ANNOTATE_SERVER_HPP_
#define FBMINE_ANNOTATE_SERVER_HPP_

// HTTP front end for AnnotationStore.
//
//   GET  /api/health
//   GET  /api/conversations?status=&annotator=
//   GET  /api/conversations/{id}            annotator via X-Annotator-Id header or ?annotator=
//   POST /api/conversations/{id}/labels     {"annotator_id", "labels": [{"turn_index", "label"}]}
//   GET  /api/agreement?annotators=a,b&label-set=binary|three|fine
//   GET  /api/export                        gold label JSONL
//
// "label" may also be an array of candidate labels, which is collapsed with
// resolve_dual (a positive/negative mix is rejected with 422).

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "fbmine/annotate.hpp"
#include "fbmine/gateway.hpp"

namespace fbmine {

class AnnotationServer {
 public:
  explicit AnnotationServer(AnnotationStore& store, std::optional<std::filesystem::path> ui_dir = std::nullopt)
      : store_(store) {
    // httplib's default also sets SO_REUSEPORT, which would let a second server share the port silently.
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof yes);
    });
    routes();
    if (ui_dir && std::filesystem::is_directory(*ui_dir)) server_.set_mount_point("/", ui_dir->string());
  }

  // Binds without serving; throws IoError when the port is unavailable.
  // Port 0 picks a free port.
  int bind(const std::string& host, int port) {
    if (port == 0) {
      port_ = server_.bind_to_any_port(host);
      if (port_ < 0) fail(ErrorCode::kIoError, "cannot bind " + host);
    } else {
      if (!server_.bind_to_port(host, port)) {
        fail(ErrorCode::kIoError, "cannot bind " + host + ":" + std::to_string(port));
      }
      port_ = port;
    }
    return port_;
  }

  // Blocks until stop().
  void serve() { server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  bool running() const { return server_.is_running(); }
  void wait_until_ready() const { server_.wait_until_ready(); }
  int port() const noexcept { return port_; }

 private:
  static void send_json(httplib::Response& res, int status, const ojson& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void send_error(httplib::Response& res, int status, const std::string& message) {
    send_json(res, status, ojson{{"error", message}});
  }

  template <typename Fn>
  static void guarded(httplib::Response& res, Fn&& fn) {
    try {
      fn();
    } catch (const StoreError& e) {
      send_error(res, e.http_status(), e.what());
    } catch (const Error& e) {
      send_error(res, e.code() == ErrorCode::kIoError ? 500 : 422, e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  }

  static std::optional<std::string> annotator_of(const httplib::Request& req) {
    if (req.has_header("X-Annotator-Id")) return req.get_header_value("X-Annotator-Id");
    if (req.has_param("annotator")) return req.get_param_value("annotator");
    return std::nullopt;
  }

  static FineLabel parse_label_value(const json& value) {
    if (value.is_string()) {
      const auto l = parse_fine_label(value.get<std::string>());
      if (!l) throw StoreError(422, ErrorCode::kUnknownPattern, "unknown label '" + value.get<std::string>() + "'");
      return *l;
    }
    if (value.is_array() && !value.empty()) {
      std::vector<FineLabel> candidates;
      for (const auto& v : value) candidates.push_back(parse_label_value(v));
      try {
        return resolve_dual(std::span<const FineLabel>(candidates));
      } catch (const Error& e) {
        throw StoreError(422, e.code(), e.what());
      }
    }
    throw StoreError(422, ErrorCode::kInvalidArgument, "label must be a string or a list of strings");
  }

  void routes() {
    server_.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, ojson{{"status", "ok"}});
    });

    server_.Get("/api/conversations", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        std::optional<TaskStatus> status;
        if (req.has_param("status") && !req.get_param_value("status").empty()) {
          status = parse_task_status(req.get_param_value("status"));
          if (!status) return send_error(res, 400, "unknown status '" + req.get_param_value("status") + "'");
        }
        std::optional<std::string> annotator;
        if (req.has_param("annotator") && !req.get_param_value("annotator").empty()) {
          annotator = req.get_param_value("annotator");
        }
        ojson items = ojson::array();
        for (const auto& s : store_.list(status, annotator)) items.push_back(to_json(s));
        send_json(res, 200, items);
      });
    });

    server_.Get(R"(/api/conversations/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const std::string id = req.matches[1];
        const auto conv = store_.conversation(id);
        if (!conv) return send_error(res, 404, "unknown conversation '" + id + "'");
        ojson out;
        out["conversation"] = to_json(*conv);
        out["task"] = to_json(*store_.summary(id));
        const auto annotator = annotator_of(req);
        std::map<std::size_t, FineLabel> existing;
        if (annotator) existing = store_.labels_of(id, *annotator);
        ojson slots = ojson::array();
        for (std::size_t i = 2; i <= conv->user_turn_count(); ++i) {
          ojson slot;
          slot["turn_index"] = i;
          slot["text"] = conv->user_turn(i);
          const auto it = existing.find(i);
          slot["label"] = it == existing.end() ? ojson(nullptr) : ojson(std::string(to_string(it->second)));
          slots.push_back(std::move(slot));
        }
        out["annotator_id"] = annotator ? ojson(*annotator) : ojson(nullptr);
        out["slots"] = std::move(slots);
        send_json(res, 200, out);
      });
    });

    server_.Post(R"(/api/conversations/([^/]+)/labels)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const std::string id = req.matches[1];
        json body;
        try {
          body = json::parse(req.body);
        } catch (const json::parse_error& e) {
          return send_error(res, 400, std::string("malformed JSON body: ") + e.what());
        }
        if (!body.is_object() || !body.contains("labels") || !body["labels"].is_array()) {
          return send_error(res, 422, "body needs a labels array");
        }
        std::string annotator = body.value("annotator_id", "");
        if (annotator.empty()) annotator = annotator_of(req).value_or("");
        std::vector<std::pair<std::size_t, FineLabel>> labels;
        for (const auto& item : body["labels"]) {
          if (!item.is_object() || !item.contains("turn_index") || !item["turn_index"].is_number_integer() ||
              !item.contains("label")) {
            return send_error(res, 422, "each label needs an integer turn_index and a label");
          }
          const auto turn = item["turn_index"].get<long long>();
          if (turn < 2) return send_error(res, 422, "turn_index must be >= 2; the first user turn is never labeled");
          labels.emplace_back(static_cast<std::size_t>(turn), parse_label_value(item["label"]));
        }
        send_json(res, 200, to_json(store_.submit(id, annotator, labels)));
      });
    });

    server_.Get("/api/agreement", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const std::string pair = req.get_param_value("annotators");
        const auto comma = pair.find(',');
        if (comma == std::string::npos || comma == 0 || comma + 1 >= pair.size()) {
          return send_error(res, 400, "annotators must be 'a,b'");
        }
        std::string set_name = req.has_param("label-set") ? req.get_param_value("label-set") : "binary";
        const auto set = parse_label_set(set_name);
        if (!set) return send_error(res, 400, "unknown label-set '" + set_name + "'");
        const auto result = store_.agreement(pair.substr(0, comma), pair.substr(comma + 1), *set);
        send_json(res, 200,
                  ojson{{"kappa", result.kappa},
                        {"n_items", result.n_items},
                        {"n_conversations", result.n_conversations},
                        {"label_set", std::string(to_string(*set))}});
      });
    });

    server_.Get("/api/export", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] {
        res.status = 200;
        res.set_content(store_.export_jsonl(), "application/x-ndjson");
      });
    });
  }

  AnnotationStore& store_;
  httplib::Server server_;
  int port_ = -1;
};

}  // namespace fbmine

#endif  // FBMINE_ANNOTATE_SERVER_HPP_
