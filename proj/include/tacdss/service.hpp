#pragma once

// HTTP JSON scoring service. Handlers are plain functions of the request body
// so they can be exercised without a socket; serve() binds them to httplib.

#include <memory>
#include <optional>
#include <string>
#include <utility>

#include <json.hpp>

#include "tacdss/datagen.hpp"
#include "tacdss/persist.hpp"
#include "tacdss/pipeline.hpp"

// After Eigen: <resolv.h>, pulled in by httplib, defines a `_res` macro that
// collides with Eigen parameter names.
#include <httplib.h>

namespace tacdss::service {

using Json = nlohmann::ordered_json;

inline constexpr std::size_t kMaxBatch = 1000;
inline constexpr const char* kJsonContentType = "application/json; charset=utf-8";

struct Reply {
  int status = 200;
  std::string body;

  friend bool operator==(const Reply&, const Reply&) = default;
};

inline Reply json_reply(int status, const Json& j) { return {status, j.dump() + "\n"}; }

inline Reply error_reply(int status, const std::string& message, std::optional<std::string> field = std::nullopt) {
  Json j{{"error", message}};
  if (field) j["field"] = *field;
  return json_reply(status, j);
}

class ScoringService {
 public:
  ScoringService() = default;
  explicit ScoringService(persist::ModelFile model)
      : model_(std::make_shared<const persist::ModelFile>(std::move(model))),
        model_id_(persist::model_id(*model_)) {}

  bool has_model() const { return model_ != nullptr; }
  const std::string& model_id() const { return model_id_; }

  Reply score(const std::string& body) const {
    if (!has_model()) return no_model();
    Json request;
    try {
      request = Json::parse(body);
    } catch (const Json::parse_error& e) {
      return error_reply(400, std::string("malformed JSON: ") + e.what());
    }
    Json response;
    if (auto err = score_one(request, response)) return *err;
    return json_reply(200, response);
  }

  Reply batch_score(const std::string& body) const {
    if (!has_model()) return no_model();
    Json request;
    try {
      request = Json::parse(body);
    } catch (const Json::parse_error& e) {
      return error_reply(400, std::string("malformed JSON: ") + e.what());
    }
    if (!request.is_array()) return error_reply(400, "batch body must be a JSON array");
    if (request.empty() || request.size() > kMaxBatch) {
      return error_reply(400, "batch must hold between 1 and " + std::to_string(kMaxBatch) + " requests, got " +
                                  std::to_string(request.size()));
    }
    Json responses = Json::array();
    for (std::size_t k = 0; k < request.size(); ++k) {
      Json response;
      if (auto err = score_one(request[k], response)) {
        Json j = Json::parse(err->body);
        j["index"] = k;
        return json_reply(err->status, j);
      }
      responses.push_back(std::move(response));
    }
    return json_reply(200, responses);
  }

  Reply model_info() const {
    if (!has_model()) return no_model();
    const auto& f = *model_;
    const auto& clusters = f.model.clusters;
    Json centers = Json::array();
    for (int rank = 0; rank < kRegionCount; ++rank) {
      const int idx = clusters.cluster_of_rank(rank);
      const ScenarioEvent c = denormalize(clusters.centers.centers.row(idx).transpose());
      centers.push_back(Json{{"label", kRegionLabels[rank]},
                             {"rank", rank},
                             {"cluster_index", idx},
                             {"fuel", c.fuel},
                             {"intercept_time", c.intercept_time},
                             {"weapon", c.weapon},
                             {"danger", c.danger},
                             {"latent_score", center_latent_score(clusters.centers.centers.row(idx).transpose())}});
    }
    Json ordering = Json::array();
    for (int i = 0; i < kRegionCount; ++i) ordering.push_back(kRegionLabels[clusters.ordering[i]]);
    return json_reply(200, Json{{"model_id", model_id_},
                                {"format_version", f.format_version},
                                {"layer_sizes", f.model.network.layer_sizes()},
                                {"hidden_activation", nnet::to_string(f.model.network.hidden_activation())},
                                {"labels", kRegionLabels},
                                {"ordering", ordering},
                                {"centers", centers},
                                {"training", persist::to_json(f.training)},
                                {"provenance", persist::to_json(f).at("provenance")}});
  }

 private:
  static Reply no_model() { return error_reply(503, "no model loaded"); }

  /// Fills `response` or returns the error reply for this request object.
  std::optional<Reply> score_one(const Json& request, Json& response) const {
    if (!request.is_object()) return error_reply(400, "score request must be a JSON object");
    std::array<double, 4> v{};
    for (std::size_t k = 0; k < kFactorRanges.size(); ++k) {
      const auto& range = kFactorRanges[k];
      const std::string name(range.name);
      const auto it = request.find(name);
      if (it == request.end()) return error_reply(400, "missing field '" + name + "'", name);
      if (!it->is_number()) return error_reply(400, "field '" + name + "' must be a number", name);
      v[k] = it->get<double>();
      if (!(v[k] >= range.lo && v[k] <= range.hi)) {
        return error_reply(400, "field '" + name + "' out of range: " + range_text(range), name);
      }
    }
    const ScoreResult result = decision_score(model_->model, ScenarioEvent::from_values(v));
    response = Json{{"score", result.score},
                    {"memberships",
                     {{"bad", result.memberships[0]},
                      {"acceptable", result.memberships[1]},
                      {"good", result.memberships[2]}}},
                    {"model_id", model_id_}};
    return std::nullopt;
  }

  std::shared_ptr<const persist::ModelFile> model_;
  std::string model_id_;
};

/// Routes the scoring API onto `server`; static console files are mounted at
/// `/` when `static_dir` is non-empty.
inline void install_routes(httplib::Server& server, std::shared_ptr<const ScoringService> service,
                           const std::string& static_dir = {}) {
  auto send = [](httplib::Response& res, const Reply& reply) {
    res.status = reply.status;
    res.set_content(reply.body, kJsonContentType);
  };
  server.Post("/api/v1/score", [service, send](const httplib::Request& req, httplib::Response& res) {
    send(res, service->score(req.body));
  });
  server.Post("/api/v1/batch_score", [service, send](const httplib::Request& req, httplib::Response& res) {
    send(res, service->batch_score(req.body));
  });
  server.Get("/api/v1/model", [service, send](const httplib::Request&, httplib::Response& res) {
    send(res, service->model_info());
  });
  if (!static_dir.empty()) server.set_mount_point("/", static_dir);
}

}  // namespace tacdss::service
