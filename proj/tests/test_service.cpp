#include <gtest/gtest.h>

#include <thread>

#include "tacdss/service.hpp"

using namespace tacdss;
using service::Json;
using service::ScoringService;

namespace {

// Seed-42 master, split A, experiment seed 1, full 1500-epoch training.
class DeskService : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const ExperimentResult r = run_experiment(generate_master(1000, 42).events, Split::kA, 1);
    persist::ModelFile f;
    f.model = r.model;
    f.fcm_iterations = r.fcm_iterations;
    f.network_seed = r.network_seed;
    f.training = persist::TrainSummary::of(r.training);
    f.provenance = {"feedfacefeedface", 1000, "A", 1, std::nullopt};
    file_ = new persist::ModelFile(f);
    service_ = new ScoringService(f);
  }
  static void TearDownTestSuite() {
    delete service_;
    delete file_;
  }

  static Json request(double fuel, double time, double weapon, double danger) {
    return Json{{"fuel", fuel}, {"intercept_time", time}, {"weapon", weapon}, {"danger", danger}};
  }
  static Json parse(const service::Reply& r) { return Json::parse(r.body); }

  static persist::ModelFile* file_;
  static ScoringService* service_;
};

persist::ModelFile* DeskService::file_ = nullptr;
ScoringService* DeskService::service_ = nullptr;

}  // namespace

TEST_F(DeskService, BestPrototypeScoresHigh) {
  const service::Reply r = service_->score(request(1000, 0, 100, 0).dump());
  ASSERT_EQ(r.status, 200) << r.body;
  const Json j = parse(r);
  EXPECT_GT(j.at("score").get<double>(), 0.8);
  const auto& m = j.at("memberships");
  EXPECT_NEAR(m.at("bad").get<double>() + m.at("acceptable").get<double>() + m.at("good").get<double>(), 1.0, 1e-9);
  EXPECT_EQ(j.at("model_id"), service_->model_id());
  EXPECT_EQ(r.body.back(), '\n');
}

TEST_F(DeskService, ScoreMatchesLibrary) {
  const ScoreResult direct = decision_score(file_->model, {320, 17, 64, 2.5});
  const Json j = parse(service_->score(request(320, 17, 64, 2.5).dump()));
  EXPECT_EQ(j.at("score").get<double>(), direct.score);
  EXPECT_EQ(j.at("memberships").at("good").get<double>(), direct.memberships[2]);
}

TEST_F(DeskService, ValidationErrors) {
  service::Reply r = service_->score(request(2000, 0, 100, 0).dump());
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(parse(r).at("field"), "fuel");
  EXPECT_NE(r.body.find("1000"), std::string::npos) << r.body;

  Json missing = request(10, 10, 10, 1);
  missing.erase("danger");
  r = service_->score(missing.dump());
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(parse(r).at("field"), "danger");

  Json wrong_type = request(10, 10, 10, 1);
  wrong_type["weapon"] = "lots";
  EXPECT_EQ(parse(service_->score(wrong_type.dump())).at("field"), "weapon");

  r = service_->score("{\"fuel\": ");
  EXPECT_EQ(r.status, 400);
  EXPECT_NE(parse(r).at("error").get<std::string>().find("malformed JSON"), std::string::npos);
  EXPECT_EQ(service_->score("[1,2]").status, 400);
}

TEST_F(DeskService, BatchEqualsSingles) {
  Json batch = Json::array();
  for (int k = 0; k < 100; ++k) batch.push_back(request(10.0 * k, 60 - 0.5 * k, k, 0.1 * k));
  const service::Reply r = service_->batch_score(batch.dump());
  ASSERT_EQ(r.status, 200);
  const Json out = parse(r);
  ASSERT_EQ(out.size(), 100u);
  for (std::size_t k = 0; k < batch.size(); ++k) EXPECT_EQ(out[k], parse(service_->score(batch[k].dump())));
}

TEST_F(DeskService, BatchLimits) {
  EXPECT_EQ(service_->batch_score("[]").status, 400);
  Json big = Json::array();
  for (int k = 0; k < 1001; ++k) big.push_back(request(1, 1, 1, 1));
  EXPECT_EQ(service_->batch_score(big.dump()).status, 400);
  big.erase(big.size() - 1);
  EXPECT_EQ(service_->batch_score(big.dump()).status, 200);
  EXPECT_EQ(service_->batch_score("{}").status, 400);

  Json bad = Json::array({request(1, 1, 1, 1), request(1, 1, 1, 99)});
  const service::Reply r = service_->batch_score(bad.dump());
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(parse(r).at("index"), 1);
  EXPECT_EQ(parse(r).at("field"), "danger");
}

TEST_F(DeskService, ScoresRiseAlongFuelAxis) {
  Json batch = Json::array();
  for (int k = 0; k < 1000; ++k) batch.push_back(request(std::min(1000.0, k * (1000.0 / 999.0)), 30, 50, 5));
  const Json out = parse(service_->batch_score(batch.dump()));
  ASSERT_EQ(out.size(), 1000u);
  for (std::size_t k = 1; k < out.size(); ++k) {
    EXPECT_GE(out[k].at("score").get<double>(), out[k - 1].at("score").get<double>()) << "step " << k;
  }
}

TEST_F(DeskService, ModelMetadata) {
  const service::Reply r = service_->model_info();
  ASSERT_EQ(r.status, 200);
  const Json j = parse(r);
  EXPECT_EQ(j.at("layer_sizes"), Json({4, 16, 3}));
  EXPECT_EQ(j.at("model_id"), service_->model_id());
  ASSERT_EQ(j.at("centers").size(), 3u);
  const Eigen::MatrixXd ranked = file_->model.clusters.ranked_centers();
  double previous = -1.0;
  for (int rank = 0; rank < 3; ++rank) {
    const Json& c = j.at("centers")[static_cast<std::size_t>(rank)];
    EXPECT_EQ(c.at("label"), kRegionLabels[rank]);
    EXPECT_DOUBLE_EQ(c.at("fuel").get<double>(), ranked(rank, 0) * 1000.0);
    EXPECT_DOUBLE_EQ(c.at("danger").get<double>(), ranked(rank, 3) * 10.0);
    EXPECT_GT(c.at("latent_score").get<double>(), previous);
    previous = c.at("latent_score").get<double>();
  }
  EXPECT_EQ(j.at("training").at("epochs_run"), file_->training.epochs_run);
}

TEST(Service, NoModelIs503) {
  const ScoringService empty;
  EXPECT_EQ(empty.score("{}").status, 503);
  EXPECT_EQ(empty.batch_score("[]").status, 503);
  EXPECT_EQ(empty.model_info().status, 503);
}

TEST_F(DeskService, HttpRoundTripAndConcurrency) {
  auto svc = std::make_shared<const ScoringService>(*file_);
  httplib::Server server;
  service::install_routes(server, svc);
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread listener([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto info = client.Get("/api/v1/model");
  ASSERT_TRUE(info);
  EXPECT_EQ(info->status, 200);
  EXPECT_EQ(info->get_header_value("Content-Type"), "application/json; charset=utf-8");
  EXPECT_EQ(info->body, svc->model_info().body);

  auto bad = client.Post("/api/v1/score", "not json", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);

  std::vector<std::string> bodies;
  for (int k = 0; k < 40; ++k) bodies.push_back(request(25.0 * k, 1.5 * k, 2.5 * k, 0.25 * k).dump());
  std::vector<std::string> serial;
  for (const auto& b : bodies) serial.push_back(svc->score(b).body);

  std::vector<std::vector<std::string>> seen(4, std::vector<std::string>(bodies.size()));
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < seen.size(); ++w) {
    workers.emplace_back([&, w] {
      httplib::Client c("127.0.0.1", port);
      for (std::size_t i = 0; i < bodies.size(); ++i) {
        const std::size_t k = (i * 7 + w * 13) % bodies.size();  // different interleavings per worker
        auto res = c.Post("/api/v1/score", bodies[k], "application/json");
        seen[w][k] = res ? res->body : "request failed";
      }
    });
  }
  for (auto& t : workers) t.join();
  for (const auto& results : seen) EXPECT_EQ(results, serial);

  server.stop();
  listener.join();
}
