#pragma once

// JSON model files, JSON/CSV reports.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "tacdss/errors.hpp"
#include "tacdss/numfmt.hpp"
#include "tacdss/pipeline.hpp"

namespace tacdss::persist {

using Json = nlohmann::ordered_json;

inline constexpr int kModelFormatVersion = 1;

struct TrainSummary {
  int epochs_run = 0;
  int accepted_steps = 0;
  int rejected_steps = 0;
  double final_sse = 0.0;
  double final_mse = 0.0;
  double final_rmse = 0.0;
  lm::StopReason stop_reason = lm::StopReason::kMaxEpochs;

  static TrainSummary of(const lm::TrainReport& r) {
    return {r.epochs_run, r.accepted_steps, r.rejected_steps, r.final_sse, r.final_mse, r.final_rmse, r.stop_reason};
  }
  friend bool operator==(const TrainSummary&, const TrainSummary&) = default;
};

struct Provenance {
  std::string dataset_fingerprint;
  std::size_t dataset_rows = 0;
  std::string split;
  std::uint64_t seed = 0;
  std::optional<std::string> timestamp;  // only when requested, to keep outputs reproducible

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct ModelFile {
  int format_version = kModelFormatVersion;
  DecisionModel model;
  fcm::FcmConfig fcm_config;
  int fcm_iterations = 0;
  std::uint64_t network_seed = 0;
  lm::LmConfig lm_config;
  TrainSummary training;
  Provenance provenance;
};

/// 64-bit FNV-1a, rendered as 16 hex digits.
inline std::string fingerprint(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes through a sibling temporary so readers never see a partial file.
inline void write_file_atomic(const std::string& path, std::string_view contents) {
  const std::filesystem::path target(path);
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, target);
}

/// Pretty JSON with exactly one trailing newline.
inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

inline Json matrix_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const Json& j, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
    throw ParseError(std::string("model file: ") + what + " must have " + std::to_string(rows) + " rows");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ParseError(std::string("model file: ") + what + " row " + std::to_string(r) + " must have " +
                       std::to_string(cols) + " entries");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  if (!m.allFinite()) throw ParseError(std::string("model file: non-finite value in ") + what);
  return m;
}

inline Eigen::VectorXd vector_from_json(const Json& j, Eigen::Index size, const char* what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != size) {
    throw ParseError(std::string("model file: ") + what + " must have " + std::to_string(size) + " entries");
  }
  Eigen::VectorXd v(size);
  for (Eigen::Index k = 0; k < size; ++k) v(k) = j[static_cast<std::size_t>(k)].get<double>();
  if (!v.allFinite()) throw ParseError(std::string("model file: non-finite value in ") + what);
  return v;
}

inline Json to_json(const fcm::FcmConfig& c) {
  return Json{{"c", c.c}, {"m", c.m}, {"tol", c.tol}, {"max_iter", c.max_iter}, {"seed", c.seed}};
}

inline Json to_json(const lm::LmConfig& c) {
  return Json{{"mu0", c.mu0},           {"mu_inc", c.mu_inc},         {"mu_dec", c.mu_dec},
              {"mu_max", c.mu_max},     {"max_epochs", c.max_epochs}, {"loss_tol", c.loss_tol}};
}

inline Json to_json(const TrainSummary& s) {
  return Json{{"epochs_run", s.epochs_run},   {"accepted_steps", s.accepted_steps},
              {"rejected_steps", s.rejected_steps}, {"final_sse", s.final_sse},
              {"final_mse", s.final_mse},     {"final_rmse", s.final_rmse},
              {"stop_reason", lm::to_string(s.stop_reason)}};
}

inline Json to_json(const ModelFile& f) {
  const auto& net = f.model.network;
  Json weights = Json::array();
  Json biases = Json::array();
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    weights.push_back(matrix_json(net.weights(l)));
    Json b = Json::array();
    for (Eigen::Index k = 0; k < net.biases(l).size(); ++k) b.push_back(net.biases(l)(k));
    biases.push_back(std::move(b));
  }
  Json labels = Json::array();
  for (int i = 0; i < kRegionCount; ++i) labels.push_back(kRegionLabels[f.model.clusters.ordering[i]]);

  Json provenance{{"dataset_fingerprint", f.provenance.dataset_fingerprint},
                  {"dataset_rows", f.provenance.dataset_rows},
                  {"split", f.provenance.split},
                  {"seed", f.provenance.seed}};
  provenance["timestamp"] = f.provenance.timestamp ? Json(*f.provenance.timestamp) : Json(nullptr);

  return Json{
      {"format_version", f.format_version},
      {"fcm",
       {{"config", to_json(f.fcm_config)},
        {"m", f.model.clusters.m},
        {"centers", matrix_json(f.model.clusters.centers.centers)},
        {"ordering", f.model.clusters.ordering},
        {"labels", labels},
        {"iterations", f.fcm_iterations}}},
      {"network",
       {{"layer_sizes", net.layer_sizes()},
        {"hidden_activation", nnet::to_string(net.hidden_activation())},
        {"output_activation", "identity"},
        {"seed", f.network_seed},
        {"weights", weights},
        {"biases", biases}}},
      {"training", {{"config", to_json(f.lm_config)}, {"summary", to_json(f.training)}}},
      {"provenance", provenance},
  };
}

inline std::string model_to_string(const ModelFile& f) { return dump(to_json(f)); }

/// Identifier derived from the model's serialized form.
inline std::string model_id(const ModelFile& f) { return fingerprint(to_json(f).dump()); }

namespace detail {

inline ModelFile model_from_json(const Json& j) {
  ModelFile f;
  f.format_version = j.at("format_version").get<int>();
  if (f.format_version != kModelFormatVersion) throw UnsupportedVersion(f.format_version, kModelFormatVersion);

  const Json& fj = j.at("fcm");
  const Json& fc = fj.at("config");
  f.fcm_config.c = fc.at("c").get<int>();
  f.fcm_config.m = fc.at("m").get<double>();
  f.fcm_config.tol = fc.at("tol").get<double>();
  f.fcm_config.max_iter = fc.at("max_iter").get<int>();
  f.fcm_config.seed = fc.at("seed").get<std::uint64_t>();
  f.model.clusters.m = fj.at("m").get<double>();
  if (!(f.model.clusters.m > 1.0)) throw ParseError("model file: fcm.m must be > 1");
  f.model.clusters.centers.centers = matrix_from_json(fj.at("centers"), kRegionCount, 4, "fcm.centers");
  f.model.clusters.ordering = fj.at("ordering").get<std::array<int, kRegionCount>>();
  std::array<bool, kRegionCount> seen{};
  for (int rank : f.model.clusters.ordering) {
    if (rank < 0 || rank >= kRegionCount || seen[rank]) throw ParseError("model file: fcm.ordering is not a permutation");
    seen[rank] = true;
  }
  f.fcm_iterations = fj.at("iterations").get<int>();

  const Json& nj = j.at("network");
  const auto sizes = nj.at("layer_sizes").get<std::vector<int>>();
  if (sizes.size() < 2 || sizes.front() != 4 || sizes.back() != kRegionCount) {
    throw ParseError("model file: network must map 4 inputs to 3 outputs");
  }
  if (nj.at("output_activation").get<std::string>() != "identity") {
    throw ParseError("model file: only identity output activation is supported");
  }
  nnet::Network net(sizes, nnet::activation_from_string(nj.at("hidden_activation").get<std::string>()));
  const Json& wj = nj.at("weights");
  const Json& bj = nj.at("biases");
  if (!wj.is_array() || !bj.is_array() || wj.size() != net.layer_count() || bj.size() != net.layer_count()) {
    throw ParseError("model file: weights/biases do not match layer_sizes");
  }
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    net.weights(l) = matrix_from_json(wj[l], net.weights(l).rows(), net.weights(l).cols(), "network.weights");
    net.biases(l) = vector_from_json(bj[l], net.biases(l).size(), "network.biases");
  }
  f.network_seed = nj.at("seed").get<std::uint64_t>();
  f.model.network = std::move(net);

  const Json& tj = j.at("training");
  const Json& lc = tj.at("config");
  f.lm_config.mu0 = lc.at("mu0").get<double>();
  f.lm_config.mu_inc = lc.at("mu_inc").get<double>();
  f.lm_config.mu_dec = lc.at("mu_dec").get<double>();
  f.lm_config.mu_max = lc.at("mu_max").get<double>();
  f.lm_config.max_epochs = lc.at("max_epochs").get<int>();
  f.lm_config.loss_tol = lc.at("loss_tol").get<double>();
  const Json& sj = tj.at("summary");
  f.training.epochs_run = sj.at("epochs_run").get<int>();
  f.training.accepted_steps = sj.at("accepted_steps").get<int>();
  f.training.rejected_steps = sj.at("rejected_steps").get<int>();
  f.training.final_sse = sj.at("final_sse").get<double>();
  f.training.final_mse = sj.at("final_mse").get<double>();
  f.training.final_rmse = sj.at("final_rmse").get<double>();
  f.training.stop_reason = lm::stop_reason_from_string(sj.at("stop_reason").get<std::string>());

  const Json& pj = j.at("provenance");
  f.provenance.dataset_fingerprint = pj.at("dataset_fingerprint").get<std::string>();
  f.provenance.dataset_rows = pj.at("dataset_rows").get<std::size_t>();
  f.provenance.split = pj.at("split").get<std::string>();
  f.provenance.seed = pj.at("seed").get<std::uint64_t>();
  if (const auto& ts = pj.at("timestamp"); !ts.is_null()) f.provenance.timestamp = ts.get<std::string>();
  return f;
}

inline std::pair<std::size_t, std::size_t> line_and_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t column = 1;
  for (std::size_t k = 0; k + 1 < byte && k < text.size(); ++k) {
    if (text[k] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

}  // namespace detail

inline ModelFile model_from_string(std::string_view text, std::string_view source = "model file") {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    const auto [line, column] = detail::line_and_column(text, e.byte);
    throw ParseError(std::string(source) + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " +
                     e.what());
  }
  try {
    return detail::model_from_json(j);
  } catch (const Json::exception& e) {
    throw ParseError(std::string(source) + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string(source) + ": " + e.what());
  }
}

inline void save_model(const ModelFile& model, const std::string& path) {
  if (!model.model.ready()) throw ModelNotReady("refusing to save an untrained model");
  write_file_atomic(path, model_to_string(model));
}

inline ModelFile load_model(const std::string& path) { return model_from_string(read_file(path), path); }

// Reports -------------------------------------------------------------------

inline Json to_json(const lm::TrainReport& r) {
  return Json{{"epochs_run", r.epochs_run},
              {"accepted_steps", r.accepted_steps},
              {"rejected_steps", r.rejected_steps},
              {"final_sse", r.final_sse},
              {"final_mse", r.final_mse},
              {"final_rmse", r.final_rmse},
              {"stop_reason", lm::to_string(r.stop_reason)},
              {"loss_trace", r.loss_trace},
              {"mu_trace", r.mu_trace}};
}

inline Json rows_json(const std::vector<RowPair>& rows) {
  Json out = Json::array();
  for (const auto& row : rows) out.push_back(Json{{"actual", row.actual}, {"predicted", row.predicted}});
  return out;
}

inline Json to_json(const EvalReport& r) {
  return Json{{"split", r.split_name},       {"train_mse", r.train_mse}, {"train_rmse", r.train_rmse},
              {"test_mse", r.test_mse},      {"test_rmse", r.test_rmse}, {"train_rows", rows_json(r.train_rows)},
              {"test_rows", rows_json(r.test_rows)}};
}

inline Json to_json(const ExperimentResult& r) {
  return Json{{"seed", r.seed},
              {"train_size", r.train_size},
              {"test_size", r.test_size},
              {"fcm", {{"iterations", r.fcm_iterations}, {"objective_trace", r.fcm_objective_trace}}},
              {"training", to_json(r.training)},
              {"evaluation", to_json(r.eval)}};
}

inline Json to_json(const RepeatedResult& r) {
  Json runs = Json::array();
  for (const auto& run : r.runs) runs.push_back(to_json(run));
  return Json{{"split", to_string(r.split)},
              {"train_percent", train_percent(r.split)},
              {"repeats", r.runs.size()},
              {"mean_train_mse", r.mean_train_mse},
              {"mean_train_rmse", r.mean_train_rmse},
              {"mean_test_mse", r.mean_test_mse},
              {"mean_test_rmse", r.mean_test_rmse},
              {"runs", runs}};
}

/// seed,epoch,sse,mse,mu for every run; epoch 0 is the starting point.
inline std::string loss_trace_csv(const RepeatedResult& r) {
  std::ostringstream os;
  os << "seed,epoch,sse,mse,mu\n";
  for (const auto& run : r.runs) {
    const double count = static_cast<double>(run.train_size) * kRegionCount;
    for (std::size_t k = 0; k < run.training.loss_trace.size(); ++k) {
      os << run.seed << ',' << k << ',' << format_number(run.training.loss_trace[k]) << ','
         << format_number(run.training.loss_trace[k] / count) << ',' << format_number(run.training.mu_trace[k])
         << '\n';
    }
  }
  return os.str();
}

/// One line per (set, row) with actual and predicted outputs in rank order.
inline std::string rows_csv(const EvalReport& r) {
  std::ostringstream os;
  os << "set,row,actual_bad,actual_acceptable,actual_good,predicted_bad,predicted_acceptable,predicted_good\n";
  auto emit = [&](const char* set, const std::vector<RowPair>& rows) {
    for (std::size_t k = 0; k < rows.size(); ++k) {
      os << set << ',' << k;
      for (double v : rows[k].actual) os << ',' << format_number(v);
      for (double v : rows[k].predicted) os << ',' << format_number(v);
      os << '\n';
    }
  };
  emit("train", r.train_rows);
  emit("test", r.test_rows);
  return os.str();
}

}  // namespace tacdss::persist
