#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "pnsml/error.hpp"
#include "pnsml/informer.hpp"
#include "pnsml/io.hpp"
#include "pnsml/model.hpp"
#include "pnsml/training_set.hpp"

namespace pnsml {

/// Neumaier-compensated running sum; the result does not drift with the
/// order or partitioning of the addends at the magnitudes seen here.
class CompensatedSum {
 public:
  void add(double v) noexcept {
    const double t = sum_ + v;
    comp_ += std::abs(sum_) >= std::abs(v) ? (sum_ - t) + v : (v - t) + sum_;
    sum_ = t;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

struct Metrics {
  double mse = 0.0;
  double mae = 0.0;
  std::size_t n = 0;
  Label label = Label::lb;
  std::string model_name;
};

inline Metrics metrics(std::span<const double> predictions, std::span<const double> labels) {
  if (predictions.size() != labels.size()) throw ValidationError("prediction and label counts differ");
  if (predictions.empty()) throw ValidationError("cannot score an empty prediction set");
  CompensatedSum se, ae;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double e = predictions[i] - labels[i];
    se.add(e * e);
    ae.add(std::abs(e));
  }
  Metrics m;
  m.n = labels.size();
  m.mse = se.value() / static_cast<double>(m.n);
  m.mae = ae.value() / static_cast<double>(m.n);
  return m;
}

struct BinnedMatrix {
  int bins = 10;
  std::vector<std::uint64_t> counts;  ///< row-major (true_bin, predicted_bin)

  std::uint64_t at(int true_bin, int pred_bin) const {
    return counts[static_cast<std::size_t>(true_bin * bins + pred_bin)];
  }
  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto c : counts) t += c;
    return t;
  }
};

/// Bin i covers [i/bins, (i+1)/bins); the last bin also takes 1.0.
inline int bin_of(double v, int bins) {
  if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("binned values must lie in [0, 1]");
  return std::min(bins - 1, static_cast<int>(std::floor(v * bins)));
}

inline BinnedMatrix binned_matrix(std::span<const double> predictions, std::span<const double> labels,
                                  int bins = 10) {
  if (bins < 1) throw ValidationError("bin count must be at least 1");
  if (predictions.size() != labels.size()) throw ValidationError("prediction and label counts differ");
  BinnedMatrix m;
  m.bins = bins;
  m.counts.assign(static_cast<std::size_t>(bins * bins), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++m.counts[static_cast<std::size_t>(bin_of(labels[i], bins) * bins + bin_of(predictions[i], bins))];
  }
  return m;
}

/// Predictions for every subpopulation against the table's exact bounds.
struct PopulationEval {
  Metrics metrics;
  std::vector<SubpopKey> keys;
  std::vector<double> truth;
  std::vector<double> predicted;
};

inline double true_bound(const InformerRow& row, Label label) {
  return label == Label::lb ? row.bounds.lb : row.bounds.ub;
}

/// Keys are split into contiguous chunks for the workers; each chunk writes
/// its own slice, and metrics are summed afterwards in key order.
inline PopulationEval full_population_eval(const Regressor& model, const InformerTable& table, Label label,
                                           unsigned workers = 1) {
  const auto n = table.rows.size();
  if (n != (std::size_t{1} << table.n_observed)) throw ValidationError("informer table is incomplete");
  PopulationEval out;
  out.keys.resize(n);
  out.truth.resize(n);
  out.predicted.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (table.rows[i].key.value != i) throw ValidationError("informer table is not in key order");
    out.keys[i] = table.rows[i].key;
    out.truth[i] = true_bound(table.rows[i], label);
  }
  constexpr std::size_t kChunk = 4096;
  const std::size_t n_chunks = (n + kChunk - 1) / kChunk;
  auto run = [&](std::size_t chunk) {
    const std::size_t lo = chunk * kChunk, hi = std::min(n, lo + kChunk);
    Eigen::MatrixXd x(table.n_observed, static_cast<Eigen::Index>(hi - lo));
    for (std::size_t i = lo; i < hi; ++i) x.col(static_cast<Eigen::Index>(i - lo)) = key_features(out.keys[i], table.n_observed);
    const Eigen::VectorXd p = model.predict(x);
    for (std::size_t i = lo; i < hi; ++i) out.predicted[i] = p[static_cast<Eigen::Index>(i - lo)];
  };
  workers = std::clamp<unsigned>(workers, 1, 64);
  if (workers == 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) run(c);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t c = w; c < n_chunks; c += workers) run(c);
      });
    }
    for (auto& t : pool) t.join();
  }
  out.metrics = metrics(out.predicted, out.truth);
  out.metrics.label = label;
  return out;
}

/// Scores on the model's own training records.
inline Metrics train_set_eval(const Regressor& model, const TrainingSet& data) {
  const Eigen::VectorXd p = model.predict(data.x);
  auto m = metrics({p.data(), static_cast<std::size_t>(p.size())}, {data.y.data(), static_cast<std::size_t>(data.y.size())});
  m.label = model.meta.label;
  return m;
}

/// One trained model's results for one label, as consumed by the report.
struct ModelEvaluation {
  std::string name;  ///< display name, e.g. "MLP(Mish)"
  std::string slug;  ///< file-name form, e.g. "mlp_mish"
  Label label = Label::lb;
  PopulationEval population;
  std::optional<Metrics> train;
};

inline std::string dataset_name(Label l) { return l == Label::lb ? "Lower bound" : "Upper bound"; }

namespace detail {

inline std::string metrics_csv(const std::vector<ModelEvaluation>& evals, bool train) {
  std::string out = "Model,Dataset,MSE,MAE\n";
  for (const auto& e : evals) {
    const Metrics* m = train ? (e.train ? &*e.train : nullptr) : &e.population.metrics;
    if (!m) continue;
    out += e.name + "," + dataset_name(e.label) + "," + io::format_real(m->mse) + "," + io::format_real(m->mae) + "\n";
  }
  return out;
}

inline std::string matrix_csv(const BinnedMatrix& m) {
  std::string out = "true_bin";
  for (int j = 0; j < m.bins; ++j) out += ",pred_" + std::to_string(j);
  out += "\n";
  for (int i = 0; i < m.bins; ++i) {
    out += std::to_string(i);
    for (int j = 0; j < m.bins; ++j) out += "," + std::to_string(m.at(i, j));
    out += "\n";
  }
  return out;
}

inline std::string scatter_csv(const PopulationEval& p) {
  std::string out = "key,true,predicted\n";
  for (std::size_t i = 0; i < p.keys.size(); ++i) {
    out += std::to_string(p.keys[i].value) + "," + io::format_real(p.truth[i]) + "," + io::format_real(p.predicted[i]) + "\n";
  }
  return out;
}

/// Static scatter: truth on x, prediction on y, dashed diagonal. Points that
/// land on the same pixel are drawn once, which keeps 32768-point plots small.
inline std::string scatter_svg(const ModelEvaluation& e) {
  constexpr int kSize = 400, kPad = 40, kPlot = kSize - 2 * kPad;
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(kSize) + "\" height=\"" +
                    std::to_string(kSize) + "\" viewBox=\"0 0 " + std::to_string(kSize) + " " + std::to_string(kSize) +
                    "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  const auto px = [&](double v) { return kPad + static_cast<int>(std::lround(v * kPlot)); };
  const auto py = [&](double v) { return kSize - kPad - static_cast<int>(std::lround(v * kPlot)); };
  out += "<line x1=\"" + std::to_string(px(0)) + "\" y1=\"" + std::to_string(py(0)) + "\" x2=\"" + std::to_string(px(1)) +
         "\" y2=\"" + std::to_string(py(0)) + "\" stroke=\"black\"/>\n";
  out += "<line x1=\"" + std::to_string(px(0)) + "\" y1=\"" + std::to_string(py(0)) + "\" x2=\"" + std::to_string(px(0)) +
         "\" y2=\"" + std::to_string(py(1)) + "\" stroke=\"black\"/>\n";
  out += "<line x1=\"" + std::to_string(px(0)) + "\" y1=\"" + std::to_string(py(0)) + "\" x2=\"" + std::to_string(px(1)) +
         "\" y2=\"" + std::to_string(py(1)) + "\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n";
  for (int t = 0; t <= 10; t += 5) {
    const double v = t / 10.0;
    const auto label = t == 10 ? std::string("1") : t == 0 ? std::string("0") : std::string("0.5");
    out += "<text x=\"" + std::to_string(px(v)) + "\" y=\"" + std::to_string(py(0) + 16) +
           "\" font-size=\"11\" text-anchor=\"middle\">" + label + "</text>\n";
    out += "<text x=\"" + std::to_string(px(0) - 6) + "\" y=\"" + std::to_string(py(v) + 4) +
           "\" font-size=\"11\" text-anchor=\"end\">" + label + "</text>\n";
  }
  out += "<text x=\"" + std::to_string(kSize / 2) + "\" y=\"" + std::to_string(kSize - 6) +
         "\" font-size=\"12\" text-anchor=\"middle\">true</text>\n";
  out += "<text x=\"12\" y=\"" + std::to_string(kSize / 2) + "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 12 " +
         std::to_string(kSize / 2) + ")\">predicted</text>\n";
  out += "<text x=\"" + std::to_string(kSize / 2) + "\" y=\"20\" font-size=\"13\" text-anchor=\"middle\">" + e.name + " - " +
         dataset_name(e.label) + "</text>\n";
  std::set<std::pair<int, int>> drawn;
  out += "<g fill=\"steelblue\" fill-opacity=\"0.5\">\n";
  for (std::size_t i = 0; i < e.population.truth.size(); ++i) {
    const auto p = std::make_pair(px(e.population.truth[i]), py(std::clamp(e.population.predicted[i], 0.0, 1.0)));
    if (!drawn.insert(p).second) continue;
    out += "<circle cx=\"" + std::to_string(p.first) + "\" cy=\"" + std::to_string(p.second) + "\" r=\"1.5\"/>\n";
  }
  out += "</g>\n</svg>\n";
  return out;
}

}  // namespace detail

struct ReportOptions {
  int bins = 10;
  bool svg = true;
};

/// Writes comparison.csv (population metrics), comparison_train.csv (training
/// records; rows only for evaluations that carry train metrics), and per
/// evaluation matrix_/scatter_ files. Returns the paths written.
inline std::vector<std::filesystem::path> emit_report(const std::vector<ModelEvaluation>& evals,
                                                      const std::filesystem::path& dir, const ReportOptions& opt = {}) {
  std::vector<std::filesystem::path> written;
  auto put = [&](const std::string& name, const std::string& text) {
    io::write_file(dir / name, text);
    written.push_back(dir / name);
  };
  put("comparison.csv", detail::metrics_csv(evals, false));
  put("comparison_train.csv", detail::metrics_csv(evals, true));
  for (const auto& e : evals) {
    const auto stem = e.slug + "_" + std::string(to_string(e.label));
    put("matrix_" + stem + ".csv", detail::matrix_csv(binned_matrix(e.population.predicted, e.population.truth, opt.bins)));
    put("scatter_" + stem + ".csv", detail::scatter_csv(e.population));
    if (opt.svg) put("scatter_" + stem + ".svg", detail::scatter_svg(e));
  }
  return written;
}

}  // namespace pnsml
