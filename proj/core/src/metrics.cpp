#include "cpsfuse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "cpsfuse/error.hpp"

namespace cpsfuse::metrics {

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (const auto& row : counts) n = std::accumulate(row.begin(), row.end(), n);
  return n;
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) n += counts[i][i];
  return n;
}

ConfusionMatrix confusion(const std::vector<std::string>& truth,
                          const std::vector<std::string>& predicted,
                          const std::vector<std::string>& classes) {
  if (truth.size() != predicted.size()) {
    throw DataError(fmt::format("{} true labels but {} predictions", truth.size(), predicted.size()));
  }
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (!index.emplace(classes[i], i).second) {
      throw DataError(fmt::format("duplicate class '{}'", classes[i]));
    }
  }
  auto lookup = [&](const std::string& label) {
    auto it = index.find(label);
    if (it == index.end()) throw DataError(fmt::format("unknown label '{}'", label));
    return it->second;
  };
  ConfusionMatrix cm{classes, std::vector<std::vector<std::size_t>>(
                                  classes.size(), std::vector<std::size_t>(classes.size(), 0))};
  for (std::size_t k = 0; k < truth.size(); ++k) ++cm.counts[lookup(truth[k])][lookup(predicted[k])];
  return cm;
}

RealMatrix row_normalize(const ConfusionMatrix& cm) {
  RealMatrix out;
  for (const auto& row : cm.counts) {
    const auto s = std::accumulate(row.begin(), row.end(), std::size_t{0});
    std::vector<double> r(row.size(), 0.0);
    if (s > 0) {
      for (std::size_t j = 0; j < row.size(); ++j) {
        r[j] = static_cast<double>(row[j]) / static_cast<double>(s);
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

Evaluation weighted_metrics(const std::vector<std::string>& truth,
                            const std::vector<std::string>& predicted,
                            std::vector<std::string> classes) {
  if (truth.empty()) throw DataError("cannot evaluate zero predictions");
  if (classes.empty()) {
    classes = truth;
    classes.insert(classes.end(), predicted.begin(), predicted.end());
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  }
  Evaluation eval;
  eval.confusion = confusion(truth, predicted, classes);
  const auto& c = eval.confusion.counts;
  const std::size_t k = classes.size();
  const double n = static_cast<double>(truth.size());
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t row = 0, col = 0;
    for (std::size_t j = 0; j < k; ++j) {
      row += c[i][j];
      col += c[j][i];
    }
    ClassMetrics m;
    m.label = classes[i];
    m.support = row;
    const double tp = static_cast<double>(c[i][i]);
    m.precision = col > 0 ? tp / static_cast<double>(col) : 0.0;
    m.recall = row > 0 ? tp / static_cast<double>(row) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    const double w = static_cast<double>(row) / n;
    eval.summary.precision += w * m.precision;
    eval.summary.recall += w * m.recall;
    eval.summary.f1 += w * m.f1;
    eval.per_class.push_back(std::move(m));
  }
  eval.summary.accuracy = static_cast<double>(eval.confusion.trace()) / n;
  return eval;
}

std::string classification_report_csv(const Evaluation& eval) {
  std::string out = "class,precision,recall,f1,support\n";
  std::size_t total = 0;
  for (const auto& m : eval.per_class) {
    out += fmt::format("{},{:.6f},{:.6f},{:.6f},{}\n", m.label, m.precision, m.recall, m.f1,
                       m.support);
    total += m.support;
  }
  out += fmt::format("weighted_avg,{:.6f},{:.6f},{:.6f},{}\n", eval.summary.precision,
                     eval.summary.recall, eval.summary.f1, total);
  out += fmt::format("accuracy,,,{:.6f},{}\n", eval.summary.accuracy, total);
  return out;
}

std::string table_number(double value) {
  std::string s = fmt::format("{:.3f}", value);
  if (s.rfind("0.", 0) == 0) s.erase(0, 1);
  else if (s.rfind("-0.", 0) == 0) s.erase(1, 1);
  return s;
}

namespace {

long long displayed(double v) { return std::llround(v * 1000.0); }

}  // namespace

CompareTable compare_models(const std::vector<CompareInput>& inputs) {
  if (inputs.size() < 2) throw DataError("comparison needs at least two models");
  CompareTable table;
  table.dimensions = inputs.front().dimensions;
  for (const auto& in : inputs) {
    if (in.dimensions.size() != in.summaries.size()) {
      throw DataError(fmt::format("model '{}' has mismatched dimension and summary lists", in.model));
    }
    auto a = in.dimensions, b = table.dimensions;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b) throw DataError(fmt::format("model '{}' covers a different set of dimensions", in.model));
    table.models.push_back(in.model);
    std::vector<double> row;
    for (const auto& dim : table.dimensions) {
      const auto pos = static_cast<std::size_t>(
          std::find(in.dimensions.begin(), in.dimensions.end(), dim) - in.dimensions.begin());
      const auto& s = in.summaries[pos];
      row.insert(row.end(), {s.accuracy, s.precision, s.recall, s.f1});
    }
    table.values.push_back(std::move(row));
  }
  const std::size_t cols = table.dimensions.size() * 4;
  table.marks.assign(inputs.size(), std::vector<Mark>(cols, Mark::None));
  for (std::size_t c = 0; c < cols; ++c) {
    std::vector<long long> distinct;
    for (const auto& row : table.values) distinct.push_back(displayed(row[c]));
    std::sort(distinct.begin(), distinct.end(), std::greater<>());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    for (std::size_t m = 0; m < table.values.size(); ++m) {
      const long long v = displayed(table.values[m][c]);
      if (v == distinct[0]) table.marks[m][c] = Mark::Best;
      else if (distinct.size() > 1 && v == distinct[1]) table.marks[m][c] = Mark::Second;
    }
  }
  return table;
}

std::string CompareTable::render_text() const {
  auto cell = [&](std::size_t m, std::size_t c) {
    const std::string v = table_number(values[m][c]);
    switch (marks[m][c]) {
      case Mark::Best:
        return "**" + v + "**";
      case Mark::Second:
        return "*" + v + "*";
      case Mark::None:
        break;
    }
    return v;
  };
  std::size_t name_w = 5;
  for (const auto& m : models) name_w = std::max(name_w, m.size());
  const std::size_t cell_w = 10;
  std::string out;
  std::string header1 = fmt::format("{:<{}}", "", name_w);
  std::string header2 = fmt::format("{:<{}}", "Model", name_w);
  for (const auto& d : dimensions) {
    header1 += fmt::format(" | {:<{}}", d, 4 * cell_w + 3);
    header2 += " |";
    for (const char* k : kMetricNames) header2 += fmt::format(" {:>{}}", k, cell_w);
  }
  out += header1 + "\n" + header2 + "\n";
  out += std::string(header2.size(), '-') + "\n";
  for (std::size_t m = 0; m < models.size(); ++m) {
    std::string line = fmt::format("{:<{}}", models[m], name_w);
    for (std::size_t d = 0; d < dimensions.size(); ++d) {
      line += " |";
      for (std::size_t k = 0; k < 4; ++k) line += fmt::format(" {:>{}}", cell(m, d * 4 + k), cell_w);
    }
    out += line + "\n";
  }
  out += "\n**x** best, *x* second best per column\n";
  return out;
}

std::string CompareTable::render_csv() const {
  static const char* keys[4] = {"acc", "prec", "rec", "f1"};
  std::string out = "model";
  for (const auto& d : dimensions) {
    for (const char* k : keys) out += fmt::format(",{0}_{1},{0}_{1}_mark", d, k);
  }
  out += "\n";
  for (std::size_t m = 0; m < models.size(); ++m) {
    out += models[m];
    for (std::size_t c = 0; c < values[m].size(); ++c) {
      const char* mark = marks[m][c] == Mark::Best ? "best" : marks[m][c] == Mark::Second ? "second" : "";
      out += fmt::format(",{},{}", table_number(values[m][c]), mark);
    }
    out += "\n";
  }
  return out;
}

std::vector<std::string> row_annotations(const std::vector<double>& row) {
  const double s = std::accumulate(row.begin(), row.end(), 0.0);
  std::vector<long long> cents(row.size());
  if (std::abs(s - 1.0) < 1e-9) {
    std::vector<std::pair<double, std::size_t>> rem;
    long long used = 0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      const double x = row[j] * 100.0;
      cents[j] = static_cast<long long>(std::floor(x + 1e-9));
      used += cents[j];
      rem.emplace_back(x - static_cast<double>(cents[j]), j);
    }
    std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (long long k = 0; k < 100 - used && k < static_cast<long long>(rem.size()); ++k) {
      ++cents[rem[static_cast<std::size_t>(k)].second];
    }
  } else {
    for (std::size_t j = 0; j < row.size(); ++j) cents[j] = std::llround(row[j] * 100.0);
  }
  std::vector<std::string> out;
  for (auto c : cents) out.push_back(fmt::format("{}.{:02d}", c / 100, c % 100));
  return out;
}

namespace {

std::string xml_escape(std::string_view s) {
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

}  // namespace

std::string heatmap_svg(const RealMatrix& m, const std::vector<std::string>& classes,
                        const std::string& title) {
  const std::size_t k = m.size();
  for (const auto& row : m) {
    if (row.size() != k) throw DataError("heatmap matrix is not square");
    for (double v : row) {
      if (!(v >= 0.0 && v <= 1.0)) throw DataError("heatmap values must lie in [0, 1]");
    }
  }
  if (classes.size() != k) throw DataError("heatmap class list does not match the matrix");

  const int cell = 48, left = 90, top = 70;
  const int width = left + cell * static_cast<int>(k) + 20;
  const int height = top + cell * static_cast<int>(k) + 60;
  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\">\n",
      width, height);
  out += fmt::format("<rect width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>\n", width, height);
  out += fmt::format("<text x=\"{}\" y=\"24\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
                     width / 2, xml_escape(title));
  out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">Predicted</text>\n",
                     left + cell * static_cast<int>(k) / 2, height - 12);
  out += fmt::format(
      "<text x=\"14\" y=\"{0}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 {0})\">True</text>\n",
      top + cell * static_cast<int>(k) / 2);
  for (std::size_t j = 0; j < k; ++j) {
    out += fmt::format("<text class=\"col-label\" x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
                       left + cell * static_cast<int>(j) + cell / 2, top - 8, xml_escape(classes[j]));
  }
  for (std::size_t i = 0; i < k; ++i) {
    const int y = top + cell * static_cast<int>(i);
    out += fmt::format("<text class=\"row-label\" x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
                       left - 8, y + cell / 2 + 4, xml_escape(classes[i]));
    const auto labels = row_annotations(m[i]);
    for (std::size_t j = 0; j < k; ++j) {
      const int x = left + cell * static_cast<int>(j);
      const auto g = static_cast<int>(std::lround(255.0 * (1.0 - m[i][j])));
      out += fmt::format(
          "<rect class=\"cell\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#{:02x}{:02x}{:02x}\" "
          "stroke=\"#999999\" stroke-width=\"0.5\"/>\n",
          x, y, cell, cell, g, g, g);
      out += fmt::format(
          "<text class=\"value\" x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\" fill=\"{}\">{}</text>\n",
          x + cell / 2, y + cell / 2 + 4, m[i][j] > 0.5 ? "#ffffff" : "#000000", labels[j]);
    }
  }
  out += "</svg>\n";
  return out;
}

}  // namespace cpsfuse::metrics
