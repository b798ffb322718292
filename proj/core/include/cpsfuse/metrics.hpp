#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace cpsfuse::metrics {

/// counts[i][j]: instances of true class i predicted as class j.
struct ConfusionMatrix {
  std::vector<std::string> classes;
  std::vector<std::vector<std::size_t>> counts;

  std::size_t total() const;
  std::size_t trace() const;
};

using RealMatrix = std::vector<std::vector<double>>;

/// Throws DataError on length mismatch or a label outside classes.
ConfusionMatrix confusion(const std::vector<std::string>& truth,
                          const std::vector<std::string>& predicted,
                          const std::vector<std::string>& classes);

/// Rows divided by their sums; all-zero rows stay zero.
RealMatrix row_normalize(const ConfusionMatrix& cm);

struct ClassMetrics {
  std::string label;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct WeightedSummary {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct Evaluation {
  WeightedSummary summary;
  std::vector<ClassMetrics> per_class;  // class order
  ConfusionMatrix confusion;
};

/// Support-weighted precision/recall/F1 and accuracy. Zero denominators give
/// 0. When classes is empty, the sorted union of observed labels is used.
Evaluation weighted_metrics(const std::vector<std::string>& truth,
                            const std::vector<std::string>& predicted,
                            std::vector<std::string> classes = {});

/// "class,precision,recall,f1,support" rows plus a weighted-average row.
std::string classification_report_csv(const Evaluation& eval);

/// Three decimals without the leading zero: 0.5236 -> ".524", 1 -> "1.000".
std::string table_number(double value);

enum class Mark { None, Second, Best };

struct CompareInput {
  std::string model;
  std::vector<std::string> dimensions;     // e.g. social_cognitive, affective
  std::vector<WeightedSummary> summaries;  // parallel to dimensions
};

struct CompareTable {
  std::vector<std::string> models;      // input order
  std::vector<std::string> dimensions;  // order of the first model
  /// values[m][d * 4 + k] with k over accuracy, precision, recall, f1.
  std::vector<std::vector<double>> values;
  std::vector<std::vector<Mark>> marks;

  /// Aligned plain text; best marked **x**, second *x*.
  std::string render_text() const;
  /// model,<dim>_acc,<dim>_acc_mark,... with marks "best", "second", "".
  std::string render_csv() const;
};

inline constexpr const char* kMetricNames[4] = {"Acc", "Prec", "Rec", "F1"};

/// Per column, best = maximum, second = next distinct value; ties share a
/// mark. Values are compared at the displayed 3-decimal precision. Throws
/// DataError when fewer than 2 models or dimension sets differ.
CompareTable compare_models(const std::vector<CompareInput>& inputs);

/// Standalone grayscale SVG heatmap with 2-decimal annotations. Throws
/// DataError if the matrix is not square or does not match the class list.
std::string heatmap_svg(const RealMatrix& normalized, const std::vector<std::string>& classes,
                        const std::string& title);

/// Two-decimal annotations for one row, adjusted by largest remainder so a
/// row that sums to 1 is displayed summing to exactly 1.00.
std::vector<std::string> row_annotations(const std::vector<double>& row);

}  // namespace cpsfuse::metrics
