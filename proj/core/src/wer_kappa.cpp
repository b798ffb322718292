#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "cpsfuse/agreement.hpp"
#include "cpsfuse/error.hpp"

namespace cpsfuse::corpus {

std::vector<std::string> wer_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::size_t word_edit_distance(const std::vector<std::string>& ref,
                               const std::vector<std::string>& hyp) {
  // Single-row DP over the hypothesis.
  std::vector<std::size_t> row(hyp.size() + 1);
  for (std::size_t j = 0; j <= hyp.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= ref.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= hyp.size(); ++j) {
      const std::size_t up = row[j];
      const std::size_t sub = diag + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      row[j] = std::min({sub, up + 1, row[j - 1] + 1});
      diag = up;
    }
  }
  return row[hyp.size()];
}

double word_error_rate(std::string_view reference, std::string_view hypothesis) {
  const auto ref = wer_tokens(reference);
  if (ref.empty()) throw Error("WER is undefined for an empty reference");
  const auto hyp = wer_tokens(hypothesis);
  return static_cast<double>(word_edit_distance(ref, hyp)) / static_cast<double>(ref.size());
}

double cohens_kappa(const std::vector<RaterPair>& pairs) {
  if (pairs.empty()) throw Error("Cohen's kappa needs at least one coded pair");
  std::map<std::string, std::size_t> count_a;
  std::map<std::string, std::size_t> count_b;
  std::size_t agree = 0;
  for (const auto& p : pairs) {
    ++count_a[p.rater_a];
    ++count_b[p.rater_b];
    if (p.rater_a == p.rater_b) ++agree;
  }
  const double n = static_cast<double>(pairs.size());
  const double p_o = static_cast<double>(agree) / n;
  double p_e = 0.0;
  for (const auto& [code, ca] : count_a) {
    auto it = count_b.find(code);
    if (it != count_b.end()) {
      p_e += (static_cast<double>(ca) / n) * (static_cast<double>(it->second) / n);
    }
  }
  if (p_e >= 1.0) return 1.0;
  if (p_o == 1.0) return 1.0;
  return (p_o - p_e) / (1.0 - p_e);
}

std::vector<RaterPair> load_rater_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open rater file '{}'", path.string()));
  std::vector<RaterPair> out;
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(trim(f));
    if (line_no == 1 && !fields.empty() && fields[0] == "id") continue;
    if (fields.size() != 3 || fields[1].empty() || fields[2].empty()) {
      throw DataError(fmt::format("{}:{}: expected id,rater_a,rater_b", path.string(), line_no));
    }
    out.push_back({fields[0], fields[1], fields[2]});
  }
  return out;
}

}  // namespace cpsfuse::corpus
