#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace cpsfuse::corpus {

/// The two independent label spaces; each is classified separately.
enum class Dimension { SocialCognitive, Affective };

inline constexpr Dimension kAllDimensions[] = {Dimension::SocialCognitive,
                                               Dimension::Affective};

/// "social_cognitive" / "affective".
std::string_view to_string(Dimension d);
/// Accepts snake_case and CamelCase spellings; throws DataError otherwise.
Dimension parse_dimension(std::string_view text);

struct Utterance {
  std::string id;
  std::string triad_id;
  std::string speaker_id;
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;
  std::string text;
  std::optional<std::string> audio_ref;
};

struct Code {
  Dimension dimension = Dimension::SocialCognitive;
  std::string class_label;
};

/// One line of the corpus file: an utterance with zero or more codes.
struct Record {
  Utterance utterance;
  std::vector<Code> codes;
};

/// Ordered class codes per dimension. Order drives matrix and report layout.
class LabelScheme {
 public:
  LabelScheme() = default;

  /// SS1..SS8, SC1, SC2 and AS1..AS3.
  static LabelScheme defaults();

  void set_classes(Dimension d, std::vector<std::string> codes);
  const std::vector<std::string>& classes(Dimension d) const;
  bool contains(Dimension d, std::string_view code) const;

  /// Scheme classes of d that occur in labels, in scheme order.
  std::vector<std::string> present(Dimension d,
                                   const std::vector<std::string>& labels) const;

 private:
  std::vector<std::string> social_;
  std::vector<std::string> affective_;
};

/// Immutable, validated collection of records in file order.
class Corpus {
 public:
  Corpus() = default;

  /// Validates utterance invariants and code membership; throws DataError.
  static Corpus from_records(std::vector<Record> records,
                             const LabelScheme& scheme = LabelScheme::defaults());

  const std::vector<Record>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const Record* find(std::string_view id) const;

 private:
  std::vector<Record> records_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Reads a JSON-lines corpus file. Errors name the offending line.
Corpus load_corpus(const std::filesystem::path& path,
                   const LabelScheme& scheme = LabelScheme::defaults());
void save_corpus(const std::filesystem::path& path, const Corpus& corpus);
/// Single-record (de)serialization used by load/save.
Record parse_record(std::string_view json_line);
std::string format_record(const Record& record);

/// One utterance carrying exactly one class label in one dimension.
struct CodedInstance {
  std::string id;  // "<utterance id>#<code index>"
  Utterance utterance;
  Dimension dimension = Dimension::SocialCognitive;
  std::string class_label;
};

/// One instance per (utterance, code) pair; uncoded utterances contribute none.
std::vector<CodedInstance> explode_multicoded(
    const std::vector<Record>& records,
    const LabelScheme& scheme = LabelScheme::defaults());
inline std::vector<CodedInstance> explode_multicoded(
    const Corpus& corpus, const LabelScheme& scheme = LabelScheme::defaults()) {
  return explode_multicoded(corpus.records(), scheme);
}

/// Drops classes with fewer than min_class_instances members (strict).
/// Throws DataError when nothing survives.
std::vector<CodedInstance> filter_rare_classes(std::vector<CodedInstance> instances,
                                               std::size_t min_class_instances);

struct DimensionPartition {
  std::vector<CodedInstance> social_cognitive;
  std::vector<CodedInstance> affective;

  const std::vector<CodedInstance>& of(Dimension d) const {
    return d == Dimension::SocialCognitive ? social_cognitive : affective;
  }
};

DimensionPartition partition_by_dimension(const std::vector<CodedInstance>& instances);

/// Labels of the instances, in order.
std::vector<std::string> labels_of(const std::vector<CodedInstance>& instances);

}  // namespace cpsfuse::corpus
