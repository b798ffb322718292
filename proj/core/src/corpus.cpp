#include "cpsfuse/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include <fmt/format.h>

#include "cpsfuse/error.hpp"
#include "json.hpp"

namespace cpsfuse::corpus {

using nlohmann::ordered_json;

std::string_view to_string(Dimension d) {
  return d == Dimension::SocialCognitive ? "social_cognitive" : "affective";
}

Dimension parse_dimension(std::string_view text) {
  if (text == "social_cognitive" || text == "SocialCognitive" ||
      text == "social-cognitive") {
    return Dimension::SocialCognitive;
  }
  if (text == "affective" || text == "Affective") return Dimension::Affective;
  throw DataError(fmt::format("unknown dimension '{}'", text));
}

LabelScheme LabelScheme::defaults() {
  LabelScheme s;
  s.social_ = {"SS1", "SS2", "SS3", "SS4", "SS5", "SS6", "SS7", "SS8", "SC1", "SC2"};
  s.affective_ = {"AS1", "AS2", "AS3"};
  return s;
}

void LabelScheme::set_classes(Dimension d, std::vector<std::string> codes) {
  std::set<std::string> seen;
  for (const auto& c : codes) {
    if (c.empty()) throw Error("empty class code in label scheme");
    if (!seen.insert(c).second) {
      throw Error(fmt::format("duplicate class code '{}' in label scheme", c));
    }
  }
  (d == Dimension::SocialCognitive ? social_ : affective_) = std::move(codes);
}

const std::vector<std::string>& LabelScheme::classes(Dimension d) const {
  return d == Dimension::SocialCognitive ? social_ : affective_;
}

bool LabelScheme::contains(Dimension d, std::string_view code) const {
  const auto& cs = classes(d);
  return std::find(cs.begin(), cs.end(), code) != cs.end();
}

std::vector<std::string> LabelScheme::present(
    Dimension d, const std::vector<std::string>& labels) const {
  std::set<std::string> have(labels.begin(), labels.end());
  std::vector<std::string> out;
  for (const auto& c : classes(d)) {
    if (have.count(c)) out.push_back(c);
  }
  return out;
}

namespace {

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

void check_record(const Record& r, const LabelScheme& scheme) {
  const auto& u = r.utterance;
  if (u.id.empty()) throw DataError("record with empty id");
  if (u.end_ms < u.start_ms) {
    throw DataError(fmt::format("utterance '{}': end_ms {} < start_ms {}", u.id,
                                u.end_ms, u.start_ms));
  }
  if (blank(u.text)) throw DataError(fmt::format("utterance '{}': empty text", u.id));
  for (const auto& code : r.codes) {
    if (!scheme.contains(code.dimension, code.class_label)) {
      throw DataError(fmt::format("utterance '{}': unknown class code '{}' for {}",
                                  u.id, code.class_label, to_string(code.dimension)));
    }
  }
}

}  // namespace

Corpus Corpus::from_records(std::vector<Record> records, const LabelScheme& scheme) {
  Corpus c;
  c.index_.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    check_record(records[i], scheme);
    if (!c.index_.emplace(records[i].utterance.id, i).second) {
      throw DataError(fmt::format("duplicate utterance id '{}'", records[i].utterance.id));
    }
  }
  c.records_ = std::move(records);
  return c;
}

const Record* Corpus::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &records_[it->second];
}

Record parse_record(std::string_view json_line) {
  const auto j = ordered_json::parse(json_line);
  if (!j.is_object()) throw DataError("record is not a JSON object");
  Record r;
  auto& u = r.utterance;
  u.id = j.at("id").get<std::string>();
  u.triad_id = j.value("triad_id", std::string{});
  u.speaker_id = j.value("speaker_id", std::string{});
  u.start_ms = j.value("start_ms", std::int64_t{0});
  u.end_ms = j.value("end_ms", std::int64_t{0});
  u.text = j.at("text").get<std::string>();
  if (j.contains("audio_ref") && !j.at("audio_ref").is_null()) {
    u.audio_ref = j.at("audio_ref").get<std::string>();
  }
  if (j.contains("codes")) {
    for (const auto& c : j.at("codes")) {
      r.codes.push_back(Code{parse_dimension(c.at("dimension").get<std::string>()),
                             c.at("class").get<std::string>()});
    }
  }
  return r;
}

std::string format_record(const Record& r) {
  ordered_json j;
  const auto& u = r.utterance;
  j["id"] = u.id;
  j["triad_id"] = u.triad_id;
  j["speaker_id"] = u.speaker_id;
  j["start_ms"] = u.start_ms;
  j["end_ms"] = u.end_ms;
  j["text"] = u.text;
  j["codes"] = ordered_json::array();
  for (const auto& c : r.codes) {
    ordered_json cj;
    cj["dimension"] = std::string(to_string(c.dimension));
    cj["class"] = c.class_label;
    j["codes"].push_back(std::move(cj));
  }
  if (u.audio_ref) j["audio_ref"] = *u.audio_ref;
  return j.dump();
}

Corpus load_corpus(const std::filesystem::path& path, const LabelScheme& scheme) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open corpus file '{}'", path.string()));
  std::vector<Record> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    try {
      records.push_back(parse_record(line));
      check_record(records.back(), scheme);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(fmt::format("{}:{}: malformed record: {}", path.string(), line_no,
                                  e.what()));
    } catch (const DataError& e) {
      throw DataError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    }
  }
  return Corpus::from_records(std::move(records), scheme);
}

void save_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write corpus file '{}'", path.string()));
  for (const auto& r : corpus.records()) out << format_record(r) << '\n';
}

std::vector<CodedInstance> explode_multicoded(const std::vector<Record>& records,
                                              const LabelScheme& scheme) {
  std::vector<CodedInstance> out;
  for (const auto& r : records) {
    for (std::size_t k = 0; k < r.codes.size(); ++k) {
      const auto& code = r.codes[k];
      if (!scheme.contains(code.dimension, code.class_label)) {
        throw DataError(fmt::format("utterance '{}': unknown class code '{}'",
                                    r.utterance.id, code.class_label));
      }
      out.push_back(CodedInstance{fmt::format("{}#{}", r.utterance.id, k), r.utterance,
                                  code.dimension, code.class_label});
    }
  }
  return out;
}

std::vector<CodedInstance> filter_rare_classes(std::vector<CodedInstance> instances,
                                               std::size_t min_class_instances) {
  std::map<std::string, std::size_t> counts;
  for (const auto& inst : instances) ++counts[inst.class_label];
  std::vector<CodedInstance> kept;
  kept.reserve(instances.size());
  for (auto& inst : instances) {
    if (counts[inst.class_label] >= min_class_instances) kept.push_back(std::move(inst));
  }
  if (kept.empty()) {
    throw DataError(fmt::format("no class has at least {} instances", min_class_instances));
  }
  return kept;
}

DimensionPartition partition_by_dimension(const std::vector<CodedInstance>& instances) {
  DimensionPartition p;
  for (const auto& inst : instances) {
    (inst.dimension == Dimension::SocialCognitive ? p.social_cognitive : p.affective)
        .push_back(inst);
  }
  return p;
}

std::vector<std::string> labels_of(const std::vector<CodedInstance>& instances) {
  std::vector<std::string> out;
  out.reserve(instances.size());
  for (const auto& i : instances) out.push_back(i.class_label);
  return out;
}

}  // namespace cpsfuse::corpus
