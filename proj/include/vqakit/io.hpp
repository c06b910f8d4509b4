#pragma once

// JSON file formats.
//
//   predictions:  [{"image": str, "answer": str}, ...]
//   annotations:  [{"image": str, "question": str,
//                   "answers": [{"answer": str} x 10],
//                   "answer_type": "yes/no"|"number"|"other"|"unanswerable",
//                   "answerable": 0|1}, ...]
//   toy config:   {"d", "heads", "n_vit",
//                  "lora": {"rank", "alpha", "targets"},
//                  "cross_attention_trainable",
//                  "integration": {"gh", "gw"} | null,
//                  "n_text" (optional, default 2)}
//
// Unknown fields are ignored; missing or mistyped required fields raise a
// schema error naming the offending record.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vqakit/ensemble.hpp"
#include "vqakit/error.hpp"
#include "vqakit/metrics.hpp"
#include "vqakit/toynet.hpp"
#include "vqakit/training.hpp"

namespace vqakit {

using nlohmann::json;

namespace detail {

[[noreturn]] inline void schema_error(const std::string& where,
                                      const std::string& what) {
  throw Error(ErrorCode::kSchema, where + ": " + what);
}

inline std::string record_name(std::size_t index, const json& rec) {
  std::string name = "record " + std::to_string(index);
  if (rec.is_object()) {
    auto it = rec.find("image");
    if (it != rec.end() && it->is_string()) {
      name += " (image '" + it->get<std::string>() + "')";
    }
  }
  return name;
}

inline const json& field(const json& obj, const char* key,
                         const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) schema_error(where, std::string("missing '") + key + "'");
  return *it;
}

inline std::string string_field(const json& obj, const char* key,
                                const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_string()) schema_error(where, std::string("'") + key + "' must be a string");
  return v.get<std::string>();
}

inline std::size_t uint_field(const json& obj, const char* key,
                              const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    schema_error(where, std::string("'") + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

inline const json& array_root(const json& doc, const std::string& what) {
  if (!doc.is_array()) schema_error(what, "top level must be a JSON array");
  return doc;
}

}  // namespace detail

inline json load_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::kIo, "read failed: " + path.string());
  try {
    return json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kSchema, path.string() + ": " + e.what());
  }
}

inline std::vector<Prediction> parse_predictions(const json& doc) {
  std::vector<Prediction> out;
  std::set<std::string> seen;
  const json& arr = detail::array_root(doc, "predictions");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const json& rec = arr[i];
    const std::string where = "predictions " + detail::record_name(i, rec);
    if (!rec.is_object()) detail::schema_error(where, "must be an object");
    Prediction p{detail::string_field(rec, "image", where),
                 detail::string_field(rec, "answer", where)};
    if (p.image_id.empty()) detail::schema_error(where, "empty image id");
    if (!seen.insert(p.image_id).second) {
      throw Error(ErrorCode::kDuplicateKey,
                  "predictions: image '" + p.image_id + "' appears twice");
    }
    out.push_back(std::move(p));
  }
  return out;
}

inline std::vector<AnnotationRecord> parse_annotations(const json& doc) {
  std::vector<AnnotationRecord> out;
  std::set<std::string> seen;
  const json& arr = detail::array_root(doc, "annotations");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const json& rec = arr[i];
    const std::string where = "annotations " + detail::record_name(i, rec);
    if (!rec.is_object()) detail::schema_error(where, "must be an object");
    AnnotationRecord a;
    a.image_id = detail::string_field(rec, "image", where);
    if (a.image_id.empty()) detail::schema_error(where, "empty image id");
    a.question = detail::string_field(rec, "question", where);

    const json& answers = detail::field(rec, "answers", where);
    if (!answers.is_array()) detail::schema_error(where, "'answers' must be an array");
    if (answers.size() != kHumanAnswers) {
      throw Error(ErrorCode::kWrongAnswerCount,
                  where + ": has " + std::to_string(answers.size()) +
                      " answers, expected 10");
    }
    for (const json& ans : answers) {
      if (!ans.is_object()) detail::schema_error(where, "answer entries must be objects");
      a.human_answers.push_back(detail::string_field(ans, "answer", where));
    }

    const std::string type = detail::string_field(rec, "answer_type", where);
    const auto parsed = parse_answer_type(type);
    if (!parsed) detail::schema_error(where, "unknown answer_type '" + type + "'");
    a.answer_type = *parsed;

    const json& answerable = detail::field(rec, "answerable", where);
    if (!answerable.is_number_integer() ||
        (answerable.get<long long>() != 0 && answerable.get<long long>() != 1)) {
      detail::schema_error(where, "'answerable' must be 0 or 1");
    }
    a.answerable = answerable.get<long long>() == 1;

    if (!seen.insert(a.image_id).second) {
      throw Error(ErrorCode::kDuplicateKey,
                  "annotations: image '" + a.image_id + "' appears twice");
    }
    out.push_back(std::move(a));
  }
  return out;
}

/// Predictions as a JSON array sorted by image id.
inline json predictions_to_json(std::vector<Prediction> preds) {
  std::sort(preds.begin(), preds.end(), [](const auto& a, const auto& b) {
    return a.image_id < b.image_id;
  });
  json arr = json::array();
  for (const auto& p : preds) {
    arr.push_back({{"image", p.image_id}, {"answer", p.answer}});
  }
  return arr;
}

/// One candidate set per image across all prediction files; model ids are
/// "m1", "m2", ... in file order. An image missing from some files is
/// ensembled over the files that have it.
inline std::vector<CandidateSet> gather_candidates(
    const std::vector<std::vector<Prediction>>& files) {
  std::map<std::string, CandidateSet> by_image;
  for (std::size_t f = 0; f < files.size(); ++f) {
    for (const auto& p : files[f]) {
      auto& set = by_image[p.image_id];
      set.question_key = p.image_id;
      set.candidates.push_back({"m" + std::to_string(f + 1), p.answer});
    }
  }
  std::vector<CandidateSet> out;
  out.reserve(by_image.size());
  for (auto& [_, set] : by_image) out.push_back(std::move(set));
  return out;
}

inline json category_json(const CategoryScore& s) {
  return {{"accuracy", s.accuracy_percent()},
          {"accuracy_text", format_percent(s)},
          {"count", s.count}};
}

inline json report_to_json(const EvalReport& r) {
  json cats = json::object();
  for (AnswerType t : kAnswerTypes) {
    const auto it = r.per_category.find(t);
    cats[std::string(to_string(t))] =
        category_json(it == r.per_category.end() ? CategoryScore{} : it->second);
  }
  return {{"per_category", cats},
          {"overall", category_json(r.overall)},
          {"unmatched", r.unmatched}};
}

inline ToyConfig parse_toy_config(const json& doc) {
  const std::string where = "toy config";
  if (!doc.is_object()) detail::schema_error(where, "must be a JSON object");
  ToyConfig cfg;
  cfg.dim = detail::uint_field(doc, "d", where);
  cfg.heads = detail::uint_field(doc, "heads", where);
  cfg.n_vit = detail::uint_field(doc, "n_vit", where);
  if (doc.contains("n_text")) cfg.n_text = detail::uint_field(doc, "n_text", where);

  const json& lora = detail::field(doc, "lora", where);
  if (!lora.is_object()) detail::schema_error(where, "'lora' must be an object");
  cfg.lora_rank = detail::uint_field(lora, "rank", where + ".lora");
  const json& alpha = detail::field(lora, "alpha", where + ".lora");
  if (!alpha.is_number()) detail::schema_error(where, "'lora.alpha' must be a number");
  cfg.lora_alpha = alpha.get<double>();
  const json& targets = detail::field(lora, "targets", where + ".lora");
  if (!targets.is_array()) detail::schema_error(where, "'lora.targets' must be an array");
  cfg.lora_targets.clear();
  for (const json& t : targets) {
    if (!t.is_string()) detail::schema_error(where, "'lora.targets' entries must be strings");
    cfg.lora_targets.push_back(t.get<std::string>());
  }

  const json& cat = detail::field(doc, "cross_attention_trainable", where);
  if (!cat.is_boolean()) {
    detail::schema_error(where, "'cross_attention_trainable' must be a boolean");
  }
  cfg.cross_attention_trainable = cat.get<bool>();

  if (auto it = doc.find("integration"); it != doc.end() && !it->is_null()) {
    if (!it->is_object()) detail::schema_error(where, "'integration' must be an object");
    cfg.integration = std::make_pair(
        detail::uint_field(*it, "gh", where + ".integration"),
        detail::uint_field(*it, "gw", where + ".integration"));
  }
  cfg.validate();
  return cfg;
}

inline json toy_config_to_json(const ToyConfig& cfg) {
  json j = {{"d", cfg.dim},
            {"heads", cfg.heads},
            {"n_vit", cfg.n_vit},
            {"n_text", cfg.n_text},
            {"lora",
             {{"rank", cfg.lora_rank},
              {"alpha", cfg.lora_alpha},
              {"targets", cfg.lora_targets}}},
            {"cross_attention_trainable", cfg.cross_attention_trainable}};
  if (cfg.integration) {
    j["integration"] = {{"gh", cfg.integration->first},
                        {"gw", cfg.integration->second}};
  } else {
    j["integration"] = nullptr;
  }
  return j;
}

inline json param_report_to_json(const ParamReport& r) {
  json groups = json::object();
  for (const auto& [name, g] : r.groups) {
    groups[name] = {{"trainable", g.trainable}, {"frozen", g.frozen}};
  }
  return {{"total", r.total},
          {"trainable", r.trainable},
          {"frozen", r.frozen},
          {"groups", groups}};
}

}  // namespace vqakit
