#include "mixprompt/extract.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mixprompt/errors.hpp"
#include "mixprompt/text_util.hpp"

namespace mixprompt {

using nlohmann::json;

ParsedAugmentation parse_augmentation(std::string_view completion_text,
                                      const TaskSpecification& spec) {
  std::string_view item = completion_text.substr(0, completion_text.find('\n'));
  item = trim_view(item);
  if (item.empty() || item.back() != ')') {
    throw ParseError(ParseErrorKind::kNoLabel, "item does not end with a label group");
  }
  const std::size_t open = item.rfind('(');
  if (open == std::string_view::npos) {
    throw ParseError(ParseErrorKind::kNoLabel, "no opening parenthesis");
  }
  std::string_view group = item.substr(open + 1, item.size() - open - 2);
  const std::size_t colon = group.find(':');
  if (colon == std::string_view::npos ||
      !iequals_ascii(trim_view(group.substr(0, colon)), spec.label_type)) {
    throw ParseError(ParseErrorKind::kNoLabel, "trailing group is not a '" + spec.label_type +
                                                   ":' label");
  }
  std::string_view token = trim_view(group.substr(colon + 1));
  auto label = spec.label_for_token(token);
  if (!label) {
    throw ParseError(ParseErrorKind::kUnknownLabel, "'" + std::string(token) + "'");
  }
  std::string text = trim(item.substr(0, open));
  if (text.empty()) throw ParseError(ParseErrorKind::kEmptyText, "nothing before the label");
  return {std::move(text), *label};
}

std::vector<double> compute_soft_label(const ScoreMap& scores, const TaskSpecification& spec) {
  const std::size_t n = spec.num_labels();
  std::vector<double> logits(n, std::numeric_limits<double>::quiet_NaN());
  std::vector<bool> seen(n, false);
  for (const auto& [token, logprob] : scores) {
    auto label = spec.label_for_token(token);
    if (!label) continue;
    if (seen[*label]) {
      throw ScoringError("label token '" + spec.tokens[*label] + "' scored twice");
    }
    if (!std::isfinite(logprob)) {
      throw ScoringError("non-finite log-probability for '" + token + "'");
    }
    seen[*label] = true;
    logits[*label] = logprob;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!seen[i]) throw ScoringError("no score for label token '" + spec.tokens[i] + "'");
  }
  double max = logits[0];
  for (double v : logits) max = std::max(max, v);
  std::vector<double> out(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::exp(logits[i] - max);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

void validate_record(const AugmentationRecord& record, std::size_t num_labels) {
  if (trim_view(record.text).empty()) throw ValidationError("record text is empty");
  if (record.soft_label.size() != num_labels) {
    throw ValidationError("record soft label has " + std::to_string(record.soft_label.size()) +
                          " entries for " + std::to_string(num_labels) + " labels");
  }
  double sum = 0.0;
  for (double p : record.soft_label) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ValidationError("record soft label has a bad entry");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("record soft label does not sum to 1");
  if (record.generated_label >= num_labels) {
    throw ValidationError("record generated label out of range");
  }
}

std::string serialize_records(std::span<const AugmentationRecord> records,
                              std::span<const std::string> labels) {
  std::string out;
  for (const auto& r : records) {
    json obj = {{"text", r.text},
                {"soft_label", r.soft_label},
                {"generated_label", labels[r.generated_label]},
                {"anchors", r.anchor_indices},
                {"model", r.model},
                {"raw_completion", r.raw_completion}};
    out += obj.dump(-1, ' ', false, json::error_handler_t::replace);
    out += '\n';
  }
  return out;
}

std::vector<AugmentationRecord> parse_records(std::string_view content,
                                              std::span<const std::string> labels) {
  std::vector<AugmentationRecord> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < content.size()) {
    auto nl = content.find('\n', start);
    std::string_view line = content.substr(start, nl == std::string_view::npos ? content.npos : nl - start);
    start = nl == std::string_view::npos ? content.size() : nl + 1;
    ++line_no;
    if (trim_view(line).empty()) continue;
    try {
      json obj = json::parse(line);
      AugmentationRecord r;
      r.text = obj.at("text").get<std::string>();
      r.soft_label = obj.at("soft_label").get<std::vector<double>>();
      const auto name = obj.at("generated_label").get<std::string>();
      std::size_t idx = 0;
      while (idx < labels.size() && labels[idx] != name) ++idx;
      if (idx == labels.size()) throw LoadError("unknown generated_label '" + name + "'", line_no);
      r.generated_label = idx;
      r.anchor_indices = obj.value("anchors", std::vector<std::size_t>{});
      r.model = obj.value("model", std::string());
      r.raw_completion = obj.value("raw_completion", std::string());
      validate_record(r, labels.size());
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw LoadError("line " + std::to_string(line_no) + ": " + e.what(), line_no);
    } catch (const LoadError&) {
      throw;
    } catch (const ValidationError& e) {
      throw LoadError("line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }
  return out;
}

void save_records(std::span<const AugmentationRecord> records,
                  std::span<const std::string> labels, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << serialize_records(records, labels);
}

std::vector<AugmentationRecord> load_records(const std::filesystem::path& path,
                                             std::span<const std::string> labels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_records(ss.str(), labels);
}

}  // namespace mixprompt
