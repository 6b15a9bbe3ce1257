#include "mixprompt/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "mixprompt/errors.hpp"
#include "mixprompt/random.hpp"
#include "mixprompt/text_util.hpp"

namespace mixprompt {

using nlohmann::json;

Dataset::Dataset(std::vector<std::string> labels, std::vector<LabeledExample> examples,
                 std::map<std::string, std::vector<std::size_t>> splits)
    : labels_(std::move(labels)), examples_(std::move(examples)), splits_(std::move(splits)) {
  std::set<std::string_view> seen;
  for (const auto& label : labels_) {
    if (label.empty()) throw ValidationError("dataset: empty label name");
    if (!seen.insert(label).second) {
      throw ValidationError("dataset: duplicate label '" + label + "'");
    }
  }
  for (std::size_t i = 0; i < examples_.size(); ++i) {
    auto& ex = examples_[i];
    ex.text = trim(ex.text);
    if (ex.text.empty()) {
      throw ValidationError("dataset: example " + std::to_string(i) + " has empty text");
    }
    if (ex.label >= labels_.size()) {
      throw ValidationError("dataset: example " + std::to_string(i) +
                            " has label index out of range");
    }
  }
  for (auto& [name, indices] : splits_) {
    for (std::size_t idx : indices) {
      if (idx >= examples_.size()) {
        throw ValidationError("dataset: split '" + name + "' refers to a missing example");
      }
    }
  }
}

bool Dataset::has_split(std::string_view name) const {
  return splits_.find(std::string(name)) != splits_.end();
}

Dataset Dataset::split(std::string_view name) const {
  auto it = splits_.find(std::string(name));
  if (it == splits_.end()) {
    throw ValidationError("dataset has no split '" + std::string(name) + "'");
  }
  std::vector<LabeledExample> out;
  out.reserve(it->second.size());
  for (std::size_t idx : it->second) out.push_back(examples_[idx]);
  return Dataset(labels_, std::move(out));
}

std::optional<std::size_t> Dataset::label_index(std::string_view name) const {
  auto it = std::find(labels_.begin(), labels_.end(), name);
  if (it == labels_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - labels_.begin());
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(labels_.size(), 0);
  for (const auto& ex : examples_) ++counts[ex.label];
  return counts;
}

DatasetFormat parse_dataset_format(std::string_view name) {
  if (name == "jsonl") return DatasetFormat::kJsonl;
  if (name == "tsv") return DatasetFormat::kTsv;
  throw ConfigError("unknown dataset format '" + std::string(name) + "' (jsonl or tsv)");
}

DatasetFormat format_from_path(const std::filesystem::path& path) {
  auto ext = to_lower_ascii(path.extension().string());
  return (ext == ".tsv" || ext == ".txt") ? DatasetFormat::kTsv : DatasetFormat::kJsonl;
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string_view> split_lines(std::string_view content) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= content.size()) {
    std::size_t nl = content.find('\n', start);
    if (nl == std::string_view::npos) {
      if (start < content.size()) lines.push_back(content.substr(start));
      break;
    }
    std::string_view line = content.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = nl + 1;
  }
  return lines;
}

// Accumulates records while resolving label names to indices.
class DatasetBuilder {
 public:
  explicit DatasetBuilder(std::optional<std::vector<std::string>> fixed)
      : fixed_(fixed.has_value()) {
    if (fixed) {
      for (auto& label : *fixed) add_label(std::move(label), 0);
    }
  }

  void fix_labels(std::vector<std::string> labels, std::size_t line) {
    if (fixed_) return;  // an explicit label list wins over a file header
    for (auto& label : labels) add_label(std::move(label), line);
    fixed_ = true;
  }

  void add(std::string_view raw_text, const std::string& label, const std::string& split,
           std::size_t line) {
    std::string text = trim(raw_text);
    if (text.empty()) throw LoadError("line " + std::to_string(line) + ": empty text", line);
    if (label.empty()) throw LoadError("line " + std::to_string(line) + ": empty label", line);
    std::size_t idx;
    auto it = index_.find(label);
    if (it != index_.end()) {
      idx = it->second;
    } else if (fixed_) {
      throw LoadError("line " + std::to_string(line) + ": unknown label '" + label + "'", line);
    } else {
      idx = add_label(label, line);
    }
    if (!split.empty()) splits_[split].push_back(examples_.size());
    examples_.push_back({std::move(text), idx});
  }

  Dataset finish() {
    if (examples_.empty()) throw LoadError("no records");
    return Dataset(std::move(labels_), std::move(examples_), std::move(splits_));
  }

 private:
  std::size_t add_label(std::string label, std::size_t line) {
    if (label.empty()) throw LoadError("empty label name in label list", line);
    if (index_.count(label)) throw LoadError("duplicate label '" + label + "'", line);
    index_.emplace(label, labels_.size());
    labels_.push_back(std::move(label));
    return labels_.size() - 1;
  }

  bool fixed_;
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<LabeledExample> examples_;
  std::map<std::string, std::vector<std::size_t>> splits_;
};

std::string field_string(const json& obj, const char* key, std::size_t line, bool required) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) {
    if (required) {
      throw LoadError("line " + std::to_string(line) + ": missing field \"" + key + "\"", line);
    }
    return {};
  }
  if (!it->is_string()) {
    throw LoadError("line " + std::to_string(line) + ": field \"" + key + "\" is not a string",
                    line);
  }
  return it->get<std::string>();
}

Dataset parse_jsonl(std::string_view content, const LoadOptions& options) {
  DatasetBuilder builder(options.labels);
  bool first_record = true;
  std::size_t line_no = 0;
  for (std::string_view line : split_lines(content)) {
    ++line_no;
    if (trim_view(line).empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw LoadError("line " + std::to_string(line_no) + ": invalid JSON", line_no);
    }
    if (!obj.is_object()) {
      throw LoadError("line " + std::to_string(line_no) + ": record is not an object", line_no);
    }
    if (first_record && obj.contains("labels") && !obj.contains("text")) {
      std::vector<std::string> labels;
      try {
        labels = obj.at("labels").get<std::vector<std::string>>();
      } catch (const json::exception&) {
        throw LoadError("line " + std::to_string(line_no) + ": labels must be strings", line_no);
      }
      builder.fix_labels(std::move(labels), line_no);
      first_record = false;
      continue;
    }
    first_record = false;
    builder.add(field_string(obj, "text", line_no, true), field_string(obj, "label", line_no, true),
                field_string(obj, "split", line_no, false), line_no);
  }
  return builder.finish();
}

Dataset parse_tsv(std::string_view content, const LoadOptions& options) {
  DatasetBuilder builder(options.labels);
  std::size_t line_no = 0;
  bool header_pending = options.tsv_header;
  for (std::string_view line : split_lines(content)) {
    ++line_no;
    if (trim_view(line).empty()) continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    std::vector<std::string_view> cols;
    std::size_t start = 0;
    while (true) {
      std::size_t tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab == std::string_view::npos ? line.npos : tab - start));
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    if (cols.size() < 2 || cols.size() > 3) {
      throw LoadError("row " + std::to_string(line_no) + ": expected text<TAB>label[<TAB>split], got " +
                          std::to_string(cols.size()) + " column(s)",
                      line_no);
    }
    builder.add(cols[0], trim(cols[1]), cols.size() == 3 ? trim(cols[2]) : std::string(), line_no);
  }
  return builder.finish();
}

std::vector<std::string> split_of_examples(const Dataset& dataset) {
  std::vector<std::string> out(dataset.size());
  for (const auto& [name, indices] : dataset.splits()) {
    for (std::size_t idx : indices) {
      if (out[idx].empty()) out[idx] = name;
    }
  }
  return out;
}

std::string dump_json(const json& j) {
  try {
    return j.dump();
  } catch (const json::type_error& e) {
    throw ValidationError(std::string("cannot serialize text as JSON: ") + e.what());
  }
}

}  // namespace

Dataset parse_dataset(std::string_view content, const LoadOptions& options) {
  return options.format == DatasetFormat::kJsonl ? parse_jsonl(content, options)
                                                 : parse_tsv(content, options);
}

Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& options) {
  return parse_dataset(read_file(path), options);
}

std::string serialize_dataset(const Dataset& dataset, const SaveOptions& options) {
  std::string out;
  auto splits = split_of_examples(dataset);
  if (options.format == DatasetFormat::kJsonl) {
    out += dump_json(json{{"labels", dataset.labels()}});
    out += '\n';
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      json obj = {{"text", dataset[i].text}, {"label", dataset.labels()[dataset[i].label]}};
      if (!splits[i].empty()) obj["split"] = splits[i];
      out += dump_json(obj);
      out += '\n';
    }
    return out;
  }
  if (options.tsv_header) out += "text\tlabel\n";
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& text = dataset[i].text;
    if (text.find_first_of("\t\n\r") != std::string::npos) {
      throw ValidationError("example " + std::to_string(i) +
                            " contains a tab or newline and cannot be written as tsv");
    }
    out += text;
    out += '\t';
    out += dataset.labels()[dataset[i].label];
    if (!splits[i].empty()) {
      out += '\t';
      out += splits[i];
    }
    out += '\n';
  }
  return out;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path,
                  const SaveOptions& options) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << serialize_dataset(dataset, options);
}

std::string normalize_text(std::string_view text) {
  static constexpr std::string_view kPadded = "\".?!:()[],";
  std::string padded;
  padded.reserve(text.size() + text.size() / 2);
  for (char c : text) {
    if (kPadded.find(c) != std::string_view::npos) {
      padded += ' ';
      padded += c;
      padded += ' ';
    } else if (c >= 'A' && c <= 'Z') {
      padded += static_cast<char>(c - 'A' + 'a');
    } else {
      padded += c;
    }
  }
  return trim(collapse_whitespace(padded));
}

SubsampleAmount parse_subsample_amount(std::string_view text) {
  std::string s = trim(text);
  if (s.empty()) throw ConfigError("empty sub-sample amount");
  if (s.find_first_of(".eE") != std::string::npos) {
    try {
      std::size_t used = 0;
      double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      if (v > 0.0 && v <= 1.0) return Fraction{v};
    } catch (const std::exception&) {
    }
    throw ConfigError("invalid sub-sample fraction '" + s + "', expected a value in (0, 1]");
  }
  std::size_t count = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), count);
  if (ec != std::errc() || ptr != s.data() + s.size() || count == 0) {
    throw ConfigError("invalid sub-sample count '" + s + "', expected an integer >= 1");
  }
  return PerClassCount{count};
}

std::string to_string(const SubsampleAmount& amount) {
  if (const auto* f = std::get_if<Fraction>(&amount)) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", f->value);
    std::string s = buf;
    if (s.find_first_of(".e") == std::string::npos) s += ".0";
    return s;
  }
  return std::to_string(std::get<PerClassCount>(amount).value);
}

std::size_t subsample_class_size(const SubsampleAmount& amount, std::size_t available) {
  if (const auto* f = std::get_if<Fraction>(&amount)) {
    if (!(f->value > 0.0 && f->value <= 1.0)) {
      throw ConfigError("sub-sample fraction must be in (0, 1], got " + to_string(amount));
    }
    auto n = static_cast<std::size_t>(std::llround(f->value * static_cast<double>(available)));
    return std::max<std::size_t>(1, n);
  }
  std::size_t n = std::get<PerClassCount>(amount).value;
  if (n == 0) throw ConfigError("per-class sub-sample count must be >= 1");
  if (n > available) {
    throw ConfigError("per-class count " + std::to_string(n) + " exceeds the " +
                      std::to_string(available) + " available examples");
  }
  return n;
}

Dataset class_balanced_subsample(const Dataset& dataset, const SubsampleAmount& amount,
                                 std::uint64_t seed) {
  if (dataset.empty()) throw ValidationError("cannot sub-sample an empty dataset");
  std::vector<std::vector<std::size_t>> by_class(dataset.labels().size());
  for (std::size_t i = 0; i < dataset.size(); ++i) by_class[dataset[i].label].push_back(i);

  std::vector<LabeledExample> out;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& pool = by_class[c];
    if (pool.empty()) continue;
    std::size_t take = subsample_class_size(amount, pool.size());
    Rng rng = make_rng({seed, static_cast<std::uint64_t>(c)});
    for (std::size_t i = 0; i < take; ++i) {
      std::size_t j = i + uniform_index(rng, pool.size() - i);
      std::swap(pool[i], pool[j]);
    }
    std::sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
    for (std::size_t i = 0; i < take; ++i) out.push_back(dataset[pool[i]]);
  }
  return Dataset(dataset.labels(), std::move(out));
}

std::string dataset_fingerprint(const Dataset& dataset) {
  std::string buf;
  for (const auto& label : dataset.labels()) {
    buf += label;
    buf += '\x1f';
  }
  buf += '\x1e';
  for (const auto& ex : dataset.examples()) {
    buf += ex.text;
    buf += '\x1f';
    buf += std::to_string(ex.label);
    buf += '\x1e';
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx",
                static_cast<unsigned long long>(stable_hash(buf, 0x5eed)));
  return hex;
}

}  // namespace mixprompt
