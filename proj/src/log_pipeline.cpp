#include "fedlad/log_pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace fedlad {

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_hex_digit(char c) {
    return is_digit(c) || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F');
}
bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

constexpr const char* kMask = "<*>";

// Matchers return the length of the token starting at i, or 0.

std::size_t match_blk(const std::string& t, std::size_t i) {
    if (t.compare(i, 4, "blk_") != 0) return 0;
    std::size_t j = i + 4;
    if (j < t.size() && t[j] == '-') ++j;
    std::size_t digits = j;
    while (j < t.size() && is_digit(t[j])) ++j;
    return j > digits ? j - i : 0;
}

std::size_t match_hex(const std::string& t, std::size_t i) {
    if (i + 2 >= t.size() || t[i] != '0' || t[i + 1] != 'x') return 0;
    std::size_t j = i + 2;
    while (j < t.size() && is_hex_digit(t[j])) ++j;
    return j > i + 2 ? j - i : 0;
}

std::size_t match_ipv4(const std::string& t, std::size_t i) {
    std::size_t j = i;
    for (int octet = 0; octet < 4; ++octet) {
        if (octet > 0) {
            if (j >= t.size() || t[j] != '.') return 0;
            ++j;
        }
        std::size_t d = 0;
        while (j < t.size() && is_digit(t[j]) && d < 3) {
            ++j;
            ++d;
        }
        if (d == 0) return 0;
    }
    if (j < t.size() && is_digit(t[j])) return 0;  // four octets only
    return j - i;
}

std::size_t match_path(const std::string& t, std::size_t i) {
    // Absolute path with at least two segments: /seg/seg...
    std::size_t j = i;
    int segments = 0;
    while (j < t.size() && t[j] == '/') {
        std::size_t seg = j + 1;
        while (seg < t.size() && !is_space(t[seg]) && t[seg] != '/') ++seg;
        if (seg == j + 1) break;  // empty segment
        ++segments;
        j = seg;
    }
    return segments >= 2 ? j - i : 0;
}

std::size_t match_int(const std::string& t, std::size_t i) {
    std::size_t j = i;
    while (j < t.size() && is_digit(t[j])) ++j;
    return j - i;
}

}  // namespace

std::string mask_line(const std::string& text, std::vector<std::string>* params,
                      std::optional<std::string>* session_key) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        const bool at_boundary = i == 0 || !is_word_char(text[i - 1]);
        std::size_t len = 0;
        bool is_blk = false;
        if (at_boundary) {
            if (c == 'b') {
                len = match_blk(text, i);
                is_blk = len > 0;
            } else if (c == '0' && (len = match_hex(text, i)) > 0) {
                // hex token
            } else if (is_digit(c)) {
                len = match_ipv4(text, i);
                if (len == 0) len = match_int(text, i);
            } else if (c == '/') {
                len = match_path(text, i);
            }
        }
        if (len == 0) {
            out.push_back(c);
            ++i;
            continue;
        }
        std::string token = text.substr(i, len);
        if (is_blk && session_key && !session_key->has_value()) *session_key = token;
        if (params) params->push_back(std::move(token));
        out += kMask;
        i += len;
    }
    return out;
}

TemplateDictionary::TemplateDictionary() {
    templates_.push_back({kPadId, kPadTemplateText, 0});
    by_text_[kPadTemplateText] = kPadId;
}

int TemplateDictionary::intern(const std::string& template_text) {
    auto it = by_text_.find(template_text);
    if (it != by_text_.end()) {
        templates_[static_cast<std::size_t>(it->second)].occurrence_count++;
        return it->second;
    }
    const int id = static_cast<int>(templates_.size());
    templates_.push_back({id, template_text, 1});
    by_text_[template_text] = id;
    return id;
}

const EventTemplate& TemplateDictionary::entry(int id) const {
    if (id < 0 || id >= size()) throw std::out_of_range("template id out of range");
    return templates_[static_cast<std::size_t>(id)];
}

TemplateDictionary TemplateDictionary::merge(std::span<const TemplateDictionary> parts,
                                             std::vector<std::vector<int>>* remaps) {
    std::map<std::string, std::size_t> combined;  // text -> total occurrences
    for (const auto& part : parts) {
        for (const auto& t : part.entries()) {
            if (t.template_id == kPadId) continue;
            combined[t.template_text] += t.occurrence_count;
        }
    }
    TemplateDictionary merged;
    for (const auto& [text, count] : combined) {
        const int id = merged.intern(text);
        merged.templates_[static_cast<std::size_t>(id)].occurrence_count = count;
    }
    if (remaps) {
        remaps->clear();
        for (const auto& part : parts) {
            std::vector<int> remap(static_cast<std::size_t>(part.size()), kPadId);
            for (const auto& t : part.entries()) {
                if (t.template_id == kPadId) continue;
                remap[static_cast<std::size_t>(t.template_id)] =
                    merged.by_text_.at(t.template_text);
            }
            remaps->push_back(std::move(remap));
        }
    }
    return merged;
}

ParsedEvent parse_line(const RawLogLine& raw, TemplateDictionary& dictionary) {
    if (std::all_of(raw.text.begin(), raw.text.end(), is_space)) {
        throw std::invalid_argument("parse_line: blank line");
    }
    ParsedEvent ev;
    std::string masked = mask_line(raw.text, &ev.params, &ev.session_key);
    ev.template_id = dictionary.intern(masked);
    return ev;
}

void Dataset::recompute_anomaly_rate() {
    if (sequences.empty()) {
        anomaly_rate = 0.0;
        return;
    }
    std::size_t anomalous = 0;
    for (const auto& s : sequences) anomalous += s.label == 1 ? 1 : 0;
    anomaly_rate = static_cast<double>(anomalous) / static_cast<double>(sequences.size());
}

std::size_t window_count(std::size_t n, int window_size, int step) {
    if (window_size < 1 || step < 1) throw std::invalid_argument("window_size and step must be >= 1");
    if (n == 0) return 0;
    const std::size_t w = static_cast<std::size_t>(window_size);
    const std::size_t s = static_cast<std::size_t>(step);
    const std::size_t over = n > w ? n - w : 0;
    return (over + s - 1) / s + 1;
}

std::vector<LogSequence> window_sequences(std::span<const ParsedEvent> events,
                                          int window_size, int step) {
    const std::size_t count = window_count(events.size(), window_size, step);
    std::vector<LogSequence> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t start = i * static_cast<std::size_t>(step);
        LogSequence seq;
        seq.events.resize(static_cast<std::size_t>(window_size), kPadId);
        const std::size_t take =
            std::min<std::size_t>(static_cast<std::size_t>(window_size), events.size() - start);
        for (std::size_t j = 0; j < take; ++j) seq.events[j] = events[start + j].template_id;
        out.push_back(std::move(seq));
    }
    return out;
}

bool line_is_anomalous(const std::string& raw_text) {
    std::size_t i = 0;
    while (i < raw_text.size() && is_space(raw_text[i])) ++i;
    std::size_t j = i;
    while (j < raw_text.size() && !is_space(raw_text[j])) ++j;
    return raw_text.substr(i, j - i) != "-";
}

Dataset align_labels_session(std::span<const ParsedEvent> events, int window_size, int step,
                             const std::unordered_set<std::string>& anomaly_keys,
                             int vocab_size) {
    // Group events by session key in first-seen order; keyless events cannot be
    // attributed to a session and are skipped.
    std::vector<std::string> key_order;
    std::unordered_map<std::string, std::vector<ParsedEvent>> groups;
    for (const auto& ev : events) {
        if (!ev.session_key) continue;
        auto [it, inserted] = groups.try_emplace(*ev.session_key);
        if (inserted) key_order.push_back(*ev.session_key);
        it->second.push_back(ev);
    }
    if (key_order.empty()) throw ConfigError("label mode mismatch");

    Dataset ds;
    ds.vocab_size = vocab_size;
    for (const auto& key : key_order) {
        auto windows = window_sequences(groups.at(key), window_size, step);
        const int label = anomaly_keys.count(key) ? 1 : 0;
        for (auto& w : windows) {
            w.label = label;
            w.origin = key;
            ds.sequences.push_back(std::move(w));
        }
    }
    ds.recompute_anomaly_rate();
    return ds;
}

Dataset align_labels_line(std::span<const ParsedEvent> events, std::span<const char> marks,
                          int window_size, int step, int vocab_size,
                          const std::string& origin_prefix) {
    if (marks.size() != events.size()) {
        throw std::invalid_argument("align_labels_line: marks and events differ in length");
    }
    Dataset ds;
    ds.vocab_size = vocab_size;
    auto windows = window_sequences(events, window_size, step);
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const std::size_t start = i * static_cast<std::size_t>(step);
        const std::size_t take =
            std::min<std::size_t>(static_cast<std::size_t>(window_size), events.size() - start);
        int label = 0;
        for (std::size_t j = 0; j < take; ++j) {
            if (marks[start + j]) {
                label = 1;
                break;
            }
        }
        windows[i].label = label;
        windows[i].origin = origin_prefix + ":" + std::to_string(start);
        ds.sequences.push_back(std::move(windows[i]));
    }
    ds.recompute_anomaly_rate();
    return ds;
}

std::vector<double> featurize_counts(const LogSequence& seq, int vocab_size) {
    if (vocab_size < 1) throw std::invalid_argument("vocab_size must be >= 1");
    std::vector<double> counts(static_cast<std::size_t>(vocab_size), 0.0);
    for (int id : seq.events) {
        if (id < 0 || id >= vocab_size) {
            throw std::invalid_argument("featurize_counts: template id " + std::to_string(id) +
                                        " out of range for vocab_size " +
                                        std::to_string(vocab_size));
        }
        if (id == kPadId) continue;
        counts[static_cast<std::size_t>(id)] += 1.0;
    }
    return counts;
}

PreparedDataset prepare_log_file(const std::string& path, const PrepareOptions& options,
                                 const std::unordered_set<std::string>* anomaly_keys) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read log file: " + path);

    PreparedDataset prepared;
    std::vector<ParsedEvent> events;
    std::vector<char> marks;
    std::string line;
    std::size_t line_no = 0;
    std::size_t event_index = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (std::all_of(line.begin(), line.end(), is_space)) continue;
        RawLogLine raw{line_no, line, path};
        ParsedEvent ev = parse_line(raw, prepared.dictionary);
        ev.timestamp_index = event_index++;
        events.push_back(std::move(ev));
        marks.push_back(line_is_anomalous(line) ? 1 : 0);
    }

    const int vocab = prepared.dictionary.size();
    if (options.mode == LabelMode::kSession) {
        if (!anomaly_keys) throw ConfigError("session label mode requires an anomaly-label CSV");
        prepared.dataset =
            align_labels_session(events, options.window_size, options.step, *anomaly_keys, vocab);
    } else {
        const std::string origin = std::filesystem::path(path).filename().string();
        prepared.dataset =
            align_labels_line(events, marks, options.window_size, options.step, vocab, origin);
    }
    return prepared;
}

std::unordered_set<std::string> load_label_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read label CSV: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "key,label") {
        throw ConfigError("label CSV must start with header 'key,label': " + path);
    }
    std::unordered_set<std::string> keys;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const auto comma = line.rfind(',');
        if (comma == std::string::npos) {
            throw ConfigError("label CSV row " + std::to_string(row) + " is not 'key,label'");
        }
        const std::string key = line.substr(0, comma);
        const std::string label = line.substr(comma + 1);
        if (label == "1") {
            keys.insert(key);
        } else if (label != "0") {
            throw ConfigError("label CSV row " + std::to_string(row) + " has label '" + label +
                              "', expected 0 or 1");
        }
    }
    return keys;
}

void write_dataset_jsonl(const std::string& path, const Dataset& dataset,
                         const TemplateDictionary& dictionary) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write dataset file: " + path);
    for (const auto& seq : dataset.sequences) {
        nlohmann::ordered_json j;
        j["events"] = seq.events;
        j["label"] = seq.label;
        j["origin"] = seq.origin;
        out << j.dump() << '\n';
    }
    out.close();

    const auto vocab_path = std::filesystem::path(path).parent_path() / "vocab.json";
    std::ofstream vout(vocab_path, std::ios::trunc);
    if (!vout) throw ConfigError("cannot write vocab sidecar: " + vocab_path.string());
    nlohmann::ordered_json vocab;
    for (const auto& t : dictionary.entries()) {
        vocab[std::to_string(t.template_id)] = t.template_text;
    }
    vout << vocab.dump(2) << '\n';
}

Dataset load_dataset_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read dataset file: " + path);
    Dataset ds;
    int max_id = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("dataset line " + std::to_string(line_no) + ": " + e.what());
        }
        LogSequence seq;
        seq.events = j.at("events").get<std::vector<int>>();
        seq.label = j.at("label").get<int>();
        seq.origin = j.value("origin", std::string{});
        for (int id : seq.events) max_id = std::max(max_id, id);
        ds.sequences.push_back(std::move(seq));
    }
    const auto vocab_path = std::filesystem::path(path).parent_path() / "vocab.json";
    if (std::filesystem::exists(vocab_path)) {
        std::ifstream vin(vocab_path);
        nlohmann::json vocab = nlohmann::json::parse(vin);
        ds.vocab_size = static_cast<int>(vocab.size());
    } else {
        ds.vocab_size = max_id + 1;
    }
    ds.recompute_anomaly_rate();
    return ds;
}

DatasetStats compute_stats(const Dataset& dataset) {
    DatasetStats stats;
    stats.num_sequences = dataset.sequences.size();
    stats.vocab_size = dataset.vocab_size;
    stats.anomaly_rate = dataset.anomaly_rate;
    double entropy_sum = 0.0;
    for (const auto& seq : dataset.sequences) {
        std::map<int, std::size_t> counts;
        std::size_t total = 0;
        for (int id : seq.events) {
            if (id == kPadId) continue;
            counts[id]++;
            ++total;
        }
        double h = 0.0;
        for (const auto& [id, c] : counts) {
            const double p = static_cast<double>(c) / static_cast<double>(total);
            h -= p * std::log2(p);
        }
        entropy_sum += h;
    }
    stats.mean_sequence_entropy =
        dataset.sequences.empty() ? 0.0 : entropy_sum / static_cast<double>(dataset.sequences.size());
    return stats;
}

}  // namespace fedlad
