#ifndef FEDLAD_LOG_PIPELINE_HPP
#define FEDLAD_LOG_PIPELINE_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "fedlad/common.hpp"

namespace fedlad {

// Template id 0 is reserved for window padding; real templates start at 1.
inline constexpr int kPadId = 0;
inline constexpr const char* kPadTemplateText = "<PAD>";

struct RawLogLine {
    std::size_t line_no = 0;  // 1-based
    std::string text;
    std::string source_file;
};

struct EventTemplate {
    int template_id = 0;
    std::string template_text;  // variable parts replaced by <*>
    std::size_t occurrence_count = 0;
};

// Mutable template store. Ids are dense, assigned in first-seen order,
// with the PAD pseudo-template pre-seeded at id 0.
class TemplateDictionary {
public:
    TemplateDictionary();

    // Returns the id for the template text, interning it if unseen.
    int intern(const std::string& template_text);

    const EventTemplate& entry(int id) const;
    const std::string& text(int id) const { return entry(id).template_text; }

    // Number of ids including PAD; equals the dataset vocabulary size.
    int size() const { return static_cast<int>(templates_.size()); }

    const std::vector<EventTemplate>& entries() const { return templates_; }

    // Merges dictionaries built independently (e.g. one per file). Ids are
    // re-densified by lexicographic template_text order so the result does not
    // depend on merge order. Returns per-input remap tables old_id -> new_id.
    static TemplateDictionary merge(std::span<const TemplateDictionary> parts,
                                    std::vector<std::vector<int>>* remaps);

private:
    std::vector<EventTemplate> templates_;
    std::unordered_map<std::string, int> by_text_;
};

struct ParsedEvent {
    int template_id = kPadId;
    std::vector<std::string> params;             // masked substrings, in order of appearance
    std::optional<std::string> session_key;      // first blk_* token, if any
    std::size_t timestamp_index = 0;             // position in the event stream
};

// Replaces decimal integers, 0x hex tokens, dotted IPv4 addresses, blk_ ids and
// absolute paths (>= 2 segments) with <*>. Masked substrings are appended to
// params; the first blk_ token becomes the session key.
std::string mask_line(const std::string& text, std::vector<std::string>* params,
                      std::optional<std::string>* session_key);

// text must be non-empty after trimming; whitespace-only lines are rejected upstream.
ParsedEvent parse_line(const RawLogLine& raw, TemplateDictionary& dictionary);

struct LogSequence {
    std::vector<int> events;  // length == window_size, short tails padded with kPadId
    int label = 0;            // 0 normal, 1 anomalous
    std::string origin;       // "<file>:<start_index>" or session key
};

struct Dataset {
    std::vector<LogSequence> sequences;
    int vocab_size = 1;       // 1 + max template id (PAD included)
    double anomaly_rate = 0.0;

    void recompute_anomaly_rate();
};

// Number of windows over n events: ceil(max(n-w,0)/s)+1 for n >= 1, else 0.
std::size_t window_count(std::size_t n, int window_size, int step);

// Windows start at 0, s, 2s, ...; the final short window is padded with kPadId.
// Labels are 0 and origins empty until align_labels runs.
std::vector<LogSequence> window_sequences(std::span<const ParsedEvent> events,
                                          int window_size, int step);

// True when the line's first whitespace-separated token is not "-"
// (BGL/Thunderbird corpus convention: leading "-" marks a normal line).
bool line_is_anomalous(const std::string& raw_text);

// Session mode: events are grouped by session key, each group windowed
// separately, and a sequence is anomalous iff its key is in anomaly_keys.
// Throws ConfigError("label mode mismatch") when no event carries a key.
Dataset align_labels_session(std::span<const ParsedEvent> events, int window_size, int step,
                             const std::unordered_set<std::string>& anomaly_keys,
                             int vocab_size);

// Line mode: the whole stream is windowed; a sequence is anomalous iff any
// constituent line is marked anomalous. marks[i] belongs to events[i].
Dataset align_labels_line(std::span<const ParsedEvent> events, std::span<const char> marks,
                          int window_size, int step, int vocab_size,
                          const std::string& origin_prefix);

// Count-vector features: entry j = occurrences of template j, PAD entry forced to 0.
// Throws if any id >= vocab_size.
std::vector<double> featurize_counts(const LogSequence& seq, int vocab_size);

enum class LabelMode { kSession, kLine };

struct PrepareOptions {
    int window_size = 10;
    int step = 10;
    LabelMode mode = LabelMode::kLine;
};

struct PreparedDataset {
    Dataset dataset;
    TemplateDictionary dictionary;
};

// Full pipeline over one log file. anomaly_keys is required in session mode.
PreparedDataset prepare_log_file(const std::string& path, const PrepareOptions& options,
                                 const std::unordered_set<std::string>* anomaly_keys);

// Label CSV with header "key,label"; returns the keys whose label is 1.
std::unordered_set<std::string> load_label_csv(const std::string& path);

// Dataset file: JSON Lines {"events":[...],"label":0|1,"origin":...} plus a
// vocab.json sidecar (template_id -> template_text) in the same directory.
void write_dataset_jsonl(const std::string& path, const Dataset& dataset,
                         const TemplateDictionary& dictionary);
Dataset load_dataset_jsonl(const std::string& path);

struct DatasetStats {
    std::size_t num_sequences = 0;
    int vocab_size = 1;
    double anomaly_rate = 0.0;
    double mean_sequence_entropy = 0.0;  // bits, PAD excluded
};

DatasetStats compute_stats(const Dataset& dataset);

}  // namespace fedlad

#endif  // FEDLAD_LOG_PIPELINE_HPP
