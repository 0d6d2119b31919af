#ifndef FEDLAD_TELEMETRY_HPP
#define FEDLAD_TELEMETRY_HPP

#include <fstream>
#include <string>
#include <vector>

#include "fedlad/executor.hpp"

namespace fedlad {

struct RoundMetrics {
    int round = 0;
    double val_loss = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double accuracy = 0.0;
    long long bytes_up = 0;
    long long bytes_down = 0;
    long long wall_ms = 0;
    std::string strategy;
};

inline constexpr const char* kMetricsCsvHeader =
    "round,val_loss,precision,recall,f1,accuracy,bytes_up,bytes_down,wall_ms,strategy";

// Append-only, ordered, flushed-per-row metric log.
class MetricsSink {
  public:
    void open(const std::string& csv_path);    // truncates, writes the header
    void resume(const std::string& csv_path);  // reloads history, appends after it
    void record_round(const RoundMetrics& m);
    const std::vector<RoundMetrics>& history() const { return history_; }

  private:
    std::ofstream out_;
    std::vector<RoundMetrics> history_;
};

std::string metrics_csv_row(const RoundMetrics& m);
void write_metrics_csv(const std::string& path, const std::vector<RoundMetrics>& history);
std::vector<RoundMetrics> load_metrics_csv(const std::string& path);
void write_metrics_json(const std::string& path, const std::vector<RoundMetrics>& history);

// One JSON object per round appended to events.jsonl.
class EventLog {
  public:
    void open(const std::string& path);    // truncates
    void resume(const std::string& path);  // appends
    void append(const AdaptationEvent& event);

  private:
    std::ofstream out_;
};

std::string event_json_line(const AdaptationEvent& event);

struct EventRecord {
    int round = 0;
    std::string phase;
    std::string decision;
    std::string trigger;
    double f1 = 0.0;
    double best_f1 = 0.0;
};

std::vector<EventRecord> load_events(const std::string& path);

// f1.svg and loss.svg under dir; returns false (with a stderr notice) below 2 rounds.
bool render_plots(const std::string& dir, const std::vector<RoundMetrics>& history);

struct RunReport {
    std::string run_id;
    std::string config_digest;
    std::string dataset_path;
    std::string regime;  // "iid" or "dirichlet(alpha=...)"
    std::string model;
    int clients = 0;
    std::vector<std::string> switch_history;  // "fedavg -> scaffold @ round 12"
    std::string strategy_trajectory;          // full chain rendering
    std::string stop_reason;                  // "stagnation" | "max_rounds"
    int stop_round = 0;
    int total_rounds = 0;
    double best_f1 = 0.0;
    int best_round = 0;
    double final_f1 = 0.0;
    double final_loss = 0.0;
    long long total_bytes_up = 0;
    long long total_bytes_down = 0;
    long long total_wall_ms = 0;
};

// Everything here is recomputed from history + events; no hidden state.
RunReport build_report(const std::string& run_id, const std::string& config_digest,
                       const std::string& dataset_path, const std::string& regime,
                       const std::string& model, int clients,
                       const std::vector<RoundMetrics>& history,
                       const std::vector<EventRecord>& events);

std::string render_report(const RunReport& report);

}  // namespace fedlad

#endif  // FEDLAD_TELEMETRY_HPP
