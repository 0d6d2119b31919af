#include "fedlad/telemetry.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "fedlad/common.hpp"

namespace fedlad {

namespace {

void check_metrics(const RoundMetrics& m) {
    if (m.round < 1) throw std::invalid_argument("metrics round must be ≥ 1");
    auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (!in_unit(m.precision) || !in_unit(m.recall) || !in_unit(m.f1) || !in_unit(m.accuracy)) {
        throw std::invalid_argument("classification metrics must lie in [0,1]");
    }
    if (!std::isfinite(m.val_loss) || m.val_loss < 0.0) {
        throw std::invalid_argument("val_loss must be finite and ≥ 0");
    }
    if (m.bytes_up < 0 || m.bytes_down < 0 || m.wall_ms < 0) {
        throw std::invalid_argument("byte and time counters must be ≥ 0");
    }
    if (m.strategy.empty()) throw std::invalid_argument("metrics strategy must be nonempty");
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

std::string metrics_csv_row(const RoundMetrics& m) {
    std::string row = std::to_string(m.round);
    row += ',' + format_fixed(m.val_loss, 6);
    row += ',' + format_fixed(m.precision, 6);
    row += ',' + format_fixed(m.recall, 6);
    row += ',' + format_fixed(m.f1, 6);
    row += ',' + format_fixed(m.accuracy, 6);
    row += ',' + std::to_string(m.bytes_up);
    row += ',' + std::to_string(m.bytes_down);
    row += ',' + std::to_string(m.wall_ms);
    row += ',' + m.strategy;
    return row;
}

void MetricsSink::open(const std::string& csv_path) {
    history_.clear();
    out_.open(csv_path, std::ios::trunc);
    if (!out_) throw std::runtime_error("cannot open metrics file: " + csv_path);
    out_ << kMetricsCsvHeader << '\n';
    out_.flush();
}

void MetricsSink::resume(const std::string& csv_path) {
    history_ = load_metrics_csv(csv_path);
    out_.open(csv_path, std::ios::app);
    if (!out_) throw std::runtime_error("cannot open metrics file: " + csv_path);
}

void MetricsSink::record_round(const RoundMetrics& m) {
    check_metrics(m);
    const int expected = history_.empty() ? 1 : history_.back().round + 1;
    if (m.round != expected) {
        throw std::runtime_error("metrics rounds must be recorded in order");
    }
    history_.push_back(m);
    out_ << metrics_csv_row(m) << '\n';
    out_.flush();
}

void write_metrics_csv(const std::string& path, const std::vector<RoundMetrics>& history) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open metrics file: " + path);
    out << kMetricsCsvHeader << '\n';
    for (const RoundMetrics& m : history) out << metrics_csv_row(m) << '\n';
}

std::vector<RoundMetrics> load_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open metrics file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("metrics file is empty: " + path);
    if (line != kMetricsCsvHeader) throw std::runtime_error("unexpected metrics header in " + path);
    std::vector<RoundMetrics> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> f = split_csv(line);
        if (f.size() != 10) throw std::runtime_error("malformed metrics row in " + path);
        RoundMetrics m;
        m.round = std::stoi(f[0]);
        m.val_loss = std::stod(f[1]);
        m.precision = std::stod(f[2]);
        m.recall = std::stod(f[3]);
        m.f1 = std::stod(f[4]);
        m.accuracy = std::stod(f[5]);
        m.bytes_up = std::stoll(f[6]);
        m.bytes_down = std::stoll(f[7]);
        m.wall_ms = std::stoll(f[8]);
        m.strategy = f[9];
        out.push_back(std::move(m));
    }
    return out;
}

void write_metrics_json(const std::string& path, const std::vector<RoundMetrics>& history) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open metrics file: " + path);
    out << "[\n";
    for (std::size_t i = 0; i < history.size(); ++i) {
        const RoundMetrics& m = history[i];
        out << "  {\"round\":" << m.round << ",\"val_loss\":" << format_fixed(m.val_loss, 6)
            << ",\"precision\":" << format_fixed(m.precision, 6)
            << ",\"recall\":" << format_fixed(m.recall, 6) << ",\"f1\":" << format_fixed(m.f1, 6)
            << ",\"accuracy\":" << format_fixed(m.accuracy, 6) << ",\"bytes_up\":" << m.bytes_up
            << ",\"bytes_down\":" << m.bytes_down << ",\"wall_ms\":" << m.wall_ms
            << ",\"strategy\":\"" << m.strategy << "\"}";
        out << (i + 1 < history.size() ? ",\n" : "\n");
    }
    out << "]\n";
}

std::string event_json_line(const AdaptationEvent& event) {
    std::string line = "{\"round\":" + std::to_string(event.round);
    line += ",\"phase\":\"" + phase_name(event.to_phase) + '"';
    line += ",\"decision\":\"" + decision_string(event.decision) + '"';
    line += ",\"trigger\":\"" + trigger_name(event.trigger) + '"';
    line += ",\"f1\":" + format_fixed(event.f1, 6);
    line += ",\"best_f1\":" + format_fixed(event.best_f1, 6) + '}';
    return line;
}

void EventLog::open(const std::string& path) {
    out_.open(path, std::ios::trunc);
    if (!out_) throw std::runtime_error("cannot open event log: " + path);
}

void EventLog::resume(const std::string& path) {
    out_.open(path, std::ios::app);
    if (!out_) throw std::runtime_error("cannot open event log: " + path);
}

void EventLog::append(const AdaptationEvent& event) {
    out_ << event_json_line(event) << '\n';
    out_.flush();
}

std::vector<EventRecord> load_events(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open event log: " + path);
    std::vector<EventRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const nlohmann::json j = nlohmann::json::parse(line);
        EventRecord r;
        r.round = j.at("round").get<int>();
        r.phase = j.at("phase").get<std::string>();
        r.decision = j.at("decision").get<std::string>();
        r.trigger = j.at("trigger").get<std::string>();
        r.f1 = j.at("f1").get<double>();
        r.best_f1 = j.at("best_f1").get<double>();
        out.push_back(std::move(r));
    }
    return out;
}

namespace {

std::string render_line_chart(const std::vector<RoundMetrics>& history, bool use_f1,
                              const std::string& title, const std::string& stroke) {
    const double width = 640.0, height = 400.0;
    const double left = 60.0, right = 620.0, top = 20.0, bottom = 360.0;
    double lo = 0.0, hi = 0.0;
    for (std::size_t i = 0; i < history.size(); ++i) {
        const double v = use_f1 ? history[i].f1 : history[i].val_loss;
        lo = i == 0 ? v : std::min(lo, v);
        hi = i == 0 ? v : std::max(hi, v);
    }
    if (hi - lo < 1e-12) {
        lo -= 0.5;
        hi += 0.5;
    }
    const int r0 = history.front().round;
    const int r1 = history.back().round;
    auto x_of = [&](int round) {
        return left + (right - left) * static_cast<double>(round - r0) / static_cast<double>(r1 - r0);
    };
    auto y_of = [&](double v) { return top + (bottom - top) * (1.0 - (v - lo) / (hi - lo)); };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << format_fixed(width, 0)
        << "\" height=\"" << format_fixed(height, 0) << "\" viewBox=\"0 0 640 400\">\n";
    svg << "<rect x=\"0\" y=\"0\" width=\"640\" height=\"400\" fill=\"white\"/>\n";
    svg << "<text x=\"320\" y=\"14\" text-anchor=\"middle\" font-family=\"monospace\" "
           "font-size=\"13\">"
        << title << "</text>\n";
    svg << "<line x1=\"60\" y1=\"360\" x2=\"620\" y2=\"360\" stroke=\"black\"/>\n";
    svg << "<line x1=\"60\" y1=\"20\" x2=\"60\" y2=\"360\" stroke=\"black\"/>\n";
    for (int tick = 0; tick <= 4; ++tick) {
        const double v = lo + (hi - lo) * tick / 4.0;
        const double y = y_of(v);
        svg << "<line x1=\"56\" y1=\"" << format_fixed(y, 2) << "\" x2=\"60\" y2=\""
            << format_fixed(y, 2) << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"52\" y=\"" << format_fixed(y + 4.0, 2)
            << "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"11\">"
            << format_fixed(v, 3) << "</text>\n";
    }
    svg << "<text x=\"60\" y=\"378\" text-anchor=\"middle\" font-family=\"monospace\" "
           "font-size=\"11\">"
        << r0 << "</text>\n";
    svg << "<text x=\"620\" y=\"378\" text-anchor=\"middle\" font-family=\"monospace\" "
           "font-size=\"11\">"
        << r1 << "</text>\n";
    svg << "<text x=\"340\" y=\"392\" text-anchor=\"middle\" font-family=\"monospace\" "
           "font-size=\"11\">round</text>\n";
    svg << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < history.size(); ++i) {
        const double v = use_f1 ? history[i].f1 : history[i].val_loss;
        if (i) svg << ' ';
        svg << format_fixed(x_of(history[i].round), 2) << ',' << format_fixed(y_of(v), 2);
    }
    svg << "\"/>\n</svg>\n";
    return svg.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    out << text;
}

}  // namespace

bool render_plots(const std::string& dir, const std::vector<RoundMetrics>& history) {
    if (history.size() < 2) {
        std::cerr << "plots skipped: need at least 2 rounds, have " << history.size() << "\n";
        return false;
    }
    write_text_file(dir + "/f1.svg", render_line_chart(history, true, "f1 over rounds", "#1f77b4"));
    write_text_file(dir + "/loss.svg",
                    render_line_chart(history, false, "val_loss over rounds", "#d62728"));
    return true;
}

RunReport build_report(const std::string& run_id, const std::string& config_digest,
                       const std::string& dataset_path, const std::string& regime,
                       const std::string& model, int clients,
                       const std::vector<RoundMetrics>& history,
                       const std::vector<EventRecord>& events) {
    RunReport r;
    r.run_id = run_id;
    r.config_digest = config_digest;
    r.dataset_path = dataset_path;
    r.regime = regime;
    r.model = model;
    r.clients = clients;
    r.total_rounds = static_cast<int>(history.size());

    for (const RoundMetrics& m : history) {
        if (r.best_round == 0 || m.f1 > r.best_f1) {
            r.best_f1 = m.f1;
            r.best_round = m.round;
        }
        r.total_bytes_up += m.bytes_up;
        r.total_bytes_down += m.bytes_down;
        r.total_wall_ms += m.wall_ms;
    }
    if (!history.empty()) {
        r.final_f1 = history.back().f1;
        r.final_loss = history.back().val_loss;
    }

    std::string trajectory = history.empty() ? std::string("(none)") : history.front().strategy;
    for (const EventRecord& e : events) {
        if (e.decision.rfind("switch:", 0) == 0) {
            const std::string to = e.decision.substr(7);
            std::string from = "?";
            for (const RoundMetrics& m : history) {
                if (m.round == e.round) {
                    from = m.strategy;
                    break;
                }
            }
            r.switch_history.push_back(from + " -> " + to + " @ round " + std::to_string(e.round));
            trajectory += " -> " + to + " @ round " + std::to_string(e.round);
        }
    }
    r.strategy_trajectory = trajectory;

    r.stop_reason = "max_rounds";
    r.stop_round = history.empty() ? 0 : history.back().round;
    for (const EventRecord& e : events) {
        if (e.decision.rfind("early_stop:", 0) == 0) {
            r.stop_reason = e.decision.substr(11);
            r.stop_round = e.round;
            break;
        }
    }
    return r;
}

std::string render_report(const RunReport& r) {
    std::ostringstream out;
    out << "run: " << r.run_id << "\n";
    out << "config digest: " << r.config_digest << "\n";
    out << "dataset: " << r.dataset_path << "\n";
    out << "regime: " << r.regime << "\n";
    out << "model: " << r.model << "\n";
    out << "clients: " << r.clients << "\n";
    out << "strategy trajectory: " << r.strategy_trajectory << "\n";
    out << "stopped: " << r.stop_reason << " @ round " << r.stop_round << "\n";
    out << "rounds: " << r.total_rounds << "\n";
    if (r.total_rounds > 0) {
        out << "best f1: " << format_fixed(r.best_f1, 6) << " @ round " << r.best_round << "\n";
        out << "final f1: " << format_fixed(r.final_f1, 6) << "\n";
        out << "final val_loss: " << format_fixed(r.final_loss, 6) << "\n";
    } else {
        out << "best f1: n/a\n";
        out << "final f1: n/a\n";
        out << "final val_loss: n/a\n";
    }
    out << "total bytes up: " << r.total_bytes_up << "\n";
    out << "total bytes down: " << r.total_bytes_down << "\n";
    const double mb_per_client =
        r.clients > 0 ? static_cast<double>(r.total_bytes_down) / r.clients / 1e6 : 0.0;
    out << "bytes per client: " << format_fixed(mb_per_client, 1) << " MB\n";
    out << "total wall ms: " << r.total_wall_ms << "\n";
    return out.str();
}

}  // namespace fedlad
