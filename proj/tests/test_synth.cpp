#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "fedlad/log_pipeline.hpp"
#include "fedlad/synth.hpp"

using namespace fedlad;

namespace {

std::size_t count_lines(const std::string& text) {
    std::size_t n = 0;
    for (char c : text) {
        if (c == '\n') ++n;
    }
    return n;
}

Dataset prepare_text(const std::string& text, int window, int step) {
    const auto dir = std::filesystem::temp_directory_path() / "fedlad_synth_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / "corpus.log";
    std::ofstream(path) << text;
    PrepareOptions options;
    options.window_size = window;
    options.step = step;
    options.mode = LabelMode::kLine;
    const PreparedDataset prepared = prepare_log_file(path.string(), options, nullptr);
    std::filesystem::remove_all(dir);
    return prepared.dataset;
}

}  // namespace

TEST_CASE("generation is deterministic in the options") {
    SynthOptions options;
    options.size = 500;
    options.seed = 11;
    for (SynthProfile profile : {SynthProfile::kSeparable, SynthProfile::kNoisy, SynthProfile::kDrift}) {
        options.profile = profile;
        CHECK(generate_corpus(options) == generate_corpus(options));
    }
    options.seed = 12;
    const std::string other = generate_corpus(options);
    options.seed = 11;
    CHECK(other != generate_corpus(options));
}

TEST_CASE("each session emits exactly ten lines in the documented shape") {
    SynthOptions options;
    options.size = 200;
    const std::string corpus = generate_corpus(options);
    CHECK(count_lines(corpus) == 2000);

    std::istringstream lines(corpus);
    std::string line;
    while (std::getline(lines, line)) {
        std::istringstream fields(line);
        std::string mark, lineno, node, rest;
        fields >> mark >> lineno >> node;
        std::getline(fields, rest);
        CHECK((mark == "-" || mark == "FAIL"));
        CHECK(std::stol(lineno) >= 1);
        CHECK(node.rfind("node-", 0) == 0);
        CHECK_FALSE(rest.empty());
    }
}

TEST_CASE("separable corpus prepares to a five percent anomaly rate") {
    SynthOptions options;
    options.profile = SynthProfile::kSeparable;
    options.size = 10000;
    options.seed = 7;
    const Dataset ds = prepare_text(generate_corpus(options), 10, 10);
    CHECK(ds.sequences.size() == 10000);  // one window per 10-line session
    CHECK(ds.anomaly_rate >= 0.04);
    CHECK(ds.anomaly_rate <= 0.06);
}

TEST_CASE("anomalous session count is exact at the five percent rate") {
    SynthOptions options;
    options.size = 1000;
    options.seed = 3;
    const std::string corpus = generate_corpus(options);
    // a session is anomalous iff it contains a FAIL line
    std::istringstream lines(corpus);
    std::string line;
    int session_line = 0;
    bool session_bad = false;
    int bad_sessions = 0;
    while (std::getline(lines, line)) {
        if (line.rfind("FAIL", 0) == 0) session_bad = true;
        if (++session_line == 10) {
            if (session_bad) ++bad_sessions;
            session_line = 0;
            session_bad = false;
        }
    }
    CHECK(bad_sessions == 50);
}

TEST_CASE("noisy profile flips marks on about two percent of sessions") {
    SynthOptions base;
    base.profile = SynthProfile::kSeparable;
    base.size = 5000;
    base.seed = 21;
    SynthOptions noisy = base;
    noisy.profile = SynthProfile::kNoisy;

    const Dataset clean_ds = prepare_text(generate_corpus(base), 10, 10);
    const Dataset noisy_ds = prepare_text(generate_corpus(noisy), 10, 10);
    const double diff = std::abs(noisy_ds.anomaly_rate - clean_ds.anomaly_rate);
    CHECK(diff > 0.005);
    CHECK(diff < 0.04);
}

TEST_CASE("drift shifts the template distribution between corpus halves") {
    SynthOptions options;
    options.profile = SynthProfile::kDrift;
    options.size = 4000;
    options.seed = 7;
    const std::string corpus = generate_corpus(options);

    // message = everything after the third field; bucket by masked form
    TemplateDictionary dict;
    std::vector<int> ids;
    std::istringstream lines(corpus);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(lines, line)) {
        RawLogLine raw;
        raw.line_no = ++line_no;
        raw.text = line;
        ids.push_back(parse_line(raw, dict).template_id);
    }
    const std::size_t half = ids.size() / 2;
    std::map<int, double> first, second;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        (i < half ? first : second)[ids[i]] += 1.0;
    }
    for (auto& [id, c] : first) c /= static_cast<double>(half);
    for (auto& [id, c] : second) c /= static_cast<double>(ids.size() - half);

    double tv = 0.0;
    for (int id = 0; id < dict.size(); ++id) {
        const double a = first.count(id) ? first[id] : 0.0;
        const double b = second.count(id) ? second[id] : 0.0;
        tv += std::abs(a - b);
    }
    tv /= 2.0;
    CHECK(tv > 0.2);
}

TEST_CASE("separable profile keeps the template distribution stable across halves") {
    SynthOptions options;
    options.profile = SynthProfile::kSeparable;
    options.size = 4000;
    options.seed = 7;
    const std::string corpus = generate_corpus(options);
    TemplateDictionary dict;
    std::vector<int> ids;
    std::istringstream lines(corpus);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(lines, line)) {
        RawLogLine raw;
        raw.line_no = ++line_no;
        raw.text = line;
        ids.push_back(parse_line(raw, dict).template_id);
    }
    const std::size_t half = ids.size() / 2;
    std::map<int, double> first, second;
    for (std::size_t i = 0; i < ids.size(); ++i) (i < half ? first : second)[ids[i]] += 1.0;
    double tv = 0.0;
    for (int id = 0; id < dict.size(); ++id) {
        const double a = (first.count(id) ? first[id] : 0.0) / static_cast<double>(half);
        const double b =
            (second.count(id) ? second[id] : 0.0) / static_cast<double>(ids.size() - half);
        tv += std::abs(a - b);
    }
    tv /= 2.0;
    CHECK(tv < 0.1);
}

TEST_CASE("size floor is enforced") {
    SynthOptions options;
    options.size = 99;
    CHECK_THROWS_WITH_AS(generate_corpus(options), "synth size must be ≥ 100", ConfigError);
}

TEST_CASE("profile names round trip") {
    for (SynthProfile profile : {SynthProfile::kSeparable, SynthProfile::kNoisy, SynthProfile::kDrift}) {
        CHECK(synth_profile_from_name(synth_profile_name(profile)) == profile);
    }
    CHECK_THROWS_AS(synth_profile_from_name("bursty"), ConfigError);
}

TEST_CASE("write_corpus lands the same bytes on disk") {
    const auto dir = std::filesystem::temp_directory_path() / "fedlad_synth_write";
    std::filesystem::create_directories(dir);
    SynthOptions options;
    options.size = 150;
    const auto path = dir / "corpus.log";
    write_corpus(path.string(), options);
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(ss.str() == generate_corpus(options));
    std::filesystem::remove_all(dir);
}
