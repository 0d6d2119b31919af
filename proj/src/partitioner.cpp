#include "fedlad/partitioner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

namespace fedlad {

std::string regime_name(PartitionRegime regime) {
    return regime == PartitionRegime::kIid ? "iid" : "dirichlet";
}

PartitionRegime regime_from_name(const std::string& name) {
    if (name == "iid") return PartitionRegime::kIid;
    if (name == "dirichlet" || name == "noniid_dirichlet") return PartitionRegime::kDirichlet;
    throw ConfigError("unknown partition regime: " + name);
}

std::string PartitionPlan::to_json() const {
    nlohmann::ordered_json j;
    j["k"] = k;
    j["regime"] = regime_name(regime);
    j["alpha"] = alpha;
    j["seed"] = seed;
    j["assignments"] = assignments;
    return j.dump();
}

PartitionPlan PartitionPlan::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    PartitionPlan plan;
    plan.k = j.at("k").get<int>();
    plan.regime = regime_from_name(j.at("regime").get<std::string>());
    plan.alpha = j.at("alpha").get<double>();
    plan.seed = j.at("seed").get<std::uint64_t>();
    plan.assignments = j.at("assignments").get<std::vector<int>>();
    return plan;
}

namespace {

void check_client_count(std::size_t n, int k) {
    if (k < 1) throw ConfigError("client count must be >= 1");
    if (static_cast<std::size_t>(k) > n) throw ConfigError("too many clients");
}

// Clients that ended up empty each steal one sequence from the largest client.
void repair_empty_clients(std::vector<int>& assignments, int k) {
    std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
    for (int c : assignments) sizes[static_cast<std::size_t>(c)]++;
    for (int c = 0; c < k; ++c) {
        if (sizes[static_cast<std::size_t>(c)] > 0) continue;
        const auto largest = std::max_element(sizes.begin(), sizes.end()) - sizes.begin();
        // take the last sequence currently assigned to the largest client
        for (std::size_t i = assignments.size(); i-- > 0;) {
            if (assignments[i] == static_cast<int>(largest)) {
                assignments[i] = c;
                sizes[static_cast<std::size_t>(largest)]--;
                sizes[static_cast<std::size_t>(c)]++;
                break;
            }
        }
    }
}

}  // namespace

PartitionPlan split_iid(const Dataset& dataset, int k, std::uint64_t seed) {
    const std::size_t n = dataset.sequences.size();
    check_client_count(n, k);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    PartitionPlan plan;
    plan.k = k;
    plan.regime = PartitionRegime::kIid;
    plan.seed = seed;
    plan.assignments.assign(n, 0);

    const std::size_t base = n / static_cast<std::size_t>(k);
    const std::size_t rem = n % static_cast<std::size_t>(k);
    std::size_t pos = 0;
    for (int c = 0; c < k; ++c) {
        const std::size_t take = base + (static_cast<std::size_t>(c) < rem ? 1 : 0);
        for (std::size_t j = 0; j < take; ++j) {
            plan.assignments[order[pos++]] = c;
        }
    }
    return plan;
}

PartitionPlan split_noniid(const Dataset& dataset, int k, double alpha, std::uint64_t seed) {
    const std::size_t n = dataset.sequences.size();
    check_client_count(n, k);
    if (!(alpha > 0.0)) throw ConfigError("dirichlet alpha must be > 0");

    PartitionPlan plan;
    plan.k = k;
    plan.regime = PartitionRegime::kDirichlet;
    plan.alpha = alpha;
    plan.seed = seed;
    plan.assignments.assign(n, 0);

    Rng rng(seed);
    std::gamma_distribution<double> gamma(alpha, 1.0);

    for (int label : {0, 1}) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < n; ++i) {
            if (dataset.sequences[i].label == label) idx.push_back(i);
        }
        if (idx.empty()) continue;
        std::shuffle(idx.begin(), idx.end(), rng);

        std::vector<double> proportions(static_cast<std::size_t>(k));
        double total = 0.0;
        for (auto& p : proportions) {
            p = gamma(rng);
            total += p;
        }
        // cumulative boundaries decide how many class samples each client gets
        const auto m = static_cast<double>(idx.size());
        double cum = 0.0;
        std::size_t assigned = 0;
        for (int c = 0; c < k; ++c) {
            cum += proportions[static_cast<std::size_t>(c)] / total;
            const auto upto = c == k - 1 ? idx.size()
                                         : std::min(idx.size(), static_cast<std::size_t>(
                                                                    std::floor(cum * m)));
            for (; assigned < upto; ++assigned) {
                plan.assignments[idx[assigned]] = c;
            }
        }
    }

    repair_empty_clients(plan.assignments, k);
    return plan;
}

std::vector<Dataset> materialize(const PartitionPlan& plan, const Dataset& dataset) {
    if (plan.assignments.size() != dataset.sequences.size()) {
        throw std::invalid_argument("partition plan does not match dataset size");
    }
    std::vector<Dataset> shards(static_cast<std::size_t>(plan.k));
    for (auto& shard : shards) shard.vocab_size = dataset.vocab_size;
    for (std::size_t i = 0; i < plan.assignments.size(); ++i) {
        const int c = plan.assignments[i];
        if (c < 0 || c >= plan.k) throw std::invalid_argument("assignment out of range");
        shards[static_cast<std::size_t>(c)].sequences.push_back(dataset.sequences[i]);
    }
    for (auto& shard : shards) shard.recompute_anomaly_rate();
    return shards;
}

std::pair<Dataset, Dataset> train_val_split(const Dataset& dataset, double val_fraction,
                                            std::uint64_t seed) {
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
        throw ConfigError("val_fraction must be in (0,1)");
    }
    const std::size_t n = dataset.sequences.size();
    if (n < 2) throw ConfigError("dataset too small for a train/validation split");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    std::size_t n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
    n_val = std::clamp<std::size_t>(n_val, 1, n - 1);

    Dataset train;
    Dataset val;
    train.vocab_size = dataset.vocab_size;
    val.vocab_size = dataset.vocab_size;
    for (std::size_t i = 0; i < n; ++i) {
        auto& dst = i < n_val ? val : train;
        dst.sequences.push_back(dataset.sequences[order[i]]);
    }
    train.recompute_anomaly_rate();
    val.recompute_anomaly_rate();
    return {std::move(train), std::move(val)};
}

}  // namespace fedlad
