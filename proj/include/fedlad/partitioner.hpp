#ifndef FEDLAD_PARTITIONER_HPP
#define FEDLAD_PARTITIONER_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fedlad/common.hpp"
#include "fedlad/log_pipeline.hpp"

namespace fedlad {

enum class PartitionRegime { kIid, kDirichlet };

std::string regime_name(PartitionRegime regime);
PartitionRegime regime_from_name(const std::string& name);

struct PartitionPlan {
    std::vector<int> assignments;  // one client id in [0,k) per sequence
    int k = 1;
    PartitionRegime regime = PartitionRegime::kIid;
    double alpha = 0.0;  // Dirichlet concentration, kDirichlet only
    std::uint64_t seed = 0;

    std::string to_json() const;
    static PartitionPlan from_json(const std::string& text);
};

// Seeded uniform shuffle, then contiguous chunks whose sizes differ by <= 1.
PartitionPlan split_iid(const Dataset& dataset, int k, std::uint64_t seed);

// Label-skew split: per class, proportions drawn from Dirichlet(alpha * 1_k)
// decide how many of that class's shuffled samples each client gets. Clients
// left empty afterwards steal one sequence from the largest client.
PartitionPlan split_noniid(const Dataset& dataset, int k, double alpha, std::uint64_t seed);

// Shards in client-id order; concatenation is a permutation of the input and
// every shard inherits vocab_size.
std::vector<Dataset> materialize(const PartitionPlan& plan, const Dataset& dataset);

// Seeded global split performed before partitioning; the validation part stays
// on the server. val_fraction of the sequences (at least 1) become validation.
std::pair<Dataset, Dataset> train_val_split(const Dataset& dataset, double val_fraction,
                                            std::uint64_t seed);

}  // namespace fedlad

#endif  // FEDLAD_PARTITIONER_HPP
