#pragma once

#include <vector>

#include "mmgnn/bench/metrics.hpp"
#include "mmgnn/model/train.hpp"

namespace mmgnn::bench {

/// ACC, AUC and macro-F1 of the model on the given subjects. Throws
/// RangeError for an empty or single-class index set.
Metrics evaluate(const model::MultimodalModel& m, const data::ConnectomeDataset& ds,
                 const data::KnowledgeBase& kb, const std::vector<std::size_t>& indices,
                 int threads = 1);

}  // namespace mmgnn::bench
