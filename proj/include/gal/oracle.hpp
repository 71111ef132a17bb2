#pragma once

#include <vector>

#include "gal/core.hpp"

namespace gal::oracle {

struct Score {
    float sim_to_anchor = 0.0F;
    float sim_to_non_soi = 0.0F;
    bool overfit = false;
};

/// Scores one sample. Both similarities are rounded to float before the
/// comparison so the stored flag always agrees with the stored scores;
/// a tie counts as overfit.
Score score(const Embedding& sample, const Embedding& anchor, const Embedding& non_soi);

/// True when the sample sits at least as close to the non-SoI semantics as
/// to its anchor direction.
bool phi(const Embedding& sample, const Embedding& anchor, const Embedding& non_soi);

/// `score` applied element-wise, order preserved. Throws EmptyBatchError on
/// an empty batch.
std::vector<Score> score_batch(const std::vector<Embedding>& samples, const Embedding& anchor,
                               const Embedding& non_soi);

}  // namespace gal::oracle
