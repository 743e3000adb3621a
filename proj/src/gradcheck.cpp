#include "hardboost/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace hardboost {

GradCheckReport grad_check(const EmbeddingModel& model, const LossFn& loss, const GradFn& analytic_grad,
                           double h, double abs_floor) {
    const ModelGradient analytic = analytic_grad(model);
    const auto analytic_blocks = parameter_blocks(analytic);
    const auto names = parameter_block_names(model);

    EmbeddingModel probe = model;
    auto probe_blocks = parameter_blocks(probe);

    GradCheckReport report;
    for (std::size_t b = 0; b < probe_blocks.size(); ++b) {
        BlockError err{names[b], 0.0, 0};
        for (std::size_t i = 0; i < probe_blocks[b].size(); ++i) {
            const double saved = probe_blocks[b][i];
            auto at = [&](double offset) {
                probe_blocks[b][i] = saved + offset;
                return loss(probe);
            };
            const double numeric = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
            probe_blocks[b][i] = saved;
            const double a = analytic_blocks[b][i];
            const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), abs_floor});
            if (rel > err.max_rel_error) {
                err.max_rel_error = rel;
                err.worst_index = i;
            }
        }
        report.max_rel_error = std::max(report.max_rel_error, err.max_rel_error);
        report.blocks.push_back(std::move(err));
    }
    return report;
}

}  // namespace hardboost
