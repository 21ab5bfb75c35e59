#ifndef SYNGEN_GEN_TRANSFER_HPP
#define SYNGEN_GEN_TRANSFER_HPP

#include <string>

#include "generator.hpp"
#include "policy.hpp"

/**
 * @file transfer.hpp
 * @brief Two-phase training: a large auxiliary cohort warms the model up, the
 * target pilot finishes it.
 */

namespace syngen {

/**
 * @brief Pretrain on `source`, then finetune the same weights on `target`.
 *
 * Both datasets must carry exactly the same markers in the same order; there
 * is no remapping. Log entries are tagged "pretrain" and "finetune".
 */
inline void pretrain_finetune(Generator& model, const CountMatrix& source, const CountMatrix& target,
                              const TrainingPolicy& pretrain_policy, const TrainingPolicy& finetune_policy) {
    if (source.marker_ids != target.marker_ids) {
        throw validation_error("pretraining and finetuning data must share one marker panel, in order");
    }
    model.train(source, pretrain_policy, "pretrain");
    model.train(target, finetune_policy, "finetune");
}

}

#endif
