#ifndef SYNGEN_SYNGEN_HPP
#define SYNGEN_SYNGEN_HPP

/**
 * @file syngen.hpp
 * @brief Convenience header pulling in the whole library.
 */

#include "core/count_matrix.hpp"
#include "core/error.hpp"
#include "core/filter.hpp"
#include "core/normalize.hpp"
#include "core/rng.hpp"
#include "core/subsample.hpp"
#include "core/transform.hpp"
#include "core/tsv.hpp"
#include "curve/classifier.hpp"
#include "curve/cv.hpp"
#include "curve/harness.hpp"
#include "curve/iplf.hpp"
#include "curve/knn.hpp"
#include "eval/clustering.hpp"
#include "eval/concordance.hpp"
#include "eval/de.hpp"
#include "eval/embed.hpp"
#include "eval/report.hpp"
#include "eval/summary.hpp"
#include "gen/flow.hpp"
#include "gen/gan.hpp"
#include "gen/generator.hpp"
#include "gen/offline.hpp"
#include "gen/policy.hpp"
#include "gen/store.hpp"
#include "gen/transfer.hpp"
#include "gen/vae.hpp"

#endif
