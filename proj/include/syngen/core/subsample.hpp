#ifndef SYNGEN_CORE_SUBSAMPLE_HPP
#define SYNGEN_CORE_SUBSAMPLE_HPP

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "count_matrix.hpp"
#include "error.hpp"
#include "rng.hpp"

/**
 * @file subsample.hpp
 * @brief Seeded pilot draws from a larger dataset.
 */

namespace syngen {

/**
 * @brief Draw a pilot dataset uniformly without replacement.
 *
 * With group labels present the draw is stratified: `n_per_group` samples
 * from every group level, taken in sorted level order so the result depends
 * only on the data and the seed. Without groups, `n_per_group` is the total
 * number of samples drawn. Selected columns keep their original order.
 */
inline CountMatrix subsample_pilot(const CountMatrix& m, int n_per_group, std::uint64_t seed) {
    if (n_per_group <= 0) {
        throw validation_error("pilot size must be positive");
    }
    Rng rng(stable_hash(seed, 0x70696c6f74ULL));

    auto draw = [&](const std::vector<int>& pool, int n) {
        if (n > static_cast<int>(pool.size())) {
            throw validation_error("pilot size " + std::to_string(n) + " exceeds available " +
                                   std::to_string(pool.size()) + " samples");
        }
        std::vector<int> shuffled = pool;
        for (std::size_t i = shuffled.size() - 1; i > 0; --i) {
            const std::size_t j = static_cast<std::size_t>(rng.uniform_int(i + 1));
            std::swap(shuffled[i], shuffled[j]);
        }
        shuffled.resize(static_cast<std::size_t>(n));
        return shuffled;
    };

    std::vector<int> selected;
    if (m.groups) {
        for (const auto& level : m.group_levels()) {
            auto cols = draw(m.group_columns(level), n_per_group);
            selected.insert(selected.end(), cols.begin(), cols.end());
        }
    } else {
        std::vector<int> pool(static_cast<std::size_t>(m.samples()));
        for (int j = 0; j < m.samples(); ++j) pool[static_cast<std::size_t>(j)] = j;
        selected = draw(pool, n_per_group);
    }
    std::sort(selected.begin(), selected.end());
    return m.select_samples(selected);
}

}

#endif
