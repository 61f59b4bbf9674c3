#include "plcrnn/train/batching.hpp"

#include <numeric>
#include <utility>

#include "plcrnn/error.hpp"

namespace plcrnn::train {

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch, Rng* rng) {
    if (n == 0) throw InputError("make_batches: empty corpus");
    if (batch == 0) throw InputError("make_batches: batch size must be >= 1");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (rng != nullptr) {
        for (std::size_t i = n - 1; i > 0; --i) {
            const auto j = static_cast<std::size_t>(rng->uniform_int(0, static_cast<std::int64_t>(i)));
            std::swap(order[i], order[j]);
        }
    }
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n; start += batch) {
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch)));
    }
    return batches;
}

}  // namespace plcrnn::train
