#include "postratio/random.hpp"

namespace postratio {

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream) {
    return mix64(mix64(seed) ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

}  // namespace postratio

#include <algorithm>
#include <numeric>

namespace postratio {

std::vector<std::size_t> assign_folds(std::size_t n, std::size_t folds, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed, 0xf01d);
    std::shuffle(order.begin(), order.end(), rng.engine());
    std::vector<std::size_t> fold(n);
    for (std::size_t r = 0; r < n; ++r) fold[order[r]] = r % folds;
    return fold;
}

}  // namespace postratio
