#include "fcs/rng.hpp"

namespace fcs {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t root, std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : label) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return splitmix(root ^ splitmix(h));
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b) {
  return splitmix(splitmix(root ^ splitmix(a)) ^ splitmix(b + 0x632BE59BD9B4E019ULL));
}

}  // namespace fcs
