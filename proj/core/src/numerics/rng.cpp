#include "mupscope/numerics/rng.hpp"

namespace mupscope::numerics {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(a) ^ (b + 0x632be59bd9b4e019ULL + (a << 6) + (a >> 2)));
}

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t stream_id)
    : master_seed_(master_seed),
      stream_id_(stream_id),
      engine_(mix_seed(master_seed, stream_id)) {}

double RngStream::gaussian() { return normal_(engine_); }

double RngStream::rademacher() { return (engine_() >> 63) != 0U ? 1.0 : -1.0; }

double RngStream::uniform() { return unit_(engine_); }

std::uint64_t RngStream::next_u64() { return engine_(); }

std::uint64_t RngStream::below(std::uint64_t n) {
  std::uniform_int_distribution<std::uint64_t> dist(0, n - 1);
  return dist(engine_);
}

Vector RngStream::gaussian_vector(Index n, double stddev) {
  Vector v(n);
  fill_gaussian(v, stddev);
  return v;
}

Vector RngStream::rademacher_vector(Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = rademacher();
  return v;
}

RngStream derive_rng_stream(std::uint64_t master_seed, std::uint64_t stream_id) {
  return RngStream(master_seed, stream_id);
}

}  // namespace mupscope::numerics
