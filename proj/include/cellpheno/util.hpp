#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace cellpheno {

std::uint64_t splitmix64(std::uint64_t x);

/// Mixes extra words into a base seed. Used to derive independent per-image,
/// per-fold and per-classifier streams from one pipeline seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

/// Seeded generator with self-contained distributions. std::mt19937_64 is
/// bit-exact by standard; the distributions here avoid libstdc++-specific
/// transforms so streams are reproducible across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  double uniform() {  // [0, 1)
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller, no caching so the stream position stays easy to reason about.
  double normal();
  double normal(double mu, double sigma) { return mu + sigma * normal(); }

  std::int64_t uniform_int(std::int64_t n);  // [0, n)

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[static_cast<std::size_t>(uniform_int(static_cast<std::int64_t>(i)))]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

/// Inverse standard normal CDF (Acklam's rational approximation, |err|<1.2e-9).
double inv_norm_cdf(double p);

// FNV-1a 64-bit content digests for provenance records.
std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a(const std::string& s);
std::string digest_hex(std::uint64_t h);

/// Stable CSV float formatting ("%.10g"), locale-independent.
std::string format_double(double v);
double parse_double(const std::string& s);

std::string read_file(const std::filesystem::path& p);
/// Writes to a sibling temp file then renames into place.
void write_file_atomic(const std::filesystem::path& p, const std::string& content);

/// Runs fn(i) for i in [0, n). Work is split into contiguous blocks; results
/// must be written to disjoint slots so the schedule cannot affect output.
void parallel_for(std::int64_t n, int threads, const std::function<void(std::int64_t)>& fn);

/// Splits a CSV line on commas (none of the pipeline formats quote fields)
/// and trims surrounding whitespace/CR.
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace cellpheno
