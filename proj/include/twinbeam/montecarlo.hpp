#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "twinbeam/twb_theory.hpp"

namespace twinbeam {

// One laser shot: detected counts on both arms.
struct PulseRecord {
  std::uint64_t shot = 0;
  std::uint32_t signal = 0;  // m1
  std::uint32_t idler = 0;   // m2

  friend bool operator==(const PulseRecord&, const PulseRecord&) = default;
};

// Ordered shot-by-shot record of a run, synthetic or ingested.
struct PulseRecordSet {
  std::vector<PulseRecord> records;
  std::string provenance;
};

// Reproducibility contract: the run is a function of (master_seed, params,
// shots) alone; worker_count only changes wall-clock time.
struct SeedSpec {
  std::uint64_t master_seed = 0;
  unsigned worker_count = 1;
};

namespace detail {

// Counter-based substream: one engine per fixed-size shot block, seeded from
// (master_seed, block_index), so the assignment of blocks to workers cannot
// change the sampled values.
inline std::mt19937_64 block_engine(std::uint64_t master_seed, std::uint64_t block_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                    static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(block_index),
                    static_cast<std::uint32_t>(block_index >> 32)};
  return std::mt19937_64(seq);
}

inline constexpr std::uint64_t kShotsPerBlock = 8192;

}  // namespace detail

// Draws one detected pair: the photon number n comes from the multimode
// thermal law through its gamma-Poisson mixture (shape mu, scale N/mu, valid
// for non-integer mu), then each arm thins n independently.  The signal arm
// is always drawn before the idler arm.
inline std::pair<std::uint32_t, std::uint32_t> sample_shot(const TwbParams& params,
                                                           std::mt19937_64& rng) {
  long n = 0;
  if (params.mean_photons > 0.0) {
    std::gamma_distribution<double> intensity(params.modes, params.mean_photons / params.modes);
    const double lambda = intensity(rng);
    if (lambda > 0.0) n = std::poisson_distribution<long>(lambda)(rng);
  }
  auto thin = [&](double eta) -> long {
    if (n == 0 || eta <= 0.0) return 0;
    if (eta >= 1.0) return n;
    return std::binomial_distribution<long>(n, eta)(rng);
  };
  const long m1 = thin(params.eta_signal);
  const long m2 = thin(params.eta_idler);
  return {static_cast<std::uint32_t>(m1), static_cast<std::uint32_t>(m2)};
}

// Seeded run of `shots` pulses.  Shots are partitioned into fixed-size
// contiguous blocks, each with its own (master_seed, block_index) substream;
// output is byte-identical for any worker count.
inline PulseRecordSet sample_run(const TwbParams& params, std::uint64_t shots,
                                 const SeedSpec& seed) {
  params.validate();
  if (shots < 1) throw std::domain_error("sample_run: shots must be >= 1");
  PulseRecordSet out;
  out.records.resize(shots);
  const std::uint64_t blocks = (shots + detail::kShotsPerBlock - 1) / detail::kShotsPerBlock;
  auto run_block = [&](std::uint64_t block) {
    auto rng = detail::block_engine(seed.master_seed, block);
    const std::uint64_t begin = block * detail::kShotsPerBlock;
    const std::uint64_t end = std::min(begin + detail::kShotsPerBlock, shots);
    for (std::uint64_t i = begin; i < end; ++i) {
      const auto [m1, m2] = sample_shot(params, rng);
      out.records[i] = PulseRecord{i, m1, m2};
    }
  };
  const unsigned workers =
      static_cast<unsigned>(std::min<std::uint64_t>(std::max(1u, seed.worker_count), blocks));
  if (workers <= 1) {
    for (std::uint64_t b = 0; b < blocks; ++b) run_block(b);
  } else {
    std::atomic<std::uint64_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::uint64_t b = next.fetch_add(1); b < blocks; b = next.fetch_add(1)) run_block(b);
      });
    for (auto& t : pool) t.join();
  }
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "seed=%llu shots=%llu N=%.17g mu=%.17g eta1=%.17g eta2=%.17g",
                static_cast<unsigned long long>(seed.master_seed),
                static_cast<unsigned long long>(shots), params.mean_photons, params.modes,
                params.eta_signal, params.eta_idler);
  out.provenance = buf;
  return out;
}

}  // namespace twinbeam
