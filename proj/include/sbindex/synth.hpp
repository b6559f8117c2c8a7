#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "sbindex/ingest.hpp"

namespace sbindex {

/// Deterministic generator with a pinned bit stream: the engine is
/// std::mt19937_64 (bit-exact by the standard on every platform) and the
/// uniform/normal mappings are fixed here rather than delegated to the
/// standard distributions, whose output is implementation-defined.
///
///   uniform01: ((engine() >> 11) + 0.5) * 2^-53, strictly inside (0, 1)
///   normal:    Box-Muller, z0 = sqrt(-2 ln u1) cos(2 pi u2),
///              z1 = sqrt(-2 ln u1) sin(2 pi u2), pair cached
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform01() {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal();

    std::uint64_t raw() { return engine_(); }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Seed splitting rule for parallel replicates: base seed plus replicate index.
inline std::uint64_t replicate_seed(std::uint64_t base, std::uint64_t replicate) {
    return base + replicate;
}

enum class CapMode { censor, truncate };
enum class SynthMode { iid_pareto, gibrat };

struct SynthConfig {
    std::size_t n = 2000;
    double b = 0.9;                  // true tail exponent
    double x_min = 1.0;              // lower support, billions of USD
    std::optional<double> cap;       // hard ceiling, billions of USD
    CapMode cap_mode = CapMode::censor;
    std::uint64_t seed = 0;
    SynthMode mode = SynthMode::iid_pareto;
    int year = 2015;                 // calendar year stamped on the output
};

/// n i.i.d. draws via the inverse CCDF x = x_min * u^(-1/b), u uniform (0,1).
Snapshot pareto_sample(const SynthConfig& cfg);

/// Noiseless variant: u_k = (k - 0.5) / n, k = 1..n.
Snapshot pareto_quantile_sample(const SynthConfig& cfg);

struct CappedGroundTruth {
    std::uint64_t seed = 0;
    std::string mode;         // "censor" or "truncate"
    double b = 0.0;
    double x_min = 0.0;
    double cap = 0.0;
    double removed_assets = 0.0;  // censor mode: sum of (raw - cap)+ , exact
};

struct CappedSample {
    Snapshot snapshot;
    CappedGroundTruth truth;
};

/// Pareto draws interrupted at the cap: censor clips each draw to the cap
/// (and records the exactly removed assets), truncate resamples until the
/// draw falls at or below the cap.
CappedSample capped_pareto_sample(const SynthConfig& cfg);

/// Proportional-growth cross-section: n firms start at max(x_min, barrier)
/// and evolve `steps` times by multiplicative log-normal shocks with zero
/// mean log-growth and the given volatility, reflected at the lower barrier.
Snapshot gibrat_simulate(const SynthConfig& cfg, std::size_t steps, double volatility,
                         double barrier);

/// Adaptive Gauss-Kronrod (G7,K15) integration of n * x * c*b*x^-(b+1) over
/// [x_lo, x_hi] to the requested relative tolerance. Used in tests as the
/// independent oracle for the closed-form tail mass.
double pareto_mass_quadrature(double c, double b, double n, double x_lo, double x_hi,
                              double rel_tol = 1e-10);

nlohmann::json ground_truth_to_json(const CappedGroundTruth& truth);

}  // namespace sbindex
