#include "sbindex/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <nlohmann/json.hpp>

#include "sbindex/errors.hpp"

namespace sbindex {

namespace {

void check_common(const SynthConfig& cfg) {
    if (cfg.n < 1) throw UsageError("synth: n must be >= 1");
    if (!(cfg.b > 0.0)) throw UsageError("synth: tail exponent b must be > 0");
    if (!(cfg.x_min > 0.0)) throw UsageError("synth: x_min must be > 0");
}

Snapshot snapshot_from_values(const SynthConfig& cfg, const std::vector<double>& values) {
    // Rank by descending assets, ties broken by draw order.
    std::vector<std::size_t> order(values.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    std::vector<int> rank(values.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        rank[order[pos]] = static_cast<int>(pos) + 1;
    }

    Snapshot s;
    s.year = cfg.year;
    s.records.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        FirmRecord rec;
        rec.year = cfg.year;
        rec.rank = rank[i];
        rec.name = "firm-" + std::to_string(i + 1);
        rec.assets = values[i];
        s.records.push_back(std::move(rec));
    }
    return s;
}

double pareto_inverse_ccdf(double u, double x_min, double b) {
    return x_min * std::pow(u, -1.0 / b);
}

}  // namespace

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

Snapshot pareto_sample(const SynthConfig& cfg) {
    check_common(cfg);
    if (cfg.mode != SynthMode::iid_pareto) throw UsageError("pareto_sample: mode must be iid-pareto");
    if (cfg.cap) throw UsageError("pareto_sample: cap not supported here, use capped_pareto_sample");

    Rng rng(cfg.seed);
    std::vector<double> values(cfg.n);
    for (auto& v : values) v = pareto_inverse_ccdf(rng.uniform01(), cfg.x_min, cfg.b);
    return snapshot_from_values(cfg, values);
}

Snapshot pareto_quantile_sample(const SynthConfig& cfg) {
    check_common(cfg);
    std::vector<double> values(cfg.n);
    const double n = static_cast<double>(cfg.n);
    for (std::size_t k = 1; k <= cfg.n; ++k) {
        const double u = (static_cast<double>(k) - 0.5) / n;
        values[k - 1] = pareto_inverse_ccdf(u, cfg.x_min, cfg.b);
    }
    return snapshot_from_values(cfg, values);
}

CappedSample capped_pareto_sample(const SynthConfig& cfg) {
    check_common(cfg);
    if (!cfg.cap) throw UsageError("capped_pareto_sample: cap is required");
    const double cap = *cfg.cap;
    if (!(cap > cfg.x_min)) {
        throw UsageError("capped_pareto_sample: cap must exceed x_min (empty support)");
    }

    if (cfg.cap_mode == CapMode::truncate) {
        // Acceptance probability of a single draw: P(X <= cap).
        const double accept = 1.0 - std::pow(cap / cfg.x_min, -cfg.b);
        if (accept < 1e-6) {
            throw UsageError("capped_pareto_sample: truncate acceptance probability below 1e-6");
        }
    }

    Rng rng(cfg.seed);
    std::vector<double> values(cfg.n);
    double removed = 0.0;
    for (auto& v : values) {
        double x = pareto_inverse_ccdf(rng.uniform01(), cfg.x_min, cfg.b);
        if (cfg.cap_mode == CapMode::censor) {
            if (x > cap) {
                removed += x - cap;
                x = cap;
            }
        } else {
            while (x > cap) x = pareto_inverse_ccdf(rng.uniform01(), cfg.x_min, cfg.b);
        }
        v = x;
    }

    CappedSample result;
    result.snapshot = snapshot_from_values(cfg, values);
    result.truth.seed = cfg.seed;
    result.truth.mode = cfg.cap_mode == CapMode::censor ? "censor" : "truncate";
    result.truth.b = cfg.b;
    result.truth.x_min = cfg.x_min;
    result.truth.cap = cap;
    result.truth.removed_assets = cfg.cap_mode == CapMode::censor ? removed : 0.0;
    return result;
}

Snapshot gibrat_simulate(const SynthConfig& cfg, std::size_t steps, double volatility,
                         double barrier) {
    check_common(cfg);
    if (volatility < 0.0) throw UsageError("gibrat_simulate: volatility must be >= 0");
    if (!(barrier > 0.0)) throw UsageError("gibrat_simulate: barrier must be > 0");

    Rng rng(cfg.seed);
    std::vector<double> values(cfg.n, std::max(cfg.x_min, barrier));
    for (std::size_t step = 0; step < steps; ++step) {
        for (auto& v : values) {
            v = std::max(barrier, v * std::exp(volatility * rng.normal()));
        }
    }
    return snapshot_from_values(cfg, values);
}

namespace {

// Gauss-Kronrod (G7, K15) nodes and weights on [-1, 1], positive half.
constexpr double kKronrodNodes[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
    0.586087235467691, 0.405845151377397, 0.207784955007898, 0.000000000000000,
};
constexpr double kKronrodWeights[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728,
};
constexpr double kGaussWeights[4] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119, 0.417959183673469,
};

// Odd-indexed Kronrod nodes plus the midpoint are the embedded Gauss-7 nodes.
template <typename F>
void gk15(const F& f, double a, double b, double& value, double& error) {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double gauss = 0.0, kronrod = 0.0;
    for (int i = 0; i < 8; ++i) {
        const double dx = half * kKronrodNodes[i];
        const double fs = (i == 7) ? f(mid) : f(mid - dx) + f(mid + dx);
        kronrod += kKronrodWeights[i] * fs;
        if (i % 2 == 1) gauss += kGaussWeights[i / 2] * fs;
    }
    value = kronrod * half;
    error = std::abs(kronrod - gauss) * half;  // conservative estimate
}

}  // namespace

double pareto_mass_quadrature(double c, double b, double n, double x_lo, double x_hi,
                              double rel_tol) {
    if (!(x_lo > 0.0) || !(x_lo <= x_hi)) {
        throw UsageError("quadrature: bounds must satisfy 0 < x_lo <= x_hi");
    }
    if (x_lo == x_hi) return 0.0;

    const auto integrand = [&](double x) {
        const double density = c * b * std::pow(x, -(b + 1.0));
        return n * x * density;
    };

    struct Interval {
        double a, b, value, error;
    };
    std::vector<Interval> stack;
    double v0, e0;
    gk15(integrand, x_lo, x_hi, v0, e0);
    stack.push_back({x_lo, x_hi, v0, e0});

    constexpr std::size_t kMaxIntervals = 4000;
    std::size_t splits = 0;
    while (true) {
        double total = 0.0, err = 0.0;
        std::size_t worst = 0;
        for (std::size_t i = 0; i < stack.size(); ++i) {
            total += stack[i].value;
            err += stack[i].error;
            if (stack[i].error > stack[worst].error) worst = i;
        }
        if (err <= rel_tol * std::abs(total)) return total;
        if (++splits > kMaxIntervals) {
            throw NumericError("quadrature failed to reach the requested tolerance");
        }
        const Interval iv = stack[worst];
        const double mid = 0.5 * (iv.a + iv.b);
        Interval left{iv.a, mid, 0.0, 0.0}, right{mid, iv.b, 0.0, 0.0};
        gk15(integrand, left.a, left.b, left.value, left.error);
        gk15(integrand, right.a, right.b, right.value, right.error);
        stack[worst] = left;
        stack.push_back(right);
    }
}

nlohmann::json ground_truth_to_json(const CappedGroundTruth& truth) {
    nlohmann::json j;
    j["seed"] = truth.seed;
    j["mode"] = truth.mode;
    j["b"] = truth.b;
    j["x_min"] = truth.x_min;
    j["cap"] = truth.cap;
    j["removed_assets"] = truth.removed_assets;
    return j;
}

}  // namespace sbindex
