// Adversarial noise against the echo classifier, from per-input gradient
// attacks to universal patches hardened against de-synchronization (random
// shifts during aggregation), pass-band filtering (filter step during
// aggregation) and spectrum sensing (short patch supports).
//
// All attacks treat frames as living in [-1, 1] (per-frame normalization)
// and keep perturbations inside an l-infinity ball of radius epsilon.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "arna/dataset.hpp"
#include "arna/model.hpp"
#include "arna/signal.hpp"

namespace arna::attacks {

inline constexpr double kDomainMin = -1.0;
inline constexpr double kDomainMax = 1.0;

// A reusable noise patch. `delta` has length s: the full frame for
// shift-robust patches, or a short support for spectrum-sensing evasion.
// ||delta||_inf <= epsilon always holds after generation and on load.
struct Patch {
    std::vector<double> delta;
    double epsilon = 0.0;
    std::optional<FrequencyBand> band;  // pass band enforced during generation
    std::optional<int> size_budget;     // support-length budget, when sensing-aware
    double sample_rate_hz = kDefaultSampleRateHz;
    std::string kind;  // generator tag: "uap", "srp", "sfr", "arna", "random"
};

// Shared knobs for the universal-patch generators. `alpha` of 0 means
// epsilon / 10; `patch_size` of 0 means the full frame length.
struct AttackConfig {
    double epsilon = 0.01;
    double alpha = 0.0;
    int inner_iterations = 20;  // m: steps of the inner signed-gradient attack
    int passes = 5;             // N: sweeps over the training signals
    std::uint64_t seed = 1;
    std::optional<FrequencyBand> band;
    int patch_size = 0;
};

void to_json(nlohmann::json& j, const AttackConfig& c);
void from_json(const nlohmann::json& j, AttackConfig& c);

// The step size an alpha of 0 resolves to: epsilon / 10. One place owns the
// rule so generators and the experiment harness derive identical steps.
double effective_step(double epsilon, double alpha);

// Single signed-gradient step: x + epsilon * sign(dJ/dx), clipped to the
// domain. Equivalent to pgd with one iteration of step epsilon.
Signal fgsm(const ModelParams& params, const Signal& x, int label, double epsilon);

// `iterations` signed-gradient ascent steps of size alpha from x, after each
// step projecting onto the epsilon-ball around x and clipping to [-1, 1].
Signal pgd(const ModelParams& params, const Signal& x, int label, double epsilon, double alpha,
           int iterations);

// pgd restricted to the window [k, k + span) (truncated at the frame end):
// only windowed coordinates receive gradient steps, everything else stays at
// its starting value. pgd == masked_pgd with k = 0, span = frame length.
Signal masked_pgd(const ModelParams& params, const Signal& x, int label, double epsilon,
                  double alpha, int iterations, std::size_t k, std::size_t span);

// Universal patch, synchronized placement (incidence fixed at 0). Sweeps the
// training signals `passes` times; a sample contributes only while the
// current patch does not already change its clean prediction, and only when
// the inner attack succeeds in changing it.
Patch uap(const ModelParams& params, const Dataset& train, const AttackConfig& cfg);

// Shift-robust universal patch: each contribution is computed at a random
// incidence k and rotated back before aggregation, so the patch works at any
// alignment between noise and frame.
Patch srp(const ModelParams& params, const Dataset& train, const AttackConfig& cfg);

// Filter-robust shifted patch: after every aggregation the patch is passed
// through cfg.band, then epsilon-clipped, in that order, so it survives a
// receiver that filters inputs to the physical pulse band. Requires cfg.band.
Patch sfr(const ModelParams& params, const Dataset& train, const AttackConfig& cfg);

// Sensing-aware noise: support limited to cfg.patch_size samples, placed at a
// random incidence via masking (overhang truncated, never wrapped), band
// constrained like sfr. Requires cfg.band; patch_size of 0 spans the frame.
Patch arna(const ModelParams& params, const Dataset& train, const AttackConfig& cfg);

// Gaussian noise scaled so ||delta||_inf == epsilon exactly; the equal-budget
// baseline that separates "adversarial" from "any noise of that size".
Patch random_patch(double epsilon, int size, std::uint64_t seed,
                   double sample_rate_hz = kDefaultSampleRateHz);

enum class ApplyMode {
    one_shot,    // patch placed once at offset k, overhang truncated
    continuous,  // patch tiled across the frame, then rotated by k
};

// Adds the patch to the frame in the given mode and clips to [-1, 1].
// Continuous mode with a full-frame patch is exactly circular-shift
// placement; one-shot with k near the end loses the overhang.
Signal apply_patch(const Signal& x, const Patch& patch, ApplyMode mode, std::size_t k);

// Versioned binary round-trip plus an optional generator-config sidecar.
void save_patch(const Patch& patch, const std::filesystem::path& path,
                const AttackConfig* config = nullptr);
Patch load_patch(const std::filesystem::path& path);

}  // namespace arna::attacks
