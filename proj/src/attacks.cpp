#include "arna/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "arna/util.hpp"

namespace arna::attacks {

namespace {

constexpr char kPatchMagic[4] = {'A', 'R', 'P', 'T'};
constexpr std::uint32_t kPatchVersion = 1;

double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

double clip_domain(double v) { return std::clamp(v, kDomainMin, kDomainMax); }

// x + placed, clipped to the signal domain. `placed` must already be
// frame-length (shifted or masked into position).
Signal add_and_clip(const Signal& x, const std::vector<double>& placed) {
    Signal out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = clip_domain(out[i] + placed[i]);
    return out;
}

// Step size of the inner attack; a zero config value means epsilon / 10.
double effective_alpha(const AttackConfig& cfg) { return effective_step(cfg.epsilon, cfg.alpha); }

void check_config(const AttackConfig& cfg, double sample_rate_hz, std::size_t frame_length,
                  bool band_required) {
    if (!(cfg.epsilon >= 0.0)) throw config_error("attack: epsilon must be >= 0");
    if (!(cfg.alpha >= 0.0)) throw config_error("attack: alpha must be >= 0");
    if (cfg.inner_iterations < 0) throw config_error("attack: inner_iterations must be >= 0");
    if (cfg.passes < 0) throw config_error("attack: passes must be >= 0");
    if (cfg.patch_size < 0 || static_cast<std::size_t>(cfg.patch_size) > frame_length)
        throw config_error("attack: patch_size must be in [0, frame length]");
    if (band_required && !cfg.band)
        throw config_error("attack: this generator needs a pass band");
    if (cfg.band && !is_valid_band(*cfg.band, sample_rate_hz))
        throw config_error("attack: pass band outside [0, sample_rate / 2]");
}

void check_training_set(const ModelParams& params, const Dataset& train) {
    if (train.empty()) throw std::invalid_argument("attack: training set is empty");
    const auto d = static_cast<std::size_t>(params.arch.input_length);
    for (const LabeledSignal& s : train)
        if (s.signal.size() != d)
            throw std::invalid_argument("attack: frame length does not match the model input");
}

// How a candidate patch is placed on a frame during generation.
enum class Placement {
    fixed,     // offset 0 every time (synchronized attacker)
    circular,  // random rotation of a full-frame patch
    masked,    // random offset of a short patch, overhang truncated
};

// Common sweep shared by all universal-patch generators. Per (pass, sample):
// place the current patch at an incidence k, skip the sample if the patch
// already flips its clean prediction, otherwise run the inner windowed
// attack; on success fold the resulting perturbation back into patch
// coordinates (rotating or cropping to undo the placement), optionally
// filter, then project onto the epsilon-ball. Incidences come from a
// per-(pass, sample) substream, so the schedule is independent of any
// restructuring of the loop.
Patch universal_patch(const ModelParams& params, const Dataset& train, const AttackConfig& cfg,
                      Placement placement, bool filtered, const char* kind) {
    const auto d = static_cast<std::size_t>(params.arch.input_length);
    check_config(cfg, train.empty() ? kDefaultSampleRateHz : train[0].signal.sample_rate_hz, d,
                 filtered);
    check_training_set(params, train);

    const std::size_t s =
        (placement == Placement::masked && cfg.patch_size > 0)
            ? static_cast<std::size_t>(cfg.patch_size)
            : d;
    const double rate = train[0].signal.sample_rate_hz;
    const double alpha = effective_alpha(cfg);

    // Clean predictions are the reference the patch has to flip; computing
    // them once also pins them against later domain clipping.
    std::vector<int> clean_pred(train.size());
    for (std::size_t i = 0; i < train.size(); ++i)
        clean_pred[i] = predict(params, train[i].signal);

    Patch patch;
    patch.delta.assign(s, 0.0);
    patch.epsilon = cfg.epsilon;
    patch.band = filtered ? cfg.band : std::nullopt;
    if (placement == Placement::masked) patch.size_budget = static_cast<int>(s);
    patch.sample_rate_hz = rate;
    patch.kind = kind;

    for (int pass = 0; pass < cfg.passes; ++pass) {
        for (std::size_t i = 0; i < train.size(); ++i) {
            auto rng = make_rng(cfg.seed,
                                static_cast<std::uint64_t>(pass) * train.size() + i);
            std::size_t k = 0;
            if (placement != Placement::fixed)
                k = std::uniform_int_distribution<std::size_t>(0, d - 1)(rng);

            const Signal& x = train[i].signal;
            const Signal delta_sig(patch.delta, rate);
            const std::vector<double> placed =
                placement == Placement::masked
                    ? mask_patch(delta_sig, k, d).samples
                    : circular_shift(delta_sig, k).samples;
            const Signal patched = add_and_clip(x, placed);
            if (predict(params, patched) != clean_pred[i]) continue;

            const std::size_t window_k = placement == Placement::masked ? k : 0;
            const std::size_t window_span = placement == Placement::masked ? s : d;
            const Signal adv = masked_pgd(params, patched, train[i].label, cfg.epsilon, alpha,
                                          cfg.inner_iterations, window_k, window_span);
            if (predict(params, adv) == clean_pred[i]) continue;

            // Fold the whole deviation from the clean frame back into patch
            // coordinates: rotate by d - k to undo a rotation, or crop the
            // placement window of a masked patch (the truncated overhang
            // never existed on the frame, so it contributes nothing).
            const Signal pert(
                [&] {
                    std::vector<double> p(d);
                    for (std::size_t j = 0; j < d; ++j) p[j] = adv[j] - x[j];
                    return p;
                }(),
                rate);
            if (placement == Placement::masked) {
                const std::size_t overlap = std::min(s, d - k);
                for (std::size_t j = 0; j < overlap; ++j) patch.delta[j] += pert[k + j];
            } else {
                const Signal back = circular_shift(pert, d - k);
                for (std::size_t j = 0; j < d; ++j) patch.delta[j] += back[j];
            }

            if (filtered) {
                // Zero-pad to the frame, confine to the pass band, crop back
                // to the support; epsilon projection comes after, so the
                // stored patch always respects both constraints in this
                // order: aggregate, filter, clip.
                const Signal padded = mask_patch(Signal(patch.delta, rate), 0, d);
                const Signal confined = passband_filter(padded, *cfg.band);
                std::copy_n(confined.samples.begin(), s, patch.delta.begin());
            }
            for (double& v : patch.delta) v = std::clamp(v, -cfg.epsilon, cfg.epsilon);
        }
    }
    return patch;
}

}  // namespace

void to_json(nlohmann::json& j, const AttackConfig& c) {
    j = nlohmann::json{{"epsilon", c.epsilon},
                       {"alpha", c.alpha},
                       {"inner_iterations", c.inner_iterations},
                       {"passes", c.passes},
                       {"seed", c.seed},
                       {"patch_size", c.patch_size}};
    if (c.band) j["band_hz"] = {c.band->f_min_hz, c.band->f_max_hz};
}

void from_json(const nlohmann::json& j, AttackConfig& c) {
    const AttackConfig base;
    c = base;
    c.epsilon = j.value("epsilon", base.epsilon);
    c.alpha = j.value("alpha", base.alpha);
    c.inner_iterations = j.value("inner_iterations", base.inner_iterations);
    c.passes = j.value("passes", base.passes);
    c.seed = j.value("seed", base.seed);
    c.patch_size = j.value("patch_size", base.patch_size);
    if (j.contains("band_hz")) {
        const auto& b = j.at("band_hz");
        c.band = FrequencyBand{b.at(0).get<double>(), b.at(1).get<double>()};
    }
}

double effective_step(double epsilon, double alpha) {
    return alpha > 0.0 ? alpha : epsilon / 10.0;
}

Signal fgsm(const ModelParams& params, const Signal& x, int label, double epsilon) {
    if (!(epsilon >= 0.0)) throw std::invalid_argument("fgsm: epsilon must be >= 0");
    const LossGrad lg = loss_and_input_gradient(params, x, label);
    Signal out = x;
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = clip_domain(out[i] + epsilon * sgn(lg.input_gradient[i]));
    return out;
}

Signal pgd(const ModelParams& params, const Signal& x, int label, double epsilon, double alpha,
           int iterations) {
    return masked_pgd(params, x, label, epsilon, alpha, iterations, 0, x.size());
}

Signal masked_pgd(const ModelParams& params, const Signal& x, int label, double epsilon,
                  double alpha, int iterations, std::size_t k, std::size_t span) {
    if (!(epsilon >= 0.0)) throw std::invalid_argument("masked_pgd: epsilon must be >= 0");
    if (!(alpha >= 0.0)) throw std::invalid_argument("masked_pgd: alpha must be >= 0");
    if (iterations < 0) throw std::invalid_argument("masked_pgd: iterations must be >= 0");
    if (span == 0 || k >= x.size())
        throw std::invalid_argument("masked_pgd: window must start inside the frame");

    Signal adv = x;
    if (epsilon == 0.0 || alpha == 0.0) return adv;  // ball or step is degenerate
    const std::size_t end = std::min(x.size(), k + span);
    for (int it = 0; it < iterations; ++it) {
        const LossGrad lg = loss_and_input_gradient(params, adv, label);
        for (std::size_t i = k; i < end; ++i) {
            double v = adv[i] + alpha * sgn(lg.input_gradient[i]);
            v = std::clamp(v, x[i] - epsilon, x[i] + epsilon);
            adv[i] = clip_domain(v);
        }
    }
    return adv;
}

Patch uap(const ModelParams& params, const Dataset& train, const AttackConfig& cfg) {
    return universal_patch(params, train, cfg, Placement::fixed, false, "uap");
}

Patch srp(const ModelParams& params, const Dataset& train, const AttackConfig& cfg) {
    return universal_patch(params, train, cfg, Placement::circular, false, "srp");
}

Patch sfr(const ModelParams& params, const Dataset& train, const AttackConfig& cfg) {
    return universal_patch(params, train, cfg, Placement::circular, true, "sfr");
}

Patch arna(const ModelParams& params, const Dataset& train, const AttackConfig& cfg) {
    return universal_patch(params, train, cfg, Placement::masked, true, "arna");
}

Patch random_patch(double epsilon, int size, std::uint64_t seed, double sample_rate_hz) {
    if (!(epsilon >= 0.0)) throw config_error("random_patch: epsilon must be >= 0");
    if (size < 1) throw config_error("random_patch: size must be >= 1");

    Patch patch;
    patch.delta.resize(static_cast<std::size_t>(size));
    patch.epsilon = epsilon;
    patch.size_budget = size;
    patch.sample_rate_hz = sample_rate_hz;
    patch.kind = "random";

    auto rng = make_rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    double peak = 0.0;
    std::size_t peak_at = 0;
    for (std::size_t i = 0; i < patch.delta.size(); ++i) {
        patch.delta[i] = gauss(rng);
        if (std::abs(patch.delta[i]) > peak) {
            peak = std::abs(patch.delta[i]);
            peak_at = i;
        }
    }
    if (peak == 0.0) {
        // All draws exactly zero cannot happen with a real normal sampler,
        // but dividing by it must not either.
        patch.delta[0] = epsilon;
        return patch;
    }
    // Rescale so the largest sample sits exactly on the budget. The rounded
    // products can land an ulp past epsilon, so clamp and then pin the peak.
    const double factor = epsilon / peak;
    for (double& v : patch.delta) v = std::clamp(v * factor, -epsilon, epsilon);
    patch.delta[peak_at] = patch.delta[peak_at] < 0.0 ? -epsilon : epsilon;
    return patch;
}

Signal apply_patch(const Signal& x, const Patch& patch, ApplyMode mode, std::size_t k) {
    if (patch.delta.empty()) throw std::invalid_argument("apply_patch: patch is empty");
    if (patch.delta.size() > x.size())
        throw std::invalid_argument("apply_patch: patch longer than the frame");
    if (k >= x.size()) throw std::invalid_argument("apply_patch: offset must be inside the frame");

    const Signal delta_sig(patch.delta, x.sample_rate_hz);
    if (mode == ApplyMode::one_shot) return add_and_clip(x, mask_patch(delta_sig, k, x.size()).samples);

    // Continuous emission: the patch repeats end to end, so the frame sees a
    // tiling whose phase against the frame start is the incidence k.
    std::vector<double> tiled(x.size());
    for (std::size_t i = 0; i < tiled.size(); ++i) tiled[i] = patch.delta[i % patch.delta.size()];
    return add_and_clip(x, circular_shift(Signal(std::move(tiled), x.sample_rate_hz), k).samples);
}

void save_patch(const Patch& patch, const std::filesystem::path& path,
                const AttackConfig* config) {
    if (patch.delta.empty()) throw std::invalid_argument("save_patch: patch is empty");

    BinaryWriter w(path);
    w.bytes(kPatchMagic, 4);
    w.u32(kPatchVersion);
    w.u32(static_cast<std::uint32_t>(patch.delta.size()));
    w.f64(patch.epsilon);
    w.u8(patch.band ? 1 : 0);
    w.f64(patch.band ? patch.band->f_min_hz : 0.0);
    w.f64(patch.band ? patch.band->f_max_hz : 0.0);
    w.u8(patch.size_budget ? 1 : 0);
    w.i32(patch.size_budget.value_or(0));
    w.f64(patch.sample_rate_hz);
    w.str(patch.kind);
    w.f64_array(patch.delta);

    if (config) {
        nlohmann::json j = *config;
        std::ofstream side(path.string() + ".json");
        if (!side) throw io_error("cannot write sidecar for " + path.string(), 0);
        side << j.dump(2) << "\n";
    }
}

Patch load_patch(const std::filesystem::path& path) {
    BinaryReader r(path);
    char magic[4];
    r.bytes(magic, 4);
    if (!std::equal(magic, magic + 4, kPatchMagic)) r.fail("not a patch file (bad magic)");
    const std::uint32_t version = r.u32();
    if (version != kPatchVersion) r.fail("unsupported patch version " + std::to_string(version));
    const std::uint32_t s = r.u32();
    if (s == 0 || s > 1'000'000) r.fail("implausible patch length " + std::to_string(s));

    Patch patch;
    patch.epsilon = r.f64();
    if (!(patch.epsilon >= 0.0)) r.fail("negative epsilon");
    const bool has_band = r.u8() != 0;
    const double f_min = r.f64();
    const double f_max = r.f64();
    const bool has_size = r.u8() != 0;
    const std::int32_t size_budget = r.i32();
    patch.sample_rate_hz = r.f64();
    if (!(patch.sample_rate_hz > 0.0)) r.fail("sample rate must be positive");
    if (has_band) {
        patch.band = FrequencyBand{f_min, f_max};
        if (!is_valid_band(*patch.band, patch.sample_rate_hz))
            r.fail("pass band outside [0, sample_rate / 2]");
    }
    if (has_size) {
        if (size_budget < 1) r.fail("size budget must be >= 1");
        patch.size_budget = size_budget;
    }
    patch.kind = r.str(256);
    patch.delta = r.f64_array(s);
    for (double v : patch.delta)
        if (!(std::abs(v) <= patch.epsilon * (1.0 + 1e-12) + 1e-15))
            r.fail("patch sample exceeds its epsilon budget");
    return patch;
}

}  // namespace arna::attacks
