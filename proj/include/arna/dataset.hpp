// Synthetic UWB radar echo corpus. Each frame is a superposition of
// carrier-modulated first-derivative Gaussian reflections whose count,
// strength, spread and width depend on the obstacle class, plus white
// measurement noise, normalized per frame to peak magnitude 1.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "arna/signal.hpp"

namespace arna {

struct LabeledSignal {
    Signal signal;
    int label = 0;
    std::string class_name;
    // Peak magnitude of the frame before per-frame normalization; kept so the
    // class-strength ordering stays observable after scaling.
    double peak_amplitude = 0.0;
};

using Dataset = std::vector<LabeledSignal>;

// Per-class reflector statistics. A sample of the class draws `count`
// reflectors uniformly from [count_min, count_max], then for each one a
// delay (pulse center, in samples), a width (Gaussian sigma, in samples),
// an amplitude and a carrier inside the pulse band.
struct ReflectorProfile {
    int count_min = 1;
    int count_max = 1;
    double amplitude_min = 0.0;
    double amplitude_max = 0.0;
    double delay_min = 0.0;
    double delay_max = 0.0;
    double width_min = 1.0;
    double width_max = 1.0;
};

struct DatasetConfig {
    int num_classes = 4;
    int samples_per_class = 274;
    int frame_length = kFrameLength;
    double sample_rate_hz = kDefaultSampleRateHz;
    FrequencyBand pulse_band{3.0e9, 3.8e9};
    double noise_std = 0.015;
    // Transmit-coupling leak: a monostatic front end sees its own transmit
    // pulse, so every frame carries one early return at a fixed delay
    // (mid-band carrier). Its amplitude is relative to the frame's echo peak,
    // so after per-frame normalization the leak has the same height in every
    // frame: it anchors absolute time without becoming a class cue through
    // the normalization gain. Amplitude 0 disables it.
    double coupling_amplitude = 0.8;
    double coupling_delay = 40.0;
    double coupling_width = 10.0;
    std::uint64_t seed = 1;
    std::vector<std::string> class_names;
    std::vector<ReflectorProfile> reflectors;

    // Car / Pedestrian / Cyclist / Tramway profile with strengths ordered
    // Tramway > Car > Cyclist > Pedestrian in expectation.
    static DatasetConfig defaults();
};

void to_json(nlohmann::json& j, const ReflectorProfile& p);
void from_json(const nlohmann::json& j, ReflectorProfile& p);
void to_json(nlohmann::json& j, const DatasetConfig& c);
void from_json(const nlohmann::json& j, DatasetConfig& c);

// Carrier-modulated first-derivative Gaussian echo. The unmodulated envelope
// is u * exp((1 - u^2) / 2) with u = (n - center) / width, so its peak
// magnitude equals `amplitude` exactly and its samples sum to ~0. A carrier
// of 0 returns the raw derivative pulse.
Signal gen_pulse(double center_sample, double width_samples, double amplitude,
                 double carrier_hz, int frame_length = kFrameLength,
                 double sample_rate_hz = kDefaultSampleRateHz);

// Generates num_classes * samples_per_class frames, class-major, one RNG
// substream per sample: the i-th sample is identical no matter how many
// others are generated. Throws config_error on inconsistent profiles and
// std::domain_error if a frame comes out all-zero (nothing to normalize).
Dataset synthesize(const DatasetConfig& config);

// Stratified split. Train size is floor(total * train_ratio), apportioned
// across classes by largest remainder (ties toward the lower label); each
// class contributes its first samples to the train side. Throws config_error
// when a class has fewer than 2 samples.
std::pair<Dataset, Dataset> split(const Dataset& ds, double train_ratio);

// First `n` samples taken round-robin across classes (all of them if the
// dataset is smaller). Used to carve class-balanced working subsets.
Dataset stratified_head(const Dataset& ds, std::size_t n);

// Versioned little-endian binary container; load(save(ds)) is bit-exact.
// When `config` is given, it is written next to the file as `<path>.json`.
void save_dataset(const Dataset& ds, const std::filesystem::path& path,
                  const DatasetConfig* config = nullptr);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace arna
