#include "arna/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "arna/util.hpp"

namespace arna {

namespace {

constexpr char kDatasetMagic[4] = {'A', 'R', 'D', 'S'};
constexpr std::uint32_t kDatasetVersion = 1;

void validate(const DatasetConfig& c) {
    if (c.num_classes < 1) throw config_error("dataset: num_classes must be >= 1");
    if (c.samples_per_class < 1) throw config_error("dataset: samples_per_class must be >= 1");
    if (c.frame_length < 1) throw config_error("dataset: frame_length must be >= 1");
    if (c.sample_rate_hz <= 0.0) throw config_error("dataset: sample_rate must be positive");
    if (c.noise_std < 0.0) throw config_error("dataset: noise_std must be >= 0");
    if (c.coupling_amplitude < 0.0)
        throw config_error("dataset: coupling amplitude must be >= 0");
    if (c.coupling_amplitude > 0.0) {
        if (c.coupling_delay < 0.0 || c.coupling_delay >= static_cast<double>(c.frame_length))
            throw config_error("dataset: coupling delay outside the frame");
        if (c.coupling_width <= 0.0)
            throw config_error("dataset: coupling width must be positive");
    }
    if (!is_valid_band(c.pulse_band, c.sample_rate_hz))
        throw config_error("dataset: pulse band outside [0, sample_rate/2]");
    if (c.class_names.size() != static_cast<std::size_t>(c.num_classes))
        throw config_error("dataset: need one class name per class");
    if (c.reflectors.size() != static_cast<std::size_t>(c.num_classes))
        throw config_error("dataset: need one reflector profile per class");
    for (const ReflectorProfile& p : c.reflectors) {
        if (p.count_min < 1 || p.count_max < p.count_min)
            throw config_error("dataset: reflector count range is empty");
        if (p.amplitude_min < 0.0 || p.amplitude_max < p.amplitude_min)
            throw config_error("dataset: reflector amplitude range is empty");
        if (p.delay_min < 0.0 || p.delay_max < p.delay_min ||
            p.delay_max >= static_cast<double>(c.frame_length))
            throw config_error("dataset: reflector delay range is empty or outside the frame");
        if (p.width_min <= 0.0 || p.width_max < p.width_min)
            throw config_error("dataset: reflector width range is empty");
    }
}

}  // namespace

DatasetConfig DatasetConfig::defaults() {
    DatasetConfig c;
    // The hardware pulse band is 3-4 GHz, but 7.69 GHz sampling puts Nyquist
    // at 3.845 GHz; carriers are capped below it so synthesis stays alias-free.
    c.pulse_band = FrequencyBand{3.0e9, 3.8e9};
    c.class_names = {"Car", "Pedestrian", "Cyclist", "Tramway"};
    // Width (echo duration) and reflector count are the discriminative
    // features; the width bands have small gaps and the count ranges are
    // disjoint, so the classes are learnable to high accuracy without being
    // trivially far apart (overlapping reflectors still merge into blobs).
    c.reflectors = {
        /* Car        */ {4, 5, 0.60, 1.10, 80.0, 580.0, 8.8, 11.8},
        /* Pedestrian */ {1, 1, 0.20, 0.45, 80.0, 580.0, 4.0, 5.8},
        /* Cyclist    */ {2, 3, 0.35, 0.70, 80.0, 580.0, 6.2, 8.3},
        /* Tramway    */ {7, 9, 1.00, 1.80, 80.0, 580.0, 12.5, 16.0},
    };
    return c;
}

void to_json(nlohmann::json& j, const ReflectorProfile& p) {
    j = nlohmann::json{{"count_min", p.count_min},         {"count_max", p.count_max},
                       {"amplitude_min", p.amplitude_min}, {"amplitude_max", p.amplitude_max},
                       {"delay_min", p.delay_min},         {"delay_max", p.delay_max},
                       {"width_min", p.width_min},         {"width_max", p.width_max}};
}

void from_json(const nlohmann::json& j, ReflectorProfile& p) {
    p.count_min = j.value("count_min", p.count_min);
    p.count_max = j.value("count_max", p.count_max);
    p.amplitude_min = j.value("amplitude_min", p.amplitude_min);
    p.amplitude_max = j.value("amplitude_max", p.amplitude_max);
    p.delay_min = j.value("delay_min", p.delay_min);
    p.delay_max = j.value("delay_max", p.delay_max);
    p.width_min = j.value("width_min", p.width_min);
    p.width_max = j.value("width_max", p.width_max);
}

void to_json(nlohmann::json& j, const DatasetConfig& c) {
    j = nlohmann::json{{"num_classes", c.num_classes},
                       {"samples_per_class", c.samples_per_class},
                       {"frame_length", c.frame_length},
                       {"sample_rate_hz", c.sample_rate_hz},
                       {"pulse_band_hz", {c.pulse_band.f_min_hz, c.pulse_band.f_max_hz}},
                       {"noise_std", c.noise_std},
                       {"coupling_amplitude", c.coupling_amplitude},
                       {"coupling_delay", c.coupling_delay},
                       {"coupling_width", c.coupling_width},
                       {"seed", c.seed},
                       {"class_names", c.class_names},
                       {"reflectors", c.reflectors}};
}

void from_json(const nlohmann::json& j, DatasetConfig& c) {
    const DatasetConfig base = DatasetConfig::defaults();
    c = base;
    c.num_classes = j.value("num_classes", base.num_classes);
    c.samples_per_class = j.value("samples_per_class", base.samples_per_class);
    c.frame_length = j.value("frame_length", base.frame_length);
    c.sample_rate_hz = j.value("sample_rate_hz", base.sample_rate_hz);
    if (j.contains("pulse_band_hz")) {
        const auto& b = j.at("pulse_band_hz");
        c.pulse_band = FrequencyBand{b.at(0).get<double>(), b.at(1).get<double>()};
    }
    c.noise_std = j.value("noise_std", base.noise_std);
    c.coupling_amplitude = j.value("coupling_amplitude", base.coupling_amplitude);
    c.coupling_delay = j.value("coupling_delay", base.coupling_delay);
    c.coupling_width = j.value("coupling_width", base.coupling_width);
    c.seed = j.value("seed", base.seed);
    c.class_names = j.value("class_names", base.class_names);
    if (j.contains("reflectors")) c.reflectors = j.at("reflectors").get<std::vector<ReflectorProfile>>();
}

Signal gen_pulse(double center_sample, double width_samples, double amplitude,
                 double carrier_hz, int frame_length, double sample_rate_hz) {
    if (width_samples <= 0.0) throw std::invalid_argument("gen_pulse: width must be positive");
    if (frame_length < 1) throw std::invalid_argument("gen_pulse: frame must be non-empty");
    if (sample_rate_hz <= 0.0) throw std::invalid_argument("gen_pulse: sample rate must be positive");
    Signal x;
    x.sample_rate_hz = sample_rate_hz;
    x.samples.resize(static_cast<std::size_t>(frame_length));
    for (int n = 0; n < frame_length; ++n) {
        const double u = (static_cast<double>(n) - center_sample) / width_samples;
        const double envelope = amplitude * u * std::exp((1.0 - u * u) / 2.0);
        const double phase = 2.0 * std::numbers::pi * carrier_hz * static_cast<double>(n) / sample_rate_hz;
        x.samples[static_cast<std::size_t>(n)] = envelope * std::cos(phase);
    }
    return x;
}

Dataset synthesize(const DatasetConfig& config) {
    validate(config);
    Dataset ds;
    ds.reserve(static_cast<std::size_t>(config.num_classes) *
               static_cast<std::size_t>(config.samples_per_class));

    // The coupling leak is the same deterministic pulse in every frame (no
    // RNG draws), so per-sample substreams are unaffected by toggling it.
    // Generated at unit amplitude here and rescaled per frame below.
    Signal leak;
    double leak_peak = 0.0;
    if (config.coupling_amplitude > 0.0) {
        const double carrier = 0.5 * (config.pulse_band.f_min_hz + config.pulse_band.f_max_hz);
        leak = gen_pulse(config.coupling_delay, config.coupling_width, 1.0, carrier,
                         config.frame_length, config.sample_rate_hz);
        for (double v : leak.samples) leak_peak = std::max(leak_peak, std::abs(v));
    }
    for (int cls = 0; cls < config.num_classes; ++cls) {
        const ReflectorProfile& prof = config.reflectors[static_cast<std::size_t>(cls)];
        for (int i = 0; i < config.samples_per_class; ++i) {
            const std::uint64_t index =
                static_cast<std::uint64_t>(cls) * static_cast<std::uint64_t>(config.samples_per_class) +
                static_cast<std::uint64_t>(i);
            std::mt19937_64 rng = make_rng(config.seed, index);

            LabeledSignal sample;
            sample.label = cls;
            sample.class_name = config.class_names[static_cast<std::size_t>(cls)];
            sample.signal.sample_rate_hz = config.sample_rate_hz;
            sample.signal.samples.assign(static_cast<std::size_t>(config.frame_length), 0.0);

            std::uniform_int_distribution<int> count_dist(prof.count_min, prof.count_max);
            const int count = count_dist(rng);
            for (int r = 0; r < count; ++r) {
                std::uniform_real_distribution<double> delay_dist(prof.delay_min, prof.delay_max);
                std::uniform_real_distribution<double> width_dist(prof.width_min, prof.width_max);
                std::uniform_real_distribution<double> amp_dist(prof.amplitude_min, prof.amplitude_max);
                std::uniform_real_distribution<double> carrier_dist(config.pulse_band.f_min_hz,
                                                                    config.pulse_band.f_max_hz);
                const double delay = delay_dist(rng);
                const double width = width_dist(rng);
                const double amp = amp_dist(rng);
                const double carrier = carrier_dist(rng);
                const Signal pulse =
                    gen_pulse(delay, width, amp, carrier, config.frame_length, config.sample_rate_hz);
                for (std::size_t n = 0; n < sample.signal.size(); ++n)
                    sample.signal[n] += pulse[n];
            }
            if (config.coupling_amplitude > 0.0) {
                // Scale the leak to this frame's echo peak: after max-abs
                // normalization its height is coupling_amplitude in every
                // frame, independent of how strong the obstacle echo was.
                double echo_peak = 0.0;
                for (double v : sample.signal.samples) echo_peak = std::max(echo_peak, std::abs(v));
                const double scale = config.coupling_amplitude * echo_peak / leak_peak;
                for (std::size_t n = 0; n < sample.signal.size(); ++n)
                    sample.signal[n] += scale * leak[n];
            }
            if (config.noise_std > 0.0) {
                std::normal_distribution<double> noise(0.0, config.noise_std);
                for (auto& v : sample.signal.samples) v += noise(rng);
            }

            double peak = 0.0;
            for (double v : sample.signal.samples) peak = std::max(peak, std::abs(v));
            if (peak == 0.0) throw std::domain_error("synthesize: frame is all-zero, cannot normalize");
            sample.peak_amplitude = peak;
            for (auto& v : sample.signal.samples) v /= peak;

            ds.push_back(std::move(sample));
        }
    }
    return ds;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double train_ratio) {
    if (!(train_ratio > 0.0 && train_ratio < 1.0))
        throw config_error("split: train_ratio must be in (0, 1)");
    if (ds.empty()) throw config_error("split: dataset is empty");

    // Group sample indices by label, preserving within-class order.
    int max_label = 0;
    for (const LabeledSignal& s : ds) max_label = std::max(max_label, s.label);
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(max_label) + 1);
    for (std::size_t i = 0; i < ds.size(); ++i)
        by_class[static_cast<std::size_t>(ds[i].label)].push_back(i);
    for (std::size_t c = 0; c < by_class.size(); ++c)
        if (by_class[c].size() < 2)
            throw config_error("split: class " + std::to_string(c) +
                               " has fewer than 2 samples, cannot stratify");

    // Largest-remainder apportionment of floor(total * ratio) train slots.
    const std::size_t total_train =
        static_cast<std::size_t>(std::floor(static_cast<double>(ds.size()) * train_ratio));
    std::vector<std::size_t> quota(by_class.size());
    std::vector<std::pair<double, std::size_t>> remainders;  // (-remainder, class)
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        const double exact = static_cast<double>(by_class[c].size()) * train_ratio;
        quota[c] = static_cast<std::size_t>(std::floor(exact));
        assigned += quota[c];
        remainders.emplace_back(-(exact - std::floor(exact)), c);
    }
    std::stable_sort(remainders.begin(), remainders.end());
    for (std::size_t i = 0; assigned < total_train && i < remainders.size(); ++i) {
        const std::size_t c = remainders[i].second;
        if (quota[c] < by_class[c].size()) {
            ++quota[c];
            ++assigned;
        }
    }

    Dataset train, test;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        for (std::size_t i = 0; i < by_class[c].size(); ++i) {
            const LabeledSignal& s = ds[by_class[c][i]];
            (i < quota[c] ? train : test).push_back(s);
        }
    }
    return {std::move(train), std::move(test)};
}

Dataset stratified_head(const Dataset& ds, std::size_t n) {
    if (n >= ds.size()) return ds;
    int max_label = 0;
    for (const LabeledSignal& s : ds) max_label = std::max(max_label, s.label);
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(max_label) + 1);
    for (std::size_t i = 0; i < ds.size(); ++i)
        by_class[static_cast<std::size_t>(ds[i].label)].push_back(i);

    Dataset out;
    out.reserve(n);
    for (std::size_t round = 0; out.size() < n; ++round) {
        bool any = false;
        for (const auto& cls : by_class) {
            if (round >= cls.size()) continue;
            any = true;
            out.push_back(ds[cls[round]]);
            if (out.size() == n) break;
        }
        if (!any) break;
    }
    return out;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path,
                  const DatasetConfig* config) {
    if (ds.empty()) throw std::invalid_argument("save_dataset: dataset is empty");
    const std::size_t d = ds[0].signal.size();
    int num_classes = 0;
    for (const LabeledSignal& s : ds) {
        if (s.signal.size() != d) throw std::invalid_argument("save_dataset: ragged frame lengths");
        num_classes = std::max(num_classes, s.label + 1);
    }
    std::vector<std::string> names(static_cast<std::size_t>(num_classes));
    for (const LabeledSignal& s : ds) names[static_cast<std::size_t>(s.label)] = s.class_name;

    BinaryWriter w(path);
    w.bytes(kDatasetMagic, 4);
    w.u32(kDatasetVersion);
    w.u32(static_cast<std::uint32_t>(d));
    w.u32(static_cast<std::uint32_t>(num_classes));
    w.u64(ds.size());
    w.f64(ds[0].signal.sample_rate_hz);
    for (const std::string& name : names) w.str(name);
    for (const LabeledSignal& s : ds) {
        w.i32(s.label);
        w.f64(s.peak_amplitude);
        w.f64_array(s.signal.samples);
    }

    if (config) {
        nlohmann::json j = *config;
        std::ofstream side(path.string() + ".json");
        if (!side) throw io_error("cannot write sidecar for " + path.string(), 0);
        side << j.dump(2) << "\n";
    }
}

Dataset load_dataset(const std::filesystem::path& path) {
    BinaryReader r(path);
    char magic[4];
    r.bytes(magic, 4);
    if (!std::equal(magic, magic + 4, kDatasetMagic)) r.fail("not a dataset file (bad magic)");
    const std::uint32_t version = r.u32();
    if (version != kDatasetVersion)
        r.fail("unsupported dataset version " + std::to_string(version));
    const std::uint32_t d = r.u32();
    if (d == 0 || d > 1'000'000) r.fail("implausible frame length " + std::to_string(d));
    const std::uint32_t num_classes = r.u32();
    if (num_classes == 0 || num_classes > 4096)
        r.fail("implausible class count " + std::to_string(num_classes));
    const std::uint64_t count = r.u64();
    if (count == 0 || count > 100'000'000) r.fail("implausible sample count " + std::to_string(count));
    const double rate = r.f64();
    if (!(rate > 0.0)) r.fail("sample rate must be positive");

    std::vector<std::string> names(num_classes);
    for (auto& name : names) name = r.str();

    Dataset ds;
    ds.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        LabeledSignal s;
        s.label = r.i32();
        if (s.label < 0 || static_cast<std::uint32_t>(s.label) >= num_classes)
            r.fail("label out of range for declared class count");
        s.class_name = names[static_cast<std::size_t>(s.label)];
        s.peak_amplitude = r.f64();
        s.signal.sample_rate_hz = rate;
        s.signal.samples = r.f64_array(d);
        ds.push_back(std::move(s));
    }
    return ds;
}

}  // namespace arna
