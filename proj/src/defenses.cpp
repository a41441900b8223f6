#include "arna/defenses.hpp"

#include <cstdio>

#include "arna/util.hpp"

namespace arna::defenses {

std::vector<double> defended_forward(const ModelParams& params, const Signal& x,
                                     const FrequencyBand& band) {
    return forward(params, passband_filter(x, band));
}

int defended_predict(const ModelParams& params, const Signal& x, const FrequencyBand& band) {
    return predict(params, passband_filter(x, band));
}

double defended_accuracy(const ModelParams& params, const Dataset& ds, const FrequencyBand& band) {
    if (ds.empty()) throw std::invalid_argument("defended_accuracy: empty dataset");
    std::size_t hits = 0;
    for (const LabeledSignal& s : ds)
        if (defended_predict(params, s.signal, band) == s.label) ++hits;
    return static_cast<double>(hits) / static_cast<double>(ds.size());
}

void to_json(nlohmann::json& j, const ATConfig& c) {
    j = nlohmann::json{{"epsilon", c.epsilon},
                       {"step_size", c.step_size},
                       {"iterations", c.iterations},
                       {"train", c.train}};
}

void from_json(const nlohmann::json& j, ATConfig& c) {
    const ATConfig base;
    c = base;
    c.epsilon = j.value("epsilon", base.epsilon);
    c.step_size = j.value("step_size", base.step_size);
    c.iterations = j.value("iterations", base.iterations);
    if (j.contains("train")) c.train = j.at("train").get<TrainConfig>();
}

TrainResult adversarial_train(const Dataset& train_set, const Dataset* eval_set,
                              const ATConfig& cfg, const ArchSpec& arch) {
    if (!(cfg.epsilon >= 0.0)) throw config_error("adversarial_train: epsilon must be >= 0");
    if (!(cfg.step_size >= 0.0)) throw config_error("adversarial_train: step_size must be >= 0");
    if (cfg.iterations < 0) throw config_error("adversarial_train: iterations must be >= 0");
    if (cfg.step_size * static_cast<double>(cfg.iterations) < cfg.epsilon)
        throw config_error(
            "adversarial_train: step_size * iterations must reach epsilon, or the inner attack "
            "can never use its whole budget");

    const SampleExpand mix = [&cfg](const ModelParams& params, const Signal& x, int label) {
        return std::vector<Signal>{
            x, attacks::pgd(params, x, label, cfg.epsilon, cfg.step_size, cfg.iterations)};
    };
    return train(train_set, eval_set, cfg.train, arch, mix);
}

std::vector<DetectRow> detectability(const std::vector<attacks::Patch>& patches,
                                     std::size_t frame_length) {
    std::vector<DetectRow> rows;
    rows.reserve(patches.size());
    for (const attacks::Patch& p : patches) {
        const SpectralStats stats =
            spectral_magnitude_stats(Signal(p.delta, p.sample_rate_hz), frame_length);
        rows.push_back({static_cast<int>(p.delta.size()), stats.avg_magnitude,
                        stats.max_magnitude});
    }
    return rows;
}

std::string detectability_csv(const std::vector<DetectRow>& rows) {
    std::string out = "size,avg_magnitude,max_magnitude\n";
    char line[96];
    for (const DetectRow& r : rows) {
        std::snprintf(line, sizeof(line), "%d,%.9f,%.9f\n", r.size, r.avg_magnitude,
                      r.max_magnitude);
        out += line;
    }
    return out;
}

}  // namespace arna::defenses
