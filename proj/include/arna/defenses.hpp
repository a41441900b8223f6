// Receiver-side countermeasures: pass-band filtering in front of the
// classifier, spectrum-sensing summaries of injected noise, and adversarial
// training of the classifier itself.
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "arna/attacks.hpp"
#include "arna/dataset.hpp"
#include "arna/model.hpp"
#include "arna/signal.hpp"

namespace arna::defenses {

// Classification behind the filter: the input is confined to `band` before
// the network sees it, discarding any off-band adversarial energy.
std::vector<double> defended_forward(const ModelParams& params, const Signal& x,
                                     const FrequencyBand& band);
int defended_predict(const ModelParams& params, const Signal& x, const FrequencyBand& band);
double defended_accuracy(const ModelParams& params, const Dataset& ds, const FrequencyBand& band);

// Worst-case training: every batch trains on each sample and on its own
// projected gradient attack (budget epsilon, step_size, iterations) against
// the current parameters, mixed 1:1. The budget must be reachable:
// step_size * iterations >= epsilon. With epsilon = 0 the attack is the
// identity and this reduces to plain training, bit for bit.
struct ATConfig {
    double epsilon = 0.002;
    double step_size = 0.0005;
    int iterations = 20;
    TrainConfig train;
};

void to_json(nlohmann::json& j, const ATConfig& c);
void from_json(const nlohmann::json& j, ATConfig& c);

TrainResult adversarial_train(const Dataset& train_set, const Dataset* eval_set,
                              const ATConfig& cfg, const ArchSpec& arch = ArchSpec::radar_cnn());

// What a spectrum monitor would see of each patch: mean and peak magnitude
// over the frame-length spectrum of the zero-padded patch. The size column
// is the patch's support length.
struct DetectRow {
    int size = 0;
    double avg_magnitude = 0.0;
    double max_magnitude = 0.0;
};

std::vector<DetectRow> detectability(const std::vector<attacks::Patch>& patches,
                                     std::size_t frame_length = kFrameLength);

// "size,avg_magnitude,max_magnitude" header plus one row per patch, fixed
// formatting so identical inputs serialize to identical bytes.
std::string detectability_csv(const std::vector<DetectRow>& rows);

}  // namespace arna::defenses
