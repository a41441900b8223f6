// Experiment harness: wires dataset, model, attacks and defenses into the
// named desk-scale experiments, persists every artifact it produces, and
// emits a machine-readable report plus plot-ready CSV series. Reports are a
// deterministic function of the spec and its seeds: per-cell work is counted
// in forward passes rather than wall-clock time so reruns are byte-identical.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "arna/attacks.hpp"
#include "arna/dataset.hpp"
#include "arna/model.hpp"

namespace arna {

inline constexpr const char* kHarnessVersion = "1.0.0";

// Each name selects one result grid the harness knows how to produce.
enum class ExperimentName {
    train_baseline,        // fit the classifier, report clean accuracy
    baseline_sync_desync,  // per-input attacks with and without sync
    uap_eval,              // fixed-placement universal patch
    srp_eval,              // shift-robust patch vs the one it improves on
    filter_impact,         // pass-band defense: clean cost and patch damping
    sfr_eval,              // filter-resistant patch through the defense
    size_sweep,            // masked patch success across window sizes
    magnitude_table,       // spectral footprint of masked patches per size
    random_baseline,       // matched-budget Gaussian noise floor
    at_eval,               // hardened vs undefended model under patches
};

std::string to_string(ExperimentName name);
ExperimentName experiment_name_from_string(const std::string& s);

struct ExperimentSpec {
    ExperimentName name = ExperimentName::train_baseline;

    // Grids. Absent JSON keys get per-experiment defaults (the budgets and
    // patch lengths each figure charts); explicitly empty lists are a
    // validation error.
    std::vector<double> epsilons;
    std::vector<int> sizes;
    int shifts = 50;  // placement trials per test sample

    std::uint64_t seed = 1;  // evaluation placements, one substream per sample

    // Patch generation knobs (passes, inner step, iterations, seed). The
    // band for filtered generators is estimated from the training split, so
    // any band set here is ignored.
    attacks::AttackConfig attack;
    int generation_samples = 200;  // class-balanced subset the generators sweep

    // magnitude_table only: a patch counts as detected when its peak spectral
    // magnitude inside the victim band reaches this value; 0 disables the flag.
    double sensing_threshold = 0.0;

    TrainConfig train;         // train_baseline only
    double split_ratio = 0.7;  // train share of the dataset

    std::filesystem::path dataset_path;
    std::filesystem::path model_path;           // all but train_baseline
    std::filesystem::path defended_model_path;  // at_eval only
    std::filesystem::path out_dir;

    // Parses the file, resolves per-experiment grid defaults and validates.
    static ExperimentSpec from_file(const std::filesystem::path& path);

    // Grid, range and artifact-existence checks; throws config_error before
    // any computation starts.
    void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentSpec& spec);
void from_json(const nlohmann::json& j, ExperimentSpec& spec);

// One grid cell of an experiment. `forward_evals` counts network evaluations
// (a backward pass rides on exactly one forward) spent on this cell's
// numbers; it stands in for runtime because it is schedule-independent.
struct CellResult {
    std::string attack;  // none|fgsm|pgd|uap|srp|sfr|arna|random
    double epsilon = 0.0;
    int size = 0;        // perturbation support in samples, 0 for clean rows
    std::string mode;    // clean|sync|shifted|one_shot|continuous[ _filtered|_hardened]
    double success_rate = 0.0;
    double accuracy = 0.0;
    std::uint64_t forward_evals = 0;
};

// magnitude_table row: overall spectral stats of the zero-padded patch plus
// the in-band peak the sensing model thresholds on. `detected` is -1 when
// sensing is disabled, else 0/1.
struct MagnitudeRow {
    int size = 0;
    double avg_magnitude = 0.0;
    double max_magnitude = 0.0;
    double band_peak = 0.0;
    int detected = -1;
};

struct ExperimentReport {
    ExperimentSpec spec;  // echo, with defaults resolved
    std::vector<CellResult> cells;
    // Artifact name -> fnv1a64 content hash for everything consumed or
    // produced (dataset, models, patch files).
    std::map<std::string, std::string> provenance;

    // train_baseline only.
    std::vector<EpochStats> history;
    double train_accuracy = -1.0;
    double test_accuracy = -1.0;

    // magnitude_table only.
    std::vector<MagnitudeRow> magnitude_rows;

    nlohmann::ordered_json to_json() const;
    static ExperimentReport from_json_file(const std::filesystem::path& path);
};

// Runs the experiment: loads artifacts, generates and saves any patches under
// <out_dir>/patches/, evaluates every grid cell exactly once, and writes
// report.json and cells.csv into out_dir. Progress and wall-clock go to
// stderr only. Throws config_error for spec problems, io_error for bad
// artifacts, std::runtime_error for violated run invariants.
ExperimentReport run(const ExperimentSpec& spec);

// Plot-data emission: one CSV per curve, header `x,y,label`, x = ε or size,
// y = success rate. Known figures: patch_size_sweep, srp_vs_uap, sfr_vs_uap,
// at_one_shot, at_continuous, random_comparison. Throws config_error for an
// unknown figure id and std::runtime_error when the report lacks the
// figure's cells. Returns the paths written.
std::vector<std::filesystem::path> emit_plot_data(const ExperimentReport& report,
                                                  const std::string& figure_id,
                                                  const std::filesystem::path& out_dir);

// All figure ids emit_plot_data accepts, in emission order.
std::vector<std::string> figure_ids();

}  // namespace arna
