#include "arna/experiment.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <utility>

#include "arna/defenses.hpp"
#include "arna/util.hpp"

namespace arna {

namespace {

namespace fs = std::filesystem;

constexpr std::array<std::pair<ExperimentName, const char*>, 10> kExperimentNames{{
    {ExperimentName::train_baseline, "train_baseline"},
    {ExperimentName::baseline_sync_desync, "baseline_sync_desync"},
    {ExperimentName::uap_eval, "uap_eval"},
    {ExperimentName::srp_eval, "srp_eval"},
    {ExperimentName::filter_impact, "filter_impact"},
    {ExperimentName::sfr_eval, "sfr_eval"},
    {ExperimentName::size_sweep, "size_sweep"},
    {ExperimentName::magnitude_table, "magnitude_table"},
    {ExperimentName::random_baseline, "random_baseline"},
    {ExperimentName::at_eval, "at_eval"},
}};

// Default grids: the per-input baseline is probed at the small budgets where
// synchronized attacks start to bite, patches over the budgets the headline
// comparisons chart, and the size experiments over support lengths from a
// twentieth of the frame up to nearly all of it.
std::vector<double> default_epsilons(ExperimentName name) {
    switch (name) {
        case ExperimentName::train_baseline: return {};
        case ExperimentName::baseline_sync_desync: return {0.001, 0.002, 0.005, 0.007, 0.01};
        case ExperimentName::magnitude_table: return {0.03};
        default: return {0.01, 0.02, 0.03, 0.04, 0.05};
    }
}

std::vector<int> default_sizes(ExperimentName name) {
    switch (name) {
        case ExperimentName::size_sweep:
        case ExperimentName::magnitude_table: return {30, 50, 100, 200, 300, 400, 500, 600};
        default: return {kFrameLength};
    }
}

std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string fmt_f9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9f", v);
    return buf;
}

std::string file_hash_tag(const fs::path& path) { return "fnv1a64:" + hex64(fnv1a64_file(path)); }

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open for writing: " + path.string(), 0);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw io_error("short write: " + path.string(), content.size());
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// One grid coordinate; the plan below is the single source of which cells an
// experiment owes its report.
struct CellKey {
    std::string attack;
    double epsilon = 0.0;
    int size = 0;
    std::string mode;
};

std::vector<CellKey> plan_cells(const ExperimentSpec& sp) {
    std::vector<CellKey> plan;
    const int full = kFrameLength;
    switch (sp.name) {
        case ExperimentName::train_baseline:
            plan.push_back({"none", 0.0, 0, "clean"});
            break;
        case ExperimentName::baseline_sync_desync:
            for (const char* a : {"fgsm", "pgd"})
                for (double e : sp.epsilons)
                    for (const char* m : {"sync", "shifted"}) plan.push_back({a, e, full, m});
            break;
        case ExperimentName::uap_eval:
            for (double e : sp.epsilons)
                for (const char* m : {"sync", "shifted"}) plan.push_back({"uap", e, full, m});
            break;
        case ExperimentName::srp_eval:
            for (const char* a : {"uap", "srp"})
                for (double e : sp.epsilons)
                    for (const char* m : {"sync", "shifted"}) plan.push_back({a, e, full, m});
            break;
        case ExperimentName::filter_impact:
            plan.push_back({"none", 0.0, 0, "clean"});
            plan.push_back({"none", 0.0, 0, "clean_filtered"});
            for (double e : sp.epsilons)
                for (const char* m : {"shifted", "shifted_filtered"})
                    plan.push_back({"srp", e, full, m});
            break;
        case ExperimentName::sfr_eval:
            for (const char* a : {"uap", "srp", "sfr"})
                for (double e : sp.epsilons)
                    for (const char* m : {"shifted", "shifted_filtered"})
                        plan.push_back({a, e, full, m});
            break;
        case ExperimentName::size_sweep:
            for (double e : sp.epsilons)
                for (int s : sp.sizes)
                    for (const char* m : {"one_shot", "continuous"}) plan.push_back({"arna", e, s, m});
            break;
        case ExperimentName::magnitude_table:
            break;  // spectral rows, no classification cells
        case ExperimentName::random_baseline:
            for (const char* a : {"random", "arna"})
                for (double e : sp.epsilons) plan.push_back({a, e, full, "one_shot"});
            break;
        case ExperimentName::at_eval:
            plan.push_back({"none", 0.0, 0, "clean"});
            plan.push_back({"none", 0.0, 0, "clean_hardened"});
            for (double e : sp.epsilons)
                for (int s : sp.sizes)
                    for (const char* m :
                         {"one_shot", "continuous", "one_shot_hardened", "continuous_hardened"})
                        plan.push_back({"arna", e, s, m});
            break;
    }
    return plan;
}

// Peak spectral magnitude of the zero-padded patch inside the victim band;
// the bin rule (inclusive edges, one-sided scan) matches the pass-band
// filter, and conjugate mirror bins carry the same magnitude.
double band_peak(const attacks::Patch& patch, const FrequencyBand& band, int frame_length) {
    std::vector<double> padded(static_cast<std::size_t>(frame_length), 0.0);
    std::copy(patch.delta.begin(), patch.delta.end(), padded.begin());
    const Spectrum sp = dft(Signal(std::move(padded), patch.sample_rate_hz));
    const double df = patch.sample_rate_hz / static_cast<double>(frame_length);
    double peak = 0.0;
    for (std::size_t k = 0; k <= static_cast<std::size_t>(frame_length) / 2; ++k) {
        const double f = static_cast<double>(k) * df;
        if (f >= band.f_min_hz && f <= band.f_max_hz) peak = std::max(peak, std::abs(sp.bins[k]));
    }
    return peak;
}

class Runner {
public:
    explicit Runner(const ExperimentSpec& spec) : spec_(spec) {}

    ExperimentReport run() {
        const auto t0 = std::chrono::steady_clock::now();
        fs::create_directories(spec_.out_dir);
        report_.spec = spec_;
        report_.provenance["dataset"] = file_hash_tag(spec_.dataset_path);

        const Dataset full = load_dataset(spec_.dataset_path);
        std::tie(train_, test_) = split(full, spec_.split_ratio);
        head_ = stratified_head(train_, static_cast<std::size_t>(spec_.generation_samples));
        if (test_.empty()) throw std::runtime_error("experiment: empty evaluation split");

        if (spec_.name == ExperimentName::train_baseline) {
            run_training();
        } else {
            params_ = load_model(spec_.model_path);
            report_.provenance["model"] = file_hash_tag(spec_.model_path);
            if (spec_.name == ExperimentName::at_eval) {
                hardened_ = load_model(spec_.defended_model_path);
                report_.provenance["defended_model"] = file_hash_tag(spec_.defended_model_path);
            }
        }
        init_placements();
        if (spec_.name == ExperimentName::magnitude_table) run_magnitude_table();

        const std::vector<CellKey> plan = plan_cells(spec_);
        for (const CellKey& key : plan) {
            const auto c0 = std::chrono::steady_clock::now();
            report_.cells.push_back(execute_cell(key));
            const CellResult& cell = report_.cells.back();
            std::fprintf(stderr, "[cell] %s eps=%s s=%d %s success=%.4f (%.1fs)\n",
                         cell.attack.c_str(), fmt_g(cell.epsilon).c_str(), cell.size,
                         cell.mode.c_str(), cell.success_rate, seconds_since(c0));
        }
        verify_completeness(plan);
        write_outputs();
        std::fprintf(stderr, "[%s] done in %.1fs -> %s\n", to_string(spec_.name).c_str(),
                     seconds_since(t0), spec_.out_dir.string().c_str());
        return std::move(report_);
    }

private:
    void run_training() {
        const auto t0 = std::chrono::steady_clock::now();
        const TrainResult result = train(train_, &test_, spec_.train);
        params_ = result.params;
        report_.history = result.history;
        report_.train_accuracy = accuracy(params_, train_);
        report_.test_accuracy = accuracy(params_, test_);
        const fs::path file = spec_.out_dir / "model.bin";
        save_model(params_, file, &spec_.train);
        report_.provenance["model"] = file_hash_tag(file);
        std::fprintf(stderr, "[train] %d epochs, train acc %.4f, test acc %.4f (%.1fs)\n",
                     spec_.train.epochs, report_.train_accuracy, report_.test_accuracy,
                     seconds_since(t0));
    }

    void run_magnitude_table() {
        const double eps = spec_.epsilons.front();
        std::vector<attacks::Patch> patches;
        patches.reserve(spec_.sizes.size());
        for (int s : spec_.sizes) patches.push_back(ensure_patch("arna", eps, s, false));
        const std::vector<defenses::DetectRow> rows = defenses::detectability(patches);
        const FrequencyBand& vb = victim_band();
        for (std::size_t i = 0; i < rows.size(); ++i) {
            MagnitudeRow row;
            row.size = rows[i].size;
            row.avg_magnitude = rows[i].avg_magnitude;
            row.max_magnitude = rows[i].max_magnitude;
            row.band_peak = band_peak(patches[i], vb, kFrameLength);
            row.detected = spec_.sensing_threshold > 0.0
                               ? (row.band_peak >= spec_.sensing_threshold ? 1 : 0)
                               : -1;
            report_.magnitude_rows.push_back(row);
        }
        write_text_file(spec_.out_dir / "detectability.csv", defenses::detectability_csv(rows));
    }

    // One placement stream per test sample, all trials drawn up front; every
    // cell reuses the same offsets, so grid comparisons share their random
    // numbers and differences between cells are differences between attacks.
    void init_placements() {
        placements_.resize(test_.size());
        std::uniform_int_distribution<int> offset(0, kFrameLength - 1);
        for (std::size_t i = 0; i < test_.size(); ++i) {
            std::mt19937_64 rng = make_rng(spec_.seed, i);
            placements_[i].resize(static_cast<std::size_t>(spec_.shifts));
            for (int t = 0; t < spec_.shifts; ++t)
                placements_[i][static_cast<std::size_t>(t)] = offset(rng);
        }
    }

    const FrequencyBand& victim_band() {
        if (!band_) {
            std::vector<Signal> signals;
            signals.reserve(train_.size());
            for (const LabeledSignal& s : train_) signals.push_back(s.signal);
            band_ = estimate_band(signals);
            std::fprintf(stderr, "[band] victim band %.3f-%.3f GHz\n", band_->f_min_hz / 1e9,
                         band_->f_max_hz / 1e9);
        }
        return *band_;
    }

    std::string patch_key(const std::string& kind, double eps, int size, bool hardened) const {
        std::string key = kind + "_eps" + fmt_g(eps) + "_s" + std::to_string(size);
        if (hardened) key += "_hardened";
        return key;
    }

    const attacks::Patch& ensure_patch(const std::string& kind, double eps, int size,
                                       bool hardened) {
        const std::string key = patch_key(kind, eps, size, hardened);
        const auto it = patches_.find(key);
        if (it != patches_.end()) return it->second;

        const auto t0 = std::chrono::steady_clock::now();
        attacks::AttackConfig cfg = spec_.attack;
        cfg.epsilon = eps;
        cfg.band.reset();
        cfg.patch_size = 0;
        const ModelParams& target = hardened ? *hardened_ : params_;
        attacks::Patch patch;
        if (kind == "random") {
            cfg.patch_size = size;
            patch = attacks::random_patch(eps, size, cfg.seed,
                                          test_.front().signal.sample_rate_hz);
        } else {
            if (kind == "sfr" || kind == "arna") cfg.band = victim_band();
            if (kind == "arna") cfg.patch_size = size;
            patch = kind == "uap"   ? attacks::uap(target, head_, cfg)
                    : kind == "srp" ? attacks::srp(target, head_, cfg)
                    : kind == "sfr" ? attacks::sfr(target, head_, cfg)
                                    : attacks::arna(target, head_, cfg);
        }
        const fs::path dir = spec_.out_dir / "patches";
        fs::create_directories(dir);
        const fs::path file = dir / (key + ".bin");
        attacks::save_patch(patch, file, &cfg);
        report_.provenance["patch/" + key] = file_hash_tag(file);
        std::fprintf(stderr, "[patch] %s (%.1fs)\n", key.c_str(), seconds_since(t0));
        return patches_.emplace(key, std::move(patch)).first->second;
    }

    const Dataset& ensure_adv(const std::string& kind, double eps) {
        const std::string key = kind + "_" + fmt_g(eps);
        const auto it = adv_.find(key);
        if (it != adv_.end()) return it->second;

        const auto t0 = std::chrono::steady_clock::now();
        Dataset adv = test_;
        const double step = attacks::effective_step(eps, spec_.attack.alpha);
        const int iters = spec_.attack.inner_iterations;
        parallel_for(test_.size(), [&](std::size_t i) {
            const LabeledSignal& s = test_[i];
            adv[i].signal = kind == "fgsm"
                                ? attacks::fgsm(params_, s.signal, s.label, eps)
                                : attacks::pgd(params_, s.signal, s.label, eps, step, iters);
        });
        std::fprintf(stderr, "[adv] %s (%.1fs)\n", key.c_str(), seconds_since(t0));
        return adv_.emplace(key, std::move(adv)).first->second;
    }

    int classify(const ModelParams& p, const Signal& x, const FrequencyBand* filter) const {
        return filter ? defenses::defended_predict(p, x, *filter) : predict(p, x);
    }

    CellResult execute_cell(const CellKey& key) {
        CellResult cell;
        cell.attack = key.attack;
        cell.epsilon = key.epsilon;
        cell.size = key.size;
        cell.mode = key.mode;

        const bool hardened = ends_with(key.mode, "_hardened");
        const bool filtered = ends_with(key.mode, "_filtered");
        std::string base = key.mode;
        if (hardened) base.resize(base.size() - 9);
        if (filtered) base.resize(base.size() - 9);
        const ModelParams& p = hardened ? *hardened_ : params_;
        const FrequencyBand* filter = filtered ? &victim_band() : nullptr;

        const std::size_t n = test_.size();
        const std::size_t trials = static_cast<std::size_t>(spec_.shifts);
        std::vector<std::uint32_t> miss(n, 0);
        std::uint64_t evaluations = 0;

        if (key.attack == "none") {
            parallel_for(n, [&](std::size_t i) {
                miss[i] = classify(p, test_[i].signal, filter) != test_[i].label;
            });
            evaluations = n;
            cell.success_rate = mean_miss(miss, 1);
        } else if (key.attack == "fgsm" || key.attack == "pgd") {
            const Dataset& adv = ensure_adv(key.attack, key.epsilon);
            const std::uint64_t gen_cost = key.attack == "fgsm"
                                               ? 1
                                               : static_cast<std::uint64_t>(
                                                     spec_.attack.inner_iterations);
            if (base == "sync") {
                parallel_for(n, [&](std::size_t i) {
                    miss[i] = classify(p, adv[i].signal, filter) != adv[i].label;
                });
                evaluations = n * (gen_cost + 1);
                cell.success_rate = mean_miss(miss, 1);
            } else {
                // The victim samples with an unknown timing offset, so the
                // attacker's per-input noise lands rotated within the frame.
                parallel_for(n, [&](std::size_t i) {
                    const Signal& x = test_[i].signal;
                    std::vector<double> delta(x.size());
                    for (std::size_t j = 0; j < x.size(); ++j)
                        delta[j] = adv[i].signal[j] - x[j];
                    const Signal delta_sig(std::move(delta), x.sample_rate_hz);
                    std::uint32_t bad = 0;
                    for (std::size_t t = 0; t < trials; ++t) {
                        const Signal rotated = circular_shift(
                            delta_sig, static_cast<std::size_t>(placements_[i][t]));
                        Signal y = x;
                        for (std::size_t j = 0; j < y.size(); ++j)
                            y[j] = std::clamp(x[j] + rotated[j], attacks::kDomainMin,
                                              attacks::kDomainMax);
                        bad += classify(p, y, filter) != test_[i].label;
                    }
                    miss[i] = bad;
                });
                evaluations = n * trials;
                cell.success_rate = mean_miss(miss, trials);
            }
        } else {
            const attacks::Patch& patch =
                ensure_patch(key.attack, key.epsilon, key.size, hardened);
            if (base == "sync") {
                parallel_for(n, [&](std::size_t i) {
                    const Signal y =
                        attacks::apply_patch(test_[i].signal, patch, attacks::ApplyMode::one_shot, 0);
                    miss[i] = classify(p, y, filter) != test_[i].label;
                });
                evaluations = n;
                cell.success_rate = mean_miss(miss, 1);
            } else {
                // one_shot inserts the patch at the trial's offset; shifted and
                // continuous broadcast it, which for a full-frame patch is a
                // circular rotation.
                const attacks::ApplyMode mode = base == "one_shot"
                                                    ? attacks::ApplyMode::one_shot
                                                    : attacks::ApplyMode::continuous;
                parallel_for(n, [&](std::size_t i) {
                    std::uint32_t bad = 0;
                    for (std::size_t t = 0; t < trials; ++t) {
                        const Signal y =
                            attacks::apply_patch(test_[i].signal, patch, mode,
                                                 static_cast<std::size_t>(placements_[i][t]));
                        bad += classify(p, y, filter) != test_[i].label;
                    }
                    miss[i] = bad;
                });
                evaluations = n * trials;
                cell.success_rate = mean_miss(miss, trials);
            }
        }

        cell.accuracy = 1.0 - cell.success_rate;
        cell.forward_evals = evaluations;
        return cell;
    }

    double mean_miss(const std::vector<std::uint32_t>& miss, std::size_t trials) const {
        std::uint64_t total = 0;
        for (std::uint32_t m : miss) total += m;
        return static_cast<double>(total) /
               (static_cast<double>(miss.size()) * static_cast<double>(trials));
    }

    void verify_completeness(const std::vector<CellKey>& plan) const {
        if (report_.cells.size() != plan.size())
            throw std::runtime_error("experiment: report has " +
                                     std::to_string(report_.cells.size()) + " cells, grid has " +
                                     std::to_string(plan.size()));
        for (std::size_t i = 0; i < plan.size(); ++i) {
            const CellResult& c = report_.cells[i];
            const CellKey& k = plan[i];
            if (c.attack != k.attack || c.epsilon != k.epsilon || c.size != k.size ||
                c.mode != k.mode)
                throw std::runtime_error("experiment: cell " + std::to_string(i) +
                                         " does not match its grid coordinate");
            for (std::size_t j = i + 1; j < report_.cells.size(); ++j) {
                const CellResult& d = report_.cells[j];
                if (c.attack == d.attack && c.epsilon == d.epsilon && c.size == d.size &&
                    c.mode == d.mode)
                    throw std::runtime_error("experiment: duplicate cell for " + c.attack + "/" +
                                             fmt_g(c.epsilon) + "/" + std::to_string(c.size) +
                                             "/" + c.mode);
            }
        }
    }

    void write_outputs() const {
        std::string csv = "attack,epsilon,size,mode,success_rate,accuracy,forward_evals\n";
        for (const CellResult& c : report_.cells) {
            csv += c.attack + "," + fmt_g(c.epsilon) + "," + std::to_string(c.size) + "," +
                   c.mode + "," + fmt_f9(c.success_rate) + "," + fmt_f9(c.accuracy) + "," +
                   std::to_string(c.forward_evals) + "\n";
        }
        write_text_file(spec_.out_dir / "cells.csv", csv);
        write_text_file(spec_.out_dir / "report.json", report_.to_json().dump(2) + "\n");
    }

    ExperimentSpec spec_;
    Dataset train_, test_, head_;
    ModelParams params_;
    std::optional<ModelParams> hardened_;
    std::optional<FrequencyBand> band_;
    std::vector<std::vector<int>> placements_;
    std::map<std::string, attacks::Patch> patches_;
    std::map<std::string, Dataset> adv_;
    ExperimentReport report_;
};

}  // namespace

std::string to_string(ExperimentName name) {
    for (const auto& [value, text] : kExperimentNames)
        if (value == name) return text;
    throw std::logic_error("experiment: unmapped name enumerator");
}

ExperimentName experiment_name_from_string(const std::string& s) {
    for (const auto& [value, text] : kExperimentNames)
        if (s == text) return value;
    std::string known;
    for (const auto& [value, text] : kExperimentNames) {
        if (!known.empty()) known += ", ";
        known += text;
    }
    throw config_error("experiment: unknown name '" + s + "' (known: " + known + ")");
}

void to_json(nlohmann::json& j, const ExperimentSpec& spec) {
    j = nlohmann::json{
        {"name", to_string(spec.name)},
        {"epsilons", spec.epsilons},
        {"sizes", spec.sizes},
        {"shifts", spec.shifts},
        {"seed", spec.seed},
        {"attack", spec.attack},
        {"generation_samples", spec.generation_samples},
        {"sensing_threshold", spec.sensing_threshold},
        {"train", spec.train},
        {"split_ratio", spec.split_ratio},
        {"dataset", spec.dataset_path.string()},
        {"model", spec.model_path.string()},
        {"defended_model", spec.defended_model_path.string()},
        {"out_dir", spec.out_dir.string()},
    };
}

void from_json(const nlohmann::json& j, ExperimentSpec& spec) {
    const ExperimentSpec base;
    spec = base;
    if (!j.contains("name")) throw config_error("experiment spec: missing name");
    spec.name = experiment_name_from_string(j.at("name").get<std::string>());
    spec.epsilons = j.contains("epsilons") ? j.at("epsilons").get<std::vector<double>>()
                                           : default_epsilons(spec.name);
    spec.sizes =
        j.contains("sizes") ? j.at("sizes").get<std::vector<int>>() : default_sizes(spec.name);
    spec.shifts = j.value("shifts", base.shifts);
    spec.seed = j.value("seed", base.seed);
    if (j.contains("attack")) spec.attack = j.at("attack").get<attacks::AttackConfig>();
    spec.generation_samples = j.value("generation_samples", base.generation_samples);
    spec.sensing_threshold = j.value("sensing_threshold", base.sensing_threshold);
    if (j.contains("train")) spec.train = j.at("train").get<TrainConfig>();
    spec.split_ratio = j.value("split_ratio", base.split_ratio);
    spec.dataset_path = j.value("dataset", std::string{});
    spec.model_path = j.value("model", std::string{});
    spec.defended_model_path = j.value("defended_model", std::string{});
    spec.out_dir = j.value("out_dir", std::string{});
}

ExperimentSpec ExperimentSpec::from_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("experiment spec: cannot open " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw config_error("experiment spec: " + path.string() + ": " + e.what());
    }
    ExperimentSpec spec = j.get<ExperimentSpec>();
    spec.validate();
    return spec;
}

void ExperimentSpec::validate() const {
    if (out_dir.empty()) throw config_error("experiment: out_dir is required");
    if (shifts < 1) throw config_error("experiment: shifts must be >= 1");
    if (!(split_ratio > 0.0 && split_ratio < 1.0))
        throw config_error("experiment: split_ratio must lie in (0, 1)");
    if (generation_samples < 1)
        throw config_error("experiment: generation_samples must be >= 1");
    if (!(sensing_threshold >= 0.0))
        throw config_error("experiment: sensing_threshold must be >= 0");
    if (attack.passes < 1) throw config_error("experiment: attack passes must be >= 1");
    if (attack.inner_iterations < 1)
        throw config_error("experiment: attack inner_iterations must be >= 1");
    if (!(attack.alpha >= 0.0)) throw config_error("experiment: attack alpha must be >= 0");

    if (name != ExperimentName::train_baseline) {
        if (epsilons.empty()) throw config_error("experiment: epsilon grid is empty");
        for (double e : epsilons)
            if (!std::isfinite(e) || e < 0.0)
                throw config_error("experiment: epsilon values must be finite and >= 0");
    }
    if (sizes.empty()) throw config_error("experiment: size grid is empty");
    for (int s : sizes)
        if (s < 1 || s > kFrameLength)
            throw config_error("experiment: sizes must lie in [1, " +
                               std::to_string(kFrameLength) + "]");
    if (name == ExperimentName::magnitude_table && epsilons.size() != 1)
        throw config_error("experiment: magnitude_table takes exactly one epsilon");

    if (dataset_path.empty()) throw config_error("experiment: dataset path is required");
    if (!fs::exists(dataset_path))
        throw config_error("experiment: dataset artifact missing: " + dataset_path.string());
    if (name != ExperimentName::train_baseline) {
        if (model_path.empty()) throw config_error("experiment: model path is required");
        if (!fs::exists(model_path))
            throw config_error("experiment: model artifact missing: " + model_path.string());
    }
    if (name == ExperimentName::at_eval) {
        if (defended_model_path.empty())
            throw config_error("experiment: defended model path is required");
        if (!fs::exists(defended_model_path))
            throw config_error("experiment: defended model artifact missing: " +
                               defended_model_path.string());
    }
}

nlohmann::ordered_json ExperimentReport::to_json() const {
    nlohmann::ordered_json j;
    j["spec"] = nlohmann::json(spec);
    j["fingerprint"] = {
        {"version", kHarnessVersion},
        {"frame_length", kFrameLength},
        {"sample_rate_hz", kDefaultSampleRateHz},
        {"eval_seed", spec.seed},
        {"attack_seed", spec.attack.seed},
        {"train_seed", spec.train.seed},
        {"shifts", spec.shifts},
    };
    j["provenance"] = provenance;
    nlohmann::ordered_json cells_json = nlohmann::ordered_json::array();
    for (const CellResult& c : cells) {
        nlohmann::ordered_json jc;
        jc["attack"] = c.attack;
        jc["epsilon"] = c.epsilon;
        jc["size"] = c.size;
        jc["mode"] = c.mode;
        jc["success_rate"] = c.success_rate;
        jc["accuracy"] = c.accuracy;
        jc["forward_evals"] = c.forward_evals;
        cells_json.push_back(std::move(jc));
    }
    j["cells"] = std::move(cells_json);
    if (!history.empty()) {
        nlohmann::ordered_json tr;
        tr["train_accuracy"] = train_accuracy;
        tr["test_accuracy"] = test_accuracy;
        nlohmann::ordered_json hist = nlohmann::ordered_json::array();
        for (const EpochStats& e : history) {
            nlohmann::ordered_json je;
            je["epoch"] = e.epoch;
            je["mean_loss"] = e.mean_loss;
            je["eval_accuracy"] = e.eval_accuracy;
            hist.push_back(std::move(je));
        }
        tr["history"] = std::move(hist);
        j["training"] = std::move(tr);
    }
    if (!magnitude_rows.empty()) {
        nlohmann::ordered_json rows = nlohmann::ordered_json::array();
        for (const MagnitudeRow& r : magnitude_rows) {
            nlohmann::ordered_json jr;
            jr["size"] = r.size;
            jr["avg_magnitude"] = r.avg_magnitude;
            jr["max_magnitude"] = r.max_magnitude;
            jr["band_peak"] = r.band_peak;
            jr["detected"] = r.detected;
            rows.push_back(std::move(jr));
        }
        j["detectability"] = std::move(rows);
    }
    return j;
}

ExperimentReport ExperimentReport::from_json_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("report: cannot open " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw config_error("report: " + path.string() + ": " + e.what());
    }
    ExperimentReport rep;
    if (!j.contains("spec")) throw config_error("report: missing spec section");
    rep.spec = j.at("spec").get<ExperimentSpec>();
    for (const nlohmann::json& jc : j.value("cells", nlohmann::json::array())) {
        CellResult c;
        c.attack = jc.value("attack", std::string{});
        c.epsilon = jc.value("epsilon", 0.0);
        c.size = jc.value("size", 0);
        c.mode = jc.value("mode", std::string{});
        c.success_rate = jc.value("success_rate", 0.0);
        c.accuracy = jc.value("accuracy", 0.0);
        c.forward_evals = jc.value("forward_evals", std::uint64_t{0});
        rep.cells.push_back(std::move(c));
    }
    if (j.contains("provenance"))
        rep.provenance = j.at("provenance").get<std::map<std::string, std::string>>();
    if (j.contains("training")) {
        const nlohmann::json& tr = j.at("training");
        rep.train_accuracy = tr.value("train_accuracy", -1.0);
        rep.test_accuracy = tr.value("test_accuracy", -1.0);
        for (const nlohmann::json& je : tr.value("history", nlohmann::json::array())) {
            EpochStats e;
            e.epoch = je.value("epoch", 0);
            e.mean_loss = je.value("mean_loss", 0.0);
            e.eval_accuracy = je.value("eval_accuracy", -1.0);
            rep.history.push_back(e);
        }
    }
    for (const nlohmann::json& jr : j.value("detectability", nlohmann::json::array())) {
        MagnitudeRow r;
        r.size = jr.value("size", 0);
        r.avg_magnitude = jr.value("avg_magnitude", 0.0);
        r.max_magnitude = jr.value("max_magnitude", 0.0);
        r.band_peak = jr.value("band_peak", 0.0);
        r.detected = jr.value("detected", -1);
        rep.magnitude_rows.push_back(r);
    }
    return rep;
}

ExperimentReport run(const ExperimentSpec& spec) {
    spec.validate();
    return Runner(spec).run();
}

namespace {

struct CurveSelector {
    std::string label;
    std::string attack;
    std::string mode;
};

// figure id -> (source experiment, curve selectors over the ε axis)
struct FigureDef {
    ExperimentName source;
    std::vector<CurveSelector> curves;
};

const std::map<std::string, FigureDef>& figure_defs() {
    static const std::map<std::string, FigureDef> defs = {
        {"srp_vs_uap",
         {ExperimentName::srp_eval, {{"uap", "uap", "shifted"}, {"srp", "srp", "shifted"}}}},
        {"sfr_vs_uap",
         {ExperimentName::sfr_eval,
          {{"uap_filtered", "uap", "shifted_filtered"},
           {"sfr_filtered", "sfr", "shifted_filtered"}}}},
        {"at_one_shot",
         {ExperimentName::at_eval,
          {{"undefended", "arna", "one_shot"}, {"hardened", "arna", "one_shot_hardened"}}}},
        {"at_continuous",
         {ExperimentName::at_eval,
          {{"undefended", "arna", "continuous"},
           {"hardened", "arna", "continuous_hardened"}}}},
        {"random_comparison",
         {ExperimentName::random_baseline,
          {{"random", "random", "one_shot"}, {"arna", "arna", "one_shot"}}}},
    };
    return defs;
}

fs::path write_curve(const fs::path& out_dir, const std::string& figure_id,
                     const std::string& label,
                     const std::vector<std::pair<double, double>>& points) {
    if (points.empty())
        throw std::runtime_error("report lacks cells for figure " + figure_id + " curve " +
                                 label);
    std::string csv = "x,y,label\n";
    for (const auto& [x, y] : points) csv += fmt_g(x) + "," + fmt_f9(y) + "," + label + "\n";
    const fs::path file = out_dir / (figure_id + "_" + label + ".csv");
    write_text_file(file, csv);
    return file;
}

}  // namespace

std::vector<std::string> figure_ids() {
    return {"patch_size_sweep", "srp_vs_uap",    "sfr_vs_uap",
            "at_one_shot",      "at_continuous", "random_comparison"};
}

std::vector<fs::path> emit_plot_data(const ExperimentReport& report, const std::string& figure_id,
                                     const fs::path& out_dir) {
    fs::create_directories(out_dir);
    std::vector<fs::path> written;

    if (figure_id == "patch_size_sweep") {
        if (report.spec.name != ExperimentName::size_sweep)
            throw std::runtime_error("figure patch_size_sweep needs a size_sweep report, got " +
                                     to_string(report.spec.name));
        for (double e : report.spec.epsilons) {
            std::vector<std::pair<double, double>> points;
            for (const CellResult& c : report.cells)
                if (c.attack == "arna" && c.mode == "one_shot" && c.epsilon == e)
                    points.emplace_back(c.size, c.success_rate);
            written.push_back(write_curve(out_dir, figure_id, "eps_" + fmt_g(e), points));
        }
        return written;
    }

    const auto it = figure_defs().find(figure_id);
    if (it == figure_defs().end()) {
        std::string known;
        for (const std::string& id : figure_ids()) {
            if (!known.empty()) known += ", ";
            known += id;
        }
        throw config_error("unknown figure '" + figure_id + "' (known: " + known + ")");
    }
    const FigureDef& def = it->second;
    if (report.spec.name != def.source)
        throw std::runtime_error("figure " + figure_id + " needs a " + to_string(def.source) +
                                 " report, got " + to_string(report.spec.name));

    // Reports with several patch sizes get one curve per size so a single
    // file never interleaves grids.
    const bool multi_size = report.spec.sizes.size() > 1;
    for (const CurveSelector& sel : def.curves) {
        for (int s : report.spec.sizes) {
            std::vector<std::pair<double, double>> points;
            for (const CellResult& c : report.cells)
                if (c.attack == sel.attack && c.mode == sel.mode && (c.size == s || c.size == 0))
                    points.emplace_back(c.epsilon, c.success_rate);
            const std::string label =
                multi_size ? sel.label + "_s" + std::to_string(s) : sel.label;
            written.push_back(write_curve(out_dir, figure_id, label, points));
            if (!multi_size) break;
        }
    }
    return written;
}

}  // namespace arna
