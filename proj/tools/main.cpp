// Command-line front end over the library: corpus synthesis, victim
// training, noise generation, defenses, spec-driven experiment runs, and
// report/figure emission. Exit codes: 0 on success, 2 for configuration
// errors (bad flags, malformed specs, missing artifacts), 1 for everything
// that breaks an invariant at runtime.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "arna/attacks.hpp"
#include "arna/dataset.hpp"
#include "arna/defenses.hpp"
#include "arna/experiment.hpp"
#include "arna/model.hpp"
#include "arna/util.hpp"

namespace fs = std::filesystem;
using namespace arna;

namespace {

std::optional<FrequencyBand> band_from_flag(const std::vector<double>& values) {
    if (values.empty()) return std::nullopt;
    return FrequencyBand{values[0], values[1]};
}

FrequencyBand band_for(const Dataset& ds, const std::vector<double>& flag) {
    if (const auto band = band_from_flag(flag)) return *band;
    std::vector<Signal> signals;
    signals.reserve(ds.size());
    for (const LabeledSignal& s : ds) signals.push_back(s.signal);
    const FrequencyBand band = estimate_band(signals);
    std::fprintf(stderr, "estimated pass band: %.4g - %.4g Hz\n", band.f_min_hz, band.f_max_hz);
    return band;
}

// Success of a patch applied at offset zero, against the labels the victim
// should have produced.
double offset_zero_success(const ModelParams& params, const Dataset& ds,
                           const attacks::Patch& patch) {
    std::vector<std::uint32_t> miss(ds.size(), 0);
    parallel_for(ds.size(), [&](std::size_t i) {
        const Signal y = attacks::apply_patch(ds[i].signal, patch, attacks::ApplyMode::one_shot, 0);
        miss[i] = predict(params, y) != ds[i].label;
    });
    std::uint64_t total = 0;
    for (std::uint32_t m : miss) total += m;
    return static_cast<double>(total) / static_cast<double>(ds.size());
}

struct SynthOpts {
    fs::path out;
    int samples_per_class = 274;
    int classes = 4;
    double noise_std = 0.015;
    std::uint64_t seed = 1;
};

void run_synth(const SynthOpts& o) {
    DatasetConfig cfg = DatasetConfig::defaults();
    cfg.samples_per_class = o.samples_per_class;
    cfg.num_classes = o.classes;
    cfg.noise_std = o.noise_std;
    cfg.seed = o.seed;
    const Dataset ds = synthesize(cfg);
    save_dataset(ds, o.out, &cfg);
    std::printf("wrote %zu echoes (%d classes x %d) to %s\n", ds.size(), cfg.num_classes,
                cfg.samples_per_class, o.out.string().c_str());
}

struct TrainOpts {
    fs::path dataset;
    fs::path out;
    TrainConfig cfg;
    double split = 0.7;
};

void run_train(const TrainOpts& o) {
    const Dataset ds = load_dataset(o.dataset);
    const auto [train_set, test_set] = split(ds, o.split);
    std::fprintf(stderr, "training %d epochs on %zu echoes (%zu held out)...\n", o.cfg.epochs,
                 train_set.size(), test_set.size());
    const TrainResult result = train(train_set, &test_set, o.cfg);
    for (const EpochStats& e : result.history)
        if (e.eval_accuracy >= 0.0)
            std::fprintf(stderr, "epoch %4d  loss %.6f  test acc %.4f\n", e.epoch, e.mean_loss,
                         e.eval_accuracy);
    save_model(result.params, o.out, &o.cfg);
    std::printf("train accuracy %.4f, test accuracy %.4f, model -> %s\n",
                accuracy(result.params, train_set), accuracy(result.params, test_set),
                o.out.string().c_str());
}

struct AttackOpts {
    std::string kind;
    fs::path dataset;
    fs::path model;
    fs::path out;
    double epsilon = 0.01;
    double alpha = 0.0;
    int iterations = 20;
    int passes = 5;
    int size = 0;
    int gen_samples = 200;
    std::uint64_t seed = 1;
    std::vector<double> band;
};

void run_attack(const AttackOpts& o) {
    const Dataset ds = load_dataset(o.dataset);
    if (ds.empty()) throw config_error("attack: dataset is empty");

    if (o.kind == "random") {
        const int size = o.size > 0 ? o.size : static_cast<int>(ds.front().signal.size());
        const attacks::Patch patch =
            attacks::random_patch(o.epsilon, size, o.seed, ds.front().signal.sample_rate_hz);
        attacks::AttackConfig cfg;
        cfg.epsilon = o.epsilon;
        cfg.seed = o.seed;
        cfg.patch_size = size;
        attacks::save_patch(patch, o.out, &cfg);
        std::printf("random patch (eps %g, %d samples) -> %s\n", o.epsilon, size,
                    o.out.string().c_str());
        return;
    }

    if (o.model.empty()) throw config_error("attack: --model is required for " + o.kind);
    const ModelParams params = load_model(o.model);

    if (o.kind == "fgsm" || o.kind == "pgd") {
        Dataset adv = ds;
        const double step = attacks::effective_step(o.epsilon, o.alpha);
        parallel_for(ds.size(), [&](std::size_t i) {
            adv[i].signal = o.kind == "fgsm"
                                ? attacks::fgsm(params, ds[i].signal, ds[i].label, o.epsilon)
                                : attacks::pgd(params, ds[i].signal, ds[i].label, o.epsilon, step,
                                               o.iterations);
        });
        save_dataset(adv, o.out, nullptr);
        std::printf("%s at eps %g: synchronized success %.4f over %zu echoes, dataset -> %s\n",
                    o.kind.c_str(), o.epsilon, success_rate(params, adv), adv.size(),
                    o.out.string().c_str());
        return;
    }

    attacks::AttackConfig cfg;
    cfg.epsilon = o.epsilon;
    cfg.alpha = o.alpha;
    cfg.inner_iterations = o.iterations;
    cfg.passes = o.passes;
    cfg.seed = o.seed;
    cfg.patch_size = o.size;
    if (o.kind == "sfr" || o.kind == "arna")
        cfg.band = band_for(ds, o.band);
    else
        cfg.band = band_from_flag(o.band);

    const Dataset corpus = stratified_head(ds, static_cast<std::size_t>(o.gen_samples));
    const attacks::Patch patch = o.kind == "uap"   ? attacks::uap(params, corpus, cfg)
                                 : o.kind == "srp" ? attacks::srp(params, corpus, cfg)
                                 : o.kind == "sfr" ? attacks::sfr(params, corpus, cfg)
                                                   : attacks::arna(params, corpus, cfg);
    attacks::save_patch(patch, o.out, &cfg);
    std::printf("%s patch (eps %g, %zu samples): offset-zero success %.4f, patch -> %s\n",
                o.kind.c_str(), o.epsilon, patch.delta.size(),
                offset_zero_success(params, ds, patch), o.out.string().c_str());
}

struct DefendOpts {
    std::string mode;
    fs::path dataset;
    fs::path model;
    fs::path out;
    std::vector<double> band;
    defenses::ATConfig cfg;
    double split = 0.7;
};

void run_defend(const DefendOpts& o) {
    const Dataset ds = load_dataset(o.dataset);
    if (o.mode == "filter") {
        if (o.model.empty()) throw config_error("defend filter: --model is required");
        const ModelParams params = load_model(o.model);
        const FrequencyBand band = band_for(ds, o.band);
        std::printf("clean accuracy %.4f, filtered accuracy %.4f over %zu echoes\n",
                    accuracy(params, ds), defenses::defended_accuracy(params, ds, band),
                    ds.size());
        return;
    }
    const auto [train_set, test_set] = split(ds, o.split);
    std::fprintf(stderr,
                 "adversarial training: %d epochs, eps %g, step %g, %d inner iterations\n",
                 o.cfg.train.epochs, o.cfg.epsilon, o.cfg.step_size, o.cfg.iterations);
    const TrainResult result = defenses::adversarial_train(train_set, &test_set, o.cfg);
    save_model(result.params, o.out, &o.cfg.train);
    std::printf("hardened model: train accuracy %.4f, test accuracy %.4f -> %s\n",
                accuracy(result.params, train_set), accuracy(result.params, test_set),
                o.out.string().c_str());
}

struct EvalOpts {
    fs::path spec_file;
    fs::path out_dir;
};

void run_eval(const EvalOpts& o) {
    ExperimentSpec spec = ExperimentSpec::from_file(o.spec_file);
    if (!o.out_dir.empty()) {
        spec.out_dir = o.out_dir;
        spec.validate();
    }
    const ExperimentReport report = run(spec);
    if (report.test_accuracy >= 0.0)
        std::printf("train accuracy %.4f, test accuracy %.4f\n", report.train_accuracy,
                    report.test_accuracy);
    std::printf("%zu cells -> %s\n", report.cells.size(),
                (spec.out_dir / "report.json").string().c_str());
}

// Figures an experiment's report can feed; `report --figure all` walks this.
std::vector<std::string> figures_for(ExperimentName name) {
    switch (name) {
        case ExperimentName::size_sweep: return {"patch_size_sweep"};
        case ExperimentName::srp_eval: return {"srp_vs_uap"};
        case ExperimentName::sfr_eval: return {"sfr_vs_uap"};
        case ExperimentName::at_eval: return {"at_one_shot", "at_continuous"};
        case ExperimentName::random_baseline: return {"random_comparison"};
        default: return {};
    }
}

struct ReportOpts {
    fs::path report_file;
    std::string figure;
    fs::path out_dir;  // default: plots/ next to the report file
};

void run_report(const ReportOpts& o) {
    const ExperimentReport report = ExperimentReport::from_json_file(o.report_file);
    if (o.figure.empty()) {
        std::printf("%-8s %10s %5s %-22s %12s %10s\n", "attack", "epsilon", "size", "mode",
                    "success", "accuracy");
        for (const CellResult& c : report.cells)
            std::printf("%-8s %10g %5d %-22s %12.4f %10.4f\n", c.attack.c_str(), c.epsilon,
                        c.size, c.mode.c_str(), c.success_rate, c.accuracy);
        for (const MagnitudeRow& r : report.magnitude_rows)
            std::printf("size %3d: avg magnitude %.6f, max %.6f, in-band peak %.6f\n", r.size,
                        r.avg_magnitude, r.max_magnitude, r.band_peak);
        return;
    }
    std::vector<std::string> ids;
    if (o.figure == "all") {
        ids = figures_for(report.spec.name);
        if (ids.empty())
            throw config_error("report: no figure is derived from a " +
                               to_string(report.spec.name) + " report");
    } else {
        ids.push_back(o.figure);
    }
    const fs::path out_dir =
        o.out_dir.empty() ? o.report_file.parent_path() / "plots" : o.out_dir;
    for (const std::string& id : ids)
        for (const fs::path& file : emit_plot_data(report, id, out_dir))
            std::printf("%s\n", file.string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adversarial noise pipeline for UWB radar echo classification"};
    app.require_subcommand(1);

    SynthOpts synth_opts;
    CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic echo corpus");
    synth->add_option("--out", synth_opts.out, "Dataset file to write")->required();
    synth->add_option("--samples-per-class", synth_opts.samples_per_class, "Echoes per class");
    synth->add_option("--classes", synth_opts.classes, "Number of obstacle classes");
    synth->add_option("--noise-std", synth_opts.noise_std, "Receiver noise level");
    synth->add_option("--seed", synth_opts.seed, "Generator seed");

    TrainOpts train_opts;
    CLI::App* train_cmd = app.add_subcommand("train", "Train the victim classifier");
    train_cmd->add_option("--dataset", train_opts.dataset, "Corpus to train on")->required();
    train_cmd->add_option("--out", train_opts.out, "Model file to write")->required();
    train_cmd->add_option("--epochs", train_opts.cfg.epochs, "Training epochs");
    train_cmd->add_option("--lr", train_opts.cfg.learning_rate, "Adam learning rate");
    train_cmd->add_option("--batch-size", train_opts.cfg.batch_size, "Mini-batch size");
    train_cmd->add_option("--eval-every", train_opts.cfg.eval_every,
                          "Epochs between held-out probes (0 = never)");
    train_cmd->add_option("--seed", train_opts.cfg.seed, "Shuffle and init seed");
    train_cmd->add_option("--split", train_opts.split, "Train fraction of the corpus");

    AttackOpts attack_opts;
    CLI::App* attack = app.add_subcommand("attack", "Generate adversarial noise");
    attack
        ->add_option("kind", attack_opts.kind,
                     "fgsm|pgd write a perturbed copy of the dataset; "
                     "uap|srp|sfr|arna|random write a patch")
        ->required()
        ->check(CLI::IsMember({"fgsm", "pgd", "uap", "srp", "sfr", "arna", "random"}));
    attack->add_option("--dataset", attack_opts.dataset, "Victim corpus")->required();
    attack->add_option("--model", attack_opts.model, "Victim model (optional for random)");
    attack->add_option("--out", attack_opts.out, "Artifact to write")->required();
    attack->add_option("--epsilon,-e", attack_opts.epsilon, "Noise budget (sup norm)");
    attack->add_option("--alpha,-a", attack_opts.alpha, "Gradient step (0 = epsilon / 10)");
    attack->add_option("--iterations,-m", attack_opts.iterations, "Inner gradient iterations");
    attack->add_option("--passes,-N", attack_opts.passes, "Passes over the corpus");
    attack->add_option("--size,-s", attack_opts.size, "Patch length (0 = full frame)");
    attack->add_option("--gen-samples", attack_opts.gen_samples,
                       "Class-balanced corpus head used for generation");
    attack->add_option("--seed", attack_opts.seed, "Placement and noise seed");
    attack
        ->add_option("--band", attack_opts.band,
                     "Pass band f_min f_max in Hz (default: estimated for sfr/arna)")
        ->expected(2);

    DefendOpts defend_opts;
    CLI::App* defend = app.add_subcommand("defend", "Apply a defense");
    defend->add_option("mode", defend_opts.mode, "filter scores the pass-band front end; at trains a hardened model")
        ->required()
        ->check(CLI::IsMember({"filter", "at"}));
    defend->add_option("--dataset", defend_opts.dataset, "Corpus")->required();
    defend->add_option("--model", defend_opts.model, "Victim model (filter mode)");
    defend->add_option("--out", defend_opts.out, "Hardened model file (at mode)");
    defend->add_option("--band", defend_opts.band, "Pass band f_min f_max in Hz")->expected(2);
    defend->add_option("--epsilon,-e", defend_opts.cfg.epsilon, "Inner attack budget");
    defend->add_option("--step", defend_opts.cfg.step_size, "Inner attack step");
    defend->add_option("--iterations,-m", defend_opts.cfg.iterations, "Inner attack iterations");
    defend->add_option("--epochs", defend_opts.cfg.train.epochs, "Training epochs");
    defend->add_option("--lr", defend_opts.cfg.train.learning_rate, "Adam learning rate");
    defend->add_option("--batch-size", defend_opts.cfg.train.batch_size, "Mini-batch size");
    defend->add_option("--eval-every", defend_opts.cfg.train.eval_every,
                       "Epochs between held-out probes (0 = never)");
    defend->add_option("--seed", defend_opts.cfg.train.seed, "Shuffle and init seed");
    defend->add_option("--split", defend_opts.split, "Train fraction of the corpus");

    EvalOpts eval_opts;
    CLI::App* eval = app.add_subcommand("eval", "Run an experiment from a spec file");
    eval->add_option("--spec", eval_opts.spec_file, "Experiment spec (JSON)")->required();
    eval->add_option("--out-dir", eval_opts.out_dir, "Override the spec's output directory");

    ReportOpts report_opts;
    CLI::App* report = app.add_subcommand("report", "Inspect a report or emit figure data");
    report->add_option("--report", report_opts.report_file, "report.json to read")->required();
    report->add_option("--figure", report_opts.figure,
                       "Figure id or 'all' (omit to print the cell table)");
    report->add_option("--out-dir", report_opts.out_dir, "Directory for figure CSVs");

    synth->callback([&] { run_synth(synth_opts); });
    train_cmd->callback([&] { run_train(train_opts); });
    attack->callback([&] { run_attack(attack_opts); });
    defend->callback([&] {
        if (defend_opts.mode == "at" && defend_opts.out.empty())
            throw config_error("defend at: --out is required");
        run_defend(defend_opts);
    });
    eval->callback([&] { run_eval(eval_opts); });
    report->callback([&] { run_report(report_opts); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const config_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
