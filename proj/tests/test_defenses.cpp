// Defense tests: the filter front-end must be transparent to in-band content
// and opaque to off-band contamination; adversarial training must collapse
// to plain training at a zero budget (bit for bit) and measurably blunt the
// attack it trained against; detectability rows must agree with the spectral
// stats they summarize.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "arna/attacks.hpp"
#include "arna/dataset.hpp"
#include "arna/defenses.hpp"
#include "arna/model.hpp"
#include "arna/util.hpp"

using namespace arna;
using namespace arna::defenses;

namespace {

constexpr FrequencyBand kBand{2.5e9, 3.8e9};

struct Bench {
    Dataset train;
    ModelParams params;

    Bench() {
        DatasetConfig cfg = DatasetConfig::defaults();
        cfg.samples_per_class = 10;
        cfg.seed = 7;
        train = synthesize(cfg);

        TrainConfig tc;
        tc.learning_rate = 1e-3;
        tc.epochs = 15;
        tc.eval_every = 0;
        tc.seed = 11;
        params = arna::train(train, nullptr, tc).params;
    }
};

const Bench& bench() {
    static const Bench b;
    return b;
}

double pgd_success(const ModelParams& params, const Dataset& ds, double eps, double alpha,
                   int m) {
    std::size_t fooled = 0;
    for (const LabeledSignal& s : ds)
        if (predict(params, attacks::pgd(params, s.signal, s.label, eps, alpha, m)) != s.label)
            ++fooled;
    return static_cast<double>(fooled) / static_cast<double>(ds.size());
}

}  // namespace

TEST_CASE("the filter front-end is transparent to band-limited input") {
    const Bench& b = bench();
    for (std::size_t i = 0; i < 8; ++i) {
        const Signal limited = passband_filter(b.train[i].signal, kBand);
        const std::vector<double> plain = forward(b.params, limited);
        const std::vector<double> defended = defended_forward(b.params, limited, kBand);
        for (std::size_t c = 0; c < plain.size(); ++c)
            CHECK(defended[c] == doctest::Approx(plain[c]).epsilon(1e-9));
        CHECK(defended_predict(b.params, limited, kBand) == predict(b.params, limited));
    }
}

TEST_CASE("the filter front-end discards off-band contamination") {
    const Bench& b = bench();
    const Signal& x = b.train[0].signal;

    // A strong tone far below the pass band, placed exactly on a spectral
    // bin so it cannot leak into the band; behind the filter it must be
    // invisible, while the bare network sees a different input.
    Signal noisy = x;
    const double tone_hz = 43.0 * noisy.sample_rate_hz / static_cast<double>(noisy.size());
    REQUIRE(tone_hz < kBand.f_min_hz);
    for (std::size_t i = 0; i < noisy.size(); ++i)
        noisy[i] += 0.3 * std::cos(2.0 * std::acos(-1.0) * tone_hz *
                                   (static_cast<double>(i) / noisy.sample_rate_hz));

    const std::vector<double> clean_defended = defended_forward(b.params, x, kBand);
    const std::vector<double> noisy_defended = defended_forward(b.params, noisy, kBand);
    for (std::size_t c = 0; c < clean_defended.size(); ++c)
        CHECK(noisy_defended[c] == doctest::Approx(clean_defended[c]).epsilon(1e-6));

    const std::vector<double> clean_plain = forward(b.params, x);
    const std::vector<double> noisy_plain = forward(b.params, noisy);
    double shift = 0.0;
    for (std::size_t c = 0; c < clean_plain.size(); ++c)
        shift = std::max(shift, std::abs(noisy_plain[c] - clean_plain[c]));
    CHECK(shift > 1e-3);
}

TEST_CASE("defended accuracy runs the whole set through the filter") {
    const Bench& b = bench();
    const double acc = defended_accuracy(b.params, b.train, kBand);
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
    std::size_t hits = 0;
    for (const LabeledSignal& s : b.train)
        if (predict(b.params, passband_filter(s.signal, kBand)) == s.label) ++hits;
    CHECK(acc == static_cast<double>(hits) / static_cast<double>(b.train.size()));
    CHECK_THROWS_AS(defended_accuracy(b.params, Dataset{}, kBand), std::invalid_argument);
}

TEST_CASE("zero-budget adversarial training is plain training, bit for bit") {
    const Bench& b = bench();
    ATConfig at;
    at.epsilon = 0.0;
    at.train.learning_rate = 1e-3;
    at.train.epochs = 3;
    at.train.eval_every = 0;
    at.train.seed = 19;

    const TrainResult hardened = adversarial_train(b.train, nullptr, at);
    const TrainResult plain = train(b.train, nullptr, at.train);
    CHECK(hardened.params.values == plain.params.values);
    REQUIRE(hardened.history.size() == plain.history.size());
    for (std::size_t e = 0; e < plain.history.size(); ++e)
        CHECK(hardened.history[e].mean_loss == plain.history[e].mean_loss);
}

TEST_CASE("adversarial training blunts the attack it trained against") {
    const Bench& b = bench();

    ATConfig at;
    at.epsilon = 0.1;
    at.step_size = 0.02;
    at.iterations = 8;
    at.train.learning_rate = 1e-3;
    at.train.epochs = 15;
    at.train.eval_every = 0;
    at.train.seed = 11;  // same init and schedule as the bench model

    const TrainResult hardened = adversarial_train(b.train, nullptr, at);
    CHECK(hardened.params.values != b.params.values);
    for (const EpochStats& e : hardened.history) CHECK(std::isfinite(e.mean_loss));

    // Same budget the defense trained on; the undefended bench model is the
    // reference point.
    const double before = pgd_success(b.params, b.train, 0.1, 0.02, 8);
    const double after = pgd_success(hardened.params, b.train, 0.1, 0.02, 8);
    CHECK(before > 0.5);
    CHECK(after <= before - 0.25);

    // Hardening must not wreck clean utility on the data it saw.
    CHECK(accuracy(hardened.params, b.train) >= 0.9);
}

TEST_CASE("adversarial training validates its configuration") {
    const Bench& b = bench();
    ATConfig at;
    SUBCASE("negative epsilon") {
        at.epsilon = -0.001;
        CHECK_THROWS_AS(adversarial_train(b.train, nullptr, at), config_error);
    }
    SUBCASE("negative step size") {
        at.step_size = -0.001;
        CHECK_THROWS_AS(adversarial_train(b.train, nullptr, at), config_error);
    }
    SUBCASE("negative iteration count") {
        at.iterations = -1;
        CHECK_THROWS_AS(adversarial_train(b.train, nullptr, at), config_error);
    }
    SUBCASE("budget the inner attack can never reach") {
        at.epsilon = 0.002;
        at.step_size = 0.0001;
        at.iterations = 10;  // at most 0.001 of movement against a 0.002 ball
        CHECK_THROWS_AS(adversarial_train(b.train, nullptr, at), config_error);
    }
}

TEST_CASE("filtering twice is the same as filtering once, seen through the model") {
    const Bench& b = bench();
    for (std::size_t i = 0; i < 8; ++i) {
        const Signal& raw = b.train[i].signal;
        const std::vector<double> once = defended_forward(b.params, raw, kBand);
        const std::vector<double> twice =
            defended_forward(b.params, passband_filter(raw, kBand), kBand);
        for (std::size_t c = 0; c < once.size(); ++c)
            CHECK(twice[c] == doctest::Approx(once[c]).epsilon(1e-9));
    }
}

TEST_CASE("a silent patch yields an all-zero detectability row") {
    attacks::Patch silent;
    silent.delta.assign(120, 0.0);
    silent.epsilon = 0.05;
    const std::vector<DetectRow> rows = detectability({silent});
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].size == 120);
    CHECK(rows[0].avg_magnitude == 0.0);
    CHECK(rows[0].max_magnitude == 0.0);
}

TEST_CASE("doubling a patch doubles both detectability stats exactly") {
    const attacks::Patch base = attacks::random_patch(0.03, 200, 47);
    attacks::Patch loud = base;
    for (double& v : loud.delta) v *= 2.0;  // exact in binary floating point
    const std::vector<DetectRow> rows = detectability({base, loud});
    REQUIRE(rows.size() == 2);
    CHECK(rows[1].avg_magnitude == 2.0 * rows[0].avg_magnitude);
    CHECK(rows[1].max_magnitude == 2.0 * rows[0].max_magnitude);
}

TEST_CASE("detectability rows restate the spectral stats of each patch") {
    const attacks::Patch p30 = attacks::random_patch(0.03, 30, 41);
    const attacks::Patch p600 = attacks::random_patch(0.03, 600, 43);
    const std::vector<DetectRow> rows = detectability({p30, p600});

    REQUIRE(rows.size() == 2);
    CHECK(rows[0].size == 30);
    CHECK(rows[1].size == 600);
    const SpectralStats s30 = spectral_magnitude_stats(Signal(p30.delta, p30.sample_rate_hz));
    CHECK(rows[0].avg_magnitude == s30.avg_magnitude);
    CHECK(rows[0].max_magnitude == s30.max_magnitude);

    // Same per-sample budget over 20x the support carries far more energy.
    CHECK(rows[1].avg_magnitude > rows[0].avg_magnitude);
}

TEST_CASE("the detectability table serializes with fixed formatting") {
    const std::vector<DetectRow> rows = {{30, 0.5, 1.25}, {600, 0.0625, 2.0}};
    CHECK(detectability_csv(rows) ==
          "size,avg_magnitude,max_magnitude\n"
          "30,0.500000000,1.250000000\n"
          "600,0.062500000,2.000000000\n");
    CHECK(detectability_csv({}) == "size,avg_magnitude,max_magnitude\n");
}

TEST_CASE("hardening configs round-trip through json") {
    ATConfig at;
    at.epsilon = 0.004;
    at.step_size = 0.001;
    at.iterations = 12;
    at.train.learning_rate = 5e-4;
    at.train.epochs = 40;
    at.train.seed = 77;

    const nlohmann::json j = at;
    const auto back = j.get<ATConfig>();
    CHECK(back.epsilon == at.epsilon);
    CHECK(back.step_size == at.step_size);
    CHECK(back.iterations == at.iterations);
    CHECK(back.train.learning_rate == at.train.learning_rate);
    CHECK(back.train.epochs == at.train.epochs);
    CHECK(back.train.seed == at.train.seed);

    // Omitted fields fall back to the defaults rather than zero.
    const auto sparse = nlohmann::json{{"epsilon", 0.01}}.get<ATConfig>();
    CHECK(sparse.epsilon == 0.01);
    CHECK(sparse.step_size == ATConfig{}.step_size);
    CHECK(sparse.iterations == ATConfig{}.iterations);
}
